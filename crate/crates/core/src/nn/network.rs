use std::collections::{HashMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::kernels::{self, Conv2dParams};
use super::{NnError, TensorF32, WeightArchive};

pub const LN_EPS: f64 = 1e-6;
pub const FEATURE_DIM: usize = 768;
pub const WIDTHS: [usize; 4] = [96, 192, 384, 768];
pub const DEPTHS: [usize; 4] = [3, 3, 9, 3];
pub const RESIZE_HW: (usize, usize) = (64, 64);
const INIT_STD: f64 = 0.02;

/// Named activations exposed by [`Network::forward_taps`], in execution order.
pub const TAP_NAMES: [&str; 19] = [
    "stem.conv", "stem.gelu", "resize", "patchify", "ln0", "stage1", "ln1", "down1", "stage2", "ln2", "down2",
    "stage3", "ln3", "down3", "stage4", "pool", "ln4", "features", "logits",
];

/// How the `C`-channel scalogram reaches the 3-channel patchify layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StemMode {
    /// 7x7 convolution `C -> 3`, then GELU.
    Adapter,
    /// No stem; input must already have 3 channels.
    Bypass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NetworkMeta {
    pub n_channels: usize,
    pub n_scales: usize,
    pub n_samples: usize,
    pub n_labels: usize,
    pub stem: StemMode,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LayerKind {
    Conv2D {
        kernel: (usize, usize),
        stride: (usize, usize),
        padding: (usize, usize),
        groups: usize,
    },
    DepthwiseConv2D,
    Linear,
    LayerNormChannels { eps: f64, channels_last: bool },
    Gelu,
    NearestResize { height: usize, width: usize },
    AdaptiveAvgPool,
    /// `true`: `[N, C, H, W] -> [N, H, W, C]`; `false`: the inverse.
    Permute { channels_last: bool },
    Flatten,
    /// Adds the input that layer `from` received.
    ResidualAdd { from: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerDef {
    pub name: String,
    pub kind: LayerKind,
    pub param_names: Vec<String>,
    pub tap: Option<String>,
}

impl LayerDef {
    fn new(name: impl Into<String>, kind: LayerKind) -> Self {
        Self {
            name: name.into(),
            kind,
            param_names: Vec::new(),
            tap: None,
        }
    }

    fn params(mut self, names: &[&str]) -> Self {
        let prefix = self.name.clone();
        self.param_names = names.iter().map(|n| format!("{prefix}.{n}")).collect();
        self
    }

    fn tap(mut self, tap: &str) -> Self {
        self.tap = Some(tap.to_string());
        self
    }
}

/// One row of the per-layer parameter table.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamRow {
    pub layer: String,
    /// Output dims of the row for a single sample.
    pub output_dims: Vec<usize>,
    /// `[weights, biases]` for a single layer, `[total]` for a block group,
    /// empty when parameter-free.
    pub counts: Vec<usize>,
}

impl ParamRow {
    pub fn total(&self) -> usize {
        self.counts.iter().sum()
    }

    pub fn count_text(&self) -> String {
        if self.counts.is_empty() {
            "-".into()
        } else {
            self.counts.iter().map(usize::to_string).collect::<Vec<_>>().join(" + ")
        }
    }
}

impl fmt::Display for ParamRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let dims = self.output_dims.iter().map(usize::to_string).collect::<Vec<_>>().join(", ");
        write!(f, "{:<22} ({dims:<14}) {}", self.layer, self.count_text())
    }
}

/// One row of the single-block breakdown.
pub type BlockReportRow = ParamRow;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LoadSummary {
    pub loaded: Vec<String>,
    /// Network parameters not present in the archive (left as initialized).
    pub missing: Vec<String>,
    /// Archive tensors that match no network parameter.
    pub unused: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Network {
    pub meta: NetworkMeta,
    layers: Vec<LayerDef>,
    params: WeightArchive,
    saved_inputs: HashSet<String>,
}

fn block_prefix(stage: usize, block: usize) -> String {
    format!("stage{stage}.block{block}")
}

fn layer_defs(meta: &NetworkMeta) -> Vec<LayerDef> {
    let mut l = Vec::new();
    if meta.stem == StemMode::Adapter {
        l.push(
            LayerDef::new(
                "stem.conv",
                LayerKind::Conv2D {
                    kernel: (7, 7),
                    stride: (1, 1),
                    padding: (3, 3),
                    groups: 1,
                },
            )
            .params(&["w", "b"])
            .tap("stem.conv"),
        );
        l.push(LayerDef::new("stem.gelu", LayerKind::Gelu).tap("stem.gelu"));
    }
    l.push(
        LayerDef::new(
            "resize",
            LayerKind::NearestResize {
                height: RESIZE_HW.0,
                width: RESIZE_HW.1,
            },
        )
        .tap("resize"),
    );
    l.push(
        LayerDef::new(
            "patchify",
            LayerKind::Conv2D {
                kernel: (4, 4),
                stride: (4, 4),
                padding: (0, 0),
                groups: 1,
            },
        )
        .params(&["w", "b"])
        .tap("patchify"),
    );
    let ln = |name: &str| {
        LayerDef::new(
            name,
            LayerKind::LayerNormChannels {
                eps: LN_EPS,
                channels_last: false,
            },
        )
        .params(&["g", "b"])
        .tap(name)
    };
    l.push(ln("ln0"));
    for (si, &depth) in DEPTHS.iter().enumerate() {
        let stage = si + 1;
        if stage > 1 {
            l.push(ln(&format!("ln{}", stage - 1)));
            let name = format!("down{}", stage - 1);
            l.push(
                LayerDef::new(
                    &name,
                    LayerKind::Conv2D {
                        kernel: (2, 2),
                        stride: (2, 2),
                        padding: (0, 0),
                        groups: 1,
                    },
                )
                .params(&["w", "b"])
                .tap(&name),
            );
        }
        for j in 0..depth {
            let p = block_prefix(stage, j);
            l.push(LayerDef::new(format!("{p}.dw"), LayerKind::DepthwiseConv2D).params(&["w", "b"]));
            l.push(LayerDef::new(format!("{p}.permute_in"), LayerKind::Permute { channels_last: true }));
            l.push(
                LayerDef::new(
                    format!("{p}.ln"),
                    LayerKind::LayerNormChannels {
                        eps: LN_EPS,
                        channels_last: true,
                    },
                )
                .params(&["g", "b"]),
            );
            l.push(LayerDef::new(format!("{p}.fc1"), LayerKind::Linear).params(&["w", "b"]));
            l.push(LayerDef::new(format!("{p}.gelu"), LayerKind::Gelu));
            l.push(LayerDef::new(format!("{p}.fc2"), LayerKind::Linear).params(&["w", "b"]));
            l.push(LayerDef::new(format!("{p}.permute_out"), LayerKind::Permute { channels_last: false }));
            let mut add = LayerDef::new(format!("{p}.add"), LayerKind::ResidualAdd { from: format!("{p}.dw") });
            if j + 1 == depth {
                add = add.tap(&format!("stage{stage}"));
            }
            l.push(add);
        }
    }
    l.push(LayerDef::new("pool", LayerKind::AdaptiveAvgPool).tap("pool"));
    l.push(ln("ln4"));
    l.push(LayerDef::new("flatten", LayerKind::Flatten).tap("features"));
    l.push(LayerDef::new("head", LayerKind::Linear).params(&["w", "b"]).tap("logits"));
    l
}

/// Parameter dims in canonical order.
fn param_shapes(meta: &NetworkMeta) -> Vec<(String, Vec<usize>)> {
    let mut v: Vec<(String, Vec<usize>)> = Vec::new();
    let mut push = |n: String, d: Vec<usize>| v.push((n, d));
    if meta.stem == StemMode::Adapter {
        push("stem.conv.w".into(), vec![3, meta.n_channels, 7, 7]);
        push("stem.conv.b".into(), vec![3]);
    }
    push("patchify.w".into(), vec![WIDTHS[0], 3, 4, 4]);
    push("patchify.b".into(), vec![WIDTHS[0]]);
    push("ln0.g".into(), vec![WIDTHS[0]]);
    push("ln0.b".into(), vec![WIDTHS[0]]);
    for (si, (&c, &depth)) in WIDTHS.iter().zip(&DEPTHS).enumerate() {
        let stage = si + 1;
        if stage > 1 {
            let prev = WIDTHS[si - 1];
            push(format!("ln{}.g", stage - 1), vec![prev]);
            push(format!("ln{}.b", stage - 1), vec![prev]);
            push(format!("down{}.w", stage - 1), vec![c, prev, 2, 2]);
            push(format!("down{}.b", stage - 1), vec![c]);
        }
        for j in 0..depth {
            let p = block_prefix(stage, j);
            push(format!("{p}.dw.w"), vec![c, 1, 7, 7]);
            push(format!("{p}.dw.b"), vec![c]);
            push(format!("{p}.ln.g"), vec![c]);
            push(format!("{p}.ln.b"), vec![c]);
            push(format!("{p}.fc1.w"), vec![4 * c, c]);
            push(format!("{p}.fc1.b"), vec![4 * c]);
            push(format!("{p}.fc2.w"), vec![c, 4 * c]);
            push(format!("{p}.fc2.b"), vec![c]);
        }
    }
    push("ln4.g".into(), vec![FEATURE_DIM]);
    push("ln4.b".into(), vec![FEATURE_DIM]);
    push("head.w".into(), vec![meta.n_labels, FEATURE_DIM]);
    push("head.b".into(), vec![meta.n_labels]);
    v
}

fn init_tensor(name: &str, dims: Vec<usize>, rng: &mut ChaCha8Rng) -> TensorF32 {
    if name.ends_with(".g") {
        TensorF32::full(dims, 1.0)
    } else if name.ends_with(".b") {
        TensorF32::zeros(dims)
    } else {
        let normal = Normal::new(0.0, INIT_STD).expect("valid std");
        let n: usize = dims.iter().product();
        let data = (0..n)
            .map(|_| loop {
                let v: f64 = normal.sample(rng);
                if v.abs() <= 2.0 * INIT_STD {
                    break v as f32;
                }
            })
            .collect();
        TensorF32::new(dims, data).expect("matching length")
    }
}

/// Builds the network for `C x S x T` scalograms and `L` labels with
/// seeded truncated-normal weights, zero biases and unit LayerNorm gains.
pub fn build_network(meta: NetworkMeta, seed: u64) -> Result<Network, NnError> {
    if meta.n_scales == 0 || meta.n_samples == 0 || meta.n_labels == 0 || meta.n_channels == 0 {
        return Err(NnError::ShapeMismatch(format!("network dims must be positive: {meta:?}")));
    }
    if meta.stem == StemMode::Bypass && meta.n_channels != 3 {
        return Err(NnError::ShapeMismatch(format!(
            "bypassing the stem needs 3 input channels, got {}",
            meta.n_channels
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = param_shapes(&meta)
        .into_iter()
        .map(|(n, d)| {
            let t = init_tensor(&n, d, &mut rng);
            (n, t)
        })
        .collect();
    let layers = layer_defs(&meta);
    let saved_inputs = layers
        .iter()
        .filter_map(|l| match &l.kind {
            LayerKind::ResidualAdd { from } => Some(from.clone()),
            _ => None,
        })
        .collect();
    Ok(Network {
        meta,
        layers,
        params,
        saved_inputs,
    })
}

impl Network {
    pub fn layers(&self) -> &[LayerDef] {
        &self.layers
    }

    pub fn params(&self) -> &WeightArchive {
        &self.params
    }

    pub fn param(&self, name: &str) -> Result<&TensorF32, NnError> {
        self.params.get(name).ok_or_else(|| NnError::MissingTensor(name.to_string()))
    }

    pub fn param_names(&self) -> impl Iterator<Item = &str> {
        self.params.names()
    }

    pub fn n_params(&self) -> usize {
        self.params.iter().map(|(_, t)| t.numel()).sum()
    }

    /// Replaces one parameter, keeping its dims.
    pub fn set_param(&mut self, name: &str, tensor: TensorF32) -> Result<(), NnError> {
        let cur = self.param(name)?;
        if cur.dims() != tensor.dims() {
            return Err(NnError::ShapeMismatch(format!(
                "{name}: expected {:?}, got {:?}",
                cur.dims(),
                tensor.dims()
            )));
        }
        self.params.insert(name, tensor);
        Ok(())
    }

    /// Copies archive tensors into matching parameters. Every shape is
    /// checked before anything is assigned. With `strict`, every network
    /// parameter must be present.
    pub fn load_weights(&mut self, archive: &WeightArchive, strict: bool) -> Result<LoadSummary, NnError> {
        let mut summary = LoadSummary::default();
        for (name, cur) in self.params.iter() {
            match archive.get(name) {
                Some(t) if t.dims() != cur.dims() => {
                    return Err(NnError::ShapeMismatch(format!(
                        "{name}: network expects {:?}, archive has {:?}",
                        cur.dims(),
                        t.dims()
                    )))
                }
                Some(_) => summary.loaded.push(name.to_string()),
                None => summary.missing.push(name.to_string()),
            }
        }
        if strict {
            if let Some(first) = summary.missing.first() {
                return Err(NnError::MissingTensor(first.clone()));
            }
        }
        summary.unused = archive.names().filter(|n| !self.params.contains(n)).map(String::from).collect();
        for name in &summary.loaded {
            let t = archive.get(name).expect("checked above").clone();
            self.params.insert(name.clone(), t);
        }
        Ok(summary)
    }

    pub fn save_weights(&self, path: impl AsRef<Path>) -> Result<(), NnError> {
        self.params.save(path)
    }

    fn check_input(&self, x: &TensorF32) -> Result<usize, NnError> {
        let [n, c, s, t] = x.nchw()?;
        let m = &self.meta;
        if (c, s, t) != (m.n_channels, m.n_scales, m.n_samples) {
            return Err(NnError::ShapeMismatch(format!(
                "input {:?} does not match network input (N, {}, {}, {})",
                x.dims(),
                m.n_channels,
                m.n_scales,
                m.n_samples
            )));
        }
        Ok(n)
    }

    fn p(&self, layer: &LayerDef, i: usize) -> Result<&TensorF32, NnError> {
        self.param(&layer.param_names[i])
    }

    fn apply(&self, layer: &LayerDef, x: &TensorF32) -> Result<TensorF32, NnError> {
        match &layer.kind {
            LayerKind::Conv2D {
                stride,
                padding,
                groups,
                ..
            } => kernels::conv2d(
                x,
                self.p(layer, 0)?,
                Some(self.p(layer, 1)?),
                Conv2dParams {
                    stride: *stride,
                    padding: *padding,
                    groups: *groups,
                },
            ),
            LayerKind::DepthwiseConv2D => kernels::depthwise_conv7(x, self.p(layer, 0)?, self.p(layer, 1)?),
            LayerKind::Linear => kernels::linear(x, self.p(layer, 0)?, self.p(layer, 1)?),
            LayerKind::LayerNormChannels { eps, channels_last } => {
                let (g, b) = (self.p(layer, 0)?, self.p(layer, 1)?);
                if *channels_last {
                    kernels::layernorm_last(x, g, b, *eps)
                } else {
                    kernels::layernorm_channels(x, g, b, *eps)
                }
            }
            LayerKind::Gelu => Ok(kernels::gelu(x)),
            LayerKind::NearestResize { height, width } => kernels::nearest_resize(x, (*height, *width)),
            LayerKind::AdaptiveAvgPool => kernels::adaptive_avg_pool1(x),
            LayerKind::Permute { channels_last: true } => kernels::to_channels_last(x),
            LayerKind::Permute { channels_last: false } => kernels::to_channels_first(x),
            LayerKind::Flatten => {
                let n = x.dims()[0];
                let rest = x.numel() / n;
                x.clone().reshape(vec![n, rest])
            }
            LayerKind::ResidualAdd { .. } => unreachable!("handled by the executor"),
        }
    }

    /// Runs the layer list on a batch, stopping after the layer named
    /// `stop_after`, and reports every tapped output to `on_tap`.
    fn run(
        &self,
        x: TensorF32,
        stop_after: Option<&str>,
        mut on_tap: impl FnMut(&str, &TensorF32),
    ) -> Result<TensorF32, NnError> {
        let mut saved: HashMap<&str, TensorF32> = HashMap::new();
        let mut cur = x;
        for layer in &self.layers {
            if self.saved_inputs.contains(&layer.name) {
                saved.insert(&layer.name, cur.clone());
            }
            let out = match &layer.kind {
                LayerKind::ResidualAdd { from } => {
                    let skip = saved
                        .remove(from.as_str())
                        .ok_or_else(|| NnError::MissingTensor(format!("residual input of {from}")))?;
                    kernels::add(&skip, &cur)?
                }
                _ => self.apply(layer, &cur)?,
            };
            if !out.is_finite() {
                return Err(NnError::NonFiniteActivation {
                    layer: layer.name.clone(),
                });
            }
            if let Some(t) = &layer.tap {
                on_tap(t, &out);
            }
            cur = out;
            if stop_after == Some(layer.name.as_str()) {
                break;
            }
        }
        Ok(cur)
    }

    /// Runs every sample independently (in parallel) and stacks the results,
    /// so a row never depends on the rest of the batch.
    fn per_sample<T: Send>(
        &self,
        x: &TensorF32,
        f: impl Fn(TensorF32) -> Result<T, NnError> + Sync,
    ) -> Result<Vec<T>, NnError> {
        let n = self.check_input(x)?;
        (0..n).into_par_iter().map(|i| f(x.batch_item(i))).collect()
    }

    /// `[N, C, S, T] -> [N, L]` logits.
    pub fn forward(&self, x: &TensorF32) -> Result<TensorF32, NnError> {
        let rows = self.per_sample(x, |xi| self.run(xi, None, |_, _| {}))?;
        TensorF32::stack(rows)
    }

    /// `[N, C, S, T] -> [N, 768]` pooled, normalized features.
    pub fn features(&self, x: &TensorF32) -> Result<TensorF32, NnError> {
        let rows = self.per_sample(x, |xi| self.run(xi, Some("flatten"), |_, _| {}))?;
        TensorF32::stack(rows)
    }

    /// Logits plus every named tap (see [`TAP_NAMES`]), each stacked over
    /// the batch.
    pub fn forward_taps(&self, x: &TensorF32) -> Result<(TensorF32, Vec<(String, TensorF32)>), NnError> {
        let rows = self.per_sample(x, |xi| {
            let mut taps = Vec::new();
            let out = self.run(xi, None, |name, t| taps.push((name.to_string(), t.clone())))?;
            Ok((out, taps))
        })?;
        let n_taps = rows[0].1.len();
        let mut outs = Vec::with_capacity(rows.len());
        let mut per_tap: Vec<(String, Vec<TensorF32>)> =
            rows[0].1.iter().map(|(n, _)| (n.clone(), Vec::with_capacity(rows.len()))).collect();
        for (out, taps) in rows {
            outs.push(out);
            debug_assert_eq!(taps.len(), n_taps);
            for (slot, (_, t)) in per_tap.iter_mut().zip(taps) {
                slot.1.push(t);
            }
        }
        let taps = per_tap
            .into_iter()
            .map(|(n, ts)| TensorF32::stack(ts).map(|t| (n, t)))
            .collect::<Result<_, _>>()?;
        Ok((TensorF32::stack(outs)?, taps))
    }

    /// Applies only the head to `[N, 768]` features.
    pub fn head(&self, features: &TensorF32) -> Result<TensorF32, NnError> {
        kernels::linear(features, self.param("head.w")?, self.param("head.b")?)
    }

    /// Per-sample output dims after every layer, derived without running
    /// the kernels.
    pub fn layer_output_dims(&self) -> Vec<(String, Vec<usize>)> {
        let m = &self.meta;
        let mut d = vec![m.n_channels, m.n_scales, m.n_samples];
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            d = match &layer.kind {
                LayerKind::Conv2D {
                    kernel,
                    stride,
                    padding,
                    ..
                } => {
                    let cout = self.params.get(&layer.param_names[0]).map_or(0, |w| w.dims()[0]);
                    vec![
                        cout,
                        (d[1] + 2 * padding.0 - kernel.0) / stride.0 + 1,
                        (d[2] + 2 * padding.1 - kernel.1) / stride.1 + 1,
                    ]
                }
                LayerKind::Linear => {
                    let cout = self.params.get(&layer.param_names[0]).map_or(0, |w| w.dims()[0]);
                    let mut n = d.clone();
                    *n.last_mut().unwrap() = cout;
                    n
                }
                LayerKind::NearestResize { height, width } => vec![d[0], *height, *width],
                LayerKind::AdaptiveAvgPool => vec![d[0], 1, 1],
                LayerKind::Permute { channels_last: true } => vec![d[1], d[2], d[0]],
                LayerKind::Permute { channels_last: false } => vec![d[2], d[0], d[1]],
                LayerKind::Flatten => vec![d.iter().product()],
                _ => d,
            };
            out.push((layer.name.clone(), d.clone()));
        }
        out
    }

    fn count(&self, names: &[&str]) -> Vec<usize> {
        names.iter().map(|n| self.params.get(n).map_or(0, TensorF32::numel)).collect()
    }

    /// Parameter table grouped as the architecture table: one row per layer
    /// outside the stages and one row per stage of blocks.
    pub fn param_report(&self) -> Vec<ParamRow> {
        let dims: HashMap<String, Vec<usize>> = self.layer_output_dims().into_iter().collect();
        let mut rows = Vec::new();
        let mut row = |label: String, layer: &str, counts: Vec<usize>| {
            rows.push(ParamRow {
                layer: label,
                output_dims: dims[layer].clone(),
                counts,
            })
        };
        if self.meta.stem == StemMode::Adapter {
            row("Conv2D 3 x (7, 7)".into(), "stem.conv", self.count(&["stem.conv.w", "stem.conv.b"]));
            row("GELU".into(), "stem.gelu", vec![]);
        }
        row("NearestInterpolation".into(), "resize", vec![]);
        row("Conv2D 96 x (4, 4)".into(), "patchify", self.count(&["patchify.w", "patchify.b"]));
        row("LayerNorm2D 96".into(), "ln0", self.count(&["ln0.g", "ln0.b"]));
        for (si, (&c, &depth)) in WIDTHS.iter().zip(&DEPTHS).enumerate() {
            let stage = si + 1;
            if stage > 1 {
                let prev = WIDTHS[si - 1];
                let ln = format!("ln{}", stage - 1);
                row(format!("LayerNorm2D {prev}"), &ln, self.count(&[&format!("{ln}.g"), &format!("{ln}.b")]));
                let dn = format!("down{}", stage - 1);
                row(format!("Conv2D {c} x (2, 2)"), &dn, self.count(&[&format!("{dn}.w"), &format!("{dn}.b")]));
            }
            let total: usize = (0..depth)
                .map(|j| self.block_report(stage, j).iter().map(ParamRow::total).sum::<usize>())
                .sum();
            let last = format!("{}.add", block_prefix(stage, depth - 1));
            row(format!("{depth} x CNBlock-{stage}"), &last, vec![total]);
        }
        row("AdaptiveAvgPool2D".into(), "pool", vec![]);
        row("LayerNorm2D 768".into(), "ln4", self.count(&["ln4.g", "ln4.b"]));
        row("Flatten".into(), "flatten", vec![]);
        row("Linear 768 -> L".into(), "head", self.count(&["head.w", "head.b"]));
        rows
    }

    /// Per-layer breakdown of one block (`stage` 1..=4, `block` 0-based).
    pub fn block_report(&self, stage: usize, block: usize) -> Vec<BlockReportRow> {
        let p = block_prefix(stage, block);
        let dims: HashMap<String, Vec<usize>> = self.layer_output_dims().into_iter().collect();
        let c = WIDTHS[stage - 1];
        let spec: [(&str, &str, &[&str]); 7] = [
            ("Conv2D (7, 7) depthwise", "dw", &["dw.w", "dw.b"]),
            ("Permute", "permute_in", &[]),
            ("LayerNorm2D", "ln", &["ln.g", "ln.b"]),
            ("Linear C -> 4C", "fc1", &["fc1.w", "fc1.b"]),
            ("GELU", "gelu", &[]),
            ("Linear 4C -> C", "fc2", &["fc2.w", "fc2.b"]),
            ("Permute", "permute_out", &[]),
        ];
        spec.iter()
            .map(|(label, layer, params)| {
                let names: Vec<String> = params.iter().map(|s| format!("{p}.{s}")).collect();
                let refs: Vec<&str> = names.iter().map(String::as_str).collect();
                ParamRow {
                    layer: format!("{label} [{c}]"),
                    output_dims: dims.get(&format!("{p}.{layer}")).cloned().unwrap_or_default(),
                    counts: self.count(&refs),
                }
            })
            .collect()
    }
}
