use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use eegnext::align::{align_all, whiteners_to_archive};
use eegnext::ingest::{fetch_file, load_manifest_trials, read_trialset, write_trialset, Manifest, Trial, EEGX_MAGIC};
use eegnext::nn::{build_network, Fixture, NetworkMeta, StemMode, TensorF32, WeightArchive, EEGW_MAGIC, FEATURE_DIM};
use eegnext::train::{
    accuracy, backbone_features, evaluate_pipeline, evaluate_scalograms, scalogram_batch, softmax_rows, train_head,
    EvalReport, Head, PipelineConfig,
};
use eegnext::wavelet::{read_scalograms, scalograms, write_scalograms, Magnitude, Scalogram, EEGS_MAGIC};
use serde::Deserialize;

use crate::config::{Flags, Settings};
use crate::plot::{scalogram_image, wavelet_image};
use crate::{Command, UsageError};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

/// Resolves settings, applies the thread limit and echoes the header.
fn start(command: &str, flags: Flags) -> Result<Settings> {
    let s = Settings::resolve(&flags)?;
    if let Some(n) = s.threads {
        if n == 0 {
            return Err(usage("--threads must be at least 1"));
        }
        // A second initialization in the same process keeps the first pool.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    eprintln!("eegnext {} {command}", env!("CARGO_PKG_VERSION"));
    eprintln!("seed: {}", s.seed);
    eprintln!("config: {}", serde_json::to_string(&s)?);
    Ok(s)
}

fn out_or(s: &Settings, default: &str) -> PathBuf {
    s.out.clone().unwrap_or_else(|| PathBuf::from(default))
}

fn magic(path: &Path) -> Result<[u8; 4]> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    bytes
        .get(..4)
        .and_then(|m| m.try_into().ok())
        .ok_or_else(|| anyhow!("{}: file too short for a container", path.display()))
}

fn load_weights(s: &Settings) -> Result<Option<WeightArchive>> {
    s.weights
        .as_ref()
        .map(|p| WeightArchive::load(p).with_context(|| format!("loading weights {}", p.display())))
        .transpose()
}

fn pipeline_config(s: &Settings) -> Result<PipelineConfig> {
    Ok(PipelineConfig {
        wavelet: s.wavelet_spec()?,
        scales: s.scale_set()?,
        magnitude: Magnitude::Modulus,
        align: s.align_options(),
        train: s.train_config()?,
        folds: s.folds,
        stem: s.stem_mode()?,
    })
}

fn write_json(value: &impl serde::Serialize, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

fn n_labels_of(labels: impl Iterator<Item = usize>) -> usize {
    labels.max().map_or(2, |m| (m + 1).max(2))
}

pub fn run(command: Command) -> Result<()> {
    match command {
        Command::Fetch {
            url,
            sha256,
            list,
            out,
            common,
        } => {
            start("fetch", Flags { common, ..Flags::default() })?;
            fetch(url, sha256, list, out)
        }
        Command::Ingest { manifest, out, common } => {
            let s = start("ingest", Flags { manifest, out, common, ..Flags::default() })?;
            let path = s.manifest.clone().ok_or_else(|| usage("ingest needs --manifest"))?;
            let m = Manifest::load(&path)?;
            let trials = load_manifest_trials(&m)?;
            let out = out_or(&s, "trials.eegx");
            write_trialset(&trials, &out)?;
            eprintln!("{} trials from {} subjects -> {}", trials.len(), m.entries.len(), out.display());
            Ok(())
        }
        Command::Align {
            input,
            out,
            whiteners,
            align,
            common,
        } => {
            let s = start("align", Flags { out, align, common, ..Flags::default() })?;
            let trials = read_trialset(&input)?;
            let (aligned, w) = align_all(&trials, s.align_options())?;
            let out = out_or(&s, "aligned.eegx");
            write_trialset(&aligned, &out)?;
            if let Some(p) = whiteners {
                whiteners_to_archive(&w).save(&p)?;
            }
            eprintln!("aligned {} trials of {} subjects -> {}", aligned.len(), w.len(), out.display());
            Ok(())
        }
        Command::Scalogram {
            input,
            out,
            power,
            wavelet,
            common,
        } => {
            let s = start("scalogram", Flags { out, wavelet, common, ..Flags::default() })?;
            let (spec, scales) = (s.wavelet_spec()?, s.scale_set()?);
            let trials = read_trialset(&input)?;
            let magnitude = if power { Magnitude::Power } else { Magnitude::Modulus };
            let items = scalograms(&trials, &scales, &spec, magnitude)?;
            let out = out_or(&s, "scalograms.eegs");
            write_scalograms(&items, &out)?;
            eprintln!("{} scalograms with {} scales -> {}", items.len(), scales.len(), out.display());
            Ok(())
        }
        Command::Infer {
            input,
            fixture,
            weights,
            tolerance,
            out,
            train,
            common,
        } => {
            let s = start("infer", Flags { out, weights, train, common, ..Flags::default() })?;
            match fixture {
                Some(f) => replay_fixture(&s, &f, tolerance),
                None => infer(&s, input.as_deref().expect("clap requires --input")),
            }
        }
        Command::Features {
            input,
            weights,
            out,
            train,
            common,
        } => {
            let s = start("features", Flags { out, weights, train, common, ..Flags::default() })?;
            let items = read_scalograms(&input)?;
            let labels: Vec<usize> = items.iter().map(|i| i.label).collect();
            let cfg = pipeline_config(&s)?;
            let (_, feats) = backbone_features(&items, n_labels_of(labels.iter().copied()), &cfg, load_weights(&s)?.as_ref())?;
            let mut a = WeightArchive::default();
            a.insert(
                "features",
                TensorF32::new(vec![items.len(), FEATURE_DIM], feats.iter().map(|&v| v as f32).collect())?,
            );
            a.insert("labels", TensorF32::new(vec![items.len()], labels.iter().map(|&l| l as f32).collect())?);
            let out = out_or(&s, "features.eegw");
            a.save(&out)?;
            eprintln!("{} x {FEATURE_DIM} features -> {}", items.len(), out.display());
            Ok(())
        }
        Command::TrainHead {
            input,
            weights,
            out,
            train,
            common,
        } => {
            let s = start("train-head", Flags { out, weights, train, common, ..Flags::default() })?;
            train_head_cmd(&s, &input)
        }
        Command::Eval {
            input,
            manifest,
            weights,
            out,
            wavelet,
            align,
            train,
            common,
        } => {
            let s = start(
                "eval",
                Flags {
                    manifest,
                    out,
                    weights,
                    common,
                    wavelet,
                    align,
                    train,
                },
            )?;
            let report = eval(&s, input.as_deref())?;
            for f in &report.folds {
                let auc = f.roc_auc.map_or("n/a".to_string(), |a| format!("{a:.4}"));
                eprintln!("fold {}: accuracy {:.2}%  AUC {auc}  test {:?}", f.fold + 1, f.accuracy, f.test_subjects);
            }
            eprintln!(
                "mean accuracy {:.2} +- {:.2}%  AUC {:.4} +- {:.4}",
                report.mean_accuracy, report.std_accuracy, report.mean_auc, report.std_auc
            );
            write_json(&report, s.out.as_deref())
        }
        Command::PlotScalogram {
            input,
            index,
            channel,
            out,
            common,
        } => {
            start("plot-scalogram", Flags { common, ..Flags::default() })?;
            let items = read_scalograms(&input)?;
            let item = items
                .get(index)
                .ok_or_else(|| anyhow!("index {index} out of range: {} scalograms", items.len()))?;
            scalogram_image(item, channel)?.save(&out)
        }
        Command::PlotWavelet {
            scale,
            fs,
            out,
            wavelet,
            common,
        } => {
            let s = start("plot-wavelet", Flags { wavelet, common, ..Flags::default() })?;
            if !(fs > 0.0 && fs.is_finite()) {
                return Err(usage(format!("--fs must be positive, got {fs}")));
            }
            wavelet_image(&s.wavelet_spec()?, scale, fs)?.save(&out)
        }
        Command::InspectWeights { weights, common } => {
            start("inspect-weights", Flags { common, ..Flags::default() })?;
            inspect_weights(&weights)
        }
        Command::ParamReport {
            channels,
            scales,
            samples,
            labels,
            train,
            common,
        } => {
            let s = start("param-report", Flags { train, common, ..Flags::default() })?;
            let net = build_network(
                NetworkMeta {
                    n_channels: channels,
                    n_scales: scales,
                    n_samples: samples,
                    n_labels: labels,
                    stem: s.stem_mode()?,
                },
                s.seed,
            )?;
            let mut stdout = std::io::stdout().lock();
            for row in net.param_report() {
                writeln!(stdout, "{row}")?;
            }
            writeln!(stdout, "total parameters: {}", net.n_params())?;
            writeln!(stdout, "\nCNBlock-1 breakdown:")?;
            for row in net.block_report(1, 0) {
                writeln!(stdout, "{row}")?;
            }
            Ok(())
        }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FetchItem {
    url: String,
    sha256: String,
    file: Option<String>,
}

fn fetch(url: Option<String>, sha256: Option<String>, list: Option<PathBuf>, out: Option<PathBuf>) -> Result<()> {
    let items: Vec<FetchItem> = match (url, list) {
        (Some(url), None) => vec![FetchItem {
            url,
            sha256: sha256.expect("clap requires --sha256 with --url"),
            file: None,
        }],
        (None, Some(list)) => {
            let text = std::fs::read_to_string(&list).with_context(|| format!("reading {}", list.display()))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", list.display())))?
        }
        _ => return Err(usage("fetch needs --url/--sha256 or --list")),
    };
    let dir = out
        .or_else(|| std::env::var_os("EEGNEXT_CACHE").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(".eegnext-cache"));
    for item in items {
        let name = match item.file {
            Some(f) => f,
            None => item
                .url
                .rsplit('/')
                .next()
                .filter(|n| !n.is_empty())
                .ok_or_else(|| usage(format!("cannot derive a file name from {}", item.url)))?
                .to_string(),
        };
        if Path::new(&name).components().any(|c| !matches!(c, std::path::Component::Normal(_))) {
            return Err(usage(format!("file name {name:?} must be relative without '..'")));
        }
        let path = fetch_file(&item.url, &item.sha256, dir.join(&name))?;
        println!("{}", path.display());
    }
    Ok(())
}

fn net_meta_for(items: &[Scalogram], n_labels: usize, stem: StemMode) -> Result<NetworkMeta> {
    let first = items.first().ok_or_else(|| anyhow!("no scalograms in input"))?;
    let [c, s, t] = first.dims();
    Ok(NetworkMeta {
        n_channels: c,
        n_scales: s,
        n_samples: t,
        n_labels,
        stem,
    })
}

fn infer(s: &Settings, input: &Path) -> Result<()> {
    let items = read_scalograms(input)?;
    let weights = load_weights(s)?;
    let n_labels = match weights.as_ref().and_then(|w| w.get("head.w")) {
        Some(h) => h.dims()[0],
        None => n_labels_of(items.iter().map(|i| i.label)),
    };
    let mut net = build_network(net_meta_for(&items, n_labels, s.stem_mode()?)?, s.seed)?;
    if let Some(w) = &weights {
        let summary = net.load_weights(w, false)?;
        eprintln!("loaded {} tensors, {} left initialized", summary.loaded.len(), summary.missing.len());
    }
    let mut logits = Vec::with_capacity(items.len() * n_labels);
    for chunk in items.chunks(s.batch.max(1)) {
        let out = net.forward(&scalogram_batch(chunk)?)?;
        logits.extend(out.data().iter().map(|&v| f64::from(v)));
    }
    let labels: Vec<usize> = items.iter().map(|i| i.label).collect();
    let probs = softmax_rows(&logits, n_labels);
    let predicted: Vec<usize> = probs.chunks(n_labels).map(eegnext::train::argmax).collect();
    let report = serde_json::json!({
        "n": items.len(),
        "n_labels": n_labels,
        "subjects": items.iter().map(|i| i.subject_id.clone()).collect::<Vec<_>>(),
        "labels": labels,
        "predicted": predicted,
        "accuracy": accuracy(&probs, n_labels, &labels),
        "logits": logits.chunks(n_labels).collect::<Vec<_>>(),
    });
    write_json(&report, s.out.as_deref())
}

/// Compares every fixture activation with the tap of the same name.
/// Activations holding a single value are treated as checksums (sum of the tap).
fn replay_fixture(s: &Settings, path: &Path, tolerance: f64) -> Result<()> {
    let fixture = Fixture::load(path)?;
    let weights = load_weights(s)?.expect("clap requires --weights");
    let dims = fixture.input.dims().to_vec();
    if dims.len() != 4 || dims[1] != 3 {
        bail!("fixture input must be [N, 3, H, W], got {dims:?}");
    }
    let n_labels = match weights.get("head.w") {
        Some(h) => h.dims()[0],
        None => fixture.activations.get("logits").map_or(1000, |t| *t.dims().last().unwrap_or(&1000)),
    };
    let mut net = build_network(
        NetworkMeta {
            n_channels: 3,
            n_scales: dims[2],
            n_samples: dims[3],
            n_labels,
            stem: StemMode::Bypass,
        },
        fixture.seed,
    )?;
    let summary = net.load_weights(&weights, false)?;
    eprintln!(
        "loaded {} tensors; left initialized: {:?}; unused: {}",
        summary.loaded.len(),
        summary.missing,
        summary.unused.len()
    );
    let (_, taps) = net.forward_taps(&fixture.input)?;
    let mut compared = 0;
    let mut failures = Vec::new();
    let mut rows = Vec::new();
    for (name, reference) in fixture.activations.iter() {
        let Some((_, tap)) = taps.iter().find(|(n, _)| n == name) else {
            rows.push(serde_json::json!({ "name": name, "status": "no matching tap" }));
            continue;
        };
        let (err, kind) = if reference.numel() == tap.numel() {
            let e = reference
                .data()
                .iter()
                .zip(tap.data())
                .map(|(a, b)| f64::from((a - b).abs()))
                .fold(0.0, f64::max);
            (e, "elementwise")
        } else if reference.numel() == 1 {
            let sum: f64 = tap.data().iter().map(|&v| f64::from(v)).sum();
            let r = f64::from(reference.data()[0]);
            ((sum - r).abs() / r.abs().max(1.0), "checksum")
        } else {
            failures.push(name.to_string());
            rows.push(serde_json::json!({ "name": name, "status": "shape mismatch",
                "reference": reference.dims(), "computed": tap.dims() }));
            continue;
        };
        compared += 1;
        let ok = err <= tolerance;
        if !ok {
            failures.push(name.to_string());
        }
        eprintln!("{} {name:<12} {kind:<11} max error {err:.3e}", if ok { "PASS" } else { "FAIL" });
        rows.push(serde_json::json!({ "name": name, "kind": kind, "max_error": err, "pass": ok }));
    }
    write_json(&serde_json::json!({ "tolerance": tolerance, "compared": compared, "tensors": rows }), s.out.as_deref())?;
    if compared == 0 {
        bail!("FixtureMismatch: no fixture activation matches a network tap");
    }
    if !failures.is_empty() {
        bail!("FixtureMismatch: {failures:?} exceed tolerance {tolerance}");
    }
    Ok(())
}

fn train_head_cmd(s: &Settings, input: &Path) -> Result<()> {
    let cfg = s.train_config()?;
    let weights = load_weights(s)?;
    let (features, labels, init) = match &magic(input)? {
        m if m == EEGW_MAGIC => {
            let a = WeightArchive::load(input)?;
            let f = a.get("features").ok_or_else(|| anyhow!("{}: no \"features\" tensor", input.display()))?;
            let l = a.get("labels").ok_or_else(|| anyhow!("{}: no \"labels\" tensor", input.display()))?;
            if f.ndim() != 2 || l.dims() != [f.dims()[0]] {
                bail!("features {:?} and labels {:?} disagree", f.dims(), l.dims());
            }
            let labels: Vec<usize> = l.data().iter().map(|&v| v as usize).collect();
            let n_labels = n_labels_of(labels.iter().copied());
            let init = match weights.as_ref().map(Head::from_archive) {
                Some(Ok(h)) if h.dim == f.dims()[1] && h.n_labels == n_labels => h,
                _ => Head::zeros(n_labels, f.dims()[1]),
            };
            (f.data().iter().map(|&v| f64::from(v)).collect::<Vec<_>>(), labels, init)
        }
        m if m == EEGS_MAGIC => {
            let items = read_scalograms(input)?;
            let labels: Vec<usize> = items.iter().map(|i| i.label).collect();
            let (net, feats) =
                backbone_features(&items, n_labels_of(labels.iter().copied()), &pipeline_config(s)?, weights.as_ref())?;
            (feats, labels, Head::from_network(&net)?)
        }
        _ => bail!("{}: expected an EEGW features archive or EEGS scalograms", input.display()),
    };
    let outcome = train_head(&features, &labels, &init, &cfg)?;
    let n_labels = init.n_labels;
    let probs = softmax_rows(&outcome.head.logits(&features), n_labels);
    let out = out_or(s, "head.eegw");
    outcome.head.to_archive().save(&out)?;
    eprintln!("head {}x{} -> {}", n_labels, init.dim, out.display());
    write_json(
        &serde_json::json!({
            "n_train": labels.len(),
            "initial_loss": outcome.initial_loss,
            "loss_history": outcome.loss_history,
            "train_accuracy": accuracy(&probs, n_labels, &labels),
        }),
        None,
    )
}

fn eval(s: &Settings, input: Option<&Path>) -> Result<EvalReport> {
    let cfg = pipeline_config(s)?;
    let weights = load_weights(s)?;
    let trials_eval = |trials: Vec<Trial>, n_labels: usize| -> Result<EvalReport> {
        Ok(evaluate_pipeline(&trials, n_labels, &cfg, weights.as_ref())?)
    };
    match input {
        Some(path) => match &magic(path)? {
            m if m == EEGS_MAGIC => {
                let items = read_scalograms(path)?;
                let n_labels = n_labels_of(items.iter().map(|i| i.label));
                Ok(evaluate_scalograms(&items, n_labels, &cfg, weights.as_ref())?)
            }
            m if m == EEGX_MAGIC => {
                let trials = read_trialset(path)?;
                let n_labels = n_labels_of(trials.iter().map(|t| t.label));
                trials_eval(trials, n_labels)
            }
            _ => bail!("{}: expected EEGS scalograms or EEGX trials", path.display()),
        },
        None => {
            let path = s.manifest.as_ref().ok_or_else(|| usage("eval needs --input or --manifest"))?;
            let m = Manifest::load(path)?;
            trials_eval(load_manifest_trials(&m)?, m.n_labels())
        }
    }
}

fn inspect_weights(path: &Path) -> Result<()> {
    let archive = WeightArchive::load(path)?;
    let mut stdout = std::io::stdout().lock();
    let mut total = 0usize;
    for (name, t) in archive.iter() {
        writeln!(stdout, "{name:<32} {:?} {}", t.dims(), t.numel())?;
        total += t.numel();
    }
    writeln!(stdout, "{} tensors, {total} values", archive.len())?;
    let n_labels = archive.get("head.w").map_or(1000, |t| t.dims()[0]);
    let reference = build_network(
        NetworkMeta {
            n_channels: 3,
            n_scales: 64,
            n_samples: 64,
            n_labels,
            stem: StemMode::Bypass,
        },
        0,
    )?;
    let (mut matched, mut wrong, mut missing) = (0, Vec::new(), Vec::new());
    for (name, t) in reference.params().iter() {
        match archive.get(name) {
            Some(a) if a.dims() == t.dims() => matched += 1,
            Some(a) => wrong.push(format!("{name} {:?} (expected {:?})", a.dims(), t.dims())),
            None => missing.push(name.to_string()),
        }
    }
    writeln!(stdout, "network layout: {matched}/{} tensors match", reference.params().len())?;
    for w in &wrong {
        writeln!(stdout, "  shape mismatch: {w}")?;
    }
    if !missing.is_empty() {
        writeln!(stdout, "  missing: {}", missing.join(", "))?;
    }
    Ok(())
}
