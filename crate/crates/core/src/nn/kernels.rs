//! Forward kernels. Inputs and outputs are `f32`; every reduction
//! accumulates in `f64`.

use super::{NnError, TensorF32};

fn shape(msg: String) -> NnError {
    NnError::ShapeMismatch(msg)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Conv2dParams {
    pub stride: (usize, usize),
    pub padding: (usize, usize),
    pub groups: usize,
}

impl Default for Conv2dParams {
    fn default() -> Self {
        Self {
            stride: (1, 1),
            padding: (0, 0),
            groups: 1,
        }
    }
}

/// Grouped 2-D cross-correlation with zero padding.
///
/// `x: [N, Cin, H, W]`, `w: [Cout, Cin/groups, kh, kw]`, `b: [Cout]`.
pub fn conv2d(x: &TensorF32, w: &TensorF32, b: Option<&TensorF32>, p: Conv2dParams) -> Result<TensorF32, NnError> {
    let [n, cin, h, wd] = x.nchw()?;
    let [cout, cin_g, kh, kw] = w.nchw()?;
    let (sh, sw) = p.stride;
    let (ph, pw) = p.padding;
    if p.groups == 0 || cin % p.groups != 0 || cout % p.groups != 0 {
        return Err(NnError::GroupMismatch {
            groups: p.groups,
            cin,
            cout,
        });
    }
    if cin / p.groups != cin_g {
        return Err(shape(format!(
            "weight expects {cin_g} input channels per group, input has {} ({} groups)",
            cin / p.groups,
            p.groups
        )));
    }
    if let Some(b) = b {
        if b.dims() != [cout] {
            return Err(shape(format!("bias dims {:?}, expected [{cout}]", b.dims())));
        }
    }
    if sh == 0 || sw == 0 || h + 2 * ph < kh || wd + 2 * pw < kw {
        return Err(shape(format!(
            "kernel ({kh}, {kw}) stride ({sh}, {sw}) does not fit input ({h}, {wd}) with padding ({ph}, {pw})"
        )));
    }
    let oh = (h + 2 * ph - kh) / sh + 1;
    let ow = (wd + 2 * pw - kw) / sw + 1;
    let cout_g = cout / p.groups;
    let xd = x.data();
    let wdat = w.data();
    let mut out = vec![0f32; n * cout * oh * ow];
    let mut acc = vec![0f64; oh * ow];
    for ni in 0..n {
        for o in 0..cout {
            let g = o / cout_g;
            let bias = b.map_or(0.0, |b| f64::from(b.data()[o]));
            acc.iter_mut().for_each(|v| *v = bias);
            for ic in 0..cin_g {
                let c = g * cin_g + ic;
                let plane = &xd[(ni * cin + c) * h * wd..(ni * cin + c + 1) * h * wd];
                for ky in 0..kh {
                    for kx in 0..kw {
                        let wv = f64::from(wdat[((o * cin_g + ic) * kh + ky) * kw + kx]);
                        if wv == 0.0 {
                            continue;
                        }
                        accumulate_tap(&mut acc, plane, wv, (h, wd), (oh, ow), (ky, kx), (sh, sw), (ph, pw));
                    }
                }
            }
            let dst = &mut out[(ni * cout + o) * oh * ow..(ni * cout + o + 1) * oh * ow];
            for (d, a) in dst.iter_mut().zip(&acc) {
                *d = *a as f32;
            }
        }
    }
    TensorF32::new(vec![n, cout, oh, ow], out)
}

/// `acc[oy, ox] += wv * plane[oy*sh + ky - ph, ox*sw + kx - pw]` over all
/// output positions whose input tap lies inside the plane.
#[allow(clippy::too_many_arguments)]
#[inline]
fn accumulate_tap(
    acc: &mut [f64],
    plane: &[f32],
    wv: f64,
    (h, w): (usize, usize),
    (oh, ow): (usize, usize),
    (ky, kx): (usize, usize),
    (sh, sw): (usize, usize),
    (ph, pw): (usize, usize),
) {
    // Valid ox range: 0 <= ox*sw + kx - pw < w.
    let ox_lo = if kx >= pw { 0 } else { (pw - kx).div_ceil(sw) };
    let ox_hi = if w + pw > kx { ((w + pw - kx - 1) / sw + 1).min(ow) } else { 0 };
    if ox_lo >= ox_hi {
        return;
    }
    for oy in 0..oh {
        let iy = oy * sh + ky;
        if iy < ph || iy - ph >= h {
            continue;
        }
        let row = &plane[(iy - ph) * w..(iy - ph + 1) * w];
        let arow = &mut acc[oy * ow..(oy + 1) * ow];
        if sw == 1 {
            let start = ox_lo + kx - pw;
            let src = &row[start..start + (ox_hi - ox_lo)];
            for (a, &v) in arow[ox_lo..ox_hi].iter_mut().zip(src) {
                *a += wv * f64::from(v);
            }
        } else {
            for (ox, a) in arow.iter_mut().enumerate().take(ox_hi).skip(ox_lo) {
                *a += wv * f64::from(row[ox * sw + kx - pw]);
            }
        }
    }
}

/// Depthwise 7x7 convolution, stride 1, padding 3.
pub fn depthwise_conv7(x: &TensorF32, w: &TensorF32, b: &TensorF32) -> Result<TensorF32, NnError> {
    let [_, c, _, _] = x.nchw()?;
    if w.dims() != [c, 1, 7, 7] {
        return Err(shape(format!("depthwise weight dims {:?}, expected [{c}, 1, 7, 7]", w.dims())));
    }
    conv2d(
        x,
        w,
        Some(b),
        Conv2dParams {
            stride: (1, 1),
            padding: (3, 3),
            groups: c,
        },
    )
}

fn check_affine(gain: &TensorF32, bias: &TensorF32, c: usize) -> Result<(), NnError> {
    if gain.dims() != [c] || bias.dims() != [c] {
        return Err(shape(format!(
            "layer norm affine dims {:?}/{:?}, expected [{c}]",
            gain.dims(),
            bias.dims()
        )));
    }
    Ok(())
}

/// LayerNorm over the channel axis of an `[N, C, H, W]` tensor: every
/// `(n, h, w)` position is normalized across its `C` values (biased
/// variance, `eps` inside the square root), then scaled and shifted per
/// channel.
pub fn layernorm_channels(x: &TensorF32, gain: &TensorF32, bias: &TensorF32, eps: f64) -> Result<TensorF32, NnError> {
    let [n, c, h, w] = x.nchw()?;
    check_affine(gain, bias, c)?;
    let hw = h * w;
    let xd = x.data();
    let mut out = vec![0f32; xd.len()];
    let mut mean = vec![0f64; hw];
    let mut var = vec![0f64; hw];
    for ni in 0..n {
        let base = ni * c * hw;
        mean.iter_mut().for_each(|v| *v = 0.0);
        var.iter_mut().for_each(|v| *v = 0.0);
        for ci in 0..c {
            for (m, &v) in mean.iter_mut().zip(&xd[base + ci * hw..base + (ci + 1) * hw]) {
                *m += f64::from(v);
            }
        }
        mean.iter_mut().for_each(|m| *m /= c as f64);
        for ci in 0..c {
            for ((s, &v), &m) in var.iter_mut().zip(&xd[base + ci * hw..base + (ci + 1) * hw]).zip(&mean) {
                let d = f64::from(v) - m;
                *s += d * d;
            }
        }
        let inv: Vec<f64> = var.iter().map(|s| 1.0 / (s / c as f64 + eps).sqrt()).collect();
        for ci in 0..c {
            let g = f64::from(gain.data()[ci]);
            let bb = f64::from(bias.data()[ci]);
            let src = &xd[base + ci * hw..base + (ci + 1) * hw];
            let dst = &mut out[base + ci * hw..base + (ci + 1) * hw];
            for p in 0..hw {
                dst[p] = ((f64::from(src[p]) - mean[p]) * inv[p] * g + bb) as f32;
            }
        }
    }
    TensorF32::new(x.dims().to_vec(), out)
}

/// LayerNorm over the last axis.
pub fn layernorm_last(x: &TensorF32, gain: &TensorF32, bias: &TensorF32, eps: f64) -> Result<TensorF32, NnError> {
    let c = *x.dims().last().expect("non-empty dims");
    check_affine(gain, bias, c)?;
    let g = gain.data();
    let b = bias.data();
    let mut out = vec![0f32; x.numel()];
    for (src, dst) in x.data().chunks_exact(c).zip(out.chunks_exact_mut(c)) {
        let mean = src.iter().map(|&v| f64::from(v)).sum::<f64>() / c as f64;
        let var = src.iter().map(|&v| (f64::from(v) - mean).powi(2)).sum::<f64>() / c as f64;
        let inv = 1.0 / (var + eps).sqrt();
        for i in 0..c {
            dst[i] = ((f64::from(src[i]) - mean) * inv * f64::from(g[i]) + f64::from(b[i])) as f32;
        }
    }
    TensorF32::new(x.dims().to_vec(), out)
}

/// Standard normal CDF via `erf`.
pub fn normal_cdf(x: f64) -> f64 {
    0.5 * (1.0 + libm::erf(x / std::f64::consts::SQRT_2))
}

/// Exact GELU, `x * Phi(x)`.
pub fn gelu_scalar(x: f64) -> f64 {
    x * normal_cdf(x)
}

pub fn gelu(x: &TensorF32) -> TensorF32 {
    let data = x.data().iter().map(|&v| gelu_scalar(f64::from(v)) as f32).collect();
    TensorF32::new(x.dims().to_vec(), data).expect("same dims")
}

/// Nearest-neighbour resize: `out[i, j] = in[floor(i H / oh), floor(j W / ow)]`.
pub fn nearest_resize(x: &TensorF32, out_hw: (usize, usize)) -> Result<TensorF32, NnError> {
    let [n, c, h, w] = x.nchw()?;
    let (oh, ow) = out_hw;
    let rows: Vec<usize> = (0..oh).map(|i| i * h / oh).collect();
    let cols: Vec<usize> = (0..ow).map(|j| j * w / ow).collect();
    let xd = x.data();
    let mut out = Vec::with_capacity(n * c * oh * ow);
    for plane in xd.chunks_exact(h * w) {
        for &r in &rows {
            let row = &plane[r * w..(r + 1) * w];
            out.extend(cols.iter().map(|&cj| row[cj]));
        }
    }
    TensorF32::new(vec![n, c, oh, ow], out)
}

/// `y = x W^T + b` applied over the last axis. `w: [out, in]`.
pub fn linear(x: &TensorF32, w: &TensorF32, b: &TensorF32) -> Result<TensorF32, NnError> {
    let cin = *x.dims().last().expect("non-empty dims");
    let (cout, win) = match w.dims() {
        &[o, i] => (o, i),
        d => return Err(shape(format!("linear weight must be rank 2, got {d:?}"))),
    };
    if win != cin || b.dims() != [cout] {
        return Err(shape(format!(
            "linear weight {:?} / bias {:?} incompatible with input {:?}",
            w.dims(),
            b.dims(),
            x.dims()
        )));
    }
    let wd = w.data();
    let bd = b.data();
    let rows = x.numel() / cin;
    let mut out = vec![0f32; rows * cout];
    let mut xf = vec![0f64; cin];
    for (src, dst) in x.data().chunks_exact(cin).zip(out.chunks_exact_mut(cout)) {
        for (d, &s) in xf.iter_mut().zip(src) {
            *d = f64::from(s);
        }
        for o in 0..cout {
            let dot = dot_f32_f64(&wd[o * cin..(o + 1) * cin], &xf);
            dst[o] = (dot + f64::from(bd[o])) as f32;
        }
    }
    let mut dims = x.dims().to_vec();
    *dims.last_mut().unwrap() = cout;
    TensorF32::new(dims, out)
}

/// Dot product in `f64` with a fixed 8-lane summation order.
#[inline]
fn dot_f32_f64(w: &[f32], x: &[f64]) -> f64 {
    let mut lanes = [0f64; 8];
    let wc = w.chunks_exact(8);
    let xc = x.chunks_exact(8);
    let (wr, xr) = (wc.remainder(), xc.remainder());
    for (a, b) in wc.zip(xc) {
        for k in 0..8 {
            lanes[k] += f64::from(a[k]) * b[k];
        }
    }
    let mut tail = 0.0;
    for (a, b) in wr.iter().zip(xr) {
        tail += f64::from(*a) * b;
    }
    lanes.iter().sum::<f64>() + tail
}

/// `[N, C, H, W] -> [N, H, W, C]`.
pub fn to_channels_last(x: &TensorF32) -> Result<TensorF32, NnError> {
    let [n, c, h, w] = x.nchw()?;
    let hw = h * w;
    let xd = x.data();
    let mut out = vec![0f32; xd.len()];
    for ni in 0..n {
        let base = ni * c * hw;
        for ci in 0..c {
            for p in 0..hw {
                out[base + p * c + ci] = xd[base + ci * hw + p];
            }
        }
    }
    TensorF32::new(vec![n, h, w, c], out)
}

/// `[N, H, W, C] -> [N, C, H, W]`.
pub fn to_channels_first(x: &TensorF32) -> Result<TensorF32, NnError> {
    let [n, h, w, c] = x.nchw()?;
    let hw = h * w;
    let xd = x.data();
    let mut out = vec![0f32; xd.len()];
    for ni in 0..n {
        let base = ni * c * hw;
        for p in 0..hw {
            for ci in 0..c {
                out[base + ci * hw + p] = xd[base + p * c + ci];
            }
        }
    }
    TensorF32::new(vec![n, c, h, w], out)
}

/// Global average pooling to `[N, C, 1, 1]`.
pub fn adaptive_avg_pool1(x: &TensorF32) -> Result<TensorF32, NnError> {
    let [n, c, h, w] = x.nchw()?;
    let data = x
        .data()
        .chunks_exact(h * w)
        .map(|p| (p.iter().map(|&v| f64::from(v)).sum::<f64>() / (h * w) as f64) as f32)
        .collect();
    TensorF32::new(vec![n, c, 1, 1], data)
}

pub fn add(a: &TensorF32, b: &TensorF32) -> Result<TensorF32, NnError> {
    if a.dims() != b.dims() {
        return Err(shape(format!("cannot add {:?} and {:?}", a.dims(), b.dims())));
    }
    let data = a.data().iter().zip(b.data()).map(|(x, y)| x + y).collect();
    TensorF32::new(a.dims().to_vec(), data)
}

/// Parameters of one ConvNeXt block at width `C`.
pub struct CnBlockParams<'a> {
    pub dw_w: &'a TensorF32,
    pub dw_b: &'a TensorF32,
    pub ln_g: &'a TensorF32,
    pub ln_b: &'a TensorF32,
    pub fc1_w: &'a TensorF32,
    pub fc1_b: &'a TensorF32,
    pub fc2_w: &'a TensorF32,
    pub fc2_b: &'a TensorF32,
}

/// `x + fc2(gelu(fc1(ln(dwconv7(x)))))`, with the LayerNorm and the two
/// linear layers acting on channels at each spatial position.
pub fn cnblock(x: &TensorF32, p: &CnBlockParams, eps: f64) -> Result<TensorF32, NnError> {
    let y = depthwise_conv7(x, p.dw_w, p.dw_b)?;
    let y = to_channels_last(&y)?;
    let y = layernorm_last(&y, p.ln_g, p.ln_b, eps)?;
    let y = linear(&y, p.fc1_w, p.fc1_b)?;
    let y = gelu(&y);
    let y = linear(&y, p.fc2_w, p.fc2_b)?;
    let y = to_channels_first(&y)?;
    add(x, &y)
}
