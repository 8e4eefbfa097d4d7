//! Acceptance suite: one PASS/FAIL line per criterion, then a single assert.
//!
//! Every check computes its reference independently of the library code
//! under test.

use std::collections::BTreeSet;
use std::f64::consts::PI;
use std::time::{Duration, Instant};

use eegnext::align::{align_subject, AlignOptions};
use eegnext::codec::FormatError;
use eegnext::ingest::{decode_trials, encode_trials, IngestError, Trial};
use eegnext::nn::{build_network, NetworkMeta, NnError, StemMode, TensorF32, WeightArchive};
use eegnext::synth::{synth_trials, SynthConfig};
use eegnext::train::{adamw_step, evaluate_pipeline, weighted_cross_entropy, AdamWState, PipelineConfig, TrainConfig};
use eegnext::wavelet::{
    cwt, decode_scalograms, encode_scalograms, is_aliased, make_scales, ridge_scale, Magnitude, ScaleMode, ScaleSet,
    Scalogram, WaveletError, WaveletSpec,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::num_complex::Complex64;

type Outcome = Result<String, String>;

struct Criterion {
    name: &'static str,
    budget: Option<Duration>,
    run: fn() -> Outcome,
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// Parameter counts

fn param_counts() -> Outcome {
    let l = 5;
    let net = build_network(
        NetworkMeta {
            n_channels: 2,
            n_scales: 16,
            n_samples: 64,
            n_labels: l,
            stem: StemMode::Adapter,
        },
        0,
    )
    .map_err(|e| e.to_string())?;
    let report = net.param_report();
    let find = |label: &str| -> Result<Vec<usize>, String> {
        report
            .iter()
            .find(|r| r.layer == label)
            .map(|r| r.counts.clone())
            .ok_or_else(|| format!("row {label:?} missing"))
    };
    let expected: Vec<(&str, Vec<usize>)> = vec![
        ("Conv2D 96 x (4, 4)", vec![4608, 96]),
        ("3 x CNBlock-1", vec![237600]),
        ("Conv2D 192 x (2, 2)", vec![73728, 192]),
        ("3 x CNBlock-2", vec![917568]),
        ("Conv2D 384 x (2, 2)", vec![294912, 384]),
        ("9 x CNBlock-3", vec![10813824]),
        ("Conv2D 768 x (2, 2)", vec![1179648, 768]),
        ("3 x CNBlock-4", vec![14287104]),
        ("Linear 768 -> L", vec![768 * l, l]),
    ];
    let mut bad = Vec::new();
    for (label, want) in &expected {
        let got = find(label)?;
        if &got != want {
            bad.push(format!("{label}: {got:?} != {want:?}"));
        }
    }
    let block = net.block_report(1, 0);
    let block_counts: Vec<Vec<usize>> = block.iter().map(|r| r.counts.clone()).filter(|c| !c.is_empty()).collect();
    let want_block = vec![vec![4704, 96], vec![96, 96], vec![36864, 384], vec![36864, 96]];
    if block_counts != want_block {
        bad.push(format!("CNBlock-1 breakdown {block_counts:?}"));
    }
    // Independent count of one block of width c: depthwise 7x7, LN, c->4c, 4c->c.
    let block_total = |c: usize| 49 * c + c + 2 * c + (c * 4 * c + 4 * c) + (4 * c * c + c);
    let stage_sum: usize = [96, 192, 384, 768].iter().zip([3, 3, 9, 3]).map(|(&c, d)| d * block_total(c)).sum();
    let report_stage_sum: usize = report.iter().filter(|r| r.layer.contains("CNBlock")).map(|r| r.total()).sum();
    if stage_sum != report_stage_sum {
        bad.push(format!("stage sum {report_stage_sum} != {stage_sum}"));
    }
    check(bad.is_empty(), if bad.is_empty() { format!("{} rows match", expected.len() + 4) } else { bad.join("; ") })
}

// Alignment

fn mixed_subject(rng: &mut ChaCha8Rng, subject: &str, c: usize, n: usize, t: usize) -> Vec<Trial> {
    let mix: Vec<f64> = (0..c * c)
        .map(|k| if k % (c + 1) == 0 { 1.0 } else { 0.0 } + rng.gen_range(-0.5..0.5))
        .collect();
    let gain = rng.gen_range(0.1..50.0);
    (0..n)
        .map(|i| {
            let z: Vec<f64> = (0..c * t).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut data = vec![0f32; c * t];
            for r in 0..c {
                for s in 0..t {
                    let v: f64 = (0..c).map(|k| mix[r * c + k] * z[k * t + s]).sum();
                    data[r * t + s] = (gain * v) as f32;
                }
            }
            Trial {
                subject_id: subject.into(),
                channels: (0..c).map(|k| format!("ch{k}")).collect(),
                data,
                n_samples: t,
                fs: 100.0,
                label: 0,
                trial_index: i as u32,
            }
        })
        .collect()
}

fn mean_cov_residual(trials: &[Trial]) -> f64 {
    let c = trials[0].n_channels();
    let t = trials[0].n_samples;
    let mut cov = vec![0f64; c * c];
    for tr in trials {
        for i in 0..c {
            for j in 0..c {
                let s: f64 = (0..t)
                    .map(|k| f64::from(tr.data[i * t + k]) * f64::from(tr.data[j * t + k]))
                    .sum();
                cov[i * c + j] += s;
            }
        }
    }
    let n = trials.len() as f64;
    (0..c * c)
        .map(|k| {
            let target = if k % (c + 1) == 0 { 1.0 } else { 0.0 };
            (cov[k] / n - target).powi(2)
        })
        .sum::<f64>()
        .sqrt()
}

fn alignment_identity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let (mut worst_res, mut worst_idem) = (0f64, 0f64);
    for s in 0..20 {
        let c = if s % 2 == 0 { 2 } else { 22 };
        let n = if (s / 2) % 2 == 0 { 5 } else { 50 };
        let trials = mixed_subject(&mut rng, &format!("s{s:02}"), c, n, 128);
        let (aligned, _) = align_subject(&trials, AlignOptions::default()).map_err(|e| e.to_string())?;
        worst_res = worst_res.max(mean_cov_residual(&aligned) / c as f64);
        let (again, _) = align_subject(&aligned, AlignOptions::default()).map_err(|e| e.to_string())?;
        for (a, b) in aligned.iter().zip(&again) {
            let scale = a.data.iter().fold(0f32, |m, v| m.max(v.abs()));
            let diff = a.data.iter().zip(&b.data).fold(0f32, |m, (x, y)| m.max((x - y).abs()));
            worst_idem = worst_idem.max(f64::from(diff / scale));
        }
    }
    check(
        worst_res <= 1e-6 && worst_idem <= 1e-6,
        format!("max residual/C {worst_res:.2e}, idempotence {worst_idem:.2e}"),
    )
}

// CWT

fn cmor_oracle(x: &[f64], fs: f64, scales: &[f64], bandwidth: f64, center: f64) -> Vec<Complex64> {
    let norm = 1.0 / (PI * bandwidth).sqrt();
    let t = x.len();
    let mut out = Vec::with_capacity(scales.len() * t);
    for &a in scales {
        for b in 0..t {
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, &xn) in x.iter().enumerate() {
                let u = (n as f64 - b as f64) / a;
                let psi = Complex64::from_polar(norm * (-u * u / bandwidth).exp(), 2.0 * PI * center * u);
                acc += psi.conj() * xn;
            }
            out.push(acc / (a * fs));
        }
    }
    out
}

fn cwt_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let mut worst = 0f64;
    for _ in 0..50 {
        let t = rng.gen_range(256..=512usize);
        let fs = rng.gen_range(50.0..500.0);
        let bandwidth = rng.gen_range(0.5..2.0);
        let center = rng.gen_range(0.5..1.5);
        let spec = WaveletSpec::cmor(bandwidth, center);
        let n_scales = rng.gen_range(1..=16usize);
        let max_a = rng.gen_range(1.0..12.0f64).max(1.0 + n_scales as f64 * 1e-3);
        let mut scales: Vec<f64> = (0..n_scales).map(|_| rng.gen_range(1.0..=max_a)).collect();
        scales.sort_by(f64::total_cmp);
        scales.dedup();
        let set = ScaleSet::from_list(scales.clone()).map_err(|e| e.to_string())?;
        let x: Vec<f64> = (0..t).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let got = cwt(&x, fs, &set, &spec).map_err(|e| e.to_string())?;
        let want = cmor_oracle(&x, fs, &scales, bandwidth, center);
        let num: f64 = got.data.iter().zip(&want).map(|(g, w)| (g - w).norm_sqr()).sum();
        let den: f64 = want.iter().map(Complex64::norm_sqr).sum();
        worst = worst.max((num / den).sqrt());
    }
    check(worst <= 1e-3, format!("max relative Frobenius error {worst:.2e}"))
}

fn ridge_law() -> Outcome {
    let fs = 100.0;
    let spec = WaveletSpec::cmor(1.5, 1.0);
    let scales = make_scales(ScaleMode::Linear, 50.0, 0).map_err(|e| e.to_string())?;
    let mut bad = Vec::new();
    let mut lines = Vec::new();
    for f in [2.0, 5.0, 10.0, 20.0] {
        let x: Vec<f64> = (0..3000).map(|n| (2.0 * PI * f * n as f64 / fs).sin()).collect();
        let m = cwt(&x, fs, &scales, &spec).map_err(|e| e.to_string())?;
        let expected = fs * spec.center / f;
        let a = scales.scales[ridge_scale(&m, &scales, &spec)];
        let unrestricted = scales.scales[m.ridge_scale()];
        lines.push(format!("f={f}: a={a} (expected {expected}, all-scale argmax {unrestricted})"));
        if (a - expected).abs() > 1.0 || is_aliased(&spec, a) {
            bad.push(f);
        }
    }
    check(bad.is_empty(), lines.join(", "))
}

// Network

fn shape_chain() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut lines = Vec::new();
    for (c, s, t, batch) in [(2usize, 50usize, 3000usize, 2usize), (22, 50, 1024, 1)] {
        let meta = NetworkMeta {
            n_channels: c,
            n_scales: s,
            n_samples: t,
            n_labels: 5,
            stem: StemMode::Adapter,
        };
        let net = build_network(meta, 1).map_err(|e| e.to_string())?;
        let n = batch * c * s * t;
        let x = TensorF32::new(vec![batch, c, s, t], (0..n).map(|_| rng.gen_range(0.0f32..2.0)).collect())
            .map_err(|e| e.to_string())?;
        let (logits, taps) = net.forward_taps(&x).map_err(|e| e.to_string())?;
        let expected: Vec<(&str, Vec<usize>)> = vec![
            ("stem.conv", vec![3, s, t]),
            ("stem.gelu", vec![3, s, t]),
            ("resize", vec![3, 64, 64]),
            ("patchify", vec![96, 16, 16]),
            ("ln0", vec![96, 16, 16]),
            ("stage1", vec![96, 16, 16]),
            ("ln1", vec![96, 16, 16]),
            ("down1", vec![192, 8, 8]),
            ("stage2", vec![192, 8, 8]),
            ("ln2", vec![192, 8, 8]),
            ("down2", vec![384, 4, 4]),
            ("stage3", vec![384, 4, 4]),
            ("ln3", vec![384, 4, 4]),
            ("down3", vec![768, 2, 2]),
            ("stage4", vec![768, 2, 2]),
            ("pool", vec![768, 1, 1]),
            ("ln4", vec![768, 1, 1]),
            ("features", vec![768]),
            ("logits", vec![5]),
        ];
        if taps.len() != expected.len() {
            return Err(format!("{} taps, expected {}", taps.len(), expected.len()));
        }
        for ((name, tensor), (en, dims)) in taps.iter().zip(&expected) {
            let mut want = vec![batch];
            want.extend(dims);
            if name != en || tensor.dims() != &want[..] {
                return Err(format!("tap {name} dims {:?}, expected {en} {want:?}", tensor.dims()));
            }
            if !tensor.is_finite() {
                return Err(format!("non-finite values at {name}"));
            }
        }
        if !logits.is_finite() {
            return Err("non-finite logits".into());
        }
        lines.push(format!("({c},{s},{t}) x{batch} ok"));
    }
    Ok(lines.join(", "))
}

// Training

fn gradient_check() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let mut worst = 0f64;
    for _ in 0..100 {
        let n = rng.gen_range(1..=16usize);
        let l = rng.gen_range(2..=6usize);
        let logits: Vec<f64> = (0..n * l).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.gen_range(0..l)).collect();
        let weights: Vec<f64> = (0..l).map(|_| rng.gen_range(0.2..3.0)).collect();
        let (_, grad) = weighted_cross_entropy(&logits, l, &labels, &weights).map_err(|e| e.to_string())?;
        let h = 1e-5;
        let mut fd = vec![0f64; logits.len()];
        for k in 0..logits.len() {
            let mut p = logits.clone();
            p[k] += h;
            let up = weighted_cross_entropy(&p, l, &labels, &weights).map_err(|e| e.to_string())?.0;
            p[k] -= 2.0 * h;
            let down = weighted_cross_entropy(&p, l, &labels, &weights).map_err(|e| e.to_string())?.0;
            fd[k] = (up - down) / (2.0 * h);
        }
        let num: f64 = grad.iter().zip(&fd).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let den: f64 = grad.iter().map(|a| a * a).sum::<f64>().sqrt().max(1e-12);
        worst = worst.max(num / den);
    }
    check(worst <= 1e-6, format!("max relative error {worst:.2e}"))
}

fn adamw_closed_forms() -> Outcome {
    let cfg = TrainConfig {
        lr: 1e-3,
        weight_decay: 0.05,
        ..TrainConfig::default()
    };
    let p0 = vec![1.5, -0.25, 3.0];
    let mut p = p0.clone();
    let mut state = AdamWState::new(p.len());
    let steps = 1000;
    for _ in 0..steps {
        adamw_step(&mut p, &[0.0; 3], &mut state, &cfg).map_err(|e| e.to_string())?;
    }
    let factor = 1.0 - cfg.lr * cfg.weight_decay;
    let mut repeated = p0.clone();
    for _ in 0..steps {
        repeated.iter_mut().for_each(|v| *v *= factor);
    }
    let bitwise = p.iter().zip(&repeated).all(|(a, b)| a.to_bits() == b.to_bits());
    let pow_err = p
        .iter()
        .zip(&p0)
        .map(|(a, b)| ((a - b * factor.powi(steps)) / a).abs())
        .fold(0f64, f64::max);

    let q0 = 0.7;
    let mut q = vec![q0];
    let mut st = AdamWState::new(1);
    adamw_step(&mut q, &[1.0], &mut st, &cfg).map_err(|e| e.to_string())?;
    let hand = q0 - cfg.lr * cfg.weight_decay * q0 - cfg.lr / (1.0 + cfg.eps);
    let first_err = (q[0] - hand).abs();
    check(
        bitwise && pow_err <= 1e-12 && first_err <= 1e-12,
        format!("decay bitwise {bitwise}, vs pow {pow_err:.1e}, first step {first_err:.1e}"),
    )
}

fn end_to_end() -> Outcome {
    let synth = SynthConfig::default();
    let trials = synth_trials(&synth);
    let cfg = PipelineConfig {
        wavelet: WaveletSpec::cmor(1.5, 1.0),
        scales: make_scales(ScaleMode::Linear, 50.0, 0).map_err(|e| e.to_string())?,
        magnitude: Magnitude::Modulus,
        align: AlignOptions::default(),
        train: TrainConfig::default(),
        folds: 5,
        stem: StemMode::Adapter,
    };
    let report = evaluate_pipeline(&trials, synth.n_labels(), &cfg, None).map_err(|e| e.to_string())?;
    let all: BTreeSet<String> = trials.iter().map(|t| t.subject_id.clone()).collect();
    let mut seen = BTreeSet::new();
    let mut disjoint = report.folds.len() == 5;
    for f in &report.folds {
        for s in &f.test_subjects {
            disjoint &= seen.insert(s.clone()) && !f.train_subjects.contains(s);
        }
    }
    disjoint &= seen == all;
    check(
        report.mean_accuracy >= 90.0 && report.mean_auc >= 0.95 && disjoint,
        format!(
            "accuracy {:.1}%, AUC {:.3}, folds disjoint {disjoint}",
            report.mean_accuracy, report.mean_auc
        ),
    )
}

// Containers

fn flip_checks<E>(bytes: &[u8], decode: impl Fn(&[u8]) -> Result<(), E>, is_crc: impl Fn(&E) -> bool) -> bool {
    // Payload bytes and the footer itself; header bytes fail earlier on shape.
    [bytes.len() / 2, bytes.len() - 5, bytes.len() - 1].iter().all(|&i| {
        let mut b = bytes.to_vec();
        b[i] ^= 0x40;
        matches!(decode(&b), Err(ref e) if is_crc(e))
    })
}

fn format_round_trips() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    let mut bad = Vec::new();

    let trials: Vec<Trial> = (0..4)
        .map(|i| {
            let (c, t) = (3, 17);
            Trial {
                subject_id: format!("sub{}", i % 2),
                channels: (0..c).map(|k| format!("ch{k}")).collect(),
                data: (0..c * t).map(|_| f32::from_bits(rng.gen_range(0..0x7f00_0000u32))).collect(),
                n_samples: t,
                fs: 100.0,
                label: i % 2,
                trial_index: i as u32,
            }
        })
        .collect();
    let bytes = encode_trials(&trials).map_err(|e| e.to_string())?;
    let back = decode_trials(&bytes).map_err(|e| e.to_string())?;
    if encode_trials(&back).map_err(|e| e.to_string())? != bytes || back != trials {
        bad.push("EEGX round trip");
    }
    if !flip_checks(
        &bytes,
        |b| decode_trials(b).map(|_| ()),
        |e| matches!(e, IngestError::Format(FormatError::ChecksumMismatch { .. })),
    ) {
        bad.push("EEGX CRC");
    }

    let scales = make_scales(ScaleMode::Linear, 12.0, 0).map_err(|e| e.to_string())?;
    let scalos: Vec<Scalogram> = (0..3)
        .map(|i| {
            let (c, t) = (2, 11);
            Scalogram {
                data: (0..c * scales.len() * t).map(|_| rng.gen_range(0.0f32..9.0)).collect(),
                n_channels: c,
                n_samples: t,
                scales: scales.clone(),
                fs: 128.0,
                label: i,
                subject_id: format!("s{i}"),
            }
        })
        .collect();
    let bytes = encode_scalograms(&scalos).map_err(|e| e.to_string())?;
    let back = decode_scalograms(&bytes).map_err(|e| e.to_string())?;
    let same = back.iter().zip(&scalos).all(|(a, b)| {
        a.data.iter().map(|v| v.to_bits()).eq(b.data.iter().map(|v| v.to_bits()))
            && (a.label, &a.subject_id, a.dims(), a.scales.scales == b.scales.scales)
                == (b.label, &b.subject_id, b.dims(), true)
    });
    if encode_scalograms(&back).map_err(|e| e.to_string())? != bytes || back.len() != scalos.len() || !same {
        bad.push("EEGS round trip");
    }
    if !flip_checks(
        &bytes,
        |b| decode_scalograms(b).map(|_| ()),
        |e| matches!(e, WaveletError::Format(FormatError::ChecksumMismatch { .. })),
    ) {
        bad.push("EEGS CRC");
    }

    let mut archive = WeightArchive::default();
    for (name, dims) in [("a.w", vec![4, 3, 2, 2]), ("a.b", vec![4]), ("z", vec![1])] {
        let n: usize = dims.iter().product();
        let data = (0..n).map(|_| f32::from_bits(rng.gen::<u32>() & 0xbf7f_ffff)).collect();
        archive.insert(name, TensorF32::new(dims, data).map_err(|e| e.to_string())?);
    }
    let bytes = archive.to_bytes().map_err(|e| e.to_string())?;
    let back = WeightArchive::from_bytes(&bytes).map_err(|e| e.to_string())?;
    let same_bits = archive.iter().zip(back.iter()).all(|((na, ta), (nb, tb))| {
        na == nb && ta.dims() == tb.dims() && ta.data().iter().zip(tb.data()).all(|(x, y)| x.to_bits() == y.to_bits())
    });
    if back.to_bytes().map_err(|e| e.to_string())? != bytes || !same_bits {
        bad.push("EEGW round trip");
    }
    if !flip_checks(
        &bytes,
        |b| WeightArchive::from_bytes(b).map(|_| ()),
        |e| matches!(e, NnError::Format(FormatError::ChecksumMismatch { .. })),
    ) {
        bad.push("EEGW CRC");
    }
    check(
        bad.is_empty(),
        if bad.is_empty() { "EEGX, EEGS, EEGW bitwise; flipped bytes rejected".into() } else { bad.join(", ") },
    )
}

#[test]
fn acceptance() {
    let secs = |s| Some(Duration::from_secs(s));
    let criteria = [
        Criterion { name: "parameter counts", budget: secs(1), run: param_counts },
        Criterion { name: "alignment identity", budget: secs(10), run: alignment_identity },
        Criterion { name: "cwt oracle equivalence", budget: secs(30), run: cwt_oracle },
        Criterion { name: "ridge law", budget: secs(10), run: ridge_law },
        Criterion { name: "shape chain", budget: secs(60), run: shape_chain },
        Criterion { name: "gradient check", budget: secs(5), run: gradient_check },
        Criterion { name: "adamw closed forms", budget: None, run: adamw_closed_forms },
        Criterion { name: "end-to-end synthetic", budget: secs(600), run: end_to_end },
        Criterion { name: "format round trips", budget: None, run: format_round_trips },
    ];
    let mut failed = Vec::new();
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let elapsed = start.elapsed();
        let over = c.budget.is_some_and(|b| elapsed > b);
        let (status, detail) = match (&outcome, over) {
            (Ok(d), false) => ("PASS", d.clone()),
            (Ok(d), true) => ("FAIL", format!("{d}; over budget {:?}", c.budget.unwrap())),
            (Err(d), _) => ("FAIL", d.clone()),
        };
        println!("{status} {:<24} {:>8.2}s  {detail}", c.name, elapsed.as_secs_f64());
        if status == "FAIL" {
            failed.push(c.name);
        }
    }
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
