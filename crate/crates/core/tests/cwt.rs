use std::f64::consts::PI;

use eegnext::ingest::Trial;
use eegnext::wavelet::{
    analysable_mask, cwt, energy_spectrum, make_scales, scalograms, Family, Magnitude, ScaleMode, ScaleSet,
    WaveletError, WaveletSpec,
};
use proptest::prelude::*;
use rustfft::num_complex::Complex64;

fn rel_err(a: &[Complex64], b: &[Complex64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).norm_sqr()).sum();
    let den: f64 = b.iter().map(Complex64::norm_sqr).sum();
    (num / den).sqrt()
}

/// Direct sum of `x[n] a^-1 conj(psi((n - b)/a)) / fs` over `|n - b| <= reach(a)`.
fn direct(x: &[f64], fs: f64, scales: &[f64], psi: impl Fn(f64) -> Complex64, reach: impl Fn(f64) -> f64) -> Vec<Complex64> {
    let t = x.len();
    let mut out = Vec::new();
    for &a in scales {
        let r = reach(a);
        for b in 0..t {
            let mut acc = Complex64::new(0.0, 0.0);
            for (n, &xn) in x.iter().enumerate() {
                let d = n as f64 - b as f64;
                if d.abs() <= r {
                    acc += psi(d / a).conj() * xn;
                }
            }
            out.push(acc / (a * fs));
        }
    }
    out
}

fn noise(n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
    (0..n)
        .map(|_| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64 * 2.0 - 1.0
        })
        .collect()
}

#[test]
fn shannon_matches_truncated_direct_sum() {
    let (b, c) = (0.8, 1.2);
    let spec = WaveletSpec::new(Family::Shan, b, c, 1).unwrap();
    let scales = [1.0, 2.5, 4.0];
    let x = noise(300, 1);
    let set = ScaleSet::from_list(scales.to_vec()).unwrap();
    let got = cwt(&x, 250.0, &set, &spec).unwrap();
    let sinc = |u: f64| if u == 0.0 { 1.0 } else { (PI * u).sin() / (PI * u) };
    let psi = |t: f64| Complex64::from_polar(b.sqrt() * sinc(b * t), 2.0 * PI * c * t);
    let want = direct(&x, 250.0, &scales, psi, |a| (20.0 * a).ceil());
    assert!(rel_err(&got.data, &want) < 1e-9);
}

#[test]
fn cgau_first_derivative_matches_direct_sum() {
    let (b, c) = (1.0, 0.8);
    let spec = WaveletSpec::new(Family::Cgau, b, c, 1).unwrap();
    let raw = |t: f64| {
        Complex64::new(-2.0 * t / b, 2.0 * PI * c) * Complex64::from_polar((-t * t / b).exp(), 2.0 * PI * c * t)
    };
    let h = 1e-3;
    let energy: f64 = (-20_000..=20_000).map(|i| raw(i as f64 * h).norm_sqr()).sum::<f64>() * h;
    let psi = |t: f64| raw(t) / energy.sqrt();
    let scales = [1.5, 3.0, 6.0];
    let x = noise(256, 2);
    let set = ScaleSet::from_list(scales.to_vec()).unwrap();
    let got = cwt(&x, 100.0, &set, &spec).unwrap();
    let want = direct(&x, 100.0, &scales, psi, |_| f64::INFINITY);
    assert!(rel_err(&got.data, &want) < 1e-6, "{}", rel_err(&got.data, &want));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn transform_is_linear(alpha in -3.0..3.0f64, beta in -3.0..3.0f64, seed in any::<u64>(), t in 64usize..200) {
        let spec = WaveletSpec::cmor(1.0, 1.0);
        let set = make_scales(ScaleMode::DyadicVoices, 4.0, 4).unwrap();
        let x = noise(t, seed);
        let y = noise(t, seed ^ 0xabcdef);
        let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| alpha * a + beta * b).collect();
        let (mx, my, mz) = (
            cwt(&x, 100.0, &set, &spec).unwrap(),
            cwt(&y, 100.0, &set, &spec).unwrap(),
            cwt(&z, 100.0, &set, &spec).unwrap(),
        );
        let combo: Vec<Complex64> = mx.data.iter().zip(&my.data).map(|(a, b)| a * alpha + b * beta).collect();
        let scale = combo.iter().map(|v| v.norm()).fold(1e-12, f64::max);
        let worst = mz.data.iter().zip(&combo).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        prop_assert!(worst / scale < 1e-10);
    }
}

#[test]
fn interior_shift_covariance() {
    let t = 600;
    let burst = |n: usize, c: f64| {
        let u = (n as f64 - c) / 20.0;
        (-u * u).exp() * (2.0 * PI * 0.1 * n as f64).sin()
    };
    let shift = 37;
    let x: Vec<f64> = (0..t).map(|n| burst(n, 250.0)).collect();
    let y: Vec<f64> = (0..t).map(|n| if n >= shift { x[n - shift] } else { 0.0 }).collect();
    let set = make_scales(ScaleMode::Linear, 12.0, 0).unwrap();
    let spec = WaveletSpec::cmor(1.5, 1.0);
    let (mx, my) = (cwt(&x, 100.0, &set, &spec).unwrap(), cwt(&y, 100.0, &set, &spec).unwrap());
    for s in 0..set.len() {
        for b in 150..350 {
            assert!((mx.at(s, b) - my.at(s, b + shift)).norm() < 1e-12);
        }
    }
}

#[test]
fn chirp_ridge_moves_to_smaller_scales() {
    let fs = 100.0;
    let t = 2000;
    let dur = t as f64 / fs;
    // Instantaneous frequency 5 -> 20 Hz.
    let x: Vec<f64> = (0..t)
        .map(|n| {
            let tt = n as f64 / fs;
            (2.0 * PI * (5.0 * tt + 0.5 * (15.0 / dur) * tt * tt)).sin()
        })
        .collect();
    let set = make_scales(ScaleMode::Linear, 50.0, 0).unwrap();
    let spec = WaveletSpec::cmor(1.5, 1.0);
    let m = cwt(&x, fs, &set, &spec).unwrap();
    let mask = analysable_mask(&set, &spec);
    let ridge: Vec<f64> = (0..10)
        .map(|w| set.scales[m.ridge_scale_masked(w * 200..(w + 1) * 200, &mask)])
        .collect();
    assert!(ridge.windows(2).all(|p| p[1] <= p[0]), "{ridge:?}");
    assert!(ridge[0] >= 16.0 && ridge[9] <= 6.0, "{ridge:?}");
}

#[test]
fn wavelet_spectra_peak_at_mapped_frequency() {
    let (fs, n_fft) = (100.0, 4096);
    let bin = fs / n_fft as f64;
    for (spec, a) in [
        (WaveletSpec::cmor(1.5, 1.0), 10.0),
        (WaveletSpec::new(Family::Cgau, 1.0, 0.5, 2).unwrap(), 8.0),
        (WaveletSpec::new(Family::Fbsp, 0.5, 1.0, 2).unwrap(), 5.0),
    ] {
        let e = energy_spectrum(&spec, a, fs, n_fft).unwrap();
        let want = spec.scale_to_frequency(a, fs);
        assert!((e.peak_frequency() - want).abs() <= 1.5 * bin, "{spec:?}: {} vs {want}", e.peak_frequency());
    }
    // Shannon: flat passband [C - B/2, C + B/2] fs/a, centred on the mapped frequency.
    let shan = WaveletSpec::new(Family::Shan, 0.5, 1.0, 1).unwrap();
    let e = energy_spectrum(&shan, 5.0, fs, n_fft).unwrap();
    assert!((15.0..=25.0).contains(&e.peak_frequency()));
    let total: f64 = e.density.iter().sum();
    let centroid: f64 = e.freqs.iter().zip(&e.density).map(|(f, d)| f * d).sum::<f64>() / total;
    assert!((centroid - 20.0).abs() < 0.2, "{centroid}");
    let narrow = energy_spectrum(&WaveletSpec::cmor(3.0, 1.0), 10.0, fs, n_fft).unwrap().fwhm();
    let wide = energy_spectrum(&WaveletSpec::cmor(0.5, 1.0), 10.0, fs, n_fft).unwrap().fwhm();
    assert!(narrow < wide);
}

#[test]
fn scalogram_magnitudes() {
    let trials: Vec<Trial> = (0..3)
        .map(|i| Trial {
            subject_id: "s".into(),
            channels: vec!["a".into(), "b".into()],
            data: noise(400, i).into_iter().map(|v| v as f32).collect(),
            n_samples: 200,
            fs: 100.0,
            label: 0,
            trial_index: i as u32,
        })
        .collect();
    let set = make_scales(ScaleMode::Linear, 10.0, 0).unwrap();
    let spec = WaveletSpec::default();
    let modulus = scalograms(&trials, &set, &spec, Magnitude::Modulus).unwrap();
    let power = scalograms(&trials, &set, &spec, Magnitude::Power).unwrap();
    for (m, p) in modulus.iter().zip(&power) {
        assert_eq!(m.dims(), [2, 10, 200]);
        for (&a, &b) in m.data.iter().zip(&p.data) {
            assert!(a >= 0.0);
            assert!((a * a - b).abs() <= 1e-5 * b.max(1e-6));
        }
    }
    let x: Vec<f64> = trials[1].row(1).iter().map(|&v| f64::from(v)).collect();
    let direct = cwt(&x, 100.0, &set, &spec).unwrap();
    for (got, want) in modulus[1].plane(1).iter().zip(&direct.data) {
        assert_eq!(*got, want.norm() as f32);
    }
}

#[test]
fn configuration_errors() {
    assert!(matches!(make_scales(ScaleMode::Linear, -5.0, 0), Err(WaveletError::BadScaleConfig(_))));
    assert!(matches!(make_scales(ScaleMode::DyadicVoices, 8.0, 1), Err(WaveletError::BadScaleConfig(_))));
    assert!(matches!(ScaleSet::from_list(vec![2.0, 1.0]), Err(WaveletError::BadScaleConfig(_))));
    assert!(matches!(
        WaveletSpec::new(Family::Shan, 3.0, 1.0, 1),
        Err(WaveletError::UnsupportedFamilyParam(_))
    ));
    let set = make_scales(ScaleMode::Linear, 50.0, 0).unwrap();
    assert!(matches!(
        cwt(&[0.0; 100], 100.0, &set, &WaveletSpec::default()),
        Err(WaveletError::EdgeDominated { .. })
    ));
    let mut x = vec![0.0; 100];
    x[7] = f64::NAN;
    let small = make_scales(ScaleMode::Linear, 2.0, 0).unwrap();
    assert!(matches!(cwt(&x, 100.0, &small, &WaveletSpec::default()), Err(WaveletError::NonFiniteInput(7))));
}
