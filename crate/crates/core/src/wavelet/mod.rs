//! Continuous wavelet transform and scalograms.
//!
//! Basis functions are `psi_{a,b}(t) = a^-1/2 conj(psi((t - b)/a))` with `t`
//! in samples, so scale `a` analyses `fs * C / a` Hz. A CWT row is
//!
//! ```text
//! X(a, b) = a^-1/2 * (1/fs) * sum_n x[n] psi_{a,b}[n]
//! ```
//!
//! evaluated as a zero-padded FFT convolution. Accumulation is `f64`; the
//! scalogram stores `|X|` (or `|X|^2`) as `f32`.

mod container;
mod family;
mod scales;

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use thiserror::Error;

use crate::ingest::Trial;

pub use container::{decode_scalograms, encode_scalograms, read_scalograms, write_scalograms, EEGS_MAGIC};
pub use family::{Family, WaveletSpec, SINC_MAX_HALF_WIDTH, TRUNCATION_LEVEL};
pub use scales::{make_scales, ScaleMode, ScaleSet};

#[derive(Debug, Error)]
pub enum WaveletError {
    #[error("UnsupportedFamilyParam: {0}")]
    UnsupportedFamilyParam(String),
    #[error("BadScaleConfig: {0}")]
    BadScaleConfig(String),
    #[error("EdgeDominated: signal has {samples} samples but the widest wavelet spans {support}")]
    EdgeDominated { samples: usize, support: usize },
    #[error("NonFiniteInput at sample {0}")]
    NonFiniteInput(usize),
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error(transparent)]
    Format(#[from] crate::codec::FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// A scaled, conjugated basis function sampled at integer offsets
/// `-half..=half` around `center`.
#[derive(Debug, Clone)]
pub struct SampledWavelet {
    pub samples: Vec<Complex64>,
    pub center: usize,
}

impl SampledWavelet {
    pub fn support(&self) -> usize {
        self.samples.len()
    }

    pub fn half_width(&self) -> usize {
        self.center
    }
}

/// Samples `psi_{a,0}` on its truncated support, including the `a^-1/2`
/// amplitude factor and the complex conjugate.
pub fn sample_wavelet(spec: &WaveletSpec, a: f64) -> Result<SampledWavelet, WaveletError> {
    spec.validate()?;
    if !(a >= 1.0 && a.is_finite()) {
        return Err(WaveletError::BadScaleConfig(format!("scale {a} must be >= 1")));
    }
    let mother = spec.mother();
    let half = (mother.half_support() * a).ceil() as usize;
    let amp = a.powf(-0.5);
    let samples = (0..=2 * half)
        .map(|i| {
            let t = (i as f64 - half as f64) / a;
            mother.eval(t).conj() * amp
        })
        .collect();
    Ok(SampledWavelet {
        samples,
        center: half,
    })
}

/// `S x T` complex CWT coefficients, row-major by scale.
#[derive(Debug, Clone, PartialEq)]
pub struct CwtMatrix {
    pub n_scales: usize,
    pub n_samples: usize,
    pub data: Vec<Complex64>,
}

impl CwtMatrix {
    pub fn row(&self, s: usize) -> &[Complex64] {
        &self.data[s * self.n_samples..(s + 1) * self.n_samples]
    }

    pub fn at(&self, s: usize, b: usize) -> Complex64 {
        self.data[s * self.n_samples + b]
    }

    /// Index of the scale with the largest mean coefficient magnitude over
    /// `cols`, considering only scales where `keep[s]` holds.
    pub fn ridge_scale_masked(&self, cols: std::ops::Range<usize>, keep: &[bool]) -> usize {
        (0..self.n_scales)
            .filter(|&s| keep.get(s).copied().unwrap_or(true))
            .map(|s| {
                let r = &self.row(s)[cols.clone()];
                (s, r.iter().map(|z| z.norm()).sum::<f64>())
            })
            .fold((0, f64::NEG_INFINITY), |best, cur| if cur.1 > best.1 { cur } else { best })
            .0
    }

    /// Unrestricted ridge over all scales and columns.
    pub fn ridge_scale(&self) -> usize {
        self.ridge_scale_masked(0..self.n_samples, &[])
    }
}

/// Whether scale `a` analyses a frequency above Nyquist (`Fc / a > 1/2`).
/// Point-sampled kernels at such scales alias toward low frequencies.
pub fn is_aliased(spec: &WaveletSpec, a: f64) -> bool {
    spec.center_frequency() / a > 0.5
}

/// `true` for every scale that is not aliased.
pub fn analysable_mask(scales: &ScaleSet, spec: &WaveletSpec) -> Vec<bool> {
    scales.scales.iter().map(|&a| !is_aliased(spec, a)).collect()
}

/// Ridge over the analysable scales only.
pub fn ridge_scale(m: &CwtMatrix, scales: &ScaleSet, spec: &WaveletSpec) -> usize {
    m.ridge_scale_masked(0..m.n_samples, &analysable_mask(scales, spec))
}

struct ScaleKernel {
    fft_len: usize,
    half: usize,
    /// Spectrum of the reversed kernel, pre-multiplied by the row factor and
    /// the inverse-FFT normalization.
    spectrum: Vec<Complex64>,
}

/// Precomputed per-scale kernel spectra for signals of one length and rate.
/// Immutable and shareable across threads.
pub struct CwtPlan {
    n_samples: usize,
    fs: f64,
    scales: ScaleSet,
    spec: WaveletSpec,
    kernels: Vec<ScaleKernel>,
    forward: HashMap<usize, Arc<dyn Fft<f64>>>,
    inverse: HashMap<usize, Arc<dyn Fft<f64>>>,
}

impl CwtPlan {
    pub fn new(n_samples: usize, fs: f64, scales: &ScaleSet, spec: &WaveletSpec) -> Result<Self, WaveletError> {
        spec.validate()?;
        scales.validate()?;
        if !(fs > 0.0 && fs.is_finite()) {
            return Err(WaveletError::ShapeMismatch(format!("sampling rate {fs} must be positive")));
        }
        let mut planner = FftPlanner::<f64>::new();
        let mut forward = HashMap::new();
        let mut inverse = HashMap::new();
        let mut kernels = Vec::with_capacity(scales.len());
        for &a in &scales.scales {
            let w = sample_wavelet(spec, a)?;
            if w.support() > n_samples {
                return Err(WaveletError::EdgeDominated {
                    samples: n_samples,
                    support: w.support(),
                });
            }
            let fft_len = (n_samples + w.support() - 1).next_power_of_two();
            let fwd = forward
                .entry(fft_len)
                .or_insert_with(|| planner.plan_fft_forward(fft_len))
                .clone();
            inverse
                .entry(fft_len)
                .or_insert_with(|| planner.plan_fft_inverse(fft_len));
            let factor = a.powf(-0.5) / fs / fft_len as f64;
            let mut spectrum = vec![Complex64::new(0.0, 0.0); fft_len];
            for (j, v) in w.samples.iter().rev().enumerate() {
                spectrum[j] = *v * factor;
            }
            fwd.process(&mut spectrum);
            kernels.push(ScaleKernel {
                fft_len,
                half: w.half_width(),
                spectrum,
            });
        }
        Ok(Self {
            n_samples,
            fs,
            scales: scales.clone(),
            spec: *spec,
            kernels,
            forward,
            inverse,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.n_samples
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn scales(&self) -> &ScaleSet {
        &self.scales
    }

    pub fn spec(&self) -> &WaveletSpec {
        &self.spec
    }

    /// Widest kernel support in samples.
    pub fn max_support(&self) -> usize {
        self.kernels.iter().map(|k| 2 * k.half + 1).max().unwrap_or(0)
    }

    pub fn transform(&self, signal: &[f64]) -> Result<CwtMatrix, WaveletError> {
        if signal.len() != self.n_samples {
            return Err(WaveletError::ShapeMismatch(format!(
                "plan expects {} samples, got {}",
                self.n_samples,
                signal.len()
            )));
        }
        if let Some(i) = signal.iter().position(|v| !v.is_finite()) {
            return Err(WaveletError::NonFiniteInput(i));
        }
        let t = self.n_samples;
        let mut spectra: HashMap<usize, Vec<Complex64>> = HashMap::new();
        let mut data = Vec::with_capacity(self.kernels.len() * t);
        let mut work = Vec::new();
        for k in &self.kernels {
            let sig = spectra.entry(k.fft_len).or_insert_with(|| {
                let mut buf = vec![Complex64::new(0.0, 0.0); k.fft_len];
                for (b, &x) in buf.iter_mut().zip(signal) {
                    b.re = x;
                }
                self.forward[&k.fft_len].process(&mut buf);
                buf
            });
            work.clear();
            work.extend(sig.iter().zip(&k.spectrum).map(|(a, b)| a * b));
            self.inverse[&k.fft_len].process(&mut work);
            data.extend_from_slice(&work[k.half..k.half + t]);
        }
        Ok(CwtMatrix {
            n_scales: self.kernels.len(),
            n_samples: t,
            data,
        })
    }
}

/// One-shot CWT of a single signal.
pub fn cwt(signal: &[f64], fs: f64, scales: &ScaleSet, spec: &WaveletSpec) -> Result<CwtMatrix, WaveletError> {
    CwtPlan::new(signal.len(), fs, scales, spec)?.transform(signal)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum Magnitude {
    /// `|X|`
    #[default]
    Modulus,
    /// `|X|^2`
    Power,
}

/// `C x S x T` magnitude tensor for one trial.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram {
    pub data: Vec<f32>,
    pub n_channels: usize,
    pub n_samples: usize,
    pub scales: ScaleSet,
    pub fs: f32,
    pub label: usize,
    pub subject_id: String,
}

impl Scalogram {
    pub fn n_scales(&self) -> usize {
        self.scales.len()
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.n_channels, self.n_scales(), self.n_samples]
    }

    pub fn plane(&self, c: usize) -> &[f32] {
        let n = self.n_scales() * self.n_samples;
        &self.data[c * n..(c + 1) * n]
    }
}

impl CwtPlan {
    pub fn scalogram(&self, trial: &Trial, magnitude: Magnitude) -> Result<Scalogram, WaveletError> {
        if trial.n_samples != self.n_samples {
            return Err(WaveletError::ShapeMismatch(format!(
                "trial has {} samples, plan expects {}",
                trial.n_samples, self.n_samples
            )));
        }
        if (f64::from(trial.fs) - self.fs).abs() > 1e-6 * self.fs {
            return Err(WaveletError::ShapeMismatch(format!(
                "trial sampled at {} Hz, plan at {} Hz",
                trial.fs, self.fs
            )));
        }
        let planes = (0..trial.n_channels())
            .into_par_iter()
            .map(|c| {
                let x: Vec<f64> = trial.row(c).iter().map(|&v| f64::from(v)).collect();
                let m = self.transform(&x)?;
                Ok(m.data
                    .iter()
                    .map(|z| match magnitude {
                        Magnitude::Modulus => z.norm() as f32,
                        Magnitude::Power => z.norm_sqr() as f32,
                    })
                    .collect::<Vec<f32>>())
            })
            .collect::<Result<Vec<_>, WaveletError>>()?;
        Ok(Scalogram {
            data: planes.concat(),
            n_channels: trial.n_channels(),
            n_samples: trial.n_samples,
            scales: self.scales.clone(),
            fs: trial.fs,
            label: trial.label,
            subject_id: trial.subject_id.clone(),
        })
    }
}

/// Modulus scalogram of every channel of `trial`.
pub fn scalogram(trial: &Trial, scales: &ScaleSet, spec: &WaveletSpec) -> Result<Scalogram, WaveletError> {
    CwtPlan::new(trial.n_samples, f64::from(trial.fs), scales, spec)?.scalogram(trial, Magnitude::Modulus)
}

/// Scalograms for a batch of trials sharing length and sampling rate.
pub fn scalograms(
    trials: &[Trial],
    scales: &ScaleSet,
    spec: &WaveletSpec,
    magnitude: Magnitude,
) -> Result<Vec<Scalogram>, WaveletError> {
    let Some(first) = trials.first() else {
        return Ok(Vec::new());
    };
    let plan = CwtPlan::new(first.n_samples, f64::from(first.fs), scales, spec)?;
    trials
        .par_iter()
        .map(|t| plan.scalogram(t, magnitude))
        .collect()
}

/// Energy spectral density of the scaled mother wavelet.
#[derive(Debug, Clone)]
pub struct EnergySpectrum {
    /// Frequencies in Hz, `0..=fs/2` in `fs/n_fft` steps.
    pub freqs: Vec<f64>,
    pub density: Vec<f64>,
}

impl EnergySpectrum {
    pub fn peak_frequency(&self) -> f64 {
        let i = self
            .density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, &d)| if d > b.1 { (i, d) } else { b })
            .0;
        self.freqs[i]
    }

    /// Full width at half maximum in Hz, linearly interpolated.
    pub fn fwhm(&self) -> f64 {
        let (peak_i, peak) = self
            .density
            .iter()
            .cloned()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |b, (i, d)| if d > b.1 { (i, d) } else { b });
        let half = peak / 2.0;
        let d = &self.density;
        let f = &self.freqs;
        let mut lo = f[0];
        for i in (1..=peak_i).rev() {
            if d[i - 1] < half {
                lo = f[i - 1] + (half - d[i - 1]) / (d[i] - d[i - 1]) * (f[i] - f[i - 1]);
                break;
            }
        }
        let mut hi = *f.last().unwrap();
        for i in peak_i..d.len() - 1 {
            if d[i + 1] < half {
                hi = f[i] + (d[i] - half) / (d[i] - d[i + 1]) * (f[i + 1] - f[i]);
                break;
            }
        }
        hi - lo
    }
}

/// Squared DFT magnitude of `a^-1/2 psi(n/a)` (the unconjugated mother at
/// scale `a`), on the non-negative frequency half.
pub fn energy_spectrum(spec: &WaveletSpec, a: f64, fs: f64, n_fft: usize) -> Result<EnergySpectrum, WaveletError> {
    let w = sample_wavelet(spec, a)?;
    if !n_fft.is_power_of_two() || n_fft < w.support() {
        return Err(WaveletError::BadScaleConfig(format!(
            "n_fft {n_fft} must be a power of two >= support {}",
            w.support()
        )));
    }
    let mut buf = vec![Complex64::new(0.0, 0.0); n_fft];
    // Circular placement with the wavelet center at index 0.
    for (i, v) in w.samples.iter().enumerate() {
        let offset = i as isize - w.center as isize;
        buf[offset.rem_euclid(n_fft as isize) as usize] = v.conj();
    }
    FftPlanner::<f64>::new().plan_fft_forward(n_fft).process(&mut buf);
    let bins = n_fft / 2 + 1;
    Ok(EnergySpectrum {
        freqs: (0..bins).map(|k| k as f64 * fs / n_fft as f64).collect(),
        density: buf[..bins].iter().map(|z| z.norm_sqr()).collect(),
    })
}
