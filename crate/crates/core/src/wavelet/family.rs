//! Mother wavelets.
//!
//! All families are written with a bandwidth `B` and a normalized center
//! frequency `C`, with time `t` in normalized units:
//!
//! * CMOR: `(pi B)^-1/2 exp(-t^2/B) exp(j 2 pi C t)`
//! * CGAU: `N_m d^m/dt^m [exp(-t^2/B) exp(j 2 pi C t)]`, with `N_m` chosen for
//!   unit L2 norm. `B = 1, C = 1/(2 pi)` is the complex conjugate of the
//!   PyWavelets `cgauM` family.
//! * SHAN: `sqrt(B) sinc(B t) exp(j 2 pi C t)`
//! * FBSP: `sqrt(B) sinc(B t / m)^m exp(j 2 pi C t)`
//!
//! with `sinc(x) = sin(pi x) / (pi x)`. The analysing kernel used by the CWT
//! is the complex conjugate of these.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use rustfft::num_complex::Complex64;

use super::WaveletError;

/// Envelope level, relative to its peak, at which the sampled support ends.
pub const TRUNCATION_LEVEL: f64 = 1e-8;

/// Maximum half-width (normalized units) for the algebraically decaying
/// sinc families, whose envelopes only reach `TRUNCATION_LEVEL` after
/// millions of periods.
pub const SINC_MAX_HALF_WIDTH: f64 = 20.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    Cmor,
    Cgau,
    Shan,
    Fbsp,
}

impl Family {
    pub fn name(self) -> &'static str {
        match self {
            Family::Cmor => "cmor",
            Family::Cgau => "cgau",
            Family::Shan => "shan",
            Family::Fbsp => "fbsp",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = WaveletError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "cmor" => Ok(Family::Cmor),
            "cgau" => Ok(Family::Cgau),
            "shan" => Ok(Family::Shan),
            "fbsp" => Ok(Family::Fbsp),
            other => Err(WaveletError::UnsupportedFamilyParam(format!(
                "unknown wavelet family {other:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WaveletSpec {
    pub family: Family,
    /// Time-decay / bandwidth parameter `B`.
    pub bandwidth: f64,
    /// Normalized center frequency `C`.
    pub center: f64,
    /// Derivative order (CGAU) or spline order (FBSP).
    pub order: u32,
}

impl Default for WaveletSpec {
    fn default() -> Self {
        Self::cmor(1.5, 1.0)
    }
}

impl WaveletSpec {
    pub fn new(family: Family, bandwidth: f64, center: f64, order: u32) -> Result<Self, WaveletError> {
        let spec = Self {
            family,
            bandwidth,
            center,
            order,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn cmor(bandwidth: f64, center: f64) -> Self {
        Self {
            family: Family::Cmor,
            bandwidth,
            center,
            order: 1,
        }
    }

    pub fn validate(&self) -> Result<(), WaveletError> {
        let bad = |msg: String| Err(WaveletError::UnsupportedFamilyParam(msg));
        if !(self.bandwidth > 0.0 && self.bandwidth.is_finite()) {
            return bad(format!("B must be positive, got {}", self.bandwidth));
        }
        if !(self.center > 0.0 && self.center.is_finite()) {
            return bad(format!("C must be positive, got {}", self.center));
        }
        match self.family {
            Family::Cgau | Family::Fbsp if self.order < 1 => {
                bad(format!("{} needs order m >= 1", self.family))
            }
            Family::Cgau if self.order > 16 => bad("cgau order above 16 is not supported".into()),
            Family::Shan | Family::Fbsp if self.bandwidth / 2.0 >= self.center => bad(format!(
                "{} passband [C - B/2, C + B/2] = [{}, {}] reaches DC",
                self.family,
                self.center - self.bandwidth / 2.0,
                self.center + self.bandwidth / 2.0
            )),
            _ => Ok(()),
        }
    }

    /// Normalized frequency (cycles per unit of normalized time) at which
    /// the wavelet's spectrum peaks. A scale `a` at sampling rate `fs`
    /// therefore analyses `fs * center_frequency() / a` Hz.
    pub fn center_frequency(&self) -> f64 {
        match self.family {
            Family::Cgau => {
                let (b, c, m) = (self.bandwidth, self.center, f64::from(self.order));
                0.5 * (c + (c * c + 2.0 * m / (PI * PI * b)).sqrt())
            }
            _ => self.center,
        }
    }

    /// Physical frequency in Hz analysed at scale `a`.
    pub fn scale_to_frequency(&self, a: f64, fs: f64) -> f64 {
        fs * self.center_frequency() / a
    }

    pub(crate) fn mother(&self) -> Mother {
        Mother::new(*self)
    }
}

fn sinc(x: f64) -> f64 {
    if x == 0.0 {
        1.0
    } else {
        let px = PI * x;
        px.sin() / px
    }
}

/// Evaluator for one mother wavelet with any precomputed constants.
pub(crate) struct Mother {
    spec: WaveletSpec,
    /// CGAU derivative polynomial coefficients, lowest degree first.
    poly: Vec<Complex64>,
    norm: f64,
}

impl Mother {
    fn new(spec: WaveletSpec) -> Self {
        let mut m = Self {
            spec,
            poly: Vec::new(),
            norm: 1.0,
        };
        match spec.family {
            Family::Cmor => m.norm = (PI * spec.bandwidth).powf(-0.5),
            Family::Shan | Family::Fbsp => m.norm = spec.bandwidth.sqrt(),
            Family::Cgau => {
                m.poly = cgau_polynomial(spec.bandwidth, spec.center, spec.order);
                m.norm = 1.0;
                let sq = m.l2_norm_squared();
                m.norm = sq.sqrt().recip();
            }
        }
        m
    }

    fn l2_norm_squared(&self) -> f64 {
        // Trapezoid rule on a smooth, Gaussian-decaying integrand.
        let half = 14.0 * self.spec.bandwidth.sqrt();
        let n = 40_000;
        let h = 2.0 * half / n as f64;
        (0..=n)
            .map(|i| {
                let t = -half + i as f64 * h;
                let w = if i == 0 || i == n { 0.5 } else { 1.0 };
                w * self.eval(t).norm_sqr()
            })
            .sum::<f64>()
            * h
    }

    /// `psi(t)` (not conjugated).
    pub fn eval(&self, t: f64) -> Complex64 {
        let s = &self.spec;
        let carrier = Complex64::from_polar(1.0, 2.0 * PI * s.center * t);
        match s.family {
            Family::Cmor => carrier * (self.norm * (-t * t / s.bandwidth).exp()),
            Family::Shan => carrier * (self.norm * sinc(s.bandwidth * t)),
            Family::Fbsp => {
                let m = s.order as i32;
                carrier * (self.norm * sinc(s.bandwidth * t / f64::from(m)).powi(m))
            }
            Family::Cgau => {
                let p = self
                    .poly
                    .iter()
                    .rev()
                    .fold(Complex64::new(0.0, 0.0), |acc, &c| acc * t + c);
                p * carrier * (self.norm * (-t * t / s.bandwidth).exp())
            }
        }
    }

    /// Magnitude envelope (or its decay bound for sinc families).
    pub fn envelope(&self, t: f64) -> f64 {
        let s = &self.spec;
        match s.family {
            Family::Cmor => self.norm * (-t * t / s.bandwidth).exp(),
            Family::Cgau => self.eval(t).norm(),
            Family::Shan => self.norm * (1.0f64).min(1.0 / (PI * s.bandwidth * t.abs())),
            Family::Fbsp => {
                let m = f64::from(s.order);
                self.norm * (1.0f64).min(m / (PI * s.bandwidth * t.abs())).powf(m)
            }
        }
    }

    /// Half-width of the truncated support in normalized units.
    pub fn half_support(&self) -> f64 {
        let s = &self.spec;
        match s.family {
            Family::Cmor => (s.bandwidth * TRUNCATION_LEVEL.recip().ln()).sqrt(),
            Family::Shan => (1.0 / (PI * s.bandwidth * TRUNCATION_LEVEL)).min(SINC_MAX_HALF_WIDTH),
            Family::Fbsp => {
                let m = f64::from(s.order);
                (m / (PI * s.bandwidth * TRUNCATION_LEVEL.powf(1.0 / m))).min(SINC_MAX_HALF_WIDTH)
            }
            Family::Cgau => {
                let step = 1e-3 * s.bandwidth.sqrt();
                let end = 40.0 * s.bandwidth.sqrt();
                let n = (end / step) as usize;
                let env: Vec<f64> = (0..=n).map(|i| self.envelope(i as f64 * step)).collect();
                let peak = env.iter().cloned().fold(0.0, f64::max);
                let last = env
                    .iter()
                    .rposition(|&e| e >= TRUNCATION_LEVEL * peak)
                    .unwrap_or(0);
                (last + 1) as f64 * step
            }
        }
    }
}

/// Coefficients of `P_m` with `d^m/dt^m exp(g(t)) = P_m(t) exp(g(t))`,
/// `g(t) = -t^2/B + j 2 pi C t`. Recurrence: `P_{k+1} = P_k' + P_k g'`.
fn cgau_polynomial(b: f64, c: f64, m: u32) -> Vec<Complex64> {
    let g1 = Complex64::new(0.0, 2.0 * PI * c);
    let g2 = Complex64::new(-2.0 / b, 0.0);
    let mut p = vec![Complex64::new(1.0, 0.0)];
    for _ in 0..m {
        let mut next = vec![Complex64::new(0.0, 0.0); p.len() + 1];
        for (k, &coef) in p.iter().enumerate() {
            if k > 0 {
                next[k - 1] += coef * k as f64;
            }
            next[k] += coef * g1;
            next[k + 1] += coef * g2;
        }
        p = next;
    }
    p
}
