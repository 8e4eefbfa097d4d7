use std::fmt;
use std::str::FromStr;

use super::WaveletError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ScaleMode {
    /// `a_i = 2^(i/v)` for `i = v..=floor(v log2 max_a)`.
    DyadicVoices,
    /// Integers `1..=floor(max_a)`.
    #[default]
    Linear,
}

impl fmt::Display for ScaleMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScaleMode::DyadicVoices => "dyadic",
            ScaleMode::Linear => "linear",
        })
    }
}

impl FromStr for ScaleMode {
    type Err = WaveletError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "dyadic" => Ok(ScaleMode::DyadicVoices),
            "linear" => Ok(ScaleMode::Linear),
            other => Err(WaveletError::BadScaleConfig(format!("unknown scale mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScaleSet {
    pub mode: ScaleMode,
    pub max_a: f64,
    pub voices: u32,
    /// Strictly increasing.
    pub scales: Vec<f64>,
}

impl ScaleSet {
    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn validate(&self) -> Result<(), WaveletError> {
        if self.scales.is_empty() {
            return Err(WaveletError::BadScaleConfig("empty scale set".into()));
        }
        if self.scales.iter().any(|&a| !(a >= 1.0 && a.is_finite())) {
            return Err(WaveletError::BadScaleConfig("scales must be finite and >= 1".into()));
        }
        if self.scales.windows(2).any(|w| w[0] >= w[1]) {
            return Err(WaveletError::BadScaleConfig("scales must be strictly increasing".into()));
        }
        Ok(())
    }

    /// Rebuilds a scale set from a stored list, inferring the mode.
    pub fn from_list(scales: Vec<f64>) -> Result<Self, WaveletError> {
        let linear = scales.iter().enumerate().all(|(i, &a)| a == (i + 1) as f64);
        let max_a = scales.last().copied().unwrap_or(0.0);
        let (mode, voices) = if linear {
            (ScaleMode::Linear, 0)
        } else if scales.len() >= 2 {
            let v = (1.0 / (scales[1] / scales[0]).log2()).round();
            (ScaleMode::DyadicVoices, v.max(0.0) as u32)
        } else {
            (ScaleMode::DyadicVoices, 0)
        };
        let s = Self {
            mode,
            max_a,
            voices,
            scales,
        };
        s.validate()?;
        Ok(s)
    }
}

pub fn make_scales(mode: ScaleMode, max_a: f64, voices: u32) -> Result<ScaleSet, WaveletError> {
    if !max_a.is_finite() {
        return Err(WaveletError::BadScaleConfig(format!("max scale {max_a} is not finite")));
    }
    let scales = match mode {
        ScaleMode::Linear => {
            if max_a < 1.0 {
                return Err(WaveletError::BadScaleConfig(format!(
                    "linear mode needs max scale >= 1, got {max_a}"
                )));
            }
            (1..=max_a.floor() as usize).map(|a| a as f64).collect()
        }
        ScaleMode::DyadicVoices => {
            if max_a < 2.0 {
                return Err(WaveletError::BadScaleConfig(format!(
                    "dyadic mode needs max scale >= 2, got {max_a}"
                )));
            }
            if voices < 2 {
                return Err(WaveletError::BadScaleConfig(format!(
                    "dyadic mode needs at least 2 voices, got {voices}"
                )));
            }
            let v = f64::from(voices);
            let last = (v * max_a.log2() + 1e-9).floor() as u32;
            (voices..=last).map(|i| 2f64.powf(f64::from(i) / v)).collect()
        }
    };
    let set = ScaleSet {
        mode,
        max_a,
        voices,
        scales,
    };
    set.validate()?;
    Ok(set)
}
