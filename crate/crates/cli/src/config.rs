//! Flag groups and the JSON config overlay (flags > file > defaults).

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::Args;
use eegnext::align::AlignOptions;
use eegnext::nn::StemMode;
use eegnext::train::TrainConfig;
use eegnext::wavelet::{make_scales, Family, ScaleMode, ScaleSet, WaveletSpec};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// JSON file with default values for any of the shared or stage flags.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    #[arg(long, value_name = "U64")]
    pub seed: Option<u64>,
    /// Worker threads for the wavelet and network batch paths.
    #[arg(long, value_name = "N")]
    pub threads: Option<usize>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct WaveletArgs {
    #[arg(long, value_name = "FAMILY", value_parser = ["cmor", "cgau", "shan", "fbsp"])]
    pub wavelet: Option<String>,
    /// Bandwidth B.
    #[arg(long = "B", value_name = "F", allow_hyphen_values = true)]
    pub bandwidth: Option<f64>,
    /// Center frequency C.
    #[arg(long = "C", value_name = "F", allow_hyphen_values = true)]
    pub center_freq: Option<f64>,
    /// Derivative order (cgau) or spline order (fbsp).
    #[arg(long = "m", value_name = "N")]
    pub order: Option<u32>,
    #[arg(long = "scale-mode", value_name = "MODE", value_parser = ["linear", "dyadic"])]
    pub scale_mode: Option<String>,
    /// Largest scale [default: 50].
    #[arg(long = "max-scale", value_name = "F", allow_hyphen_values = true)]
    pub max_scale: Option<f64>,
    /// Voices per octave in dyadic mode [default: 8].
    #[arg(long, value_name = "N")]
    pub voices: Option<u32>,
}

#[derive(Debug, Clone, Default, Args)]
pub struct AlignArgs {
    /// Shrinkage toward a scaled identity, in [0, 1) [default: 0].
    #[arg(long, value_name = "F", allow_hyphen_values = true)]
    pub shrinkage: Option<f64>,
    /// Remove each channel's mean before forming covariances.
    #[arg(long)]
    pub center: bool,
}

#[derive(Debug, Clone, Default, Args)]
pub struct TrainArgs {
    /// Parameters to train; only the classification head is supported.
    #[arg(long = "train-scope", value_name = "SCOPE", value_parser = ["head"])]
    pub train_scope: Option<String>,
    #[arg(long, value_name = "F", allow_hyphen_values = true)]
    pub lr: Option<f64>,
    #[arg(long, value_name = "F", allow_hyphen_values = true)]
    pub wd: Option<f64>,
    #[arg(long, value_name = "N")]
    pub epochs: Option<usize>,
    #[arg(long, value_name = "N")]
    pub batch: Option<usize>,
    /// Cross-validation folds [default: 5].
    #[arg(long, value_name = "N")]
    pub folds: Option<usize>,
    /// Stem mode: `adapter` (C -> 3 convolution) or `bypass` (3-channel input).
    #[arg(long, value_name = "MODE", value_parser = ["adapter", "bypass"])]
    pub stem: Option<String>,
}

/// Values a config file may set. Keys use the long flag names.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
pub struct FileConfig {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub wavelet: Option<String>,
    #[serde(rename = "B")]
    pub bandwidth: Option<f64>,
    #[serde(rename = "C")]
    pub center_freq: Option<f64>,
    #[serde(rename = "m")]
    pub order: Option<u32>,
    pub scale_mode: Option<String>,
    pub max_scale: Option<f64>,
    pub voices: Option<u32>,
    pub shrinkage: Option<f64>,
    pub center: Option<bool>,
    pub weights: Option<PathBuf>,
    pub train_scope: Option<String>,
    pub lr: Option<f64>,
    pub wd: Option<f64>,
    pub epochs: Option<usize>,
    pub batch: Option<usize>,
    pub folds: Option<usize>,
    pub stem: Option<String>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| crate::UsageError(format!("config {}: {e}", path.display())).into())
    }
}

/// Fully resolved settings, echoed at the start of every run.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "kebab-case")]
pub struct Settings {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: u64,
    pub threads: Option<usize>,
    pub wavelet: String,
    #[serde(rename = "B")]
    pub bandwidth: f64,
    #[serde(rename = "C")]
    pub center_freq: f64,
    #[serde(rename = "m")]
    pub order: u32,
    pub scale_mode: String,
    pub max_scale: f64,
    pub voices: u32,
    pub shrinkage: f64,
    pub center: bool,
    pub weights: Option<PathBuf>,
    pub train_scope: String,
    pub lr: f64,
    pub wd: f64,
    pub epochs: usize,
    pub batch: usize,
    pub folds: usize,
    pub stem: String,
}

/// Flags given on the command line for one run.
#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub manifest: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub weights: Option<PathBuf>,
    pub common: CommonArgs,
    pub wavelet: WaveletArgs,
    pub align: AlignArgs,
    pub train: TrainArgs,
}

impl Settings {
    pub fn resolve(flags: &Flags) -> Result<Self> {
        let file = FileConfig::load(flags.common.config.as_deref())?;
        let d = TrainConfig::default();
        let w = &flags.wavelet;
        let t = &flags.train;
        Ok(Self {
            manifest: flags.manifest.clone().or(file.manifest),
            out: flags.out.clone().or(file.out),
            seed: flags.common.seed.or(file.seed).unwrap_or(d.seed),
            threads: flags.common.threads.or(file.threads),
            wavelet: w.wavelet.clone().or(file.wavelet).unwrap_or_else(|| "cmor".into()),
            bandwidth: w.bandwidth.or(file.bandwidth).unwrap_or(1.5),
            center_freq: w.center_freq.or(file.center_freq).unwrap_or(1.0),
            order: w.order.or(file.order).unwrap_or(1),
            scale_mode: w.scale_mode.clone().or(file.scale_mode).unwrap_or_else(|| "linear".into()),
            max_scale: w.max_scale.or(file.max_scale).unwrap_or(50.0),
            voices: w.voices.or(file.voices).unwrap_or(8),
            shrinkage: flags.align.shrinkage.or(file.shrinkage).unwrap_or(0.0),
            center: flags.align.center || file.center.unwrap_or(false),
            weights: flags.weights.clone().or(file.weights),
            train_scope: t.train_scope.clone().or(file.train_scope).unwrap_or_else(|| "head".into()),
            lr: t.lr.or(file.lr).unwrap_or(d.lr),
            wd: t.wd.or(file.wd).unwrap_or(d.weight_decay),
            epochs: t.epochs.or(file.epochs).unwrap_or(d.epochs),
            batch: t.batch.or(file.batch).unwrap_or(d.batch_size),
            folds: t.folds.or(file.folds).unwrap_or(5),
            stem: t.stem.clone().or(file.stem).unwrap_or_else(|| "adapter".into()),
        })
    }

    pub fn wavelet_spec(&self) -> Result<WaveletSpec> {
        let family: Family = self.wavelet.parse()?;
        Ok(WaveletSpec::new(family, self.bandwidth, self.center_freq, self.order)?)
    }

    pub fn scale_set(&self) -> Result<ScaleSet> {
        let mode: ScaleMode = self.scale_mode.parse()?;
        Ok(make_scales(mode, self.max_scale, self.voices)?)
    }

    pub fn align_options(&self) -> AlignOptions {
        AlignOptions {
            shrinkage: self.shrinkage,
            center: self.center,
        }
    }

    pub fn train_config(&self) -> Result<TrainConfig> {
        if self.train_scope != "head" {
            return Err(crate::UsageError(format!("train scope {:?} is not supported", self.train_scope)).into());
        }
        let cfg = TrainConfig {
            lr: self.lr,
            weight_decay: self.wd,
            batch_size: self.batch,
            epochs: self.epochs,
            seed: self.seed,
            ..TrainConfig::default()
        };
        cfg.validate().map_err(|e| crate::UsageError(e.to_string()))?;
        Ok(cfg)
    }

    pub fn stem_mode(&self) -> Result<StemMode> {
        match self.stem.as_str() {
            "adapter" => Ok(StemMode::Adapter),
            "bypass" => Ok(StemMode::Bypass),
            other => Err(crate::UsageError(format!("unknown stem mode {other:?}")).into()),
        }
    }
}
