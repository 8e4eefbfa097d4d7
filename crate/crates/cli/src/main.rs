//! `eegnext`: command-line driver for the EEG-NeXt pipeline.

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use eegnext::wavelet::WaveletError;

use config::{AlignArgs, CommonArgs, TrainArgs, WaveletArgs};

/// Invalid combination of flags or config values (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "usage error: {}", self.0)
    }
}

impl std::error::Error for UsageError {}

#[derive(Debug, Parser)]
#[command(name = "eegnext", version, about = "EEG scalogram pipeline with a ConvNeXt-style backbone")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Download files into the cache directory and verify their SHA-256.
    Fetch {
        /// Single file URL (requires --sha256).
        #[arg(long, requires = "sha256", conflicts_with = "list")]
        url: Option<String>,
        #[arg(long)]
        sha256: Option<String>,
        /// JSON list of {"url", "sha256", "file"} objects.
        #[arg(long, value_name = "PATH")]
        list: Option<PathBuf>,
        /// Target directory [default: $EEGNEXT_CACHE or .eegnext-cache].
        #[arg(long, value_name = "DIR")]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Parse the EDF files of a manifest into an EEGX trial container.
    Ingest {
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Whiten every subject's trials so their mean covariance is the identity.
    Align {
        /// EEGX input.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Also write the per-subject whitening matrices as an EEGW archive.
        #[arg(long, value_name = "PATH")]
        whiteners: Option<PathBuf>,
        #[command(flatten)]
        align: AlignArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Compute CWT scalograms of every trial into an EEGS container.
    Scalogram {
        /// EEGX input.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        /// Store |X|^2 instead of |X|.
        #[arg(long)]
        power: bool,
        #[command(flatten)]
        wavelet: WaveletArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Forward scalograms through the network, or replay a reference fixture.
    Infer {
        /// EEGS input (ignored with --fixture).
        #[arg(long, value_name = "PATH", required_unless_present = "fixture")]
        input: Option<PathBuf>,
        /// EEGF fixture to replay against --weights.
        #[arg(long, value_name = "PATH", requires = "weights")]
        fixture: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        weights: Option<PathBuf>,
        /// Absolute per-element tolerance for fixture replay.
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Extract pooled backbone features into an EEGW archive.
    Features {
        /// EEGS input.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        weights: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Train the classification head on features (EEGW) or scalograms (EEGS).
    TrainHead {
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        #[arg(long, value_name = "PATH")]
        weights: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Subject-wise k-fold evaluation; writes an EvalReport JSON.
    Eval {
        /// EEGS scalograms or EEGX trials (aligned and transformed first).
        #[arg(long, value_name = "PATH", required_unless_present = "manifest")]
        input: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        manifest: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        weights: Option<PathBuf>,
        #[arg(long, value_name = "PATH")]
        out: Option<PathBuf>,
        #[command(flatten)]
        wavelet: WaveletArgs,
        #[command(flatten)]
        align: AlignArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render one channel of one scalogram as a P6 image.
    PlotScalogram {
        /// EEGS input.
        #[arg(long, value_name = "PATH")]
        input: PathBuf,
        #[arg(long, default_value_t = 0)]
        index: usize,
        #[arg(long, default_value_t = 0)]
        channel: usize,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Render a wavelet's real/imaginary parts and energy spectrum as a P6 image.
    PlotWavelet {
        /// Scale a.
        #[arg(long, default_value_t = 10.0)]
        scale: f64,
        /// Sampling rate in Hz.
        #[arg(long, default_value_t = 100.0)]
        fs: f64,
        #[arg(long, value_name = "PATH")]
        out: PathBuf,
        #[command(flatten)]
        wavelet: WaveletArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// List the tensors of an EEGW archive and check them against the network layout.
    InspectWeights {
        #[arg(long, value_name = "PATH")]
        weights: PathBuf,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Print the per-layer parameter table for a network configuration.
    ParamReport {
        #[arg(long, default_value_t = 2)]
        channels: usize,
        #[arg(long, default_value_t = 50)]
        scales: usize,
        #[arg(long, default_value_t = 3000)]
        samples: usize,
        #[arg(long, default_value_t = 5)]
        labels: usize,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.downcast_ref::<UsageError>().is_some() || err.downcast_ref::<clap::Error>().is_some() {
        return 2;
    }
    for cause in err.chain() {
        if let Some(WaveletError::BadScaleConfig(_) | WaveletError::UnsupportedFamilyParam(_)) =
            cause.downcast_ref::<WaveletError>()
        {
            return 2;
        }
    }
    1
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(exit_code(&err))
        }
    }
}
