//! EEG trial classification from wavelet scalograms.
//!
//! The pipeline reads EDF recordings into labelled trials ([`ingest`]),
//! whitens each subject's trials ([`align`]), turns every channel into a
//! continuous-wavelet scalogram ([`wavelet`]), runs a ConvNeXt-tiny backbone
//! over the scalograms ([`nn`]) and trains a linear head with subject-wise
//! cross-validation ([`train`]).

pub mod align;
pub mod codec;
pub mod ingest;
pub mod nn;
pub mod train;
pub mod synth;
pub mod wavelet;

pub use align::{align_all, align_subject, AlignError, AlignOptions, Whitener};
pub use codec::FormatError;
pub use ingest::{IngestError, Trial};
pub use nn::{build_network, Network, NetworkMeta, NnError, StemMode, TensorF32, WeightArchive};
pub use train::{EvalReport, PipelineConfig, TrainConfig, TrainError};
pub use wavelet::{make_scales, Family, ScaleMode, ScaleSet, Scalogram, WaveletError, WaveletSpec};
