//! Tensor kernels, weight archives and the EEG-NeXt network.

mod archive;
pub mod kernels;
mod network;
mod tensor;

use thiserror::Error;

pub use archive::{decode_fixture, encode_fixture, Fixture, WeightArchive, EEGF_MAGIC, EEGW_MAGIC};
pub use network::{
    build_network, BlockReportRow, LayerDef, LayerKind, LoadSummary, Network, NetworkMeta, ParamRow, StemMode,
    FEATURE_DIM, LN_EPS, TAP_NAMES,
};
pub use tensor::TensorF32;

#[derive(Debug, Error)]
pub enum NnError {
    #[error("ShapeMismatch: {0}")]
    ShapeMismatch(String),
    #[error("GroupMismatch: {cin} input / {cout} output channels are not divisible by {groups} groups")]
    GroupMismatch { groups: usize, cin: usize, cout: usize },
    #[error("NonFiniteActivation in layer {layer}")]
    NonFiniteActivation { layer: String },
    #[error("MissingTensor: {0}")]
    MissingTensor(String),
    #[error(transparent)]
    Format(#[from] crate::codec::FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
