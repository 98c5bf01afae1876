//! Architecture descriptors, exact parameter counting and model building.

mod catalog;
mod descriptor;
mod spec;
mod text;

pub use catalog::{
    alexnet, lookup, resnet18, shufflenet_v2_x1_0, squeezenet_v1_0, tiny_cnn, tiny_cnn_bn, tiny_mlp, vgg11_batchnorm,
    DESK_MODELS, IMAGENET_INPUT, REFERENCE_CNNS,
};
pub use descriptor::{ArchDescriptor, LayerReport};
pub use spec::{LayerSpec, ParamCount};
pub use text::{load_descriptor, parse_descriptor, render_descriptor};

use thiserror::Error;

use crate::nn::NnError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ArchError {
    #[error("inconsistent descriptor at layer {layer}: {reason}")]
    Inconsistent { layer: usize, reason: String },
    #[error("descriptor `{0}` is catalog-only and cannot be built")]
    NotTrainable(String),
    #[error("unknown architecture `{0}`")]
    UnknownArch(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("{0}")]
    Io(String),
    #[error(transparent)]
    Nn(#[from] NnError),
}
