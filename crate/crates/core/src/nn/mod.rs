//! Minimal dense training engine: tensors, a fixed set of layer kinds,
//! softmax cross-entropy and SGD with momentum.

pub mod gradcheck;
pub mod layers;
mod loss;
mod model;
mod optim;
mod tensor;

pub use layers::{BatchNorm2d, Conv2d, Dense, Flatten, Layer, LayerKind, MaxPool2d, Relu};
pub use loss::{cross_entropy, cross_entropy_with_grad, LossValue};
pub use model::{argmax, Model};
pub use optim::SgdMomentum;
pub use tensor::{Dtype, Element, Tensor};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NnError {
    #[error("shape mismatch: expected {expected:?}, got {got:?}")]
    ShapeMismatch { expected: Vec<usize>, got: Vec<usize> },
    #[error("non-finite values produced by {0}")]
    NonFinite(&'static str),
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("model output shape {0:?} is not a logits vector")]
    NotLogits(Vec<usize>),
    #[error("state vector has {got} values, model expects {expected}")]
    StateLength { expected: usize, got: usize },
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparameter(String),
}
