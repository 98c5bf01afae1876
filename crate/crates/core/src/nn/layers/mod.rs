//! Layer kinds the training engine can execute.

mod activation;
mod batchnorm;
mod conv;
mod dense;
mod pool;

pub use activation::{Flatten, Relu};
pub use batchnorm::{BatchNorm2d, BN_EPS, BN_MOMENTUM};
pub use conv::Conv2d;
pub use dense::Dense;
pub use pool::MaxPool2d;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Element, NnError, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LayerKind {
    Dense,
    Conv2d,
    MaxPool2d,
    Relu,
    Flatten,
    BatchNorm2d,
}

impl LayerKind {
    pub fn name(self) -> &'static str {
        match self {
            LayerKind::Dense => "dense",
            LayerKind::Conv2d => "conv2d",
            LayerKind::MaxPool2d => "maxpool2d",
            LayerKind::Relu => "relu",
            LayerKind::Flatten => "flatten",
            LayerKind::BatchNorm2d => "batchnorm2d",
        }
    }
}

#[derive(Debug, Clone)]
pub enum Layer<E> {
    Dense(Dense<E>),
    Conv2d(Conv2d<E>),
    MaxPool2d(MaxPool2d),
    Relu(Relu),
    Flatten(Flatten),
    BatchNorm2d(BatchNorm2d<E>),
}

impl<E: Element> Layer<E> {
    pub fn kind(&self) -> LayerKind {
        match self {
            Layer::Dense(_) => LayerKind::Dense,
            Layer::Conv2d(_) => LayerKind::Conv2d,
            Layer::MaxPool2d(_) => LayerKind::MaxPool2d,
            Layer::Relu(_) => LayerKind::Relu,
            Layer::Flatten(_) => LayerKind::Flatten,
            Layer::BatchNorm2d(_) => LayerKind::BatchNorm2d,
        }
    }

    /// Per-sample output shape for a per-sample input shape, without
    /// touching any data.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        match self {
            Layer::Dense(l) => l.output_shape(input),
            Layer::Conv2d(l) => l.output_shape(input),
            Layer::MaxPool2d(l) => l.output_shape(input),
            Layer::Relu(_) => Ok(input.to_vec()),
            Layer::Flatten(_) => Ok(Flatten::output_shape(input)),
            Layer::BatchNorm2d(l) => l.output_shape(input),
        }
    }

    pub fn forward(&mut self, x: &Tensor<E>, train: bool) -> Result<Tensor<E>, NnError> {
        match self {
            Layer::Dense(l) => l.forward(x),
            Layer::Conv2d(l) => l.forward(x),
            Layer::MaxPool2d(l) => l.forward(x),
            Layer::Relu(l) => l.forward(x),
            Layer::Flatten(l) => l.forward(x),
            Layer::BatchNorm2d(l) => l.forward(x, train),
        }
    }

    /// Consumes the gradient w.r.t. this layer's output, fills the
    /// parameter gradient buffers and returns the gradient w.r.t. the input.
    pub fn backward(&mut self, grad: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        match self {
            Layer::Dense(l) => l.backward(grad),
            Layer::Conv2d(l) => l.backward(grad),
            Layer::MaxPool2d(l) => l.backward(grad),
            Layer::Relu(l) => l.backward(grad),
            Layer::Flatten(l) => l.backward(grad),
            Layer::BatchNorm2d(l) => l.backward(grad),
        }
    }

    /// Trainable parameters in canonical order.
    pub fn params(&self) -> Vec<&Tensor<E>> {
        match self {
            Layer::Dense(l) => l.params(),
            Layer::Conv2d(l) => l.params(),
            Layer::BatchNorm2d(l) => l.params(),
            _ => Vec::new(),
        }
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<E>> {
        match self {
            Layer::Dense(l) => l.params_mut(),
            Layer::Conv2d(l) => l.params_mut(),
            Layer::BatchNorm2d(l) => l.params_mut(),
            _ => Vec::new(),
        }
    }

    /// Gradient buffers, parallel to [`Layer::params`].
    pub fn grads(&self) -> Vec<&Tensor<E>> {
        match self {
            Layer::Dense(l) => l.grads(),
            Layer::Conv2d(l) => l.grads(),
            Layer::BatchNorm2d(l) => l.grads(),
            _ => Vec::new(),
        }
    }

    /// Non-trainable state that is still exchanged with the model.
    pub fn buffers(&self) -> Vec<&Tensor<E>> {
        match self {
            Layer::BatchNorm2d(l) => l.buffers(),
            _ => Vec::new(),
        }
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor<E>> {
        match self {
            Layer::BatchNorm2d(l) => l.buffers_mut(),
            _ => Vec::new(),
        }
    }

    /// Parameters followed by buffers: the order values are flattened in.
    pub fn state(&self) -> Vec<&Tensor<E>> {
        let mut out = self.params();
        out.extend(self.buffers());
        out
    }

    pub fn state_mut(&mut self) -> Vec<&mut Tensor<E>> {
        match self {
            Layer::BatchNorm2d(l) => vec![&mut l.gamma, &mut l.beta, &mut l.running_mean, &mut l.running_var],
            other => other.params_mut(),
        }
    }
}

pub(crate) fn uniform_init<E: Element, R: Rng>(shape: Vec<usize>, bound: f64, rng: &mut R) -> Tensor<E> {
    let mut t = Tensor::zeros(shape);
    for v in t.data_mut() {
        *v = E::of_f64(rng.random_range(-bound..=bound));
    }
    t
}
