use super::loss::{cross_entropy_with_grad, LossValue};
use super::{Element, Layer, NnError, SgdMomentum, Tensor};

/// Ordered layer stack ending in class logits.
#[derive(Debug, Clone)]
pub struct Model<E> {
    input_shape: Vec<usize>,
    layers: Vec<Layer<E>>,
    num_classes: usize,
    forwarded: bool,
}

impl<E: Element> Model<E> {
    /// Checks the layer chain symbolically; the final output must be a
    /// flat vector of class logits.
    pub fn new(input_shape: Vec<usize>, layers: Vec<Layer<E>>) -> Result<Self, NnError> {
        let mut shape = input_shape.clone();
        for layer in &layers {
            shape = layer.output_shape(&shape)?;
        }
        let num_classes = match shape.as_slice() {
            [c] => *c,
            _ => return Err(NnError::NotLogits(shape)),
        };
        Ok(Model {
            input_shape,
            layers,
            num_classes,
            forwarded: false,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn layers(&self) -> &[Layer<E>] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer<E>] {
        &mut self.layers
    }

    /// Per-sample output shape after every layer, computed without data.
    pub fn shape_trace(&self) -> Result<Vec<Vec<usize>>, NnError> {
        let mut shape = self.input_shape.clone();
        let mut out = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            shape = layer.output_shape(&shape)?;
            out.push(shape.clone());
        }
        Ok(out)
    }

    pub fn forward(&mut self, x: &Tensor<E>, train: bool) -> Result<Tensor<E>, NnError> {
        if x.shape().len() != self.input_shape.len() + 1 || x.shape()[1..] != self.input_shape[..] {
            let mut expected = vec![x.shape().first().copied().unwrap_or(0)];
            expected.extend(&self.input_shape);
            return Err(NnError::ShapeMismatch {
                expected,
                got: x.shape().to_vec(),
            });
        }
        let mut h = x.clone();
        for layer in &mut self.layers {
            h = layer.forward(&h, train)?;
            if !h.is_finite() {
                return Err(NnError::NonFinite(layer.kind().name()));
            }
        }
        self.forwarded = true;
        Ok(h)
    }

    /// Backpropagates a gradient w.r.t. the logits; returns the gradient
    /// w.r.t. the input.
    pub fn backward(&mut self, grad: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        if !self.forwarded {
            return Err(NnError::BackwardBeforeForward);
        }
        let mut g = grad.clone();
        for layer in self.layers.iter_mut().rev() {
            g = layer.backward(&g)?;
        }
        if !self.layers.iter().all(|l| l.grads().iter().all(|t| t.is_finite())) {
            return Err(NnError::NonFinite("gradient"));
        }
        Ok(g)
    }

    /// Forward in training mode, cross-entropy, backward. Gradients are left
    /// in the layers' buffers.
    pub fn loss_and_grad(&mut self, x: &Tensor<E>, labels: &[usize]) -> Result<LossValue, NnError> {
        let logits = self.forward(x, true)?;
        let (loss, grad) = cross_entropy_with_grad(&logits, labels)?;
        self.backward(&grad)?;
        Ok(loss)
    }

    /// One optimizer step on a batch; returns the loss before the update.
    pub fn train_batch(
        &mut self,
        x: &Tensor<E>,
        labels: &[usize],
        opt: &mut SgdMomentum<E>,
    ) -> Result<LossValue, NnError> {
        let loss = self.loss_and_grad(x, labels)?;
        opt.step(self);
        Ok(loss)
    }

    /// Evaluation-mode logits.
    pub fn infer(&mut self, x: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        let out = self.forward(x, false);
        self.forwarded = false;
        out
    }

    pub fn trainable_count(&self) -> usize {
        self.layers.iter().flat_map(|l| l.params()).map(|t| t.len()).sum()
    }

    /// Trainable parameters plus buffers: everything that is exchanged.
    pub fn transmitted_count(&self) -> usize {
        self.layers.iter().flat_map(|l| l.state()).map(|t| t.len()).sum()
    }

    /// Flattens the full state in canonical layer order.
    pub fn state_values(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(|l| l.state())
            .flat_map(|t| t.data().iter().map(|v| v.as_f64()))
            .collect()
    }

    pub fn load_state(&mut self, values: &[f64]) -> Result<(), NnError> {
        let expected = self.transmitted_count();
        if values.len() != expected {
            return Err(NnError::StateLength {
                expected,
                got: values.len(),
            });
        }
        let mut offset = 0;
        for layer in &mut self.layers {
            for t in layer.state_mut() {
                let n = t.len();
                for (dst, src) in t.data_mut().iter_mut().zip(&values[offset..offset + n]) {
                    *dst = E::of_f64(*src);
                }
                offset += n;
            }
        }
        Ok(())
    }
}

pub fn argmax<E: Element>(row: &[E]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}
