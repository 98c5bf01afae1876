use super::{Element, Model, NnError, Tensor};

/// SGD with classical momentum: `v ← μ·v + g`, `w ← w − η·v`.
///
/// Velocity buffers are created on the first step and mirror the model's
/// trainable parameter shapes.
#[derive(Debug, Clone)]
pub struct SgdMomentum<E> {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Vec<Tensor<E>>,
}

impl<E: Element> SgdMomentum<E> {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<Self, NnError> {
        if !(learning_rate.is_finite() && learning_rate >= 0.0) {
            return Err(NnError::InvalidHyperparameter(format!(
                "learning rate must be finite and >= 0, got {learning_rate}"
            )));
        }
        if !(0.0..1.0).contains(&momentum) {
            return Err(NnError::InvalidHyperparameter(format!(
                "momentum must be in [0, 1), got {momentum}"
            )));
        }
        Ok(SgdMomentum {
            learning_rate,
            momentum,
            velocity: Vec::new(),
        })
    }

    pub fn velocity(&self) -> &[Tensor<E>] {
        &self.velocity
    }

    pub fn reset(&mut self) {
        self.velocity.clear();
    }

    pub fn step(&mut self, model: &mut Model<E>) {
        let lr = E::of_f64(self.learning_rate);
        let mu = E::of_f64(self.momentum);
        if self.velocity.is_empty() {
            self.velocity = model
                .layers()
                .iter()
                .flat_map(|l| l.params())
                .map(|p| Tensor::zeros(p.shape().to_vec()))
                .collect();
        }
        let mut slot = 0;
        for layer in model.layers_mut() {
            let grads: Vec<Vec<E>> = layer.grads().iter().map(|g| g.data().to_vec()).collect();
            for (param, grad) in layer.params_mut().into_iter().zip(grads) {
                let v = self.velocity[slot].data_mut();
                for ((w, v), g) in param.data_mut().iter_mut().zip(v.iter_mut()).zip(grad) {
                    *v = mu * *v + g;
                    *w = *w - lr * *v;
                }
                slot += 1;
            }
        }
    }
}
