use crate::nn::{Element, NnError, Tensor};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Per-channel batch normalization over `[batch, channels, h, w]`.
///
/// Training mode normalizes with batch statistics and folds them into the
/// running estimates (unbiased variance); evaluation mode uses the running
/// estimates. `gamma`/`beta` are trainable; the running statistics are
/// buffers that travel with the model but receive no gradient.
#[derive(Debug, Clone)]
pub struct BatchNorm2d<E> {
    pub channels: usize,
    pub gamma: Tensor<E>,
    pub beta: Tensor<E>,
    pub running_mean: Tensor<E>,
    pub running_var: Tensor<E>,
    grad_gamma: Tensor<E>,
    grad_beta: Tensor<E>,
    cache: Option<BnCache<E>>,
}

#[derive(Debug, Clone)]
struct BnCache<E> {
    shape: Vec<usize>,
    xhat: Vec<E>,
    inv_std: Vec<E>,
    train: bool,
}

impl<E: Element> BatchNorm2d<E> {
    pub fn new(channels: usize) -> Self {
        let mut gamma = Tensor::zeros(vec![channels]);
        gamma.fill(E::one());
        let mut running_var = Tensor::zeros(vec![channels]);
        running_var.fill(E::one());
        BatchNorm2d {
            channels,
            gamma,
            beta: Tensor::zeros(vec![channels]),
            running_mean: Tensor::zeros(vec![channels]),
            running_var,
            grad_gamma: Tensor::zeros(vec![channels]),
            grad_beta: Tensor::zeros(vec![channels]),
            cache: None,
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        match input {
            [c, _, _] if *c == self.channels => Ok(input.to_vec()),
            _ => Err(NnError::ShapeMismatch {
                expected: vec![self.channels, 0, 0],
                got: input.to_vec(),
            }),
        }
    }

    pub fn forward(&mut self, x: &Tensor<E>, train: bool) -> Result<Tensor<E>, NnError> {
        self.output_shape(&x.shape()[1..])?;
        let (batch, c) = (x.batch(), self.channels);
        let plane = x.shape()[2] * x.shape()[3];
        let count = batch * plane;
        let xd = x.data();
        let eps = E::of_f64(BN_EPS);
        let momentum = E::of_f64(BN_MOMENTUM);

        let mut mean = vec![E::zero(); c];
        let mut var = vec![E::zero(); c];
        if train {
            let n = E::of_f64(count as f64);
            for ch in 0..c {
                let vals = (0..batch).flat_map(|b| {
                    let start = (b * c + ch) * plane;
                    xd[start..start + plane].iter().copied()
                });
                let m = vals.clone().sum::<E>() / n;
                let v = vals.map(|x| (x - m) * (x - m)).sum::<E>() / n;
                mean[ch] = m;
                var[ch] = v;
            }
            let unbias = if count > 1 {
                E::of_f64(count as f64 / (count - 1) as f64)
            } else {
                E::one()
            };
            let rm = self.running_mean.data_mut();
            for ch in 0..c {
                rm[ch] = (E::one() - momentum) * rm[ch] + momentum * mean[ch];
            }
            let rv = self.running_var.data_mut();
            for ch in 0..c {
                rv[ch] = (E::one() - momentum) * rv[ch] + momentum * var[ch] * unbias;
            }
        } else {
            mean.copy_from_slice(self.running_mean.data());
            var.copy_from_slice(self.running_var.data());
        }

        let inv_std: Vec<E> = var.iter().map(|v| E::one() / (*v + eps).sqrt()).collect();
        let mut xhat = vec![E::zero(); xd.len()];
        let mut out = vec![E::zero(); xd.len()];
        let (gamma, beta) = (self.gamma.data(), self.beta.data());
        for b in 0..batch {
            for ch in 0..c {
                let start = (b * c + ch) * plane;
                for i in start..start + plane {
                    xhat[i] = (xd[i] - mean[ch]) * inv_std[ch];
                    out[i] = gamma[ch] * xhat[i] + beta[ch];
                }
            }
        }
        self.cache = Some(BnCache {
            shape: x.shape().to_vec(),
            xhat,
            inv_std,
            train,
        });
        Tensor::new(x.shape().to_vec(), out)
    }

    pub fn backward(&mut self, grad: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        let cache = self.cache.as_ref().ok_or(NnError::BackwardBeforeForward)?;
        if grad.shape() != cache.shape.as_slice() {
            return Err(NnError::ShapeMismatch {
                expected: cache.shape.clone(),
                got: grad.shape().to_vec(),
            });
        }
        let (batch, c) = (cache.shape[0], self.channels);
        let plane = cache.shape[2] * cache.shape[3];
        let n = E::of_f64((batch * plane) as f64);
        let g = grad.data();
        let gamma = self.gamma.data();
        let mut dx = vec![E::zero(); g.len()];
        let mut dgamma = vec![E::zero(); c];
        let mut dbeta = vec![E::zero(); c];

        for ch in 0..c {
            let idx = || (0..batch).flat_map(move |b| ((b * c + ch) * plane)..((b * c + ch) * plane + plane));
            let (mut sum_g, mut sum_gx) = (E::zero(), E::zero());
            for i in idx() {
                sum_g = sum_g + g[i];
                sum_gx = sum_gx + g[i] * cache.xhat[i];
            }
            dbeta[ch] = sum_g;
            dgamma[ch] = sum_gx;
            let scale = gamma[ch] * cache.inv_std[ch];
            for i in idx() {
                dx[i] = if cache.train {
                    scale * (g[i] - sum_g / n - cache.xhat[i] * sum_gx / n)
                } else {
                    scale * g[i]
                };
            }
        }
        self.grad_gamma.data_mut().copy_from_slice(&dgamma);
        self.grad_beta.data_mut().copy_from_slice(&dbeta);
        Tensor::new(cache.shape.clone(), dx)
    }

    pub fn params(&self) -> Vec<&Tensor<E>> {
        vec![&self.gamma, &self.beta]
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<E>> {
        vec![&mut self.gamma, &mut self.beta]
    }

    pub fn grads(&self) -> Vec<&Tensor<E>> {
        vec![&self.grad_gamma, &self.grad_beta]
    }

    pub fn buffers(&self) -> Vec<&Tensor<E>> {
        vec![&self.running_mean, &self.running_var]
    }

    pub fn buffers_mut(&mut self) -> Vec<&mut Tensor<E>> {
        vec![&mut self.running_mean, &mut self.running_var]
    }
}
