use rand::Rng;

use crate::nn::{Element, NnError, Tensor};

use super::uniform_init;

/// Fully connected layer: `y = x Wᵀ + b`, weight shape `[out, in]`.
#[derive(Debug, Clone)]
pub struct Dense<E> {
    pub in_features: usize,
    pub out_features: usize,
    pub weight: Tensor<E>,
    pub bias: Option<Tensor<E>>,
    grad_weight: Tensor<E>,
    grad_bias: Option<Tensor<E>>,
    input: Option<Tensor<E>>,
}

impl<E: Element> Dense<E> {
    pub fn new<R: Rng>(in_features: usize, out_features: usize, bias: bool, rng: &mut R) -> Self {
        let bound = (1.0 / in_features as f64).sqrt();
        let weight = uniform_init(vec![out_features, in_features], bound, rng);
        let bias = bias.then(|| uniform_init(vec![out_features], bound, rng));
        Dense {
            in_features,
            out_features,
            grad_weight: Tensor::zeros(vec![out_features, in_features]),
            grad_bias: bias.as_ref().map(|_| Tensor::zeros(vec![out_features])),
            weight,
            bias,
            input: None,
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        if input != [self.in_features] {
            return Err(NnError::ShapeMismatch {
                expected: vec![self.in_features],
                got: input.to_vec(),
            });
        }
        Ok(vec![self.out_features])
    }

    pub fn forward(&mut self, x: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        self.output_shape(&x.shape()[1..])?;
        let (batch, nin, nout) = (x.batch(), self.in_features, self.out_features);
        let w = self.weight.data();
        let xd = x.data();
        let mut out = vec![E::zero(); batch * nout];
        for b in 0..batch {
            let row = &xd[b * nin..(b + 1) * nin];
            for o in 0..nout {
                let wrow = &w[o * nin..(o + 1) * nin];
                let mut acc = E::zero();
                for (a, c) in row.iter().zip(wrow) {
                    acc = acc + *a * *c;
                }
                if let Some(bias) = &self.bias {
                    acc = acc + bias.data()[o];
                }
                out[b * nout + o] = acc;
            }
        }
        self.input = Some(x.clone());
        Tensor::new(vec![batch, nout], out)
    }

    pub fn backward(&mut self, grad: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        let x = self.input.as_ref().ok_or(NnError::BackwardBeforeForward)?;
        let (batch, nin, nout) = (x.batch(), self.in_features, self.out_features);
        if grad.shape() != [batch, nout] {
            return Err(NnError::ShapeMismatch {
                expected: vec![batch, nout],
                got: grad.shape().to_vec(),
            });
        }
        let g = grad.data();
        let xd = x.data();
        let w = self.weight.data();

        let gw = self.grad_weight.data_mut();
        gw.iter_mut().for_each(|v| *v = E::zero());
        let mut dx = vec![E::zero(); batch * nin];
        for b in 0..batch {
            let row = &xd[b * nin..(b + 1) * nin];
            let drow = &mut dx[b * nin..(b + 1) * nin];
            for o in 0..nout {
                let go = g[b * nout + o];
                if go == E::zero() {
                    continue;
                }
                let wrow = &w[o * nin..(o + 1) * nin];
                let gwrow = &mut gw[o * nin..(o + 1) * nin];
                for i in 0..nin {
                    gwrow[i] = gwrow[i] + go * row[i];
                    drow[i] = drow[i] + go * wrow[i];
                }
            }
        }
        if let Some(gb) = &mut self.grad_bias {
            let gb = gb.data_mut();
            gb.iter_mut().for_each(|v| *v = E::zero());
            for b in 0..batch {
                for o in 0..nout {
                    gb[o] = gb[o] + g[b * nout + o];
                }
            }
        }
        Tensor::new(vec![batch, nin], dx)
    }

    pub fn params(&self) -> Vec<&Tensor<E>> {
        std::iter::once(&self.weight).chain(self.bias.as_ref()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor<E>> {
        std::iter::once(&mut self.weight).chain(self.bias.as_mut()).collect()
    }

    pub fn grads(&self) -> Vec<&Tensor<E>> {
        std::iter::once(&self.grad_weight)
            .chain(self.grad_bias.as_ref())
            .collect()
    }
}
