use crate::nn::{Element, NnError, Tensor};

/// Max pooling over square windows, no padding, floor output size.
#[derive(Debug, Clone)]
pub struct MaxPool2d {
    pub kernel: usize,
    pub stride: usize,
    // flat input index of each output's max, plus the input shape
    argmax: Option<(Vec<usize>, Vec<usize>)>,
}

impl MaxPool2d {
    pub fn new(kernel: usize, stride: usize) -> Self {
        MaxPool2d {
            kernel,
            stride,
            argmax: None,
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        match *input {
            [c, h, w] if h >= self.kernel && w >= self.kernel => Ok(vec![
                c,
                (h - self.kernel) / self.stride + 1,
                (w - self.kernel) / self.stride + 1,
            ]),
            _ => Err(NnError::ShapeMismatch {
                expected: vec![0, self.kernel, self.kernel],
                got: input.to_vec(),
            }),
        }
    }

    pub fn forward<E: Element>(&mut self, x: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        let out_shape = self.output_shape(&x.shape()[1..])?;
        let (batch, h, w) = (x.batch(), x.shape()[2], x.shape()[3]);
        let (c, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);
        let xd = x.data();
        let mut out = Vec::with_capacity(batch * c * oh * ow);
        let mut arg = Vec::with_capacity(out.capacity());
        for plane in 0..batch * c {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + oy * self.stride * w + ox * self.stride;
                    for ky in 0..self.kernel {
                        for kx in 0..self.kernel {
                            let idx = base + (oy * self.stride + ky) * w + ox * self.stride + kx;
                            if xd[idx] > xd[best] {
                                best = idx;
                            }
                        }
                    }
                    out.push(xd[best]);
                    arg.push(best);
                }
            }
        }
        self.argmax = Some((arg, x.shape().to_vec()));
        Tensor::new(vec![batch, c, oh, ow], out)
    }

    pub fn backward<E: Element>(&mut self, grad: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        let (arg, in_shape) = self.argmax.as_ref().ok_or(NnError::BackwardBeforeForward)?;
        if grad.len() != arg.len() {
            return Err(NnError::ShapeMismatch {
                expected: vec![arg.len()],
                got: grad.shape().to_vec(),
            });
        }
        let mut dx = Tensor::zeros(in_shape.clone());
        let d = dx.data_mut();
        for (&src, &g) in arg.iter().zip(grad.data()) {
            d[src] = d[src] + g;
        }
        Ok(dx)
    }
}
