use rand::Rng;

use crate::nn::{Element, NnError, Tensor};

use super::uniform_init;

/// 2-D convolution over `[batch, channels, height, width]` input with
/// square stride and symmetric zero padding. Weight shape `[out, in, kh, kw]`.
#[derive(Debug, Clone)]
pub struct Conv2d<E> {
    pub in_channels: usize,
    pub out_channels: usize,
    pub kernel: (usize, usize),
    pub stride: usize,
    pub padding: usize,
    pub weight: Tensor<E>,
    pub bias: Option<Tensor<E>>,
    grad_weight: Tensor<E>,
    grad_bias: Option<Tensor<E>>,
    input: Option<Tensor<E>>,
}

impl<E: Element> Conv2d<E> {
    pub fn new<R: Rng>(
        in_channels: usize,
        out_channels: usize,
        kernel: (usize, usize),
        stride: usize,
        padding: usize,
        bias: bool,
        rng: &mut R,
    ) -> Self {
        let fan_in = in_channels * kernel.0 * kernel.1;
        let bound = (1.0 / fan_in as f64).sqrt();
        let wshape = vec![out_channels, in_channels, kernel.0, kernel.1];
        let weight = uniform_init(wshape.clone(), bound, rng);
        let bias = bias.then(|| uniform_init(vec![out_channels], bound, rng));
        Conv2d {
            in_channels,
            out_channels,
            kernel,
            stride,
            padding,
            grad_weight: Tensor::zeros(wshape),
            grad_bias: bias.as_ref().map(|_| Tensor::zeros(vec![out_channels])),
            weight,
            bias,
            input: None,
        }
    }

    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>, NnError> {
        let mismatch = || NnError::ShapeMismatch {
            expected: vec![self.in_channels, 0, 0],
            got: input.to_vec(),
        };
        let [c, h, w] = <[usize; 3]>::try_from(input).map_err(|_| mismatch())?;
        if c != self.in_channels || h + 2 * self.padding < self.kernel.0 || w + 2 * self.padding < self.kernel.1 {
            return Err(mismatch());
        }
        Ok(vec![
            self.out_channels,
            (h + 2 * self.padding - self.kernel.0) / self.stride + 1,
            (w + 2 * self.padding - self.kernel.1) / self.stride + 1,
        ])
    }

    /// Maps an output position and kernel offset to an input coordinate,
    /// or `None` when it lands in the padding.
    fn source(&self, out_pos: usize, k: usize, extent: usize) -> Option<usize> {
        let pos = (out_pos * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < extent).then_some(pos as usize)
    }

    pub fn forward(&mut self, x: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        let out_shape = self.output_shape(&x.shape()[1..])?;
        let (batch, cin, h, w) = (x.batch(), self.in_channels, x.shape()[2], x.shape()[3]);
        let (cout, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);
        let (kh, kw) = self.kernel;
        let xd = x.data();
        let wd = self.weight.data();
        let mut out = vec![E::zero(); batch * cout * oh * ow];
        for b in 0..batch {
            for o in 0..cout {
                let bias = self.bias.as_ref().map_or(E::zero(), |t| t.data()[o]);
                for oy in 0..oh {
                    for ox in 0..ow {
                        let mut acc = bias;
                        for i in 0..cin {
                            for ky in 0..kh {
                                let Some(iy) = self.source(oy, ky, h) else { continue };
                                for kx in 0..kw {
                                    let Some(ix) = self.source(ox, kx, w) else { continue };
                                    acc = acc
                                        + xd[((b * cin + i) * h + iy) * w + ix]
                                            * wd[((o * cin + i) * kh + ky) * kw + kx];
                                }
                            }
                        }
                        out[((b * cout + o) * oh + oy) * ow + ox] = acc;
                    }
                }
            }
        }
        self.input = Some(x.clone());
        Tensor::new(vec![batch, cout, oh, ow], out)
    }

    pub fn backward(&mut self, grad: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        let x = self.input.as_ref().ok_or(NnError::BackwardBeforeForward)?;
        let out_shape = self.output_shape(&x.shape()[1..])?;
        let (batch, cin, h, w) = (x.batch(), self.in_channels, x.shape()[2], x.shape()[3]);
        let (cout, oh, ow) = (out_shape[0], out_shape[1], out_shape[2]);
        if grad.shape() != [batch, cout, oh, ow] {
            return Err(NnError::ShapeMismatch {
                expected: vec![batch, cout, oh, ow],
                got: grad.shape().to_vec(),
            });
        }
        let (kh, kw) = self.kernel;
        let g = grad.data();
        let xd = x.data();
        let wd = self.weight.data();
        let mut dx = vec![E::zero(); xd.len()];
        let mut gw = vec![E::zero(); wd.len()];
        let mut gb = vec![E::zero(); cout];
        for b in 0..batch {
            for o in 0..cout {
                for oy in 0..oh {
                    for ox in 0..ow {
                        let go = g[((b * cout + o) * oh + oy) * ow + ox];
                        gb[o] = gb[o] + go;
                        if go == E::zero() {
                            continue;
                        }
                        for i in 0..cin {
                            for ky in 0..kh {
                                let Some(iy) = self.source(oy, ky, h) else { continue };
                                for kx in 0..kw {
                                    let Some(ix) = self.source(ox, kx, w) else { continue };
                                    let xi = ((b * cin + i) * h + iy) * w + ix;
                                    let wi = ((o * cin + i) * kh + ky) * kw + kx;
                                    gw[wi] = gw[wi] + go * xd[xi];
                                    dx[xi] = dx[xi] + go * wd[wi];
                                }
                            }
                        }
                    }
                }
            }
        }
        self.grad_weight.data_mut().copy_from_slice(&gw);
        if let Some(t) = &mut self.grad_bias {
            t.data_mut().copy_from_slice(&gb);
        }
        Tensor::new(x.shape().to_vec(), dx)
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
