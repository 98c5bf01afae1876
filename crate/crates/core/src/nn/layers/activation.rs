use crate::nn::{Element, NnError, Tensor};

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Option<Vec<bool>>,
}

impl Relu {
    pub fn forward<E: Element>(&mut self, x: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        let mask: Vec<bool> = x.data().iter().map(|v| *v > E::zero()).collect();
        let out = x
            .data()
            .iter()
            .zip(&mask)
            .map(|(v, &keep)| if keep { *v } else { E::zero() })
            .collect();
        self.mask = Some(mask);
        Tensor::new(x.shape().to_vec(), out)
    }

    pub fn backward<E: Element>(&mut self, grad: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        let mask = self.mask.as_ref().ok_or(NnError::BackwardBeforeForward)?;
        if mask.len() != grad.len() {
            return Err(NnError::ShapeMismatch {
                expected: vec![mask.len()],
                got: grad.shape().to_vec(),
            });
        }
        let out = grad
            .data()
            .iter()
            .zip(mask)
            .map(|(g, &keep)| if keep { *g } else { E::zero() })
            .collect();
        Tensor::new(grad.shape().to_vec(), out)
    }
}

/// Collapses every non-batch axis into one.
#[derive(Debug, Clone, Default)]
pub struct Flatten {
    input_shape: Option<Vec<usize>>,
}

impl Flatten {
    pub fn output_shape(input: &[usize]) -> Vec<usize> {
        vec![input.iter().product()]
    }

    pub fn forward<E: Element>(&mut self, x: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        self.input_shape = Some(x.shape().to_vec());
        let features = x.len() / x.batch();
        x.clone().reshape(vec![x.batch(), features])
    }

    pub fn backward<E: Element>(&mut self, grad: &Tensor<E>) -> Result<Tensor<E>, NnError> {
        let shape = self.input_shape.clone().ok_or(NnError::BackwardBeforeForward)?;
        grad.clone().reshape(shape)
    }
}
