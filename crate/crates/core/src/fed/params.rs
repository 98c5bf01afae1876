use super::FedError;
use crate::nn::{Dtype, Element, Model};

/// A model's full transmitted state (parameters then buffers, layer by
/// layer) tagged with its element type. Values are held as f64; when the
/// tag is F32 every value is exactly representable in f32.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch_name: String,
    dtype: Dtype,
    values: Vec<f64>,
}

impl ModelParams {
    pub fn new(arch_name: impl Into<String>, dtype: Dtype, values: Vec<f64>) -> Result<Self, FedError> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(FedError::NonFinite(format!("value {i} is {}", values[i])));
        }
        if values.iter().any(|&v| dtype.round(v) != v) {
            return Err(FedError::LossyCast {
                from: Dtype::F64,
                to: dtype,
            });
        }
        Ok(ModelParams {
            arch_name: arch_name.into(),
            dtype,
            values,
        })
    }

    pub fn from_model<E: Element>(arch_name: impl Into<String>, model: &Model<E>) -> Result<Self, FedError> {
        ModelParams::new(arch_name, E::DTYPE, model.state_values())
    }

    pub fn arch_name(&self) -> &str {
        &self.arch_name
    }

    pub fn dtype(&self) -> Dtype {
        self.dtype
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Re-tags the values. Narrowing is refused if any value would change,
    /// unless `allow_lossy` is set, in which case values are rounded.
    pub fn cast(&self, target: Dtype, allow_lossy: bool) -> Result<ModelParams, FedError> {
        if target == self.dtype {
            return Ok(self.clone());
        }
        let exact = self.values.iter().all(|&v| target.round(v) == v);
        if !exact && !allow_lossy {
            return Err(FedError::LossyCast {
                from: self.dtype,
                to: target,
            });
        }
        let values: Vec<f64> = self.values.iter().map(|&v| target.round(v)).collect();
        // Rounding a large f64 can overflow f32.
        ModelParams::new(self.arch_name.clone(), target, values)
    }

    /// Loads these values into `model`, which must have the same element type.
    pub fn load_into<E: Element>(&self, model: &mut Model<E>) -> Result<(), FedError> {
        if self.dtype != E::DTYPE {
            return Err(FedError::ArchMismatch(format!(
                "{} parameters loaded into a {} model",
                self.dtype,
                E::DTYPE
            )));
        }
        if self.values.len() != model.transmitted_count() {
            return Err(FedError::ArchMismatch(format!(
                "`{}` has {} values, model expects {}",
                self.arch_name,
                self.values.len(),
                model.transmitted_count()
            )));
        }
        model.load_state(&self.values)?;
        Ok(())
    }
}
