use serde::{Deserialize, Serialize};

use super::DataError;
use crate::nn::{Element, Tensor};

/// Labelled samples stored row-major: `features[i * dim .. (i + 1) * dim]`
/// is sample `i`, interpreted with `sample_shape` (`[d]` or `[c, h, w]`).
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    features: Vec<f64>,
    sample_shape: Vec<usize>,
    labels: Vec<usize>,
    class_names: Vec<String>,
}

impl Dataset {
    pub fn new(
        features: Vec<f64>,
        sample_shape: Vec<usize>,
        labels: Vec<usize>,
        class_names: Vec<String>,
    ) -> Result<Self, DataError> {
        let dim: usize = sample_shape.iter().product();
        if dim == 0 {
            return Err(DataError::Invalid(format!("bad sample shape {sample_shape:?}")));
        }
        if features.len() != dim * labels.len() {
            return Err(DataError::Invalid(format!(
                "{} feature values do not fill {} samples of {dim}",
                features.len(),
                labels.len()
            )));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= class_names.len()) {
            return Err(DataError::Invalid(format!(
                "label {bad} out of range for {} classes",
                class_names.len()
            )));
        }
        Ok(Dataset {
            features,
            sample_shape,
            labels,
            class_names,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.sample_shape.iter().product()
    }

    pub fn sample_shape(&self) -> &[usize] {
        &self.sample_shape
    }

    pub fn num_classes(&self) -> usize {
        self.class_names.len()
    }

    pub fn class_names(&self) -> &[String] {
        &self.class_names
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn features(&self) -> &[f64] {
        &self.features
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.features[i * d..(i + 1) * d]
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Reinterprets each sample with a new shape of equal size.
    pub fn with_sample_shape(mut self, shape: Vec<usize>) -> Result<Self, DataError> {
        if shape.iter().product::<usize>() != self.dim() || shape.contains(&0) {
            return Err(DataError::Invalid(format!(
                "cannot view {:?} samples as {shape:?}",
                self.sample_shape
            )));
        }
        self.sample_shape = shape;
        Ok(self)
    }

    /// Gathers the given samples into a `[batch, ..sample_shape]` tensor.
    pub fn batch<E: Element>(&self, indices: &[usize]) -> (Tensor<E>, Vec<usize>) {
        let d = self.dim();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            data.extend(self.sample(i).iter().map(|&v| E::of_f64(v)));
        }
        let mut shape = vec![indices.len()];
        shape.extend(&self.sample_shape);
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        (
            Tensor::new(shape, data).expect("gathered batch matches its shape"),
            labels,
        )
    }
}

/// Fractions of the dataset assigned to each fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_frac: f64,
    pub val_frac: f64,
    pub test_frac: f64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_frac: 0.8,
            val_frac: 0.1,
            test_frac: 0.1,
        }
    }
}

impl SplitSpec {
    pub fn new(train_frac: f64, val_frac: f64, test_frac: f64) -> Result<Self, DataError> {
        let spec = SplitSpec {
            train_frac,
            val_frac,
            test_frac,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DataError> {
        let fracs = [self.train_frac, self.val_frac, self.test_frac];
        if fracs.iter().any(|f| !(f.is_finite() && *f >= 0.0)) {
            return Err(DataError::Invalid(format!(
                "negative or non-finite split fraction in {fracs:?}"
            )));
        }
        if (fracs.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(DataError::Invalid(format!("split fractions {fracs:?} do not sum to 1")));
        }
        Ok(())
    }
}

/// Sorted index sets of the three folds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

/// One client's partition of the training set.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClientShard {
    pub client_id: usize,
    pub indices: Vec<usize>,
}

impl ClientShard {
    pub fn n_k(&self) -> usize {
        self.indices.len()
    }
}
