use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DataError, Dataset};

/// Per-class sample counts of the maize leaf subset: common rust, gray
/// leaf spot, northern leaf blight, healthy.
pub const MAIZE_CLASS_COUNTS: [usize; 4] = [1192, 513, 985, 1162];
pub const MAIZE_CLASS_NAMES: [&str; 4] = ["common_rust", "gray_leaf_spot", "northern_leaf_blight", "healthy"];

/// Gaussian clusters with unit covariance, one mean per class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlobSpec {
    pub class_counts: Vec<usize>,
    pub dim: usize,
    pub separation: f64,
    pub seed: u64,
}

impl Default for BlobSpec {
    fn default() -> Self {
        BlobSpec {
            class_counts: MAIZE_CLASS_COUNTS.to_vec(),
            dim: 16,
            separation: 10.0,
            seed: 0,
        }
    }
}

/// Class means are `separation · e_c` when there are no more classes than
/// dimensions, otherwise seeded random unit directions scaled by
/// `separation`. Samples are emitted class by class.
pub fn generate_blobs(spec: &BlobSpec) -> Result<Dataset, DataError> {
    if !(spec.separation.is_finite() && spec.separation > 0.0) {
        return Err(DataError::Invalid(format!(
            "separation must be > 0, got {}",
            spec.separation
        )));
    }
    if spec.dim == 0 || spec.class_counts.is_empty() {
        return Err(DataError::Invalid(
            "blobs need at least one class and one dimension".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let classes = spec.class_counts.len();
    let means: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            if classes <= spec.dim {
                let mut m = vec![0.0; spec.dim];
                m[c] = spec.separation;
                m
            } else {
                let dir: Vec<f64> = (0..spec.dim).map(|_| rng.sample(StandardNormal)).collect();
                let norm = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                dir.iter().map(|v| v / norm * spec.separation).collect()
            }
        })
        .collect();

    let total: usize = spec.class_counts.iter().sum();
    let mut features = Vec::with_capacity(total * spec.dim);
    let mut labels = Vec::with_capacity(total);
    for (c, &count) in spec.class_counts.iter().enumerate() {
        for _ in 0..count {
            features.extend(means[c].iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)));
            labels.push(c);
        }
    }
    let names = if classes == MAIZE_CLASS_NAMES.len() {
        MAIZE_CLASS_NAMES.iter().map(|s| s.to_string()).collect()
    } else {
        (0..classes).map(|c| format!("class{c}")).collect()
    };
    Dataset::new(features, vec![spec.dim], labels, names)
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Nearest class mean, estimated from the data itself.
    fn nearest_mean_accuracy(ds: &Dataset) -> f64 {
        let (c, d) = (ds.num_classes(), ds.dim());
        let mut means = vec![vec![0.0; d]; c];
        let counts = ds.class_counts();
        for i in 0..ds.len() {
            let l = ds.labels()[i];
            for (m, v) in means[l].iter_mut().zip(ds.sample(i)) {
                *m += v / counts[l] as f64;
            }
        }
        let hits = (0..ds.len())
            .filter(|&i| {
                let x = ds.sample(i);
                let dist = |m: &Vec<f64>| m.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
                let best = (0..c)
                    .min_by(|&a, &b| dist(&means[a]).total_cmp(&dist(&means[b])))
                    .unwrap();
                best == ds.labels()[i]
            })
            .count();
        hits as f64 / ds.len() as f64
    }

    #[test]
    fn maize_sized_default() {
        let ds = generate_blobs(&BlobSpec::default()).unwrap();
        assert_eq!(ds.len(), 3852);
        assert_eq!(ds.class_counts(), MAIZE_CLASS_COUNTS.to_vec());
        assert_eq!(ds.class_names()[2], "northern_leaf_blight");
    }

    #[test]
    fn well_separated_blobs_are_linearly_separable() {
        let ds = generate_blobs(&BlobSpec::default()).unwrap();
        assert!(nearest_mean_accuracy(&ds) >= 0.99);
    }

    #[test]
    fn deterministic_in_seed() {
        let spec = BlobSpec {
            class_counts: vec![30, 20, 10, 5, 5],
            dim: 3,
            ..BlobSpec::default()
        };
        let a = generate_blobs(&spec).unwrap();
        let b = generate_blobs(&spec).unwrap();
        assert_eq!(a, b);
        let c = generate_blobs(&BlobSpec { seed: 1, ..spec }).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn rejects_non_positive_separation() {
        let spec = BlobSpec {
            separation: 0.0,
            ..BlobSpec::default()
        };
        assert!(generate_blobs(&spec).is_err());
    }
}
