use super::{ClientUpdateResult, FedError, ModelParams};

/// Combines the round's client results into the next global model.
pub trait Aggregator {
    fn name(&self) -> &str;
    fn aggregate(&self, results: &[ClientUpdateResult]) -> Result<ModelParams, FedError>;
}

/// w = Σ (n_k / n) · w_k, accumulated in f64 in client-id order and rounded
/// once to the results' dtype.
#[derive(Debug, Clone, Copy, Default)]
pub struct FedAvg;

impl Aggregator for FedAvg {
    fn name(&self) -> &str {
        "fedavg"
    }

    fn aggregate(&self, results: &[ClientUpdateResult]) -> Result<ModelParams, FedError> {
        let first = results.first().ok_or(FedError::NoResults)?;
        for r in results {
            if r.w.arch_name() != first.w.arch_name() || r.w.len() != first.w.len() {
                return Err(FedError::ArchMismatch(format!(
                    "client {} sent `{}` with {} values, client {} sent `{}` with {}",
                    r.client_id,
                    r.w.arch_name(),
                    r.w.len(),
                    first.client_id,
                    first.w.arch_name(),
                    first.w.len()
                )));
            }
            if r.w.dtype() != first.w.dtype() {
                return Err(FedError::ArchMismatch(format!(
                    "mixed dtypes {} and {}",
                    r.w.dtype(),
                    first.w.dtype()
                )));
            }
        }
        let n: u64 = results.iter().map(|r| r.n_k as u64).sum();
        if n == 0 {
            return Err(FedError::ZeroSamples);
        }
        let mut ordered: Vec<&ClientUpdateResult> = results.iter().collect();
        ordered.sort_by_key(|r| r.client_id);

        let mut acc = vec![0.0f64; first.w.len()];
        for r in ordered {
            let weight = r.n_k as f64 / n as f64;
            for (a, v) in acc.iter_mut().zip(r.w.values()) {
                *a += weight * v;
            }
        }
        let dtype = first.w.dtype();
        for a in &mut acc {
            *a = dtype.round(*a);
        }
        ModelParams::new(first.w.arch_name(), dtype, acc)
    }
}

pub fn aggregate(results: &[ClientUpdateResult]) -> Result<ModelParams, FedError> {
    FedAvg.aggregate(results)
}
