use serde::{Deserialize, Serialize};

use super::{Element, NnError, Tensor};

/// Mean softmax cross-entropy over a batch.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct LossValue(pub f64);

impl LossValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

fn check_labels<E: Element>(logits: &Tensor<E>, labels: &[usize]) -> Result<usize, NnError> {
    let classes = match logits.shape() {
        [b, c] if *b == labels.len() => *c,
        other => {
            return Err(NnError::ShapeMismatch {
                expected: vec![labels.len(), 0],
                got: other.to_vec(),
            })
        }
    };
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(NnError::LabelOutOfRange { label: bad, classes });
    }
    Ok(classes)
}

/// Per-row `log Σ exp(z)` as `(max, log Σ exp(z − max))`, in f64. The
/// max term is split off so the shifted part goes through `ln_1p` and
/// keeps full precision for confident rows.
fn log_sum_exp<E: Element>(row: &[E]) -> (f64, f64) {
    let top = super::argmax(row);
    let max = row[top].as_f64();
    let rest: f64 = row
        .iter()
        .enumerate()
        .filter(|(i, _)| *i != top)
        .map(|(_, v)| (v.as_f64() - max).exp())
        .sum();
    (max, rest.ln_1p())
}

/// `−log softmax(row)[label]`.
fn row_loss<E: Element>(row: &[E], label: usize) -> f64 {
    let (max, shifted) = log_sum_exp(row);
    shifted + (max - row[label].as_f64())
}

pub fn cross_entropy<E: Element>(logits: &Tensor<E>, labels: &[usize]) -> Result<LossValue, NnError> {
    let classes = check_labels(logits, labels)?;
    let total: f64 = logits
        .data()
        .chunks(classes)
        .zip(labels)
        .map(|(row, &l)| row_loss(row, l))
        .sum();
    Ok(LossValue(total / labels.len() as f64))
}

/// Loss plus its gradient w.r.t. the logits: `(softmax − onehot) / batch`.
pub fn cross_entropy_with_grad<E: Element>(
    logits: &Tensor<E>,
    labels: &[usize],
) -> Result<(LossValue, Tensor<E>), NnError> {
    let classes = check_labels(logits, labels)?;
    let batch = labels.len() as f64;
    let mut grad = Vec::with_capacity(logits.len());
    let mut total = 0.0;
    for (row, &l) in logits.data().chunks(classes).zip(labels) {
        let (max, shifted) = log_sum_exp(row);
        total += row_loss(row, l);
        for (c, v) in row.iter().enumerate() {
            let p = (v.as_f64() - max - shifted).exp();
            let onehot = if c == l { 1.0 } else { 0.0 };
            grad.push(E::of_f64((p - onehot) / batch));
        }
    }
    Ok((LossValue(total / batch), Tensor::new(logits.shape().to_vec(), grad)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_classes() {
        let logits = Tensor::<f64>::zeros(vec![1, 4]);
        for label in 0..4 {
            let loss = cross_entropy(&logits, &[label]).unwrap();
            assert!((loss.0 - 4f64.ln()).abs() < 1e-12);
        }
    }

    #[test]
    fn confident_correct_prediction_is_near_zero() {
        let logits = Tensor::<f64>::new(vec![1, 2], vec![10.0, -10.0]).unwrap();
        let loss = cross_entropy(&logits, &[0]).unwrap().0;
        // -ln(1 / (1 + e^-20)) = ln(1 + e^-20)
        let oracle = (-20f64).exp().ln_1p();
        assert!((loss - oracle).abs() < 1e-18);
        assert!((loss - 2.061e-9).abs() < 1e-12);
    }

    #[test]
    fn batch_mean_of_identical_rows() {
        let one = Tensor::<f64>::new(vec![1, 3], vec![0.3, -1.2, 2.0]).unwrap();
        let two = Tensor::<f64>::new(vec![2, 3], vec![0.3, -1.2, 2.0, 0.3, -1.2, 2.0]).unwrap();
        let a = cross_entropy(&one, &[1]).unwrap().0;
        let b = cross_entropy(&two, &[1, 1]).unwrap().0;
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn logit_gradient_is_softmax_minus_onehot() {
        let logits = Tensor::<f64>::zeros(vec![1, 2]);
        let (_, g) = cross_entropy_with_grad(&logits, &[0]).unwrap();
        assert_eq!(g.data(), &[-0.5, 0.5]);
    }

    #[test]
    fn label_out_of_range() {
        let logits = Tensor::<f64>::zeros(vec![1, 3]);
        assert!(matches!(
            cross_entropy(&logits, &[3]),
            Err(NnError::LabelOutOfRange { label: 3, classes: 3 })
        ));
    }
}
