use serde::{Deserialize, Serialize};

use super::{ConfusionMatrix, MetricsError};

/// One-vs-rest scores for a single class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub tp: u64,
    pub fp: u64,
    pub fn_: u64,
    pub tn: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    /// No true and no predicted samples: scored 0 and left out of the
    /// macro averages.
    pub degenerate: bool,
}

/// Macro-averaged classification scores in `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub micro_precision: f64,
    pub micro_recall: f64,
    pub per_class: Vec<ClassMetrics>,
    pub samples: u64,
    pub loss: Option<f64>,
    pub training_time_min: Option<f64>,
    pub warnings: Vec<String>,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

pub fn metrics_from_cm(cm: &ConfusionMatrix) -> Result<MetricsReport, MetricsError> {
    let total = cm.total();
    if cm.classes() == 0 || total == 0 {
        return Err(MetricsError::Empty);
    }
    let mut warnings = Vec::new();
    let per_class: Vec<ClassMetrics> = (0..cm.classes())
        .map(|c| {
            let tp = cm.get(c, c);
            let support = cm.row_sum(c);
            let predicted = cm.col_sum(c);
            let (fp, fn_) = (predicted - tp, support - tp);
            let degenerate = support == 0 && predicted == 0;
            if degenerate {
                warnings.push(format!(
                    "class {c} has no true and no predicted samples; excluded from macro averages"
                ));
            }
            let precision = ratio(tp, tp + fp);
            let recall = ratio(tp, tp + fn_);
            ClassMetrics {
                tp,
                fp,
                fn_,
                tn: total - tp - fp - fn_,
                precision,
                recall,
                f1: harmonic(precision, recall),
                support,
                degenerate,
            }
        })
        .collect();

    let scored: Vec<&ClassMetrics> = per_class.iter().filter(|m| !m.degenerate).collect();
    let macro_of = |f: fn(&ClassMetrics) -> f64| scored.iter().map(|m| f(m)).sum::<f64>() / scored.len() as f64;
    let sum_tp: u64 = per_class.iter().map(|m| m.tp).sum();
    let sum_fp: u64 = per_class.iter().map(|m| m.fp).sum();
    let sum_fn: u64 = per_class.iter().map(|m| m.fn_).sum();

    Ok(MetricsReport {
        accuracy: ratio(cm.trace(), total),
        precision: macro_of(|m| m.precision),
        recall: macro_of(|m| m.recall),
        f1: macro_of(|m| m.f1),
        micro_precision: ratio(sum_tp, sum_tp + sum_fp),
        micro_recall: ratio(sum_tp, sum_tp + sum_fn),
        per_class,
        samples: total,
        loss: None,
        training_time_min: None,
        warnings,
    })
}
