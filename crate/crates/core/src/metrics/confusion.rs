use serde::{Deserialize, Serialize};

use super::MetricsError;

/// `counts[t * classes + p]`: samples of true class `t` predicted as `p`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    classes: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        ConfusionMatrix {
            classes,
            counts: vec![0; classes * classes],
        }
    }

    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self, MetricsError> {
        let classes = rows.len();
        if rows.iter().any(|r| r.len() != classes) {
            return Err(MetricsError::NotSquare);
        }
        Ok(ConfusionMatrix {
            classes,
            counts: rows.concat(),
        })
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn get(&self, truth: usize, predicted: usize) -> u64 {
        self.counts[truth * self.classes + predicted]
    }

    pub fn rows(&self) -> Vec<Vec<u64>> {
        self.counts.chunks(self.classes.max(1)).map(<[u64]>::to_vec).collect()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn row_sum(&self, truth: usize) -> u64 {
        (0..self.classes).map(|p| self.get(truth, p)).sum()
    }

    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.classes).map(|t| self.get(t, predicted)).sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes).map(|c| self.get(c, c)).sum()
    }

    pub fn record(&mut self, truth: usize, predicted: usize) -> Result<(), MetricsError> {
        for label in [truth, predicted] {
            if label >= self.classes {
                return Err(MetricsError::LabelOutOfRange {
                    label,
                    classes: self.classes,
                });
            }
        }
        self.counts[truth * self.classes + predicted] += 1;
        Ok(())
    }

    /// Rows are true classes, columns predictions, first column the class.
    pub fn to_csv(&self, class_names: &[String]) -> String {
        let name = |c: usize| class_names.get(c).cloned().unwrap_or_else(|| c.to_string());
        let mut out = String::from("true\\predicted");
        for c in 0..self.classes {
            out.push(',');
            out.push_str(&name(c));
        }
        out.push('\n');
        for t in 0..self.classes {
            out.push_str(&name(t));
            for p in 0..self.classes {
                out.push_str(&format!(",{}", self.get(t, p)));
            }
            out.push('\n');
        }
        out
    }
}

pub fn confusion(truth: &[usize], predicted: &[usize], classes: usize) -> Result<ConfusionMatrix, MetricsError> {
    if truth.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch {
            left: truth.len(),
            right: predicted.len(),
        });
    }
    let mut cm = ConfusionMatrix::zeros(classes);
    for (&t, &p) in truth.iter().zip(predicted) {
        cm.record(t, p)?;
    }
    Ok(cm)
}
