use serde::{Deserialize, Serialize};

use super::{pearson, MetricsError, RunStats};

/// Published time/accuracy correlation the cross-model analysis is
/// compared against.
pub const PUBLISHED_TIME_ACCURACY_R: f64 = -0.2;
/// Agreement means matching the published value to its one decimal.
pub const CORRELATION_AGREEMENT_TOL: f64 = 0.05;

/// Aggregated results of repeated runs of one model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub model: String,
    pub accuracy: RunStats,
    pub precision: RunStats,
    pub recall: RunStats,
    pub f1: RunStats,
    pub loss: f64,
    pub training_time_min: f64,
}

const HEADERS: [&str; 7] = [
    "Model",
    "Accuracy (%)",
    "Precision (%)",
    "Recall (%)",
    "F1-Score (%)",
    "Loss",
    "Training Time (min)",
];

fn cells(row: &SummaryRow) -> [String; 7] {
    [
        row.model.clone(),
        row.accuracy.format(100.0),
        row.precision.format(100.0),
        row.recall.format(100.0),
        row.f1.format(100.0),
        format!("{:.2}", row.loss),
        format!("{:.2}", row.training_time_min),
    ]
}

/// Aligned plain-text comparison table.
pub fn format_table(rows: &[SummaryRow]) -> String {
    let body: Vec<[String; 7]> = rows.iter().map(cells).collect();
    let widths: Vec<usize> = (0..7)
        .map(|c| {
            body.iter()
                .map(|r| r[c].chars().count())
                .chain([HEADERS[c].len()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let line = |cols: Vec<String>| -> String {
        let padded: Vec<String> = cols
            .iter()
            .enumerate()
            .map(|(c, s)| {
                let pad = widths[c] - s.chars().count();
                if c == 0 {
                    format!("{s}{}", " ".repeat(pad))
                } else {
                    format!("{}{s}", " ".repeat(pad))
                }
            })
            .collect();
        padded.join("  ").trim_end().to_string()
    };
    let mut out = line(HEADERS.iter().map(|s| s.to_string()).collect());
    out.push('\n');
    out.push_str(&"-".repeat(widths.iter().sum::<usize>() + 2 * 6));
    out.push('\n');
    for r in body {
        out.push_str(&line(r.to_vec()));
        out.push('\n');
    }
    out
}

/// Plot-ready CSV with one row per model.
pub fn table_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from(
        "model,runs,accuracy_mean,accuracy_std,precision_mean,precision_std,recall_mean,recall_std,f1_mean,f1_std,loss,training_time_min\n",
    );
    let std = |s: &RunStats| s.std.map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{}\n",
            r.model,
            r.accuracy.runs,
            r.accuracy.mean,
            std(&r.accuracy),
            r.precision.mean,
            std(&r.precision),
            r.recall.mean,
            std(&r.recall),
            r.f1.mean,
            std(&r.f1),
            r.loss,
            r.training_time_min
        ));
    }
    out
}

/// Correlation between mean training time and mean accuracy across models.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationCheck {
    pub r: Option<f64>,
    pub published_r: f64,
    pub agrees: Option<bool>,
    pub note: String,
}

pub fn time_accuracy_correlation(rows: &[SummaryRow]) -> CorrelationCheck {
    let times: Vec<f64> = rows.iter().map(|r| r.training_time_min).collect();
    let accs: Vec<f64> = rows.iter().map(|r| r.accuracy.mean).collect();
    match pearson(&times, &accs) {
        Ok(r) => {
            let agrees = (r - PUBLISHED_TIME_ACCURACY_R).abs() < CORRELATION_AGREEMENT_TOL;
            CorrelationCheck {
                r: Some(r),
                published_r: PUBLISHED_TIME_ACCURACY_R,
                agrees: Some(agrees),
                note: if agrees {
                    format!("r = {r:.4} agrees with the published r = {PUBLISHED_TIME_ACCURACY_R}")
                } else {
                    format!("r = {r:.4} disagrees with the published r = {PUBLISHED_TIME_ACCURACY_R}")
                },
            }
        }
        Err(e) => CorrelationCheck {
            r: None,
            published_r: PUBLISHED_TIME_ACCURACY_R,
            agrees: None,
            note: match e {
                MetricsError::TooFewValues { got, .. } => {
                    format!("r unavailable: needs at least 2 models, got {got}")
                }
                other => format!("r unavailable: {other}"),
            },
        },
    }
}
