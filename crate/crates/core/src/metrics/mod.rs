//! Confusion matrices, macro-averaged accuracy/precision/recall/F1,
//! repeated-run statistics and the time/accuracy correlation.

mod confusion;
mod report;
mod stats;
mod table;

pub use confusion::{confusion, ConfusionMatrix};
pub use report::{metrics_from_cm, ClassMetrics, MetricsReport};
pub use stats::{pearson, run_stats, RunStats};
pub use table::{
    format_table, table_csv, time_accuracy_correlation, CorrelationCheck, SummaryRow, CORRELATION_AGREEMENT_TOL,
    PUBLISHED_TIME_ACCURACY_R,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("label {label} out of range for {classes} classes")]
    LabelOutOfRange { label: usize, classes: usize },
    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("confusion matrix rows must all have one entry per class")]
    NotSquare,
    #[error("confusion matrix is empty")]
    Empty,
    #[error("correlation undefined: a series has zero variance")]
    ZeroVariance,
    #[error("need at least {needed} values, got {got}")]
    TooFewValues { needed: usize, got: usize },
}
