#![allow(dead_code)]

use std::net::TcpListener;
use std::path::Path;
use std::process::{Command, Output};

use fedleaf::metrics::{RunStats, SummaryRow};
use fedleaf_cli::run::{Summary, SUMMARY_FILE};

pub const BIN: &str = env!("CARGO_BIN_EXE_fedleaf");

/// Published comparison rows: (model, accuracy, precision, recall, F1 as
/// (mean, std) percentages; loss; training time in minutes).
type PublishedRow = (&'static str, [(f64, f64); 4], f64, f64);

pub const TABLE3: [PublishedRow; 5] = [
    (
        "AlexNet",
        [(96.87, 0.34), (94.75, 0.06), (95.25, 0.05), (94.75, 0.15)],
        0.96,
        16.23,
    ),
    (
        "SqueezeNet",
        [(96.54, 0.83), (92.5, 0.67), (94.25, 0.72), (95.25, 1.01)],
        1.22,
        25.55,
    ),
    (
        "ResNet-18",
        [(94.86, 2.17), (94.63, 0.18), (94.80, 0.42), (94.71, 0.29)],
        2.84,
        27.95,
    ),
    (
        "VGG-11",
        [(97.29, 0.18), (95.94, 0.21), (96.59, 0.34), (96.24, 0.27)],
        6.45,
        78.78,
    ),
    (
        "ShuffleNet",
        [(75.65, 2.00), (57.84, 0.61), (64.27, 1.97), (59.59, 1.96)],
        16.25,
        19.99,
    ),
];

pub fn table3_rows() -> Vec<SummaryRow> {
    TABLE3
        .iter()
        .map(|(model, scores, loss, time)| {
            let stat = |(mean, std): (f64, f64)| RunStats {
                runs: 10,
                mean: mean / 100.0,
                std: Some(std / 100.0),
            };
            SummaryRow {
                model: model.to_string(),
                accuracy: stat(scores[0]),
                precision: stat(scores[1]),
                recall: stat(scores[2]),
                f1: stat(scores[3]),
                loss: *loss,
                training_time_min: *time,
            }
        })
        .collect()
}

/// Writes `row` as a finished run directory.
pub fn write_run_dir(dir: &Path, row: &SummaryRow) {
    std::fs::create_dir_all(dir).unwrap();
    let summary = Summary {
        model: row.model.clone(),
        row: row.clone(),
        repetitions: Vec::new(),
    };
    std::fs::write(dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary).unwrap()).unwrap();
}

pub fn fedleaf(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("spawn fedleaf")
}

pub fn free_port() -> u16 {
    TcpListener::bind("127.0.0.1:0").unwrap().local_addr().unwrap().port()
}

/// Pearson r by the textbook two-pass formula.
pub fn pearson_oracle(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let syy: f64 = y.iter().map(|b| (b - my).powi(2)).sum();
    sxy / (sxx * syy).sqrt()
}
