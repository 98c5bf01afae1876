//! `report`: combines finished run directories into one comparison table.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use fedleaf::metrics::{format_table, table_csv, time_accuracy_correlation, CorrelationCheck, SummaryRow};
use serde::{Deserialize, Serialize};

use crate::run::{Summary, SUMMARY_FILE};

#[derive(Debug, Clone, Args)]
pub struct ReportArgs {
    /// Run directories written by `simulate` or `server`.
    #[arg(required = true)]
    pub dirs: Vec<PathBuf>,
    /// Also write report.{json,txt,csv} here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CrossRunReport {
    pub rows: Vec<SummaryRow>,
    pub correlation: CorrelationCheck,
}

pub fn read_summary(dir: &Path) -> Result<SummaryRow> {
    if !dir.is_dir() {
        bail!("{} is not a directory", dir.display());
    }
    let path = dir.join(SUMMARY_FILE);
    if !path.exists() {
        bail!(
            "{} has no {SUMMARY_FILE}; is it a finished run directory?",
            dir.display()
        );
    }
    let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
    let summary: Summary = serde_json::from_str(&text).with_context(|| format!("corrupt {}", path.display()))?;
    Ok(summary.row)
}

pub fn build(dirs: &[PathBuf]) -> Result<CrossRunReport> {
    let rows = dirs.iter().map(|d| read_summary(d)).collect::<Result<Vec<_>>>()?;
    let correlation = time_accuracy_correlation(&rows);
    Ok(CrossRunReport { rows, correlation })
}

pub fn render(report: &CrossRunReport) -> String {
    format!(
        "{}\ntraining time vs accuracy: {}\n",
        format_table(&report.rows),
        report.correlation.note
    )
}

pub fn run(args: &ReportArgs) -> Result<CrossRunReport> {
    let report = build(&args.dirs)?;
    let text = render(&report);
    crate::emit(&text)?;
    if let Some(out) = &args.out {
        fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
        fs::write(out.join("report.txt"), &text)?;
        fs::write(out.join("report.csv"), table_csv(&report.rows))?;
        fs::write(out.join("report.json"), serde_json::to_string_pretty(&report)? + "\n")?;
    }
    Ok(report)
}
