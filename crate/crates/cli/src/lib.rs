//! Command-line front end: simulated and TCP federations, parameter
//! counts, cross-run reports and partition manifests.

pub mod config;
pub mod params;
pub mod report;
pub mod run;

use std::io::Write;

use anyhow::Result;
use clap::{Parser, Subcommand};

use config::{RunArgs, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "fedleaf", version, about = "Federated averaging simulator and TCP runner")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run repeated federations in one process over the in-memory network.
    Simulate(RunArgs),
    /// Coordinate one federation over TCP (rank 0).
    Server(RunArgs),
    /// Join a TCP federation as one client rank.
    Client(RunArgs),
    /// Print exact parameter counts of a model.
    Params(params::ParamsArgs),
    /// Combine run directories into a comparison table.
    Report(report::ReportArgs),
    /// Write the train/val/test split and client shards without training.
    Partition(RunArgs),
}

/// Writes to stdout, surfacing a closed pipe as an error instead of a panic.
pub(crate) fn emit(text: &str) -> Result<()> {
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())?;
    out.flush()?;
    Ok(())
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(a) => run::simulate(&RunConfig::resolve(&a, "runs/simulate")?).map(drop),
        Command::Server(a) => run::server(&RunConfig::resolve(&a, "runs/server")?).map(drop),
        Command::Client(a) => run::client(&RunConfig::resolve(&a, "runs/client")?).map(drop),
        Command::Params(a) => params::run(&a).map(drop),
        Command::Report(a) => report::run(&a).map(drop),
        Command::Partition(a) => run::partition(&RunConfig::resolve(&a, "runs/partition")?).map(drop),
    }
}
