//! The server round loop, the client local update and FedAvg aggregation.

mod aggregate;
mod client;
mod config;
mod params;
mod sampling;
mod server;

pub use aggregate::{aggregate, Aggregator, FedAvg};
pub use client::{client_update, ClientNode, ClientUpdateResult, LocalHyper};
pub use config::{derive_seed, ClientOverrides, FedConfig, SeedStream};
pub use params::ModelParams;
pub use sampling::{sample_clients, RoundPlan};
pub use server::{evaluate, run_federation, Evaluation, FederationData, FederationOutcome, RoundRecord};

use thiserror::Error;

use crate::arch::ArchError;
use crate::data::DataError;
use crate::metrics::MetricsError;
use crate::nn::{Dtype, NnError};
use crate::transport::TransportError;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FedError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("non-finite model values: {0}")]
    NonFinite(String),
    #[error("architecture mismatch: {0}")]
    ArchMismatch(String),
    #[error("converting {from} values to {to} would lose precision (enable lossy wire conversion to allow it)")]
    LossyCast { from: Dtype, to: Dtype },
    #[error("client {0} has an empty shard")]
    EmptyShard(usize),
    #[error("aggregation needs at least one client result")]
    NoResults,
    #[error("aggregation over zero total samples")]
    ZeroSamples,
    #[error("round {round}: {source}")]
    Round { round: u32, source: TransportError },
    #[error("round {round}: {message}")]
    Protocol { round: u32, message: String },
    #[error(transparent)]
    Transport(#[from] TransportError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Arch(#[from] ArchError),
    #[error(transparent)]
    Data(#[from] DataError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}
