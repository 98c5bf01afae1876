//! Federated averaging over a from-scratch training engine.

pub mod arch;
pub mod data;
pub mod fed;
pub mod metrics;
pub mod nn;
pub mod transport;
