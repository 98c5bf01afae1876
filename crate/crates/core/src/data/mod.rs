//! Datasets, the stratified train/val/test split, IID client partitions,
//! synthetic blobs and the CSV loader.

mod blobs;
mod csv;
mod dataset;
mod split;

pub use blobs::{generate_blobs, BlobSpec, MAIZE_CLASS_COUNTS, MAIZE_CLASS_NAMES};
pub use csv::{load_csv, load_csv_with_classes, parse_csv};
pub use dataset::{ClientShard, Dataset, SplitIndices, SplitSpec};
pub use split::{partition_iid, split};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DataError {
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("class `{class}` has no training samples after stratification")]
    EmptyClass { class: String },
    #[error("{clients} clients requested for {samples} training samples")]
    TooManyClients { clients: usize, samples: usize },
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
    #[error("{0}")]
    Io(String),
}

/// Everything needed to interpret and reproduce a data layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PartitionManifest {
    pub seed: u64,
    pub split: SplitSpec,
    pub class_names: Vec<String>,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub shard_sizes: Vec<usize>,
}

impl PartitionManifest {
    pub fn new(seed: u64, spec: SplitSpec, ds: &Dataset, folds: &SplitIndices, shards: &[ClientShard]) -> Self {
        PartitionManifest {
            seed,
            split: spec,
            class_names: ds.class_names().to_vec(),
            train_size: folds.train.len(),
            val_size: folds.val.len(),
            test_size: folds.test.len(),
            shard_sizes: shards.iter().map(ClientShard::n_k).collect(),
        }
    }
}
