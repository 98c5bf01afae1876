//! Run configuration: a `key = value` file merged under command-line flags.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use fedleaf::arch::{load_descriptor, lookup, ArchDescriptor};
use fedleaf::data::{generate_blobs, load_csv, BlobSpec, Dataset, SplitSpec, MAIZE_CLASS_COUNTS};
use fedleaf::fed::{ClientOverrides, FedConfig};
use fedleaf::nn::Dtype;
use fedleaf::transport::DEFAULT_PORT;
use serde::{Deserialize, Serialize};

/// Flags shared by `simulate`, `server`, `client` and `partition`. Every
/// flag can also be given in the `--config` file under the same name.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// Plain-text `key = value` file; flags override its entries.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Clients plus the server.
    #[arg(long)]
    pub world_size: Option<u32>,
    /// This client's rank (1..world_size); the server is rank 0.
    #[arg(long)]
    pub rank: Option<u32>,
    #[arg(long)]
    pub rounds: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub momentum: Option<f64>,
    /// Number of classes (blobs) or the expected class count (csv).
    #[arg(long)]
    pub classes: Option<usize>,
    #[arg(long)]
    pub port: Option<u16>,
    #[arg(long)]
    pub host: Option<String>,
    /// Fraction of clients sampled per round.
    #[arg(long)]
    pub participation: Option<f64>,
    #[arg(long)]
    pub local_epochs: Option<usize>,
    /// Base seed; repetition i uses seed + i.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Built-in architecture name.
    #[arg(long)]
    pub arch: Option<String>,
    /// Architecture descriptor file (overrides --arch).
    #[arg(long)]
    pub arch_file: Option<PathBuf>,
    /// `blobs` or `csv:PATH`.
    #[arg(long)]
    pub data: Option<String>,
    /// Per-class sample counts for blobs, comma separated.
    #[arg(long)]
    pub blob_counts: Option<String>,
    #[arg(long)]
    pub blob_dim: Option<usize>,
    #[arg(long)]
    pub separation: Option<f64>,
    #[arg(long)]
    pub data_seed: Option<u64>,
    /// Train, validation and test fractions, comma separated.
    #[arg(long)]
    pub split: Option<String>,
    /// Per-sample shape fed to the model, e.g. `1x4x4`.
    #[arg(long)]
    pub input_shape: Option<String>,
    /// Training precision: f32 or f64.
    #[arg(long)]
    pub precision: Option<Dtype>,
    /// Element type on the wire: f32 or f64.
    #[arg(long)]
    pub wire_dtype: Option<Dtype>,
    /// Allow rounding f64 models to an f32 wire.
    #[arg(long)]
    pub lossy_wire: bool,
    #[arg(long)]
    pub repetitions: Option<usize>,
    /// Parallel repetition workers for `simulate`.
    #[arg(long)]
    pub workers: Option<usize>,
    /// Seconds to keep retrying (client) or waiting for joins (server).
    #[arg(long)]
    pub connect_timeout: Option<f64>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

const KEYS: &[&str] = &[
    "world-size",
    "rank",
    "rounds",
    "lr",
    "batch-size",
    "momentum",
    "classes",
    "port",
    "host",
    "participation",
    "local-epochs",
    "seed",
    "arch",
    "arch-file",
    "data",
    "blob-counts",
    "blob-dim",
    "separation",
    "data-seed",
    "split",
    "input-shape",
    "precision",
    "wire-dtype",
    "lossy-wire",
    "repetitions",
    "workers",
    "connect-timeout",
    "out",
];

/// Parsed config file: normalized key → (value, line number).
#[derive(Debug, Default)]
pub struct ConfigFile {
    path: PathBuf,
    entries: BTreeMap<String, (String, usize)>,
}

impl ConfigFile {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text, path)
    }

    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("{}:{}: expected `key = value`", path.display(), i + 1))?;
            let key = key.trim().replace('_', "-");
            let known = KEYS.contains(&key.as_str()) || client_key(&key).is_some();
            if !known {
                bail!("{}:{}: unknown key `{key}`", path.display(), i + 1);
            }
            if entries.insert(key.clone(), (value.trim().to_string(), i + 1)).is_some() {
                bail!("{}:{}: duplicate key `{key}`", path.display(), i + 1);
            }
        }
        Ok(ConfigFile {
            path: path.to_path_buf(),
            entries,
        })
    }

    fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: Display,
    {
        match self.entries.get(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .map_err(|e| anyhow!("{}:{line}: bad value for `{key}`: {e}", self.path.display())),
        }
    }

    fn client_overrides(&self) -> Result<BTreeMap<usize, ClientOverrides>> {
        let mut out: BTreeMap<usize, ClientOverrides> = BTreeMap::new();
        for (key, (value, line)) in &self.entries {
            let Some((id, field)) = client_key(key) else { continue };
            let bad = |e: &dyn Display| anyhow!("{}:{line}: bad value for `{key}`: {e}", self.path.display());
            let o = out.entry(id).or_default();
            match field {
                "lr" => o.learning_rate = Some(value.parse().map_err(|e| bad(&e))?),
                "momentum" => o.momentum = Some(value.parse().map_err(|e| bad(&e))?),
                "batch-size" => o.batch_size = Some(value.parse().map_err(|e| bad(&e))?),
                _ => o.local_epochs = Some(value.parse().map_err(|e| bad(&e))?),
            }
        }
        Ok(out)
    }
}

/// `client.<id>.<lr|momentum|batch-size|local-epochs>`.
fn client_key(key: &str) -> Option<(usize, &str)> {
    let rest = key.strip_prefix("client.")?;
    let (id, field) = rest.split_once('.')?;
    let id = id.parse().ok()?;
    ["lr", "momentum", "batch-size", "local-epochs"]
        .contains(&field)
        .then_some((id, field))
}

fn pick<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str) -> Result<Option<T>>
where
    T::Err: Display,
{
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum DataSource {
    Blobs(BlobSpec),
    Csv { path: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArchChoice {
    Named(String),
    File(PathBuf),
}

/// Fully resolved settings of one invocation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub fed: FedConfig,
    pub world_size: u32,
    pub rank: Option<u32>,
    pub host: String,
    pub port: u16,
    pub arch: ArchChoice,
    pub data: DataSource,
    pub classes: Option<usize>,
    pub input_shape: Option<Vec<usize>>,
    pub precision: Dtype,
    pub repetitions: usize,
    /// Execution details that do not affect results stay out of manifests.
    #[serde(skip)]
    pub workers: usize,
    #[serde(skip)]
    pub connect_timeout_s: f64,
    /// Not part of the manifest: moving a run must not change its reports.
    #[serde(skip)]
    pub out: PathBuf,
}

fn parse_list<T: FromStr>(text: &str, what: &str, sep: char) -> Result<Vec<T>>
where
    T::Err: Display,
{
    text.split(sep)
        .map(|s| s.trim().parse().map_err(|e| anyhow!("bad {what} entry `{s}`: {e}")))
        .collect()
}

impl RunConfig {
    pub fn resolve(args: &RunArgs, default_out: &str) -> Result<Self> {
        let file = match &args.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        let world_size = pick(args.world_size, &file, "world-size")?.unwrap_or(3);
        if world_size < 2 {
            bail!("world size {world_size} leaves no clients (it counts the server too)");
        }
        let defaults = FedConfig::default();
        let split = match pick(args.split.clone(), &file, "split")? {
            None => SplitSpec::default(),
            Some(s) => {
                let f: Vec<f64> = parse_list(&s, "split", ',')?;
                let [train, val, test] = f[..] else {
                    bail!("split needs three fractions, got `{s}`");
                };
                SplitSpec::new(train, val, test)?
            }
        };
        let fed = FedConfig {
            clients: world_size as usize - 1,
            participation: pick(args.participation, &file, "participation")?.unwrap_or(defaults.participation),
            rounds: pick(args.rounds, &file, "rounds")?.unwrap_or(defaults.rounds),
            local_epochs: pick(args.local_epochs, &file, "local-epochs")?.unwrap_or(defaults.local_epochs),
            batch_size: pick(args.batch_size, &file, "batch-size")?.unwrap_or(defaults.batch_size),
            learning_rate: pick(args.lr, &file, "lr")?.unwrap_or(defaults.learning_rate),
            momentum: pick(args.momentum, &file, "momentum")?.unwrap_or(defaults.momentum),
            seed: pick(args.seed, &file, "seed")?.unwrap_or(0),
            split,
            wire_dtype: pick(args.wire_dtype, &file, "wire-dtype")?.unwrap_or(Dtype::F32),
            allow_lossy_wire: args.lossy_wire || file.get("lossy-wire")?.unwrap_or(false),
            client_overrides: file.client_overrides()?,
        };
        fed.validate()?;

        let classes = pick(args.classes, &file, "classes")?;
        let data_spec = pick(args.data.clone(), &file, "data")?.unwrap_or_else(|| "blobs".into());
        let data = if data_spec == "blobs" {
            let class_counts = match pick(args.blob_counts.clone(), &file, "blob-counts")? {
                Some(s) => parse_list(&s, "blob count", ',')?,
                None => match classes {
                    None | Some(4) => MAIZE_CLASS_COUNTS.to_vec(),
                    Some(c) => vec![300; c],
                },
            };
            if let Some(c) = classes {
                if c != class_counts.len() {
                    bail!("--classes {c} but {} blob counts", class_counts.len());
                }
            }
            DataSource::Blobs(BlobSpec {
                class_counts,
                dim: pick(args.blob_dim, &file, "blob-dim")?.unwrap_or(16),
                separation: pick(args.separation, &file, "separation")?.unwrap_or(10.0),
                seed: pick(args.data_seed, &file, "data-seed")?.unwrap_or(0),
            })
        } else if let Some(path) = data_spec.strip_prefix("csv:") {
            DataSource::Csv { path: path.into() }
        } else {
            bail!("unknown data source `{data_spec}` (expected `blobs` or `csv:PATH`)");
        };

        let arch = match pick(args.arch_file.clone(), &file, "arch-file")? {
            Some(p) => ArchChoice::File(p),
            None => ArchChoice::Named(pick(args.arch.clone(), &file, "arch")?.unwrap_or_else(|| "tiny_mlp".into())),
        };
        let input_shape = pick(args.input_shape.clone(), &file, "input-shape")?
            .map(|s| parse_list(&s, "input shape", 'x'))
            .transpose()?;
        let repetitions = pick(args.repetitions, &file, "repetitions")?.unwrap_or(10);
        if repetitions == 0 {
            bail!("at least one repetition is required");
        }
        let connect_timeout_s = pick(args.connect_timeout, &file, "connect-timeout")?.unwrap_or(60.0);
        if !(connect_timeout_s.is_finite() && connect_timeout_s > 0.0) {
            bail!("connect timeout must be a positive number of seconds");
        }
        let rank = pick(args.rank, &file, "rank")?;
        if let Some(r) = rank {
            if r == 0 || r >= world_size {
                bail!("rank {r} outside client range 1..={}", world_size - 1);
            }
        }
        Ok(RunConfig {
            fed,
            world_size,
            rank,
            host: pick(args.host.clone(), &file, "host")?.unwrap_or_else(|| "127.0.0.1".into()),
            port: pick(args.port, &file, "port")?.unwrap_or(DEFAULT_PORT),
            arch,
            data,
            classes,
            input_shape,
            precision: pick(args.precision, &file, "precision")?.unwrap_or(Dtype::F32),
            repetitions,
            workers: pick(args.workers, &file, "workers")?.unwrap_or(1).max(1),
            connect_timeout_s,
            out: pick(args.out.clone(), &file, "out")?.unwrap_or_else(|| default_out.into()),
        })
    }

    /// Config of repetition `i`: identical except for the seed.
    pub fn fed_for(&self, repetition: usize) -> FedConfig {
        FedConfig {
            seed: self.fed.seed.wrapping_add(repetition as u64),
            ..self.fed.clone()
        }
    }

    /// Loads the dataset and the architecture, reshaping samples to the
    /// model's input when the element counts agree.
    pub fn load(&self) -> Result<(Dataset, ArchDescriptor)> {
        let mut ds = match &self.data {
            DataSource::Blobs(spec) => generate_blobs(spec)?,
            DataSource::Csv { path } => load_csv(path).with_context(|| format!("loading {}", path.display()))?,
        };
        if let Some(c) = self.classes {
            if c != ds.num_classes() {
                bail!("expected {c} classes, dataset has {}", ds.num_classes());
            }
        }
        if let Some(shape) = &self.input_shape {
            ds = ds.with_sample_shape(shape.clone())?;
        }
        let arch = match &self.arch {
            ArchChoice::File(p) => load_descriptor(p)?,
            ArchChoice::Named(name) => lookup(name, Some(ds.sample_shape()), ds.num_classes())?,
        };
        if arch.input_shape() != ds.sample_shape() {
            let want: usize = arch.input_shape().iter().product();
            if want != ds.dim() {
                bail!(
                    "`{}` takes input {:?} but samples have {} values",
                    arch.name(),
                    arch.input_shape(),
                    ds.dim()
                );
            }
            ds = ds.with_sample_shape(arch.input_shape().to_vec())?;
        }
        if !arch.trainable() {
            bail!(
                "`{}` is a parameter-count-only descriptor and cannot be trained",
                arch.name()
            );
        }
        Ok((ds, arch))
    }
}
