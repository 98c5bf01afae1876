//! `simulate`, `server`, `client` and `partition`, plus the run-directory
//! layout they share.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::thread;
use std::time::Duration;

use anyhow::{anyhow, bail, Context, Result};
use fedleaf::arch::ArchDescriptor;
use fedleaf::data::{Dataset, PartitionManifest};
use fedleaf::fed::{run_federation, FedAvg, FedConfig, FederationData, FederationOutcome, RoundRecord};
use fedleaf::metrics::{format_table, table_csv, MetricsReport, RunStats, SummaryRow};
use fedleaf::nn::{Dtype, Element};
use fedleaf::transport::{run_tcp_client, serialize_params, SimNetwork, TcpOptions, TcpServerLink, TrafficSnapshot};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;

pub const SUMMARY_FILE: &str = "summary.json";

/// Everything needed to rerun a repetition bit-identically.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: RunConfig,
    pub repetition: usize,
    pub fed: FedConfig,
    pub arch: ArchDescriptor,
    pub partition: PartitionManifest,
}

/// Deterministic results of one repetition.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RepetitionMetrics {
    pub repetition: usize,
    pub seed: u64,
    pub test: MetricsReport,
    pub final_train_loss: Option<f64>,
    pub traffic: TrafficSnapshot,
}

/// Wall-clock measurements, kept apart so every other file is
/// reproducible byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Timing {
    pub repetition: usize,
    pub wall_time_s: f64,
    pub round_wall_time_s: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Summary {
    pub model: String,
    pub row: SummaryRow,
    pub repetitions: Vec<RepetitionMetrics>,
}

struct Loaded {
    dataset: Dataset,
    arch: ArchDescriptor,
}

fn write(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write(path, text)
}

fn history_csv(rounds: &[RoundRecord]) -> String {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let mut out = String::from("round,sampled,train_loss,val_loss,val_accuracy,bytes_down,bytes_up\n");
    for r in rounds {
        let sampled: Vec<String> = r.sampled.iter().map(usize::to_string).collect();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.round,
            sampled.join(" "),
            r.train_loss,
            opt(r.val_loss),
            opt(r.val_accuracy),
            r.bytes_down,
            r.bytes_up
        );
    }
    out
}

/// Writes one repetition's files into `dir` and returns its metrics and timing.
fn write_repetition(
    dir: &Path,
    manifest: &RunManifest,
    dataset: &Dataset,
    outcome: &FederationOutcome,
) -> Result<(RepetitionMetrics, Timing)> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_json(&dir.join("manifest.json"), manifest)?;
    write(&dir.join("history.csv"), history_csv(&outcome.rounds))?;
    write(
        &dir.join("confusion.csv"),
        outcome.test.confusion.to_csv(dataset.class_names()),
    )?;
    write_json(&dir.join("confusion.json"), &outcome.test.confusion)?;
    write(&dir.join("weights.bin"), serialize_params(&outcome.final_params))?;
    let metrics = RepetitionMetrics {
        repetition: manifest.repetition,
        seed: manifest.fed.seed,
        test: outcome.test_report.clone(),
        final_train_loss: outcome.rounds.last().map(|r| r.train_loss),
        traffic: outcome.traffic.clone(),
    };
    write_json(&dir.join("metrics.json"), &metrics)?;
    let timing = Timing {
        repetition: manifest.repetition,
        wall_time_s: outcome.wall_time_s,
        round_wall_time_s: outcome.rounds.iter().map(|r| r.wall_time_s).collect(),
    };
    write_json(&dir.join("timing.json"), &timing)?;
    Ok((metrics, timing))
}

fn summarize(model: &str, reps: Vec<RepetitionMetrics>, timings: &[Timing]) -> Result<Summary> {
    let stat = |f: fn(&MetricsReport) -> f64| RunStats::of(&reps.iter().map(|r| f(&r.test)).collect::<Vec<_>>());
    let n = reps.len() as f64;
    let row = SummaryRow {
        model: model.to_string(),
        accuracy: stat(|m| m.accuracy)?,
        precision: stat(|m| m.precision)?,
        recall: stat(|m| m.recall)?,
        f1: stat(|m| m.f1)?,
        loss: reps.iter().map(|r| r.test.loss.unwrap_or(f64::NAN)).sum::<f64>() / n,
        training_time_min: timings.iter().map(|t| t.wall_time_s).sum::<f64>() / n / 60.0,
    };
    Ok(Summary {
        model: model.to_string(),
        row,
        repetitions: reps,
    })
}

fn write_summary(out: &Path, summary: &Summary) -> Result<String> {
    write_json(&out.join(SUMMARY_FILE), summary)?;
    let table = format_table(std::slice::from_ref(&summary.row));
    write(&out.join("summary.txt"), &table)?;
    write(&out.join("summary.csv"), table_csv(std::slice::from_ref(&summary.row)))?;
    Ok(table)
}

fn load(cfg: &RunConfig) -> Result<Loaded> {
    let (dataset, arch) = cfg.load()?;
    Ok(Loaded { dataset, arch })
}

fn rep_dir(out: &Path, i: usize) -> PathBuf {
    out.join(format!("rep-{i:02}"))
}

fn simulate_one<E: Element>(
    cfg: &RunConfig,
    loaded: &Loaded,
    repetition: usize,
) -> Result<(RunManifest, FederationOutcome)> {
    let fed = cfg.fed_for(repetition);
    let data = FederationData::prepare(loaded.dataset.clone(), &fed)?;
    let mut link = SimNetwork::new(data.nodes::<E>(&loaded.arch, &fed)?);
    let outcome = run_federation::<E, _>(&fed, &data, &loaded.arch, &mut link, &FedAvg)
        .with_context(|| format!("repetition {repetition}"))?;
    let manifest = RunManifest {
        config: cfg.clone(),
        repetition,
        partition: data.manifest(&fed),
        fed,
        arch: loaded.arch.clone(),
    };
    Ok((manifest, outcome))
}

type Written = Result<(RepetitionMetrics, Timing)>;

/// Runs `repetitions` simulated federations, `workers` at a time, and
/// writes per-repetition files plus the summary table.
pub fn simulate(cfg: &RunConfig) -> Result<Summary> {
    let loaded = load(cfg)?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let next = Mutex::new(0usize);
    let results: Mutex<Vec<Option<Written>>> = Mutex::new((0..cfg.repetitions).map(|_| None).collect());
    let worker = || loop {
        let i = {
            let mut n = next.lock().unwrap();
            if *n >= cfg.repetitions {
                return;
            }
            *n += 1;
            *n - 1
        };
        let run = match cfg.precision {
            Dtype::F32 => simulate_one::<f32>(cfg, &loaded, i),
            Dtype::F64 => simulate_one::<f64>(cfg, &loaded, i),
        };
        let written = run.and_then(|(manifest, outcome)| {
            write_repetition(&rep_dir(&cfg.out, i), &manifest, &loaded.dataset, &outcome)
        });
        results.lock().unwrap()[i] = Some(written);
    };
    thread::scope(|s| {
        for _ in 0..cfg.workers.min(cfg.repetitions) {
            s.spawn(worker);
        }
    });

    let mut reps = Vec::new();
    let mut timings = Vec::new();
    for r in results.into_inner().unwrap() {
        let (m, t) = r.ok_or_else(|| anyhow!("a repetition worker exited without a result"))??;
        reps.push(m);
        timings.push(t);
    }
    write_json(&cfg.out.join("timing.json"), &timings)?;
    let summary = summarize(loaded.arch.name(), reps, &timings)?;
    write_json(&cfg.out.join("manifest.json"), cfg)?;
    let table = write_summary(&cfg.out, &summary)?;
    crate::emit(&format!("{table}wrote {}\n", cfg.out.display()))?;
    Ok(summary)
}

fn tcp_options(cfg: &RunConfig) -> TcpOptions {
    TcpOptions {
        connect_timeout: Duration::from_secs_f64(cfg.connect_timeout_s),
        ..TcpOptions::default()
    }
}

fn serve<E: Element>(cfg: &RunConfig, loaded: &Loaded) -> Result<(RunManifest, FederationOutcome)> {
    let fed = cfg.fed_for(0);
    let data = FederationData::prepare(loaded.dataset.clone(), &fed)?;
    let mut link = TcpServerLink::bind((cfg.host.as_str(), cfg.port), fed.clients, tcp_options(cfg))
        .with_context(|| format!("binding {}:{}", cfg.host, cfg.port))?;
    eprintln!(
        "listening on {}, waiting for {} clients",
        link.local_addr(),
        fed.clients
    );
    let outcome = run_federation::<E, _>(&fed, &data, &loaded.arch, &mut link, &FedAvg)?;
    let manifest = RunManifest {
        config: cfg.clone(),
        repetition: 0,
        partition: data.manifest(&fed),
        fed,
        arch: loaded.arch.clone(),
    };
    Ok((manifest, outcome))
}

/// Server side of one TCP federation; writes the same layout as a
/// single-repetition `simulate`.
pub fn server(cfg: &RunConfig) -> Result<Summary> {
    if cfg.rank.is_some_and(|r| r != 0) {
        bail!("the server is rank 0");
    }
    let loaded = load(cfg)?;
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let (manifest, outcome) = match cfg.precision {
        Dtype::F32 => serve::<f32>(cfg, &loaded)?,
        Dtype::F64 => serve::<f64>(cfg, &loaded)?,
    };
    let (metrics, timing) = write_repetition(&rep_dir(&cfg.out, 0), &manifest, &loaded.dataset, &outcome)?;
    let timings = vec![timing];
    write_json(&cfg.out.join("timing.json"), &timings)?;
    let summary = summarize(loaded.arch.name(), vec![metrics], &timings)?;
    let mut run_cfg = cfg.clone();
    run_cfg.repetitions = 1;
    write_json(&cfg.out.join("manifest.json"), &run_cfg)?;
    let table = write_summary(&cfg.out, &summary)?;
    crate::emit(&format!("{table}wrote {}\n", cfg.out.display()))?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize)]
pub struct ClientSummary {
    pub rank: u32,
    pub n_k: usize,
    pub traffic: TrafficSnapshot,
}

fn join<E: Element>(cfg: &RunConfig, loaded: &Loaded, rank: u32) -> Result<ClientSummary> {
    let fed = cfg.fed_for(0);
    let data = FederationData::prepare(loaded.dataset.clone(), &fed)?;
    let mut node = data.node::<E>(rank as usize - 1, &loaded.arch, &fed)?;
    let n_k = node.shard().n_k();
    let traffic = run_tcp_client((cfg.host.as_str(), cfg.port), &mut node, tcp_options(cfg))
        .with_context(|| format!("client rank {rank}"))?;
    Ok(ClientSummary { rank, n_k, traffic })
}

/// One client process: derives its shard from the shared seed, joins and
/// trains until the server shuts the federation down.
pub fn client(cfg: &RunConfig) -> Result<ClientSummary> {
    let rank = cfg
        .rank
        .ok_or_else(|| anyhow!("client needs --rank (1..{})", cfg.world_size))?;
    let loaded = load(cfg)?;
    let summary = match cfg.precision {
        Dtype::F32 => join::<f32>(cfg, &loaded, rank)?,
        Dtype::F64 => join::<f64>(cfg, &loaded, rank)?,
    };
    crate::emit(&(serde_json::to_string(&summary)? + "\n"))?;
    Ok(summary)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PartitionFile {
    pub manifest: PartitionManifest,
    pub folds: fedleaf::data::SplitIndices,
    pub shards: Vec<fedleaf::data::ClientShard>,
}

/// Writes the split and shard layout of repetition 0 without training.
pub fn partition(cfg: &RunConfig) -> Result<PartitionFile> {
    let (dataset, _) = cfg.load()?;
    let fed = cfg.fed_for(0);
    let data = FederationData::prepare(dataset, &fed)?;
    let file = PartitionFile {
        manifest: data.manifest(&fed),
        folds: data.folds.clone(),
        shards: data.shards.clone(),
    };
    fs::create_dir_all(&cfg.out).with_context(|| format!("creating {}", cfg.out.display()))?;
    let path = cfg.out.join("partition.json");
    write_json(&path, &file)?;
    let mut text = String::new();
    for s in &file.shards {
        let _ = writeln!(
            text,
            "client {} (rank {}): {} samples",
            s.client_id,
            s.client_id + 1,
            s.n_k()
        );
    }
    let _ = writeln!(text, "wrote {}", path.display());
    crate::emit(&text)?;
    Ok(file)
}
