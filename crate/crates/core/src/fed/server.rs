use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{
    derive_seed, sample_clients, Aggregator, ClientNode, ClientUpdateResult, FedConfig, FedError, ModelParams,
    SeedStream,
};
use crate::arch::ArchDescriptor;
use crate::data::{partition_iid, split, ClientShard, Dataset, PartitionManifest, SplitIndices};
use crate::metrics::{confusion, metrics_from_cm, ConfusionMatrix, MetricsReport};
use crate::nn::{argmax, cross_entropy, Element, Model};
use crate::transport::{
    decode_eval, deserialize_params, serialize_params, Frame, MsgType, ServerLink, TrafficSnapshot,
};

const EVAL_BATCH: usize = 256;

/// A dataset with its folds and client shards, all fixed by the run seed.
/// Server and clients derive the same layout independently.
#[derive(Debug, Clone)]
pub struct FederationData {
    pub dataset: Arc<Dataset>,
    pub folds: SplitIndices,
    pub shards: Vec<ClientShard>,
}

impl FederationData {
    pub fn prepare(dataset: Dataset, cfg: &FedConfig) -> Result<Self, FedError> {
        cfg.validate()?;
        let folds = split(&dataset, &cfg.split, derive_seed(cfg.seed, SeedStream::Split, 0))?;
        let shards = partition_iid(
            &folds.train,
            cfg.clients,
            derive_seed(cfg.seed, SeedStream::Partition, 0),
        )?;
        Ok(FederationData {
            dataset: Arc::new(dataset),
            folds,
            shards,
        })
    }

    pub fn manifest(&self, cfg: &FedConfig) -> PartitionManifest {
        PartitionManifest::new(cfg.seed, cfg.split, &self.dataset, &self.folds, &self.shards)
    }

    pub fn node<E: Element>(
        &self,
        client_id: usize,
        arch: &ArchDescriptor,
        cfg: &FedConfig,
    ) -> Result<ClientNode<E>, FedError> {
        let shard = self
            .shards
            .get(client_id)
            .ok_or_else(|| FedError::Config(format!("no shard for client {client_id}")))?;
        ClientNode::new(arch, self.dataset.clone(), shard.clone(), cfg)
    }

    pub fn nodes<E: Element>(&self, arch: &ArchDescriptor, cfg: &FedConfig) -> Result<Vec<ClientNode<E>>, FedError> {
        (0..self.shards.len()).map(|id| self.node(id, arch, cfg)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub loss: f64,
    pub confusion: ConfusionMatrix,
}

impl Evaluation {
    pub fn accuracy(&self) -> f64 {
        self.confusion.trace() as f64 / self.confusion.total() as f64
    }
}

/// Eval-mode loss and confusion matrix over the given samples.
pub fn evaluate<E: Element>(model: &mut Model<E>, data: &Dataset, indices: &[usize]) -> Result<Evaluation, FedError> {
    let classes = model.num_classes();
    let mut predicted = Vec::with_capacity(indices.len());
    let mut truth = Vec::with_capacity(indices.len());
    let mut loss_sum = 0.0;
    for chunk in indices.chunks(EVAL_BATCH) {
        let (x, labels) = data.batch::<E>(chunk);
        let logits = model.infer(&x)?;
        loss_sum += cross_entropy(&logits, &labels)?.0 * chunk.len() as f64;
        predicted.extend(logits.data().chunks(classes).map(argmax));
        truth.extend(labels);
    }
    let loss = if indices.is_empty() {
        0.0
    } else {
        loss_sum / indices.len() as f64
    };
    Ok(Evaluation {
        loss,
        confusion: confusion(&truth, &predicted, classes)?,
    })
}

/// One row of the training history. Everything except `wall_time_s` is a
/// deterministic function of the seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: u32,
    pub sampled: Vec<usize>,
    /// Sample-weighted mean of the clients' final-epoch losses.
    pub train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
    pub bytes_down: u64,
    pub bytes_up: u64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FederationOutcome {
    pub rounds: Vec<RoundRecord>,
    pub final_params: ModelParams,
    pub test: Evaluation,
    pub test_report: MetricsReport,
    pub traffic: TrafficSnapshot,
    pub wall_time_s: f64,
}

fn protocol(round: u32, message: impl Into<String>) -> FedError {
    FedError::Protocol {
        round,
        message: message.into(),
    }
}

/// The server's side of a federation: initialize W_0, then for each round
/// sample clients, broadcast, collect, aggregate and validate; finally
/// evaluate on the test fold.
pub fn run_federation<E: Element, L: ServerLink>(
    cfg: &FedConfig,
    data: &FederationData,
    arch: &ArchDescriptor,
    link: &mut L,
    aggregator: &dyn Aggregator,
) -> Result<FederationOutcome, FedError> {
    let start = Instant::now();
    cfg.validate()?;
    if E::DTYPE.width() > cfg.wire_dtype.width() && !cfg.allow_lossy_wire {
        return Err(FedError::LossyCast {
            from: E::DTYPE,
            to: cfg.wire_dtype,
        });
    }
    if arch.input_shape() != data.dataset.sample_shape() {
        return Err(FedError::ArchMismatch(format!(
            "`{}` expects input {:?}, dataset samples are {:?}",
            arch.name(),
            arch.input_shape(),
            data.dataset.sample_shape()
        )));
    }
    if arch.num_classes() != data.dataset.num_classes() {
        return Err(FedError::ArchMismatch(format!(
            "`{}` has {} outputs, dataset has {} classes",
            arch.name(),
            arch.num_classes(),
            data.dataset.num_classes()
        )));
    }

    let mut model = arch.build::<E>(derive_seed(cfg.seed, SeedStream::Init, 0))?;
    let mut global = ModelParams::from_model(arch.name(), &model)?;

    let joined = link.join()?;
    if joined.len() != cfg.clients {
        return Err(protocol(
            0,
            format!("{} clients joined, expected {}", joined.len(), cfg.clients),
        ));
    }
    for j in &joined {
        let expected = data.shards[j.client_id].n_k() as u64;
        if j.n_k != expected {
            return Err(protocol(
                0,
                format!(
                    "client {} reports {} samples, the shared layout gives it {expected}",
                    j.client_id, j.n_k
                ),
            ));
        }
    }

    let mut rounds = Vec::with_capacity(cfg.rounds);
    for t in 1..=cfg.rounds as u32 {
        let round_start = Instant::now();
        let plan = sample_clients(cfg, t, cfg.seed);
        let wire = global.cast(cfg.wire_dtype, cfg.allow_lossy_wire)?;
        let frame = Frame::new(MsgType::GlobalModel, wire.dtype(), t, 0, serialize_params(&wire));
        let replies = link
            .exchange(&plan.clients, &frame)
            .map_err(|source| FedError::Round { round: t, source })?;
        if replies.len() != plan.m {
            return Err(protocol(
                t,
                format!("{} replies for {} sampled clients", replies.len(), plan.m),
            ));
        }

        let mut results = Vec::with_capacity(replies.len());
        for reply in replies {
            let n_k = joined[reply.client_id].n_k;
            if reply.update.sample_count != n_k || reply.report.sample_count != n_k {
                return Err(protocol(
                    t,
                    format!(
                        "client {} trained on {} samples, joined with {n_k}",
                        reply.client_id, reply.update.sample_count
                    ),
                ));
            }
            let w = deserialize_params(&reply.update.payload, reply.update.dtype, arch.name())
                .map_err(|e| protocol(t, e.to_string()))?
                .cast(E::DTYPE, cfg.allow_lossy_wire)?;
            if w.len() != global.len() {
                return Err(FedError::ArchMismatch(format!(
                    "client {} sent {} values, expected {}",
                    reply.client_id,
                    w.len(),
                    global.len()
                )));
            }
            let (local_loss, wall_time) = decode_eval(&reply.report.payload).map_err(|e| protocol(t, e.to_string()))?;
            results.push(ClientUpdateResult {
                client_id: reply.client_id,
                round: t,
                n_k: n_k as usize,
                w,
                local_loss,
                wall_time,
            });
        }

        global = aggregator.aggregate(&results)?;
        let n: f64 = results.iter().map(|r| r.n_k as f64).sum();
        let train_loss = results.iter().map(|r| r.n_k as f64 * r.local_loss).sum::<f64>() / n;

        global.load_into(&mut model)?;
        let (val_loss, val_accuracy) = if data.folds.val.is_empty() {
            (None, None)
        } else {
            let ev = evaluate(&mut model, &data.dataset, &data.folds.val)?;
            (Some(ev.loss), Some(ev.accuracy()))
        };
        let bytes = link.server_traffic().rounds.get(&t).copied().unwrap_or_default();
        rounds.push(RoundRecord {
            round: t,
            sampled: plan.clients,
            train_loss,
            val_loss,
            val_accuracy,
            bytes_down: bytes.server_to_client,
            bytes_up: bytes.client_to_server,
            wall_time_s: round_start.elapsed().as_secs_f64(),
        });
    }
    link.shutdown()?;

    global.load_into(&mut model)?;
    let test = evaluate(&mut model, &data.dataset, &data.folds.test)?;
    let wall_time_s = start.elapsed().as_secs_f64();
    let mut test_report = metrics_from_cm(&test.confusion)?;
    test_report.loss = Some(test.loss);
    Ok(FederationOutcome {
        rounds,
        final_params: global,
        test,
        test_report,
        traffic: link.server_traffic(),
        wall_time_s,
    })
}
