use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{FedConfig, FedError, ModelParams};
use crate::arch::ArchDescriptor;
use crate::data::{ClientShard, Dataset};
use crate::nn::{Dtype, Element, Model, SgdMomentum};
use crate::transport::{
    client_rank, deserialize_params, encode_eval, encode_join, serialize_params, Frame, FrameHandler, MsgType,
    TransportError,
};

/// Hyperparameters of one client's local training.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LocalHyper {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub local_epochs: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientUpdateResult {
    pub client_id: usize,
    pub round: u32,
    pub n_k: usize,
    pub w: ModelParams,
    /// Sample-weighted mean batch loss over the final local epoch.
    pub local_loss: f64,
    pub wall_time: f64,
}

/// Loads `w_global` into `model` and runs E epochs of minibatch SGD with
/// momentum over the shard. Batches are consecutive chunks of the shard's
/// index list, the same every epoch; the velocity starts at zero.
pub fn client_update<E: Element>(
    model: &mut Model<E>,
    w_global: &ModelParams,
    data: &Dataset,
    shard: &ClientShard,
    hyper: &LocalHyper,
    round: u32,
) -> Result<ClientUpdateResult, FedError> {
    let start = Instant::now();
    if shard.indices.is_empty() {
        return Err(FedError::EmptyShard(shard.client_id));
    }
    if hyper.local_epochs == 0 || hyper.batch_size == 0 {
        return Err(FedError::Config(
            "local epochs and batch size must be at least 1".into(),
        ));
    }
    w_global.load_into(model)?;
    let mut opt = SgdMomentum::new(hyper.learning_rate, hyper.momentum)?;
    let mut local_loss = 0.0;
    for epoch in 0..hyper.local_epochs {
        let mut total = 0.0;
        for chunk in shard.indices.chunks(hyper.batch_size) {
            let (x, labels) = data.batch::<E>(chunk);
            let loss = model.train_batch(&x, &labels, &mut opt)?;
            total += loss.0 * chunk.len() as f64;
        }
        if epoch + 1 == hyper.local_epochs {
            local_loss = total / shard.n_k() as f64;
        }
    }
    let w = ModelParams::from_model(w_global.arch_name(), model)?;
    Ok(ClientUpdateResult {
        client_id: shard.client_id,
        round,
        n_k: shard.n_k(),
        w,
        local_loss,
        wall_time: start.elapsed().as_secs_f64(),
    })
}

/// A client process: its shard, its local model and the wire rules. Used by
/// both the simulated and TCP backends.
pub struct ClientNode<E: Element> {
    client_id: usize,
    world_size: u32,
    arch: ArchDescriptor,
    data: Arc<Dataset>,
    shard: ClientShard,
    hyper: LocalHyper,
    join_dtype: Dtype,
    allow_lossy: bool,
    model: Model<E>,
    last: Option<ClientUpdateResult>,
}

impl<E: Element> ClientNode<E> {
    pub fn new(
        arch: &ArchDescriptor,
        data: Arc<Dataset>,
        shard: ClientShard,
        cfg: &FedConfig,
    ) -> Result<Self, FedError> {
        if shard.indices.is_empty() {
            return Err(FedError::EmptyShard(shard.client_id));
        }
        if shard.client_id >= cfg.clients {
            return Err(FedError::Config(format!(
                "client {} outside 0..{}",
                shard.client_id, cfg.clients
            )));
        }
        Ok(ClientNode {
            client_id: shard.client_id,
            world_size: cfg.clients as u32 + 1,
            arch: arch.clone(),
            model: arch.build::<E>(0)?,
            data,
            hyper: cfg.local_hyper(shard.client_id),
            shard,
            join_dtype: cfg.wire_dtype,
            allow_lossy: cfg.allow_lossy_wire,
            last: None,
        })
    }

    pub fn shard(&self) -> &ClientShard {
        &self.shard
    }

    /// The most recent local update, at model precision.
    pub fn last_update(&self) -> Option<&ClientUpdateResult> {
        self.last.as_ref()
    }

    fn train(&mut self, frame: &Frame) -> Result<[Frame; 2], FedError> {
        let received =
            deserialize_params(&frame.payload, frame.dtype, self.arch.name()).map_err(TransportError::from)?;
        let global = received.cast(E::DTYPE, self.allow_lossy)?;
        let result = client_update(
            &mut self.model,
            &global,
            &self.data,
            &self.shard,
            &self.hyper,
            frame.round,
        )?;
        let outgoing = result.w.cast(frame.dtype, self.allow_lossy)?;
        let n_k = result.n_k as u64;
        let update = Frame::new(
            MsgType::LocalUpdate,
            frame.dtype,
            frame.round,
            n_k,
            serialize_params(&outgoing),
        );
        let report = Frame::new(
            MsgType::EvalReport,
            Dtype::F64,
            frame.round,
            n_k,
            encode_eval(result.local_loss, result.wall_time),
        );
        self.last = Some(result);
        Ok([update, report])
    }
}

impl<E: Element> FrameHandler for ClientNode<E> {
    fn client_id(&self) -> usize {
        self.client_id
    }

    fn join_frame(&self) -> Frame {
        Frame::new(
            MsgType::Join,
            self.join_dtype,
            0,
            self.shard.n_k() as u64,
            encode_join(client_rank(self.client_id), self.world_size),
        )
    }

    fn on_global_model(&mut self, frame: &Frame) -> Result<[Frame; 2], String> {
        self.train(frame).map_err(|e| e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arch::LayerSpec;

    fn one_sample() -> Dataset {
        Dataset::new(vec![1.0], vec![1], vec![0], vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn zero_learning_rate_returns_global_exactly() {
        let arch = crate::arch::tiny_mlp(1, 4, 2).unwrap();
        let mut model = arch.build::<f64>(3).unwrap();
        let w = ModelParams::from_model("tiny_mlp", &model).unwrap();
        let shard = ClientShard {
            client_id: 0,
            indices: vec![0],
        };
        let hyper = LocalHyper {
            learning_rate: 0.0,
            momentum: 0.9,
            batch_size: 1,
            local_epochs: 1,
        };
        let r = client_update(&mut model, &w, &one_sample(), &shard, &hyper, 1).unwrap();
        assert_eq!(r.w, w);
        assert_eq!(r.n_k, 1);
    }

    #[test]
    fn rejects_empty_shard_and_zero_epochs() {
        let arch = crate::arch::tiny_mlp(1, 4, 2).unwrap();
        let mut model = arch.build::<f64>(3).unwrap();
        let w = ModelParams::from_model("tiny_mlp", &model).unwrap();
        let mut hyper = LocalHyper {
            learning_rate: 0.1,
            momentum: 0.0,
            batch_size: 1,
            local_epochs: 1,
        };
        let empty = ClientShard {
            client_id: 2,
            indices: vec![],
        };
        assert_eq!(
            client_update(&mut model, &w, &one_sample(), &empty, &hyper, 1),
            Err(FedError::EmptyShard(2))
        );
        hyper.local_epochs = 0;
        let shard = ClientShard {
            client_id: 0,
            indices: vec![0],
        };
        assert!(client_update(&mut model, &w, &one_sample(), &shard, &hyper, 1).is_err());
    }

    #[test]
    fn architecture_mismatch_is_rejected() {
        let arch = crate::arch::tiny_mlp(1, 4, 2).unwrap();
        let mut model = arch.build::<f64>(3).unwrap();
        let w = ModelParams::new("other", Dtype::F64, vec![0.0; 3]).unwrap();
        let shard = ClientShard {
            client_id: 0,
            indices: vec![0],
        };
        let hyper = LocalHyper {
            learning_rate: 0.1,
            momentum: 0.0,
            batch_size: 1,
            local_epochs: 1,
        };
        assert!(matches!(
            client_update(&mut model, &w, &one_sample(), &shard, &hyper, 1),
            Err(FedError::ArchMismatch(_))
        ));
    }

    #[test]
    fn one_step_moves_single_weight() {
        let arch = ArchDescriptor::new(
            "lin",
            vec![1],
            vec![LayerSpec::Dense {
                in_features: 1,
                out_features: 2,
                bias: false,
            }],
            2,
            true,
        )
        .unwrap();
        let mut model = arch.build::<f64>(0).unwrap();
        let w = ModelParams::new("lin", Dtype::F64, vec![0.0, 0.0]).unwrap();
        let data = Dataset::new(vec![4.0], vec![1], vec![0], vec!["a".into(), "b".into()]).unwrap();
        let shard = ClientShard {
            client_id: 0,
            indices: vec![0],
        };
        let hyper = LocalHyper {
            learning_rate: 0.5,
            momentum: 0.0,
            batch_size: 1,
            local_epochs: 1,
        };
        // softmax([0,0]) = [0.5,0.5], dL/dz = [-0.5, 0.5], dL/dw = x·dL/dz = [-2, 2].
        // The weight with gradient 2.0 moves by -0.5·2.0 = -1.0.
        let r = client_update(&mut model, &w, &data, &shard, &hyper, 1).unwrap();
        assert_eq!(r.w.values(), &[1.0, -1.0]);
        assert!((r.local_loss - 2f64.ln()).abs() < 1e-15);
    }
}
