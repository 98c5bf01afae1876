use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{derive_seed, FedConfig, SeedStream};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundPlan {
    pub round: u32,
    pub m: usize,
    /// Sampled client ids, ascending.
    pub clients: Vec<usize>,
}

/// Draws m = max(floor(C·K), 1) distinct clients uniformly, as a pure
/// function of (seed, round).
pub fn sample_clients(cfg: &FedConfig, round: u32, seed: u64) -> RoundPlan {
    let m = cfg.participants();
    let clients = if m == cfg.clients {
        (0..m).collect()
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, SeedStream::Sample, round as u64));
        let mut ids = rand::seq::index::sample(&mut rng, cfg.clients, m).into_vec();
        ids.sort_unstable();
        ids
    };
    RoundPlan { round, m, clients }
}
