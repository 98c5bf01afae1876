use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{FedError, LocalHyper};
use crate::data::SplitSpec;
use crate::nn::Dtype;

/// Per-client replacements for the shared local hyperparameters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ClientOverrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learning_rate: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub momentum: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub batch_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub local_epochs: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FedConfig {
    /// K, the number of clients.
    pub clients: usize,
    /// C, the fraction of clients sampled each round.
    pub participation: f64,
    /// T, communication rounds.
    pub rounds: usize,
    /// E, passes over the shard per round.
    pub local_epochs: usize,
    /// B, local minibatch size.
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub seed: u64,
    pub split: SplitSpec,
    pub wire_dtype: Dtype,
    pub allow_lossy_wire: bool,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub client_overrides: BTreeMap<usize, ClientOverrides>,
}

impl Default for FedConfig {
    fn default() -> Self {
        FedConfig {
            clients: 2,
            participation: 1.0,
            rounds: 50,
            local_epochs: 1,
            batch_size: 32,
            learning_rate: 0.001,
            momentum: 0.9,
            seed: 0,
            split: SplitSpec::default(),
            wire_dtype: Dtype::F32,
            allow_lossy_wire: false,
            client_overrides: BTreeMap::new(),
        }
    }
}

fn check_hyper(who: &str, h: &LocalHyper) -> Result<(), FedError> {
    if h.batch_size == 0 {
        return Err(FedError::Config(format!("{who}: batch size must be at least 1")));
    }
    if h.local_epochs == 0 {
        return Err(FedError::Config(format!("{who}: local epochs must be at least 1")));
    }
    if !(h.learning_rate.is_finite() && h.learning_rate >= 0.0) {
        return Err(FedError::Config(format!(
            "{who}: learning rate {} must be finite and non-negative",
            h.learning_rate
        )));
    }
    if !(0.0..1.0).contains(&h.momentum) {
        return Err(FedError::Config(format!(
            "{who}: momentum {} must be in [0, 1)",
            h.momentum
        )));
    }
    Ok(())
}

impl FedConfig {
    pub fn validate(&self) -> Result<(), FedError> {
        if self.clients == 0 {
            return Err(FedError::Config("at least one client is required".into()));
        }
        if !(self.participation > 0.0 && self.participation <= 1.0) {
            return Err(FedError::Config(format!(
                "participation {} must be in (0, 1]",
                self.participation
            )));
        }
        if self.rounds == 0 {
            return Err(FedError::Config("at least one round is required".into()));
        }
        if self.rounds > u32::MAX as usize {
            return Err(FedError::Config("round numbers must fit in 32 bits".into()));
        }
        self.split.validate()?;
        check_hyper("defaults", &self.local_hyper(usize::MAX))?;
        for &id in self.client_overrides.keys() {
            if id >= self.clients {
                return Err(FedError::Config(format!(
                    "override for client {id}, but only {} clients",
                    self.clients
                )));
            }
            check_hyper(&format!("client {id}"), &self.local_hyper(id))?;
        }
        Ok(())
    }

    /// m = max(floor(C·K), 1).
    pub fn participants(&self) -> usize {
        // The epsilon keeps products like 0.3·10 = 3.0000000000000004 and
        // 0.7·10 = 6.999999999999999 on the intended side of the floor.
        let m = (self.participation * self.clients as f64 + 1e-9).floor() as usize;
        m.clamp(1, self.clients.max(1))
    }

    /// Effective local hyperparameters for one client.
    pub fn local_hyper(&self, client_id: usize) -> LocalHyper {
        let o = self.client_overrides.get(&client_id).copied().unwrap_or_default();
        LocalHyper {
            learning_rate: o.learning_rate.unwrap_or(self.learning_rate),
            momentum: o.momentum.unwrap_or(self.momentum),
            batch_size: o.batch_size.unwrap_or(self.batch_size),
            local_epochs: o.local_epochs.unwrap_or(self.local_epochs),
        }
    }
}

/// Independent random streams derived from one run seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum SeedStream {
    Split = 1,
    Partition = 2,
    Init = 3,
    Sample = 4,
    Data = 5,
}

/// Mixes a run seed, a stream and an index into a child seed (splitmix64
/// finalizer), so nearby seeds give unrelated streams.
pub fn derive_seed(base: u64, stream: SeedStream, index: u64) -> u64 {
    let mut z = base
        .wrapping_add((stream as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
        .wrapping_add(index.wrapping_mul(0xD1B5_4A32_D192_ED03));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with(participation: f64, clients: usize) -> FedConfig {
        FedConfig {
            participation,
            clients,
            ..FedConfig::default()
        }
    }

    #[test]
    fn participants_floor_rule() {
        assert_eq!(with(1.0, 5).participants(), 5);
        assert_eq!(with(0.1, 5).participants(), 1);
        assert_eq!(with(0.5, 5).participants(), 2);
        assert_eq!(with(0.3, 10).participants(), 3);
        assert_eq!(with(0.7, 10).participants(), 7);
    }

    #[test]
    fn defaults_are_valid() {
        FedConfig::default().validate().unwrap();
    }

    #[test]
    fn rejects_degenerate_settings() {
        for cfg in [
            FedConfig {
                clients: 0,
                ..FedConfig::default()
            },
            FedConfig {
                rounds: 0,
                ..FedConfig::default()
            },
            FedConfig {
                local_epochs: 0,
                ..FedConfig::default()
            },
            FedConfig {
                batch_size: 0,
                ..FedConfig::default()
            },
            FedConfig {
                participation: 0.0,
                ..FedConfig::default()
            },
            FedConfig {
                participation: 1.5,
                ..FedConfig::default()
            },
            FedConfig {
                momentum: 1.0,
                ..FedConfig::default()
            },
            FedConfig {
                learning_rate: -0.1,
                ..FedConfig::default()
            },
        ] {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn overrides_apply_per_client() {
        let mut cfg = FedConfig::default();
        cfg.client_overrides.insert(
            1,
            ClientOverrides {
                learning_rate: Some(0.1),
                local_epochs: Some(3),
                ..Default::default()
            },
        );
        cfg.validate().unwrap();
        assert_eq!(cfg.local_hyper(0).learning_rate, 0.001);
        assert_eq!(cfg.local_hyper(1).learning_rate, 0.1);
        assert_eq!(cfg.local_hyper(1).local_epochs, 3);
        assert_eq!(cfg.local_hyper(1).batch_size, 32);
        cfg.client_overrides.insert(2, ClientOverrides::default());
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn streams_are_distinct() {
        let a = derive_seed(7, SeedStream::Split, 0);
        let b = derive_seed(7, SeedStream::Partition, 0);
        let c = derive_seed(8, SeedStream::Split, 0);
        assert!(a != b && a != c && b != c);
        assert_eq!(a, derive_seed(7, SeedStream::Split, 0));
    }
}
