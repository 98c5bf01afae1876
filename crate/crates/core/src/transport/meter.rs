use std::collections::BTreeMap;
use std::sync::Mutex;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    ServerToClient,
    ClientToServer,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DirBytes {
    pub server_to_client: u64,
    pub client_to_server: u64,
}

impl DirBytes {
    pub fn total(&self) -> u64 {
        self.server_to_client + self.client_to_server
    }

    fn add(&mut self, dir: Direction, bytes: u64) {
        match dir {
            Direction::ServerToClient => self.server_to_client += bytes,
            Direction::ClientToServer => self.client_to_server += bytes,
        }
    }
}

impl std::ops::AddAssign for DirBytes {
    fn add_assign(&mut self, rhs: Self) {
        self.server_to_client += rhs.server_to_client;
        self.client_to_server += rhs.client_to_server;
    }
}

#[derive(Debug, Default)]
struct MeterState {
    rounds: BTreeMap<u32, DirBytes>,
    total: DirBytes,
    frames: u64,
}

/// Byte counters keyed by the round in each frame header. Round 0 holds
/// session frames (JOIN, SHUTDOWN, ERROR). Safe to share between
/// connection handlers.
#[derive(Debug, Default)]
pub struct TrafficMeter {
    state: Mutex<MeterState>,
}

/// Point-in-time copy of a meter.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrafficSnapshot {
    pub rounds: BTreeMap<u32, DirBytes>,
    pub total: DirBytes,
    pub frames: u64,
}

impl TrafficMeter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self, round: u32, dir: Direction, bytes: u64) {
        let mut s = self.state.lock().expect("meter lock");
        s.rounds.entry(round).or_default().add(dir, bytes);
        s.total.add(dir, bytes);
        s.frames += 1;
    }

    pub fn round(&self, round: u32) -> DirBytes {
        self.state
            .lock()
            .expect("meter lock")
            .rounds
            .get(&round)
            .copied()
            .unwrap_or_default()
    }

    pub fn total(&self) -> DirBytes {
        self.state.lock().expect("meter lock").total
    }

    pub fn snapshot(&self) -> TrafficSnapshot {
        let s = self.state.lock().expect("meter lock");
        TrafficSnapshot {
            rounds: s.rounds.clone(),
            total: s.total,
            frames: s.frames,
        }
    }
}

impl TrafficSnapshot {
    /// Sums several endpoint snapshots (e.g. all client sides).
    pub fn merged<'a>(parts: impl IntoIterator<Item = &'a TrafficSnapshot>) -> TrafficSnapshot {
        let mut out = TrafficSnapshot::default();
        for p in parts {
            for (r, b) in &p.rounds {
                *out.rounds.entry(*r).or_default() += *b;
            }
            out.total += p.total;
            out.frames += p.frames;
        }
        out
    }

    pub fn is_conserved(&self) -> bool {
        let mut sum = DirBytes::default();
        for b in self.rounds.values() {
            sum += *b;
        }
        sum == self.total
    }
}
