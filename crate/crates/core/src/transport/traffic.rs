use serde::{Deserialize, Serialize};

use super::{EVAL_PAYLOAD_LEN, HEADER_LEN, JOIN_PAYLOAD_LEN};
use crate::arch::ArchDescriptor;
use crate::nn::Dtype;

/// Predicted bytes for one round.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoundTraffic {
    pub participants: usize,
    /// One GLOBAL_MODEL or LOCAL_UPDATE frame.
    pub model_frame_bytes: u64,
    /// m × 2 model frames.
    pub model_bytes: u64,
    /// m EVAL_REPORT frames.
    pub control_bytes: u64,
    pub server_to_client: u64,
    pub client_to_server: u64,
    pub total: u64,
}

/// Bytes exchanged in one round with `participants` sampled clients.
pub fn round_traffic(arch: &ArchDescriptor, participants: usize, dtype: Dtype) -> RoundTraffic {
    let m = participants as u64;
    let frame = (HEADER_LEN + arch.transmitted_count() * dtype.width()) as u64;
    let control = m * (HEADER_LEN + EVAL_PAYLOAD_LEN) as u64;
    RoundTraffic {
        participants,
        model_frame_bytes: frame,
        model_bytes: 2 * m * frame,
        control_bytes: control,
        server_to_client: m * frame,
        client_to_server: m * frame + control,
        total: 2 * m * frame + control,
    }
}

/// JOIN and SHUTDOWN frames for `clients` clients (metered under round 0).
pub fn session_traffic(clients: usize) -> (u64, u64) {
    let k = clients as u64;
    (k * HEADER_LEN as u64, k * (HEADER_LEN + JOIN_PAYLOAD_LEN) as u64)
}
