//! Payload encodings carried inside frames.

use super::ProtocolError;
use crate::fed::ModelParams;
use crate::nn::Dtype;

/// Values in canonical order, little-endian, at the params' element width.
pub fn serialize_params(w: &ModelParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(w.len() * w.dtype().width());
    match w.dtype() {
        Dtype::F32 => {
            for v in w.values() {
                out.extend_from_slice(&(*v as f32).to_le_bytes());
            }
        }
        Dtype::F64 => {
            for v in w.values() {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    out
}

pub fn deserialize_params(bytes: &[u8], dtype: Dtype, arch_name: &str) -> Result<ModelParams, ProtocolError> {
    let width = dtype.width();
    if !bytes.len().is_multiple_of(width) {
        return Err(ProtocolError::BadPayload(format!(
            "{} bytes is not a whole number of {dtype} values",
            bytes.len()
        )));
    }
    let values: Vec<f64> = match dtype {
        Dtype::F32 => bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")) as f64)
            .collect(),
        Dtype::F64 => bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect(),
    };
    ModelParams::new(arch_name, dtype, values).map_err(|e| ProtocolError::BadPayload(e.to_string()))
}

/// JOIN payload: rank and world size, both u32.
pub fn encode_join(rank: u32, world_size: u32) -> Vec<u8> {
    let mut out = Vec::with_capacity(8);
    out.extend_from_slice(&rank.to_le_bytes());
    out.extend_from_slice(&world_size.to_le_bytes());
    out
}

pub fn decode_join(payload: &[u8]) -> Result<(u32, u32), ProtocolError> {
    if payload.len() != 8 {
        return Err(ProtocolError::BadPayload(format!(
            "JOIN payload must be 8 bytes, got {}",
            payload.len()
        )));
    }
    Ok((
        u32::from_le_bytes(payload[0..4].try_into().expect("4 bytes")),
        u32::from_le_bytes(payload[4..8].try_into().expect("4 bytes")),
    ))
}

pub const JOIN_PAYLOAD_LEN: usize = 8;
pub const EVAL_PAYLOAD_LEN: usize = 16;

/// EVAL_REPORT payload: final local-epoch loss and local training seconds.
pub fn encode_eval(loss: f64, wall_seconds: f64) -> Vec<u8> {
    let mut out = Vec::with_capacity(EVAL_PAYLOAD_LEN);
    out.extend_from_slice(&loss.to_le_bytes());
    out.extend_from_slice(&wall_seconds.to_le_bytes());
    out
}

pub fn decode_eval(payload: &[u8]) -> Result<(f64, f64), ProtocolError> {
    if payload.len() != EVAL_PAYLOAD_LEN {
        return Err(ProtocolError::BadPayload(format!(
            "EVAL_REPORT payload must be {EVAL_PAYLOAD_LEN} bytes, got {}",
            payload.len()
        )));
    }
    Ok((
        f64::from_le_bytes(payload[0..8].try_into().expect("8 bytes")),
        f64::from_le_bytes(payload[8..16].try_into().expect("8 bytes")),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::transport::{Frame, MsgType, HEADER_LEN};

    #[test]
    fn f64_round_trip_is_bit_exact() {
        let w = ModelParams::new("m", Dtype::F64, vec![1.0, -2.5]).unwrap();
        let bytes = serialize_params(&w);
        assert_eq!(bytes.len(), 16);
        assert_eq!(deserialize_params(&bytes, Dtype::F64, "m").unwrap(), w);
    }

    #[test]
    fn empty_params_make_a_bare_frame() {
        let w = ModelParams::new("m", Dtype::F32, vec![]).unwrap();
        let payload = serialize_params(&w);
        assert!(payload.is_empty());
        let f = Frame::new(MsgType::GlobalModel, Dtype::F32, 1, 0, payload);
        assert_eq!(f.encode().len(), HEADER_LEN);
        assert_eq!(Frame::decode(&f.encode()).unwrap(), f);
    }

    #[test]
    fn ten_f32_params() {
        let w = ModelParams::new("m", Dtype::F32, (0..10).map(f64::from).collect()).unwrap();
        let f = Frame::new(MsgType::GlobalModel, Dtype::F32, 1, 0, serialize_params(&w));
        assert_eq!(f.payload.len(), 40);
        assert_eq!(f.encode().len(), 68);
    }

    #[test]
    fn ragged_payload_is_rejected() {
        assert!(deserialize_params(&[0; 6], Dtype::F32, "m").is_err());
        assert!(decode_join(&[0; 7]).is_err());
        assert!(decode_eval(&[0; 8]).is_err());
    }
}
