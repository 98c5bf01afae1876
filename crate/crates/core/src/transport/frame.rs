//! Fixed 28-byte little-endian header followed by the payload:
//!
//! | off | len | field                          |
//! |-----|-----|--------------------------------|
//! | 0   | 4   | magic `FLML`                   |
//! | 4   | 1   | version (1)                    |
//! | 5   | 1   | message type                   |
//! | 6   | 1   | dtype (1 = f32, 2 = f64)       |
//! | 7   | 1   | reserved (0)                   |
//! | 8   | 4   | round, u32                     |
//! | 12  | 8   | sample count, u64              |
//! | 20  | 8   | payload length, u64            |

use std::io::{Read, Write};

use super::ProtocolError;
use crate::nn::Dtype;

pub const MAGIC: [u8; 4] = *b"FLML";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 28;
/// Largest payload a peer will accept (VGG-11 at f64 is ~1 GiB).
pub const MAX_PAYLOAD: u64 = 4 << 30;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum MsgType {
    Join = 1,
    GlobalModel = 2,
    LocalUpdate = 3,
    EvalReport = 4,
    Shutdown = 5,
    Error = 6,
}

impl MsgType {
    pub const ALL: [MsgType; 6] = [
        MsgType::Join,
        MsgType::GlobalModel,
        MsgType::LocalUpdate,
        MsgType::EvalReport,
        MsgType::Shutdown,
        MsgType::Error,
    ];

    pub fn from_byte(b: u8) -> Option<Self> {
        MsgType::ALL.get(b.wrapping_sub(1) as usize).copied()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    pub msg_type: MsgType,
    pub dtype: Dtype,
    pub round: u32,
    pub sample_count: u64,
    pub payload: Vec<u8>,
}

/// Decoded header; the payload has not been read yet.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Header {
    pub msg_type: MsgType,
    pub dtype: Dtype,
    pub round: u32,
    pub sample_count: u64,
    pub payload_len: u64,
}

impl Header {
    pub fn decode(bytes: &[u8; HEADER_LEN]) -> Result<Self, ProtocolError> {
        if bytes[0..4] != MAGIC {
            return Err(ProtocolError::BadMagic([bytes[0], bytes[1], bytes[2], bytes[3]]));
        }
        if bytes[4] != VERSION {
            return Err(ProtocolError::BadVersion(bytes[4]));
        }
        let msg_type = MsgType::from_byte(bytes[5]).ok_or(ProtocolError::UnknownMsgType(bytes[5]))?;
        let dtype = Dtype::from_tag(bytes[6]).ok_or(ProtocolError::UnknownDtype(bytes[6]))?;
        if bytes[7] != 0 {
            return Err(ProtocolError::Reserved(bytes[7]));
        }
        let u64_at = |at: usize| u64::from_le_bytes(bytes[at..at + 8].try_into().expect("8 bytes"));
        let payload_len = u64_at(20);
        if payload_len > MAX_PAYLOAD {
            return Err(ProtocolError::PayloadTooLarge(payload_len));
        }
        Ok(Header {
            msg_type,
            dtype,
            round: u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")),
            sample_count: u64_at(12),
            payload_len,
        })
    }
}

impl Frame {
    pub fn new(msg_type: MsgType, dtype: Dtype, round: u32, sample_count: u64, payload: Vec<u8>) -> Self {
        Frame {
            msg_type,
            dtype,
            round,
            sample_count,
            payload,
        }
    }

    /// Header plus payload.
    pub fn wire_len(&self) -> usize {
        HEADER_LEN + self.payload.len()
    }

    pub fn header_bytes(&self) -> [u8; HEADER_LEN] {
        let mut h = [0u8; HEADER_LEN];
        h[0..4].copy_from_slice(&MAGIC);
        h[4] = VERSION;
        h[5] = self.msg_type as u8;
        h[6] = self.dtype.tag();
        h[7] = 0;
        h[8..12].copy_from_slice(&self.round.to_le_bytes());
        h[12..20].copy_from_slice(&self.sample_count.to_le_bytes());
        h[20..28].copy_from_slice(&(self.payload.len() as u64).to_le_bytes());
        h
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.wire_len());
        out.extend_from_slice(&self.header_bytes());
        out.extend_from_slice(&self.payload);
        out
    }

    /// Decodes exactly one frame; trailing or missing bytes are an error.
    pub fn decode(bytes: &[u8]) -> Result<Self, ProtocolError> {
        let head: &[u8; HEADER_LEN] =
            bytes
                .get(..HEADER_LEN)
                .and_then(|h| h.try_into().ok())
                .ok_or(ProtocolError::Truncated {
                    expected: HEADER_LEN as u64,
                    got: bytes.len() as u64,
                })?;
        let header = Header::decode(head)?;
        let body = &bytes[HEADER_LEN..];
        if body.len() as u64 != header.payload_len {
            return Err(ProtocolError::PayloadLength {
                declared: header.payload_len,
                actual: body.len() as u64,
            });
        }
        Ok(Frame {
            msg_type: header.msg_type,
            dtype: header.dtype,
            round: header.round,
            sample_count: header.sample_count,
            payload: body.to_vec(),
        })
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> std::io::Result<()> {
        w.write_all(&self.header_bytes())?;
        w.write_all(&self.payload)?;
        w.flush()
    }

    /// Reads one frame from a byte stream. The header is validated before
    /// any payload is read.
    pub fn read_from<R: Read>(r: &mut R) -> Result<Self, ProtocolError> {
        let mut head = [0u8; HEADER_LEN];
        r.read_exact(&mut head).map_err(ProtocolError::from_io)?;
        let header = Header::decode(&head)?;
        let mut payload = Vec::new();
        let got = r
            .by_ref()
            .take(header.payload_len)
            .read_to_end(&mut payload)
            .map_err(ProtocolError::from_io)?;
        if got as u64 != header.payload_len {
            return Err(ProtocolError::PayloadLength {
                declared: header.payload_len,
                actual: got as u64,
            });
        }
        Ok(Frame {
            msg_type: header.msg_type,
            dtype: header.dtype,
            round: header.round,
            sample_count: header.sample_count,
            payload,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn any_frame() -> impl Strategy<Value = Frame> {
        (
            0usize..6,
            any::<bool>(),
            any::<u32>(),
            any::<u64>(),
            proptest::collection::vec(any::<u8>(), 0..256),
        )
            .prop_map(|(t, wide, round, samples, payload)| Frame {
                msg_type: MsgType::ALL[t],
                dtype: if wide { Dtype::F64 } else { Dtype::F32 },
                round,
                sample_count: samples,
                payload,
            })
    }

    proptest! {
        #[test]
        fn encode_decode_round_trip(f in any_frame()) {
            let bytes = f.encode();
            prop_assert_eq!(bytes.len(), HEADER_LEN + f.payload.len());
            prop_assert_eq!(Frame::decode(&bytes).unwrap(), f.clone());
            prop_assert_eq!(Frame::read_from(&mut bytes.as_slice()).unwrap(), f);
        }
    }

    #[test]
    fn header_layout() {
        let f = Frame::new(MsgType::LocalUpdate, Dtype::F32, 7, 1028, vec![9; 3]);
        let b = f.encode();
        assert_eq!(&b[0..4], b"FLML");
        assert_eq!(b[4..8], [1, 3, 1, 0]);
        assert_eq!(b[8..12], 7u32.to_le_bytes());
        assert_eq!(b[12..20], 1028u64.to_le_bytes());
        assert_eq!(b[20..28], 3u64.to_le_bytes());
        assert_eq!(b.len(), 31);
    }

    #[test]
    fn rejects_malformed_headers() {
        let good = Frame::new(MsgType::Shutdown, Dtype::F32, 0, 0, vec![]).encode();
        let mut bad = good.clone();
        bad[0] = b'X';
        assert!(matches!(Frame::decode(&bad), Err(ProtocolError::BadMagic(_))));
        let mut bad = good.clone();
        bad[4] = 2;
        assert!(matches!(Frame::decode(&bad), Err(ProtocolError::BadVersion(2))));
        let mut bad = good.clone();
        bad[5] = 7;
        assert!(matches!(Frame::decode(&bad), Err(ProtocolError::UnknownMsgType(7))));
        let mut bad = good.clone();
        bad[6] = 3;
        assert!(matches!(Frame::decode(&bad), Err(ProtocolError::UnknownDtype(3))));
        let mut bad = good.clone();
        bad[7] = 1;
        assert!(matches!(Frame::decode(&bad), Err(ProtocolError::Reserved(1))));
        let mut long = good.clone();
        long.push(0);
        assert!(matches!(Frame::decode(&long), Err(ProtocolError::PayloadLength { .. })));
        assert!(matches!(
            Frame::decode(&good[..10]),
            Err(ProtocolError::Truncated { .. })
        ));
    }

    #[test]
    fn truncated_stream_payload() {
        let mut bytes = Frame::new(MsgType::GlobalModel, Dtype::F32, 1, 0, vec![1; 8]).encode();
        bytes.truncate(HEADER_LEN + 5);
        assert!(matches!(
            Frame::read_from(&mut bytes.as_slice()),
            Err(ProtocolError::PayloadLength { declared: 8, actual: 5 })
        ));
    }
}
