//! Frame codec, parameter serialization, traffic metering and the two
//! interchangeable backends: an in-process network and TCP.

mod codec;
mod connection;
mod frame;
mod meter;
mod sim;
mod tcp;
mod traffic;

pub use codec::{
    decode_eval, decode_join, deserialize_params, encode_eval, encode_join, serialize_params, EVAL_PAYLOAD_LEN,
    JOIN_PAYLOAD_LEN,
};
pub use connection::{mem_pipe, Connection, MemStream, Side};
pub use frame::{Frame, Header, MsgType, HEADER_LEN, MAGIC, MAX_PAYLOAD, VERSION};
pub use meter::{DirBytes, Direction, TrafficMeter, TrafficSnapshot};
pub use sim::SimNetwork;
pub use tcp::{run_tcp_client, TcpOptions, TcpServerLink, DEFAULT_ADDR, DEFAULT_PORT};
pub use traffic::{round_traffic, session_traffic, RoundTraffic};

use std::io;

use thiserror::Error;

/// Malformed bytes on the wire.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum ProtocolError {
    #[error("bad magic {0:?}")]
    BadMagic([u8; 4]),
    #[error("unsupported protocol version {0}")]
    BadVersion(u8),
    #[error("unknown message type {0}")]
    UnknownMsgType(u8),
    #[error("unknown dtype tag {0}")]
    UnknownDtype(u8),
    #[error("reserved header byte is {0}, expected 0")]
    Reserved(u8),
    #[error("payload of {0} bytes exceeds the frame limit")]
    PayloadTooLarge(u64),
    #[error("truncated frame: expected {expected} bytes, got {got}")]
    Truncated { expected: u64, got: u64 },
    #[error("payload length mismatch: header declares {declared}, found {actual}")]
    PayloadLength { declared: u64, actual: u64 },
    #[error("bad payload: {0}")]
    BadPayload(String),
    #[error("connection closed by peer")]
    Closed,
    #[error("timed out waiting for peer")]
    Timeout,
    #[error("i/o error: {0}")]
    Io(String),
}

impl ProtocolError {
    pub fn from_io(e: io::Error) -> Self {
        match e.kind() {
            io::ErrorKind::UnexpectedEof
            | io::ErrorKind::ConnectionReset
            | io::ErrorKind::ConnectionAborted
            | io::ErrorKind::BrokenPipe => ProtocolError::Closed,
            io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock => ProtocolError::Timeout,
            _ => ProtocolError::Io(e.to_string()),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TransportError {
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error("expected {expected:?} frame, got {got:?}")]
    Unexpected { expected: MsgType, got: MsgType },
    #[error("frame for round {got}, expected round {expected}")]
    WrongRound { expected: u32, got: u32 },
    #[error("join rejected: {0}")]
    JoinRejected(String),
    #[error("peer reported error: {0}")]
    Peer(String),
    #[error("client {client}: {message}")]
    Client { client: usize, message: String },
    #[error("client {0} is not connected")]
    UnknownClient(usize),
    #[error("{0}")]
    Connect(String),
}

/// A client as seen by the server after a successful JOIN.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Joined {
    pub client_id: usize,
    pub n_k: u64,
}

/// The two frames a client returns for each GLOBAL_MODEL.
#[derive(Debug, Clone, PartialEq)]
pub struct ClientReply {
    pub client_id: usize,
    pub update: Frame,
    pub report: Frame,
}

/// What a client does with a GLOBAL_MODEL frame.
pub trait FrameHandler {
    fn client_id(&self) -> usize;
    fn join_frame(&self) -> Frame;
    /// Returns the LOCAL_UPDATE and EVAL_REPORT frames for `frame`'s round.
    fn on_global_model(&mut self, frame: &Frame) -> Result<[Frame; 2], String>;
}

/// Server side of a federation backend.
pub trait ServerLink {
    /// Waits for every client's JOIN. Result is sorted by client id.
    fn join(&mut self) -> Result<Vec<Joined>, TransportError>;

    /// Sends `global` to each listed client and collects their replies,
    /// sorted by client id.
    fn exchange(&mut self, clients: &[usize], global: &Frame) -> Result<Vec<ClientReply>, TransportError>;

    fn shutdown(&mut self) -> Result<(), TransportError>;

    fn server_traffic(&self) -> TrafficSnapshot;
}

/// Client ranks are 1..=K; rank 0 is the server.
pub fn client_rank(client_id: usize) -> u32 {
    client_id as u32 + 1
}

/// Checks a JOIN frame against the federation size and returns the client id.
pub fn validate_join(frame: &Frame, world_size: u32) -> Result<usize, TransportError> {
    if frame.msg_type != MsgType::Join {
        return Err(TransportError::Unexpected {
            expected: MsgType::Join,
            got: frame.msg_type,
        });
    }
    let (rank, claimed) = decode_join(&frame.payload)?;
    if claimed != world_size {
        return Err(TransportError::JoinRejected(format!(
            "world size mismatch: client says {claimed}, server has {world_size}"
        )));
    }
    if rank == 0 || rank >= world_size {
        return Err(TransportError::JoinRejected(format!(
            "rank {rank} outside client range 1..={}",
            world_size - 1
        )));
    }
    if frame.sample_count == 0 {
        return Err(TransportError::JoinRejected(format!("rank {rank} has an empty shard")));
    }
    Ok(rank as usize - 1)
}

pub fn error_frame(message: &str) -> Frame {
    Frame::new(MsgType::Error, crate::nn::Dtype::F32, 0, 0, message.as_bytes().to_vec())
}

pub fn shutdown_frame() -> Frame {
    Frame::new(MsgType::Shutdown, crate::nn::Dtype::F32, 0, 0, Vec::new())
}

/// Server side: reads the LOCAL_UPDATE and EVAL_REPORT for `round`.
fn collect_reply<S: io::Read + io::Write>(
    conn: &mut Connection<S>,
    client_id: usize,
    round: u32,
) -> Result<ClientReply, TransportError> {
    let update = conn.recv_expect(MsgType::LocalUpdate, round)?;
    let report = conn.recv_expect(MsgType::EvalReport, round)?;
    Ok(ClientReply {
        client_id,
        update,
        report,
    })
}

/// Client side: handles one server frame. Returns false on SHUTDOWN.
fn client_step<S: io::Read + io::Write, H: FrameHandler + ?Sized>(
    conn: &mut Connection<S>,
    node: &mut H,
) -> Result<bool, TransportError> {
    let frame = conn.recv()?;
    match frame.msg_type {
        MsgType::Shutdown => Ok(false),
        MsgType::Error => Err(TransportError::Peer(
            String::from_utf8_lossy(&frame.payload).into_owned(),
        )),
        MsgType::GlobalModel => match node.on_global_model(&frame) {
            Ok(replies) => {
                for r in &replies {
                    conn.send(r)?;
                }
                Ok(true)
            }
            Err(message) => {
                // Best effort: the server should learn why the round failed.
                let _ = conn.send(&error_frame(&message));
                Err(TransportError::Client {
                    client: node.client_id(),
                    message,
                })
            }
        },
        other => Err(TransportError::Unexpected {
            expected: MsgType::GlobalModel,
            got: other,
        }),
    }
}
