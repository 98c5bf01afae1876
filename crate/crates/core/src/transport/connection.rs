use std::collections::VecDeque;
use std::io::{self, Read, Write};
use std::sync::{Arc, Mutex};

use super::{Direction, Frame, MsgType, ProtocolError, TrafficMeter, TransportError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Server,
    Client,
}

impl Side {
    fn outgoing(self) -> Direction {
        match self {
            Side::Server => Direction::ServerToClient,
            Side::Client => Direction::ClientToServer,
        }
    }

    fn incoming(self) -> Direction {
        match self {
            Side::Server => Direction::ClientToServer,
            Side::Client => Direction::ServerToClient,
        }
    }
}

/// A framed, metered byte stream. Frames are counted only once they have
/// been fully written or fully decoded, so a rejected frame leaves the
/// meter untouched.
pub struct Connection<S> {
    stream: S,
    meter: Arc<TrafficMeter>,
    side: Side,
}

impl<S: Read + Write> Connection<S> {
    pub fn new(stream: S, meter: Arc<TrafficMeter>, side: Side) -> Self {
        Connection { stream, meter, side }
    }

    pub fn send(&mut self, frame: &Frame) -> Result<(), TransportError> {
        frame.write_to(&mut self.stream).map_err(ProtocolError::from_io)?;
        self.meter
            .record(frame.round, self.side.outgoing(), frame.wire_len() as u64);
        Ok(())
    }

    pub fn recv(&mut self) -> Result<Frame, TransportError> {
        let frame = Frame::read_from(&mut self.stream)?;
        self.meter
            .record(frame.round, self.side.incoming(), frame.wire_len() as u64);
        Ok(frame)
    }

    /// Receives a frame of the given type and round. An ERROR frame from the
    /// peer becomes [`TransportError::Peer`].
    pub fn recv_expect(&mut self, expected: MsgType, round: u32) -> Result<Frame, TransportError> {
        let frame = self.recv()?;
        if frame.msg_type == MsgType::Error {
            return Err(TransportError::Peer(
                String::from_utf8_lossy(&frame.payload).into_owned(),
            ));
        }
        if frame.msg_type != expected {
            return Err(TransportError::Unexpected {
                expected,
                got: frame.msg_type,
            });
        }
        if frame.round != round {
            return Err(TransportError::WrongRound {
                expected: round,
                got: frame.round,
            });
        }
        Ok(frame)
    }

    pub fn meter(&self) -> &Arc<TrafficMeter> {
        &self.meter
    }

    pub fn get_ref(&self) -> &S {
        &self.stream
    }

    pub fn get_mut(&mut self) -> &mut S {
        &mut self.stream
    }

    pub fn into_inner(self) -> S {
        self.stream
    }
}

type Queue = Arc<Mutex<VecDeque<u8>>>;

/// One end of an in-memory duplex byte pipe. Reading an empty pipe reports
/// end of stream, which suits the strictly sequential simulated backend.
#[derive(Debug, Clone)]
pub struct MemStream {
    rx: Queue,
    tx: Queue,
}

pub fn mem_pipe() -> (MemStream, MemStream) {
    let a: Queue = Arc::default();
    let b: Queue = Arc::default();
    (
        MemStream {
            rx: a.clone(),
            tx: b.clone(),
        },
        MemStream { rx: b, tx: a },
    )
}

impl MemStream {
    /// Bytes waiting to be read on this end.
    pub fn pending(&self) -> usize {
        self.rx.lock().expect("pipe lock").len()
    }
}

impl Read for MemStream {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        let mut q = self.rx.lock().expect("pipe lock");
        let n = buf.len().min(q.len());
        for (dst, src) in buf.iter_mut().zip(q.drain(..n)) {
            *dst = src;
        }
        Ok(n)
    }
}

impl Write for MemStream {
    fn write(&mut self, buf: &[u8]) -> io::Result<usize> {
        self.tx.lock().expect("pipe lock").extend(buf);
        Ok(buf.len())
    }

    fn flush(&mut self) -> io::Result<()> {
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Dtype;

    fn pair() -> (Connection<MemStream>, Connection<MemStream>) {
        let (a, b) = mem_pipe();
        (
            Connection::new(a, Arc::new(TrafficMeter::new()), Side::Server),
            Connection::new(b, Arc::new(TrafficMeter::new()), Side::Client),
        )
    }

    #[test]
    fn delivers_in_order_and_meters_both_ends() {
        let (mut server, mut client) = pair();
        let model = Frame::new(MsgType::GlobalModel, Dtype::F32, 1, 0, vec![0; 2704]);
        server.send(&model).unwrap();
        server.send(&super::super::shutdown_frame()).unwrap();
        assert_eq!(client.recv().unwrap(), model);
        assert_eq!(client.recv().unwrap().msg_type, MsgType::Shutdown);
        assert_eq!(server.meter().round(1).server_to_client, 2732);
        assert_eq!(server.meter().total().server_to_client, 2732 + 28);
        assert_eq!(server.meter().snapshot(), client.meter().snapshot());
        assert!(server.meter().snapshot().is_conserved());
    }

    #[test]
    fn corrupted_frame_is_not_counted() {
        let (mut server, mut client) = pair();
        let mut bytes = Frame::new(MsgType::GlobalModel, Dtype::F32, 1, 0, vec![0; 4]).encode();
        bytes[0] = b'X';
        server.get_mut().write_all(&bytes).unwrap();
        assert!(matches!(
            client.recv(),
            Err(TransportError::Protocol(ProtocolError::BadMagic(_)))
        ));
        assert_eq!(client.meter().snapshot().frames, 0);
    }

    #[test]
    fn empty_pipe_reads_as_closed() {
        let (_, mut client) = pair();
        assert_eq!(client.recv(), Err(TransportError::Protocol(ProtocolError::Closed)));
    }

    #[test]
    fn error_frame_surfaces_as_peer_error() {
        let (mut server, mut client) = pair();
        client.send(&super::super::error_frame("boom")).unwrap();
        assert_eq!(
            server.recv_expect(MsgType::LocalUpdate, 1),
            Err(TransportError::Peer("boom".into()))
        );
    }
}
