use std::sync::Arc;

use super::{
    client_rank, client_step, collect_reply, mem_pipe, shutdown_frame, validate_join, ClientReply, Connection,
    FrameHandler, Joined, MemStream, ServerLink, Side, TrafficMeter, TrafficSnapshot, TransportError,
};

struct SimClient<H> {
    node: H,
    server_end: Connection<MemStream>,
    client_end: Connection<MemStream>,
}

/// In-process backend. Every frame goes through the same codec as TCP over
/// an in-memory pipe; clients run one after another in id order, so a run
/// is fully deterministic.
pub struct SimNetwork<H> {
    clients: Vec<SimClient<H>>,
    server_meter: Arc<TrafficMeter>,
    client_meter: Arc<TrafficMeter>,
}

impl<H: FrameHandler> SimNetwork<H> {
    /// `nodes` must hold client ids 0..K in order.
    pub fn new(nodes: Vec<H>) -> Self {
        let server_meter = Arc::new(TrafficMeter::new());
        let client_meter = Arc::new(TrafficMeter::new());
        let clients = nodes
            .into_iter()
            .map(|node| {
                let (s, c) = mem_pipe();
                SimClient {
                    node,
                    server_end: Connection::new(s, server_meter.clone(), Side::Server),
                    client_end: Connection::new(c, client_meter.clone(), Side::Client),
                }
            })
            .collect();
        SimNetwork {
            clients,
            server_meter,
            client_meter,
        }
    }

    /// Combined meter of all client endpoints.
    pub fn client_traffic(&self) -> TrafficSnapshot {
        self.client_meter.snapshot()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &H> {
        self.clients.iter().map(|c| &c.node)
    }
}

impl<H: FrameHandler> ServerLink for SimNetwork<H> {
    fn join(&mut self) -> Result<Vec<Joined>, TransportError> {
        let world_size = self.clients.len() as u32 + 1;
        let mut joined = Vec::with_capacity(self.clients.len());
        for (expected_id, c) in self.clients.iter_mut().enumerate() {
            let join = c.node.join_frame();
            c.client_end.send(&join)?;
            let frame = c.server_end.recv()?;
            let id = validate_join(&frame, world_size)?;
            if id != expected_id {
                return Err(TransportError::JoinRejected(format!(
                    "node {expected_id} joined as rank {}, expected {}",
                    id + 1,
                    client_rank(expected_id)
                )));
            }
            joined.push(Joined {
                client_id: id,
                n_k: frame.sample_count,
            });
        }
        Ok(joined)
    }

    fn exchange(&mut self, clients: &[usize], global: &super::Frame) -> Result<Vec<ClientReply>, TransportError> {
        let mut ids = clients.to_vec();
        ids.sort_unstable();
        let mut replies = Vec::with_capacity(ids.len());
        for id in ids {
            let c = self.clients.get_mut(id).ok_or(TransportError::UnknownClient(id))?;
            c.server_end.send(global)?;
            if !client_step(&mut c.client_end, &mut c.node)? {
                return Err(TransportError::Client {
                    client: id,
                    message: "stopped mid-round".into(),
                });
            }
            replies.push(collect_reply(&mut c.server_end, id, global.round)?);
        }
        Ok(replies)
    }

    fn shutdown(&mut self) -> Result<(), TransportError> {
        for c in &mut self.clients {
            c.server_end.send(&shutdown_frame())?;
            if client_step(&mut c.client_end, &mut c.node)? {
                return Err(TransportError::Client {
                    client: c.node.client_id(),
                    message: "kept running after SHUTDOWN".into(),
                });
            }
        }
        Ok(())
    }

    fn server_traffic(&self) -> TrafficSnapshot {
        self.server_meter.snapshot()
    }
}
