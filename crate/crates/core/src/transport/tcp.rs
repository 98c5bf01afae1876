use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use super::{
    client_step, collect_reply, error_frame, shutdown_frame, validate_join, ClientReply, Connection, Direction, Frame,
    FrameHandler, Joined, ServerLink, Side, TrafficMeter, TrafficSnapshot, TransportError,
};

pub const DEFAULT_PORT: u16 = 3002;
pub const DEFAULT_ADDR: &str = "127.0.0.1:3002";

const POLL: Duration = Duration::from_millis(10);

#[derive(Debug, Clone, Copy)]
pub struct TcpOptions {
    /// How long the server waits for all clients to join, and how long a
    /// client keeps retrying its connection.
    pub connect_timeout: Duration,
    /// Per-read timeout once connected; `None` waits forever.
    pub io_timeout: Option<Duration>,
}

impl Default for TcpOptions {
    fn default() -> Self {
        TcpOptions {
            connect_timeout: Duration::from_secs(60),
            io_timeout: Some(Duration::from_secs(600)),
        }
    }
}

fn io_err(e: std::io::Error) -> TransportError {
    TransportError::Connect(e.to_string())
}

fn prepare(stream: &TcpStream, opts: &TcpOptions) -> Result<(), TransportError> {
    stream.set_nonblocking(false).map_err(io_err)?;
    stream.set_nodelay(true).map_err(io_err)?;
    stream.set_read_timeout(opts.io_timeout).map_err(io_err)
}

/// Server side over TCP: one connection per client rank. Each round the
/// sampled clients are served concurrently, one thread per connection,
/// and the round completes once every reply is in.
pub struct TcpServerLink {
    listener: Option<TcpListener>,
    local_addr: SocketAddr,
    clients: usize,
    conns: Vec<Option<Connection<TcpStream>>>,
    sizes: Vec<u64>,
    meter: Arc<TrafficMeter>,
    opts: TcpOptions,
    stop: Arc<AtomicBool>,
    acceptor: Option<JoinHandle<()>>,
}

impl TcpServerLink {
    pub fn bind(addr: impl ToSocketAddrs, clients: usize, opts: TcpOptions) -> Result<Self, TransportError> {
        let listener = TcpListener::bind(addr).map_err(io_err)?;
        let local_addr = listener.local_addr().map_err(io_err)?;
        Ok(TcpServerLink {
            listener: Some(listener),
            local_addr,
            clients,
            conns: (0..clients).map(|_| None).collect(),
            sizes: vec![0; clients],
            meter: Arc::new(TrafficMeter::new()),
            opts,
            stop: Arc::new(AtomicBool::new(false)),
            acceptor: None,
        })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    fn world_size(&self) -> u32 {
        self.clients as u32 + 1
    }

    /// Handles one incoming connection during the join phase. Rejected peers
    /// get an ERROR frame; their bytes are not metered.
    fn admit(&mut self, stream: TcpStream) -> Result<(), TransportError> {
        prepare(&stream, &self.opts)?;
        let scratch = Arc::new(TrafficMeter::new());
        let mut conn = Connection::new(stream, scratch, Side::Server);
        let frame = conn.recv()?;
        let verdict = validate_join(&frame, self.world_size()).and_then(|id| match self.conns[id] {
            Some(_) => Err(TransportError::JoinRejected(format!("rank {} already joined", id + 1))),
            None => Ok(id),
        });
        match verdict {
            Ok(id) => {
                self.meter.record(0, Direction::ClientToServer, frame.wire_len() as u64);
                self.sizes[id] = frame.sample_count;
                self.conns[id] = Some(Connection::new(conn.into_inner(), self.meter.clone(), Side::Server));
                Ok(())
            }
            Err(e) => {
                let _ = conn.send(&error_frame(&e.to_string()));
                Err(e)
            }
        }
    }

    /// After every rank has joined, latecomers are turned away until
    /// shutdown.
    fn spawn_acceptor(&mut self, listener: TcpListener) {
        let stop = self.stop.clone();
        let opts = self.opts;
        let clients = self.clients;
        self.acceptor = Some(thread::spawn(move || {
            while !stop.load(Ordering::Relaxed) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        if prepare(&stream, &opts).is_err() {
                            continue;
                        }
                        let _ = stream.set_read_timeout(Some(Duration::from_secs(5)));
                        let mut conn = Connection::new(stream, Arc::new(TrafficMeter::new()), Side::Server);
                        let _ = conn.recv();
                        let _ = conn.send(&error_frame(&format!(
                            "federation full: all {clients} client ranks have joined"
                        )));
                    }
                    Err(_) => thread::sleep(POLL),
                }
            }
        }));
    }

    fn stop_acceptor(&mut self) {
        self.stop.store(true, Ordering::Relaxed);
        if let Some(h) = self.acceptor.take() {
            let _ = h.join();
        }
    }
}

impl Drop for TcpServerLink {
    fn drop(&mut self) {
        self.stop_acceptor();
    }
}

impl ServerLink for TcpServerLink {
    fn join(&mut self) -> Result<Vec<Joined>, TransportError> {
        let listener = self
            .listener
            .take()
            .ok_or_else(|| TransportError::Connect("join already ran".into()))?;
        listener.set_nonblocking(true).map_err(io_err)?;
        let deadline = Instant::now() + self.opts.connect_timeout;
        while self.conns.iter().any(Option::is_none) {
            match listener.accept() {
                Ok((stream, _)) => {
                    // A bad JOIN only costs that peer its connection.
                    let _ = self.admit(stream);
                }
                Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                    if Instant::now() > deadline {
                        let missing = self.conns.iter().filter(|c| c.is_none()).count();
                        return Err(TransportError::Connect(format!(
                            "timed out waiting for {missing} of {} clients",
                            self.clients
                        )));
                    }
                    thread::sleep(POLL);
                }
                Err(e) => return Err(io_err(e)),
            }
        }
        self.spawn_acceptor(listener);
        Ok(self
            .sizes
            .iter()
            .enumerate()
            .map(|(client_id, &n_k)| Joined { client_id, n_k })
            .collect())
    }

    fn exchange(&mut self, clients: &[usize], global: &Frame) -> Result<Vec<ClientReply>, TransportError> {
        let mut ids = clients.to_vec();
        ids.sort_unstable();
        for &id in &ids {
            if self.conns.get(id).and_then(Option::as_ref).is_none() {
                return Err(TransportError::UnknownClient(id));
            }
        }
        let round = global.round;
        let results: Vec<Result<ClientReply, TransportError>> = thread::scope(|s| {
            let handles: Vec<_> = self
                .conns
                .iter_mut()
                .enumerate()
                .filter(|(id, _)| ids.binary_search(id).is_ok())
                .map(|(id, conn)| {
                    let conn = conn.as_mut().expect("checked above");
                    s.spawn(move || {
                        conn.send(global)?;
                        collect_reply(conn, id, round)
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("connection handler panicked"))
                .collect()
        });
        results.into_iter().collect()
    }

    fn shutdown(&mut self) -> Result<(), TransportError> {
        let mut first_err = None;
        for conn in self.conns.iter_mut().flatten() {
            if let Err(e) = conn.send(&shutdown_frame()) {
                first_err.get_or_insert(e);
            }
        }
        self.stop_acceptor();
        first_err.map_or(Ok(()), Err)
    }

    fn server_traffic(&self) -> TrafficSnapshot {
        self.meter.snapshot()
    }
}

/// Connects to the server (retrying until `connect_timeout`), joins, and
/// serves GLOBAL_MODEL frames until SHUTDOWN. Returns this client's meter.
pub fn run_tcp_client<H: FrameHandler>(
    addr: impl ToSocketAddrs + Copy,
    node: &mut H,
    opts: TcpOptions,
) -> Result<TrafficSnapshot, TransportError> {
    let deadline = Instant::now() + opts.connect_timeout;
    let stream = loop {
        match TcpStream::connect(addr) {
            Ok(s) => break s,
            Err(_) if Instant::now() < deadline => thread::sleep(Duration::from_millis(50)),
            Err(e) => return Err(TransportError::Connect(format!("cannot reach server: {e}"))),
        }
    };
    prepare(&stream, &opts)?;
    let meter = Arc::new(TrafficMeter::new());
    let mut conn = Connection::new(stream, meter.clone(), Side::Client);
    conn.send(&node.join_frame())?;
    while client_step(&mut conn, node)? {}
    Ok(meter.snapshot())
}
