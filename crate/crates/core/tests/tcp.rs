use std::thread;
use std::time::Duration;

use fedleaf::arch::tiny_mlp;
use fedleaf::data::{generate_blobs, BlobSpec};
use fedleaf::fed::{run_federation, FedAvg, FedConfig, FederationData};
use fedleaf::nn::Dtype;
use fedleaf::transport::{
    encode_join, run_tcp_client, Frame, MsgType, ServerLink, SimNetwork, TcpOptions, TcpServerLink, TransportError,
};

fn data(cfg: &FedConfig) -> FederationData {
    let ds = generate_blobs(&BlobSpec {
        class_counts: vec![80, 60, 70],
        dim: 16,
        separation: 10.0,
        seed: 2,
    })
    .unwrap();
    FederationData::prepare(ds, cfg).unwrap()
}

fn opts() -> TcpOptions {
    TcpOptions {
        connect_timeout: Duration::from_secs(20),
        io_timeout: Some(Duration::from_secs(20)),
    }
}

#[test]
fn tcp_matches_simulation() {
    let cfg = FedConfig {
        clients: 3,
        participation: 0.67,
        rounds: 6,
        seed: 31,
        ..FedConfig::default()
    };
    let arch = tiny_mlp(16, 8, 3).unwrap();
    let data = data(&cfg);

    let mut sim = SimNetwork::new(data.nodes::<f32>(&arch, &cfg).unwrap());
    let simulated = run_federation::<f32, _>(&cfg, &data, &arch, &mut sim, &FedAvg).unwrap();

    let mut server = TcpServerLink::bind("127.0.0.1:0", cfg.clients, opts()).unwrap();
    let addr = server.local_addr();
    let clients: Vec<_> = (0..cfg.clients)
        .map(|id| {
            let mut node = data.node::<f32>(id, &arch, &cfg).unwrap();
            thread::spawn(move || run_tcp_client(addr, &mut node, opts()))
        })
        .collect();
    let over_tcp = run_federation::<f32, _>(&cfg, &data, &arch, &mut server, &FedAvg).unwrap();
    let client_meters: Vec<_> = clients.into_iter().map(|h| h.join().unwrap().unwrap()).collect();

    assert_eq!(over_tcp.final_params, simulated.final_params);
    assert_eq!(over_tcp.test, simulated.test);
    assert_eq!(over_tcp.test_report, simulated.test_report);
    assert_eq!(over_tcp.traffic, simulated.traffic);
    let merged = fedleaf::transport::TrafficSnapshot::merged(&client_meters);
    assert_eq!(merged.total, over_tcp.traffic.total);
}

fn raw_join(addr: std::net::SocketAddr, rank: u32, world: u32) -> Frame {
    let mut s = std::net::TcpStream::connect(addr).unwrap();
    s.set_read_timeout(Some(Duration::from_secs(10))).unwrap();
    Frame::new(MsgType::Join, Dtype::F32, 0, 10, encode_join(rank, world))
        .write_to(&mut s)
        .unwrap();
    Frame::read_from(&mut s).unwrap()
}

#[test]
fn bad_joins_get_error_frames() {
    let mut server = TcpServerLink::bind("127.0.0.1:0", 2, opts()).unwrap();
    let addr = server.local_addr();
    let joiner = thread::spawn(move || {
        let mut keep = Vec::new();
        // Rank 1 joins properly and stays connected.
        let mut s = std::net::TcpStream::connect(addr).unwrap();
        Frame::new(MsgType::Join, Dtype::F32, 0, 10, encode_join(1, 3))
            .write_to(&mut s)
            .unwrap();
        keep.push(s);
        thread::sleep(Duration::from_millis(100));
        let dup = raw_join(addr, 1, 3);
        let wrong_world = raw_join(addr, 2, 5);
        let out_of_range = raw_join(addr, 3, 3);
        let mut s = std::net::TcpStream::connect(addr).unwrap();
        Frame::new(MsgType::Join, Dtype::F32, 0, 10, encode_join(2, 3))
            .write_to(&mut s)
            .unwrap();
        keep.push(s);
        thread::sleep(Duration::from_millis(100));
        let late = raw_join(addr, 2, 3);
        (dup, wrong_world, out_of_range, late, keep)
    });
    let joined = server.join().unwrap();
    assert_eq!(joined.iter().map(|j| j.n_k).collect::<Vec<_>>(), vec![10, 10]);
    let (dup, wrong_world, out_of_range, late, _keep) = joiner.join().unwrap();
    for (f, needle) in [
        (dup, "already joined"),
        (wrong_world, "world size"),
        (out_of_range, "outside"),
        (late, "full"),
    ] {
        assert_eq!(f.msg_type, MsgType::Error);
        let msg = String::from_utf8(f.payload).unwrap();
        assert!(msg.contains(needle), "{msg}");
    }
    // Rejected peers are not metered.
    assert_eq!(server.server_traffic().total.client_to_server, 2 * 36);
    server.shutdown().unwrap();
}

#[test]
fn client_surfaces_rejection() {
    let cfg = FedConfig {
        clients: 1,
        rounds: 1,
        ..FedConfig::default()
    };
    let arch = tiny_mlp(16, 8, 3).unwrap();
    let data = data(&cfg);
    let mut server = TcpServerLink::bind("127.0.0.1:0", 1, opts()).unwrap();
    let addr = server.local_addr();
    let mut first = data.node::<f32>(0, &arch, &cfg).unwrap();
    let mut second = data.node::<f32>(0, &arch, &cfg).unwrap();
    let a = thread::spawn(move || run_tcp_client(addr, &mut first, opts()));
    server.join().unwrap();
    let err = run_tcp_client(addr, &mut second, opts()).unwrap_err();
    assert!(
        matches!(err, TransportError::Peer(ref m) if m.contains("full")),
        "{err}"
    );
    server.shutdown().unwrap();
    a.join().unwrap().unwrap();
}

#[test]
fn connection_failure_is_reported() {
    let listener = std::net::TcpListener::bind("127.0.0.1:0").unwrap();
    let addr = listener.local_addr().unwrap();
    drop(listener);
    let cfg = FedConfig {
        clients: 1,
        ..FedConfig::default()
    };
    let arch = tiny_mlp(16, 8, 3).unwrap();
    let mut node = data(&cfg).node::<f32>(0, &arch, &cfg).unwrap();
    let quick = TcpOptions {
        connect_timeout: Duration::from_millis(200),
        io_timeout: None,
    };
    assert!(matches!(
        run_tcp_client(addr, &mut node, quick),
        Err(TransportError::Connect(_))
    ));
}
