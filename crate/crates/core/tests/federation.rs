use fedleaf::arch::{tiny_cnn, tiny_mlp, ArchDescriptor};
use fedleaf::data::{generate_blobs, BlobSpec, Dataset, MAIZE_CLASS_COUNTS};
use fedleaf::fed::{
    derive_seed, run_federation, FedAvg, FedConfig, FederationData, FederationOutcome, ModelParams, SeedStream,
};
use fedleaf::nn::{Dtype, Element, SgdMomentum};
use fedleaf::transport::{round_traffic, session_traffic, ServerLink, SimNetwork};

fn blobs(counts: &[usize], seed: u64) -> Dataset {
    generate_blobs(&BlobSpec {
        class_counts: counts.to_vec(),
        dim: 16,
        separation: 10.0,
        seed,
    })
    .unwrap()
}

fn simulate<E: Element>(
    cfg: &FedConfig,
    ds: Dataset,
    arch: &ArchDescriptor,
) -> (FederationOutcome, SimNetwork<fedleaf::fed::ClientNode<E>>) {
    let data = FederationData::prepare(ds, cfg).unwrap();
    let mut net = SimNetwork::new(data.nodes::<E>(arch, cfg).unwrap());
    let out = run_federation::<E, _>(cfg, &data, arch, &mut net, &FedAvg).unwrap();
    (out, net)
}

#[test]
fn blobs_converge_with_three_clients() {
    let cfg = FedConfig {
        clients: 3,
        seed: 11,
        ..FedConfig::default()
    };
    let arch = tiny_mlp(16, 32, 4).unwrap();
    let start = std::time::Instant::now();
    let (out, _) = simulate::<f32>(&cfg, blobs(&MAIZE_CLASS_COUNTS, 5), &arch);
    assert!(
        out.test_report.accuracy >= 0.95,
        "accuracy {}",
        out.test_report.accuracy
    );
    assert_eq!(out.rounds.len(), 50);
    assert!(out.rounds.last().unwrap().train_loss < out.rounds[0].train_loss);
    println!("converged in {:?}", start.elapsed());
}

#[test]
fn runs_are_deterministic() {
    let cfg = FedConfig {
        clients: 4,
        participation: 0.5,
        rounds: 5,
        seed: 3,
        ..FedConfig::default()
    };
    let arch = tiny_mlp(16, 8, 3).unwrap();
    let (a, _) = simulate::<f32>(&cfg, blobs(&[60, 50, 40], 1), &arch);
    let (b, _) = simulate::<f32>(&cfg, blobs(&[60, 50, 40], 1), &arch);
    assert_eq!(a.final_params, b.final_params);
    assert_eq!(a.test, b.test);
    for (x, y) in a.rounds.iter().zip(&b.rounds) {
        assert_eq!(
            (x.sampled.clone(), x.train_loss, x.val_loss),
            (y.sampled.clone(), y.train_loss, y.val_loss)
        );
    }
}

#[test]
fn zero_learning_rate_keeps_initial_model() {
    let cfg = FedConfig {
        clients: 2,
        rounds: 1,
        learning_rate: 0.0,
        seed: 9,
        ..FedConfig::default()
    };
    let arch = tiny_mlp(16, 8, 3).unwrap();
    let (out, _) = simulate::<f32>(&cfg, blobs(&[30, 30, 30], 2), &arch);
    let w0 = arch.build::<f32>(derive_seed(9, SeedStream::Init, 0)).unwrap();
    assert_eq!(out.final_params, ModelParams::from_model(arch.name(), &w0).unwrap());
}

#[test]
fn zero_rounds_rejected() {
    let cfg = FedConfig {
        rounds: 0,
        ..FedConfig::default()
    };
    assert!(FederationData::prepare(blobs(&[30, 30], 2), &cfg).is_err());
}

#[test]
fn f64_training_needs_lossy_opt_in_for_f32_wire() {
    let mut cfg = FedConfig {
        clients: 2,
        rounds: 2,
        seed: 4,
        ..FedConfig::default()
    };
    let arch = tiny_mlp(16, 8, 2).unwrap();
    let data = FederationData::prepare(blobs(&[40, 40], 3), &cfg).unwrap();
    let mut net = SimNetwork::new(data.nodes::<f64>(&arch, &cfg).unwrap());
    assert!(run_federation::<f64, _>(&cfg, &data, &arch, &mut net, &FedAvg).is_err());

    cfg.allow_lossy_wire = true;
    let (narrow, _) = simulate::<f64>(&cfg, blobs(&[40, 40], 3), &arch);
    assert_eq!(narrow.final_params.dtype(), Dtype::F64);

    cfg.allow_lossy_wire = false;
    cfg.wire_dtype = Dtype::F64;
    let (wide, _) = simulate::<f64>(&cfg, blobs(&[40, 40], 3), &arch);
    assert_ne!(wide.final_params, narrow.final_params);
    assert_eq!(
        wide.traffic.rounds[&1].server_to_client,
        2 * narrow.traffic.rounds[&1].server_to_client - 2 * 28
    );
}

#[test]
fn metered_traffic_matches_prediction() {
    for (clients, participation) in [(1, 1.0), (3, 1.0), (5, 0.5)] {
        let cfg = FedConfig {
            clients,
            participation,
            rounds: 3,
            seed: 21,
            ..FedConfig::default()
        };
        let arch = tiny_cnn([1, 4, 4], 2).unwrap();
        let ds = blobs(&[40, 40], 8).with_sample_shape(vec![1, 4, 4]).unwrap();
        let (out, net) = simulate::<f32>(&cfg, ds, &arch);
        let predicted = round_traffic(&arch, cfg.participants(), Dtype::F32);
        for t in 1..=3u32 {
            let got = out.traffic.rounds[&t];
            assert_eq!(got.server_to_client, predicted.server_to_client);
            assert_eq!(got.client_to_server, predicted.client_to_server);
        }
        let (down, up) = session_traffic(clients);
        assert_eq!(out.traffic.rounds[&0].server_to_client, down);
        assert_eq!(out.traffic.rounds[&0].client_to_server, up);
        assert_eq!(net.server_traffic(), net.client_traffic());
        assert!(out.traffic.is_conserved());
    }
}

/// One client, full participation, one local epoch: the federation is plain
/// minibatch SGD whose velocity restarts every round.
#[test]
fn single_client_equals_direct_sgd() {
    let cfg = FedConfig {
        clients: 1,
        rounds: 4,
        seed: 17,
        learning_rate: 0.05,
        ..FedConfig::default()
    };
    let arch = tiny_mlp(16, 8, 3).unwrap();
    let ds = blobs(&[50, 40, 30], 6);
    let data = FederationData::prepare(ds.clone(), &cfg).unwrap();
    let (out, _) = simulate::<f32>(&cfg, ds, &arch);

    let mut model = arch.build::<f32>(derive_seed(17, SeedStream::Init, 0)).unwrap();
    for _ in 0..cfg.rounds {
        let mut opt = SgdMomentum::new(cfg.learning_rate, cfg.momentum).unwrap();
        for chunk in data.shards[0].indices.chunks(cfg.batch_size) {
            let (x, y) = data.dataset.batch::<f32>(chunk);
            model.train_batch(&x, &y, &mut opt).unwrap();
        }
    }
    assert_eq!(out.final_params.values(), model.state_values().as_slice());
}
