use std::collections::BTreeSet;

use fedleaf::data::{generate_blobs, load_csv, partition_iid, split, BlobSpec, DataError, Dataset, SplitSpec};
use proptest::prelude::*;

fn labelled(counts: &[usize]) -> Dataset {
    let labels: Vec<usize> = counts.iter().enumerate().flat_map(|(c, &n)| vec![c; n]).collect();
    let features = labels.iter().map(|&l| l as f64).collect();
    let names = (0..counts.len()).map(|c| format!("c{c}")).collect();
    Dataset::new(features, vec![1], labels, names).unwrap()
}

#[test]
fn hundred_samples_five_clients() {
    let train: Vec<usize> = (0..100).collect();
    let shards = partition_iid(&train, 5, 3).unwrap();
    assert!(shards.iter().all(|s| s.n_k() == 20));
}

#[test]
fn single_client_gets_everything() {
    let train: Vec<usize> = (0..37).map(|i| i * 2).collect();
    let shards = partition_iid(&train, 1, 3).unwrap();
    let got: BTreeSet<_> = shards[0].indices.iter().copied().collect();
    assert_eq!(got, train.into_iter().collect());
}

#[test]
fn ten_samples_split_eight_one_one() {
    let f = split(&labelled(&[5, 5]), &SplitSpec::default(), 1).unwrap();
    assert_eq!((f.train.len(), f.val.len(), f.test.len()), (8, 1, 1));
}

#[test]
fn train_quota_is_met_within_one_when_possible() {
    // Floors alone would give class 1 a train count of 14 against a quota of 12.8.
    let ds = labelled(&[10, 16]);
    let f = split(&ds, &SplitSpec::default(), 0).unwrap();
    for (c, quota) in [(0, 8.0), (1, 12.8)] {
        let got = f.train.iter().filter(|&&i| ds.labels()[i] == c).count() as f64;
        assert!((got - quota).abs() <= 1.0, "class {c}: {got}");
    }
}

#[test]
fn csv_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("leaves.csv");
    std::fs::write(&path, "label,f1,f2\nrust,1,2\nhealthy,3,4\nrust,5,6\n").unwrap();
    let ds = load_csv(&path).unwrap();
    assert_eq!(ds.len(), 3);
    assert_eq!(ds.dim(), 2);
    assert_eq!(ds.class_names(), &["rust".to_string(), "healthy".to_string()]);
    assert_eq!(ds.labels(), &[0, 1, 0]);

    std::fs::write(&path, "a,1,2\nb,3\n").unwrap();
    assert!(matches!(load_csv(&path), Err(DataError::Csv { line: 2, .. })));
    assert!(load_csv(&dir.path().join("missing.csv")).is_err());
}

#[test]
fn blobs_are_reproducible() {
    let spec = BlobSpec {
        class_counts: vec![10, 20],
        dim: 4,
        separation: 10.0,
        seed: 77,
    };
    assert_eq!(generate_blobs(&spec).unwrap(), generate_blobs(&spec).unwrap());
}

proptest! {
    #[test]
    fn split_then_partition_keeps_every_index_once(
        counts in prop::collection::vec(10usize..60, 2..5),
        clients in 1usize..6,
        seed: u64,
    ) {
        let ds = labelled(&counts);
        let n = ds.len();
        let spec = SplitSpec::default();
        let f = split(&ds, &spec, seed).unwrap();
        prop_assert_eq!(f.val.len(), (0.1 * n as f64).floor() as usize);
        prop_assert_eq!(f.test.len(), (0.1 * n as f64).floor() as usize);
        let mut all: Vec<usize> = f.train.iter().chain(&f.val).chain(&f.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());

        let shards = partition_iid(&f.train, clients, seed).unwrap();
        let sizes: Vec<usize> = shards.iter().map(|s| s.n_k()).collect();
        prop_assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
        let mut union: Vec<usize> = shards.iter().flat_map(|s| s.indices.iter().copied()).collect();
        union.sort_unstable();
        prop_assert_eq!(union, f.train.clone());

        // Val and test stay within one sample of proportional per class.
        // Train absorbs both floors' remainders (up to 2 samples in total),
        // which a handful of classes cannot always spread to within one each.
        for (c, &count) in counts.iter().enumerate() {
            for (fold, frac, tol) in [(&f.val, 0.1, 1.0), (&f.test, 0.1, 1.0), (&f.train, 0.8, 2.0)] {
                let got = fold.iter().filter(|&&i| ds.labels()[i] == c).count() as f64;
                prop_assert!((got - frac * count as f64).abs() < tol + 1e-9, "class {} got {} of {}", c, got, count);
            }
        }
        prop_assert_eq!(split(&ds, &spec, seed).unwrap(), f);
    }
}
