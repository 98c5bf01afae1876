use fedleaf::metrics::{confusion, metrics_from_cm, pearson, run_stats, ConfusionMatrix};
use proptest::prelude::*;

/// Per-class one-vs-rest counts straight from the label pairs.
fn recount(truth: &[usize], pred: &[usize], c: usize) -> (u64, u64, u64, u64) {
    let mut tp = 0;
    let mut fp = 0;
    let mut fn_ = 0;
    let mut tn = 0;
    for (&t, &p) in truth.iter().zip(pred) {
        match (t == c, p == c) {
            (true, true) => tp += 1,
            (false, true) => fp += 1,
            (true, false) => fn_ += 1,
            (false, false) => tn += 1,
        }
    }
    (tp, fp, fn_, tn)
}

fn labels() -> impl Strategy<Value = (usize, Vec<usize>, Vec<usize>)> {
    (2usize..6, 1usize..60).prop_flat_map(|(classes, n)| {
        (
            Just(classes),
            prop::collection::vec(0..classes, n),
            prop::collection::vec(0..classes, n),
        )
    })
}

proptest! {
    #[test]
    fn matches_per_sample_recount((classes, truth, pred) in labels()) {
        let cm = confusion(&truth, &pred, classes).unwrap();
        prop_assert_eq!(cm.total(), truth.len() as u64);
        let report = metrics_from_cm(&cm).unwrap();
        let correct = truth.iter().zip(&pred).filter(|(t, p)| t == p).count();
        prop_assert!((report.accuracy - correct as f64 / truth.len() as f64).abs() < 1e-15);
        prop_assert!((report.micro_precision - report.accuracy).abs() < 1e-12);
        prop_assert!((report.micro_recall - report.accuracy).abs() < 1e-12);
        for (c, m) in report.per_class.iter().enumerate() {
            let (tp, fp, fn_, tn) = recount(&truth, &pred, c);
            prop_assert_eq!((m.tp, m.fp, m.fn_, m.tn), (tp, fp, fn_, tn));
            prop_assert!((0.0..=1.0).contains(&m.f1));
            prop_assert!(m.f1 <= (m.precision + m.recall) / 2.0 + 1e-12);
            prop_assert!(m.precision.min(m.recall) >= m.f1 / 2.0 - 1e-12);
            if m.precision == 0.0 || m.recall == 0.0 {
                prop_assert_eq!(m.f1, 0.0);
            }
        }
        for v in [report.precision, report.recall, report.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn pearson_is_affine_invariant(
        pairs in prop::collection::vec((-100.0f64..100.0, -100.0f64..100.0), 3..20),
        a in 0.1f64..10.0, b in -50.0f64..50.0,
    ) {
        let (x, y): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
        if let Ok(r) = pearson(&x, &y) {
            prop_assert!((-1.0..=1.0).contains(&r));
            let scaled: Vec<f64> = x.iter().map(|v| a * v + b).collect();
            prop_assert!((pearson(&scaled, &y).unwrap() - r).abs() < 1e-9);
        }
    }
}

#[test]
fn hand_evaluated_case() {
    let cm = ConfusionMatrix::from_rows(&[vec![1, 1], vec![0, 2]]).unwrap();
    let r = metrics_from_cm(&cm).unwrap();
    assert_eq!(r.accuracy, 0.75);
    assert!((r.precision - 5.0 / 6.0).abs() < 1e-15);
    assert!((r.recall - 0.75).abs() < 1e-15);
    assert!((r.f1 - 11.0 / 15.0).abs() < 1e-15);
}

#[test]
fn run_stats_examples() {
    assert_eq!(run_stats(&[1.0, 1.0, 1.0]).unwrap(), (1.0, 0.0));
    let (m, s) = run_stats(&[1.0, 3.0]).unwrap();
    assert_eq!(m, 2.0);
    assert!((s - 2f64.sqrt()).abs() < 1e-15);
    assert!(run_stats(&[1.0]).is_err());
}
