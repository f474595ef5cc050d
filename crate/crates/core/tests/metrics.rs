use hyperplastic::metrics::{
    classification_metrics, confusion_from_labels, roc_auc, Averaging, ConfusionCounts,
};
use proptest::prelude::*;

/// Mann–Whitney by counting every positive/negative pair.
fn brute_force_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut credit = 0.0;
    let mut pairs = 0.0;
    for (i, &sp) in scores.iter().enumerate() {
        if labels[i] != 1 {
            continue;
        }
        for (j, &sn) in scores.iter().enumerate() {
            if labels[j] != 0 {
                continue;
            }
            pairs += 1.0;
            if sp > sn {
                credit += 1.0;
            } else if sp == sn {
                credit += 0.5;
            }
        }
    }
    credit / pairs
}

/// Scores and labels with both classes present. Coarse scores force ties.
fn arb_instance(max_n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<u8>)> {
    (2..=max_n, any::<bool>()).prop_flat_map(|(n, coarse)| {
        let scores = if coarse {
            proptest::collection::vec((0u8..8).prop_map(|v| f64::from(v) / 4.0), n).boxed()
        } else {
            proptest::collection::vec(-10.0f64..10.0, n).boxed()
        };
        let labels = proptest::collection::vec(0u8..2, n - 2).prop_map(|mut l| {
            l.extend([0, 1]);
            l
        });
        (scores, labels)
    })
}

fn distinct(scores: &[f64]) -> bool {
    let mut s = scores.to_vec();
    s.sort_by(f64::total_cmp);
    s.windows(2).all(|w| w[0] != w[1])
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn auc_matches_pairwise_count((scores, labels) in arb_instance(2000)) {
        let fast = roc_auc(&scores, &labels).unwrap();
        prop_assert!((fast - brute_force_auc(&scores, &labels)).abs() <= 1e-12);
    }

    #[test]
    fn auc_ignores_increasing_maps((scores, labels) in arb_instance(300), a in 0.1f64..10.0, c in -5.0f64..5.0) {
        let base = roc_auc(&scores, &labels).unwrap();
        let affine: Vec<f64> = scores.iter().map(|s| a * s + c).collect();
        let exp: Vec<f64> = scores.iter().map(|s| s.exp()).collect();
        prop_assert!((roc_auc(&affine, &labels).unwrap() - base).abs() <= 1e-12);
        prop_assert!((roc_auc(&exp, &labels).unwrap() - base).abs() <= 1e-12);
    }

    #[test]
    fn negated_scores_complement((scores, labels) in arb_instance(300)) {
        prop_assume!(distinct(&scores));
        let neg: Vec<f64> = scores.iter().map(|s| -s).collect();
        let sum = roc_auc(&scores, &labels).unwrap() + roc_auc(&neg, &labels).unwrap();
        prop_assert!((sum - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn weighted_recall_is_accuracy(
        pairs in proptest::collection::vec((prop_oneof![Just(0u8), Just(1u8), Just(255u8)], 0u8..2), 1..500)
    ) {
        let (pred, truth): (Vec<u8>, Vec<u8>) = pairs.into_iter().unzip();
        let counts = confusion_from_labels(&pred, &truth);
        let evaluated = pred.iter().filter(|&&p| p != 255).count() as u64;
        prop_assert_eq!(counts.total(), evaluated);
        prop_assume!(evaluated > 0);
        let r = classification_metrics(counts, Averaging::Weighted).unwrap();
        prop_assert!((r.recall - r.accuracy).abs() <= 1e-12);
        for v in [r.accuracy, r.precision, r.recall, r.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
        let b = classification_metrics(counts, Averaging::Binary).unwrap();
        for v in [b.accuracy, b.precision, b.recall, b.f1] {
            prop_assert!((0.0..=1.0).contains(&v));
        }
    }

    #[test]
    fn weighted_precision_is_accuracy_when_errors_balance(tp in 0u64..200, tn in 0u64..200, e in 0u64..200) {
        prop_assume!(tp + tn + e > 0);
        let counts = ConfusionCounts { tp, fp: e, tn, fn_: e };
        let r = classification_metrics(counts, Averaging::Weighted).unwrap();
        prop_assert!((r.precision - r.accuracy).abs() <= 1e-12);
        prop_assert!((r.recall - r.accuracy).abs() <= 1e-12);
    }

    #[test]
    fn pooled_counts_add(
        scenes in proptest::collection::vec(proptest::collection::vec((0u8..2, 0u8..2), 1..50), 1..6)
    ) {
        let mut all_pred = Vec::new();
        let mut all_truth = Vec::new();
        let mut summed = ConfusionCounts::default();
        for scene in &scenes {
            let (p, t): (Vec<u8>, Vec<u8>) = scene.iter().copied().unzip();
            summed = summed + confusion_from_labels(&p, &t);
            all_pred.extend(p);
            all_truth.extend(t);
        }
        prop_assert_eq!(summed, confusion_from_labels(&all_pred, &all_truth));
    }
}

#[test]
fn worked_example() {
    let scores = [0.1, 0.4, 0.35, 0.8];
    let labels = [0, 0, 1, 1];
    assert_eq!(brute_force_auc(&scores, &labels), 0.75);
    assert!((roc_auc(&scores, &labels).unwrap() - 0.75).abs() <= 1e-12);
}

#[test]
fn weighted_precision_differs_when_errors_do_not_balance() {
    // supports 5 and 5, but one class absorbs all mistakes
    let counts = ConfusionCounts {
        tp: 5,
        fp: 3,
        tn: 2,
        fn_: 0,
    };
    let r = classification_metrics(counts, Averaging::Weighted).unwrap();
    assert!((r.recall - r.accuracy).abs() < 1e-12);
    assert!((r.precision - r.accuracy).abs() > 0.05);
}

#[test]
fn undefined_precision_is_flagged() {
    let counts = ConfusionCounts {
        tp: 0,
        fp: 0,
        tn: 7,
        fn_: 3,
    };
    let r = classification_metrics(counts, Averaging::Binary).unwrap();
    assert_eq!((r.precision, r.recall, r.accuracy), (0.0, 0.0, 0.7));
    assert!(!r.is_defined("precision"));
    assert!(r.is_defined("recall"));
}
