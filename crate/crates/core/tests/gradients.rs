mod common;

use proptest::prelude::*;
use xferlab::corpus::Polarity;
use xferlab::model::{backward, bce_loss, softmax, Architecture, ModelParams, Prediction};

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn analytic_gradient_matches_finite_differences(seed in any::<u64>()) {
        let (params, x, label) = common::random_case(seed);
        let err = common::gradient_error(&params, &x, label);
        prop_assume!(err.is_some());
        let err = err.unwrap();
        prop_assert!(err <= common::GRAD_TOLERANCE, "relative error {err:e}");
    }

    #[test]
    fn softmax_is_a_distribution(a in -1e4f64..1e4, b in -1e4f64..1e4) {
        let p = softmax([a, b]);
        prop_assert!(p.iter().all(|v| v.is_finite() && (0.0..=1.0).contains(v)));
        prop_assert!((p[0] + p[1] - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn loss_is_finite_and_nonnegative(a in -1e4f64..1e4, b in -1e4f64..1e4, pos in any::<bool>()) {
        let label = if pos { Polarity::Positive } else { Polarity::Negative };
        let l = bce_loss(&Prediction::from_logits([a, b]), label);
        prop_assert!(l.is_finite() && l >= 0.0);
    }
}

#[test]
fn kink_cases_are_rare() {
    let rejected = (0..500u64)
        .filter(|&s| {
            let (p, x, l) = common::random_case(s);
            common::gradient_error(&p, &x, l).is_none()
        })
        .count();
    assert!(rejected < 25, "{rejected} of 500 cases rejected");
}

#[test]
fn gradient_is_batch_mean() {
    let arch = Architecture::new(3, vec![4]);
    let params = ModelParams::init(&arch, 2).unwrap();
    let xs = [
        xferlab::featurize::Features::Dense(vec![0.5, -1.0, 2.0]),
        xferlab::featurize::Features::Dense(vec![-0.3, 0.1, 0.7]),
    ];
    let labels = [Polarity::Positive, Polarity::Negative];
    let batch: Vec<_> = xs.iter().zip(labels).collect();
    let (loss, mean) = xferlab::model::batch_gradients(&params, &batch).unwrap();
    let (l0, g0) = backward(&params, &xs[0], labels[0]).unwrap();
    let (l1, g1) = backward(&params, &xs[1], labels[1]).unwrap();
    assert!((loss - (l0 + l1) / 2.0).abs() < 1e-15);
    for ((m, a), b) in mean.iter().zip(g0.iter()).zip(g1.iter()) {
        assert!((m - (a + b) / 2.0).abs() < 1e-15);
    }
}
