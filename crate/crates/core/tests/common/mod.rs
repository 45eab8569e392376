//! Helpers shared by the integration tests and the acceptance runner.
#![allow(dead_code)]

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use xferlab::corpus::{Dataset, DatasetKind, Example, Polarity, Provenance, Split};
use xferlab::featurize::{EmbeddingTable, Encoder, Features, SparseVec};
use xferlab::model::{backward, bce_loss, forward, Architecture, ModelParams};

pub fn example(id: u64, text: &str, label: Polarity, kind: DatasetKind, domain: &str) -> Example {
    Example {
        review_id: id,
        text: text.to_string(),
        label,
        provenance: match kind {
            DatasetKind::Wld => Provenance::Weak,
            DatasetKind::Fld => Provenance::Full,
        },
        domain: domain.to_string(),
    }
}

pub fn dataset(kind: DatasetKind, split: Split, rows: &[(u64, &str, Polarity)]) -> Dataset {
    let examples = rows
        .iter()
        .map(|&(id, text, label)| example(id, text, label, kind, "D"))
        .collect();
    Dataset::new(format!("D{kind}"), kind, "D", split, examples).unwrap()
}

/// `n` points in the plane labeled by which side of `x0 = x1` they fall on,
/// with no point closer than 0.1 to the boundary. Served through a frozen
/// embedding table keyed by review id.
pub fn separable_2d(n: usize, seed: u64) -> (Encoder, Dataset) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut table = EmbeddingTable::new(2, "plane").unwrap();
    let mut examples = Vec::with_capacity(n);
    let mut id = 0u64;
    while examples.len() < n {
        let p: [f32; 2] = [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)];
        let margin = (p[0] - p[1]) / std::f32::consts::SQRT_2;
        if margin.abs() < 0.1 {
            continue;
        }
        let label = if margin > 0.0 {
            Polarity::Positive
        } else {
            Polarity::Negative
        };
        table.insert(id, p.to_vec()).unwrap();
        examples.push(example(id, "", label, DatasetKind::Fld, "D"));
        id += 1;
    }
    let ds = Dataset::new("plane", DatasetKind::Fld, "D", Split::Train, examples).unwrap();
    (Encoder::frozen(Arc::new(table), None), ds)
}

/// Gold labels and a model/encoder pair that predicts exactly `preds`
/// (`None` means a probability tie).
pub fn scripted_predictions(
    gold: &[Polarity],
    preds: &[Option<Polarity>],
) -> (ModelParams, Encoder, Dataset) {
    let mut table = EmbeddingTable::new(1, "script").unwrap();
    let mut examples = Vec::new();
    for (i, (&g, p)) in gold.iter().zip(preds).enumerate() {
        let x = match p {
            Some(Polarity::Positive) => 1.0,
            Some(Polarity::Negative) => -1.0,
            None => 0.0,
        };
        table.insert(i as u64, vec![x]).unwrap();
        examples.push(example(i as u64, "", g, DatasetKind::Fld, "D"));
    }
    // logits = (0, x): positive iff x > 0.
    let params =
        ModelParams::from_flat(&Architecture::new(1, vec![]), &[0.0, 1.0, 0.0, 0.0]).unwrap();
    let ds = Dataset::new("script", DatasetKind::Fld, "D", Split::Test, examples).unwrap();
    (params, Encoder::frozen(Arc::new(table), None), ds)
}

pub const FD_STEP: f64 = 1e-5;
pub const GRAD_TOLERANCE: f64 = 1e-4;
/// Denominator floor so that gradients near zero are compared absolutely.
pub const GRAD_FLOOR: f64 = 1e-6;

/// A random gradient-check case: architecture with at most one hidden
/// layer, input dim <= 16, dense or sparse input.
pub fn random_case(seed: u64) -> (ModelParams, Features, Polarity) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let input_dim = rng.gen_range(1..=16);
    let hidden = if rng.gen_bool(0.5) {
        vec![rng.gen_range(1..=8)]
    } else {
        vec![]
    };
    let arch = Architecture::new(input_dim, hidden);
    let n = ModelParams::zeros(&arch).unwrap().num_params();
    let flat: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let params = ModelParams::from_flat(&arch, &flat).unwrap();
    let x = if rng.gen_bool(0.3) {
        let idx: Vec<usize> = (0..input_dim).filter(|_| rng.gen_bool(0.5)).collect();
        let vals = idx.iter().map(|_| rng.gen_range(-2.0..2.0)).collect();
        Features::Sparse(SparseVec::new(input_dim, idx, vals).unwrap())
    } else {
        Features::Dense((0..input_dim).map(|_| rng.gen_range(-2.0..2.0)).collect())
    };
    let label = if rng.gen_bool(0.5) {
        Polarity::Positive
    } else {
        Polarity::Negative
    };
    (params, x, label)
}

/// Smallest |pre-activation| over hidden units; `None` without hidden layers.
fn min_hidden_preactivation(params: &ModelParams, x: &Features) -> Option<f64> {
    let layers = params.layers();
    if layers.len() < 2 {
        return None;
    }
    let first = &layers[0];
    let dense = match x {
        Features::Dense(d) => d.clone(),
        Features::Sparse(s) => s.to_dense(),
    };
    (0..first.outputs)
        .map(|o| {
            (first.bias[o]
                + (0..first.inputs)
                    .map(|i| first.weight(o, i) * dense[i])
                    .sum::<f64>())
            .abs()
        })
        .reduce(f64::min)
}

/// Max relative error between analytic and central-difference gradients, or
/// `None` if a hidden unit sits so close to the ReLU kink that the finite
/// difference could straddle it.
pub fn gradient_error(params: &ModelParams, x: &Features, label: Polarity) -> Option<f64> {
    if min_hidden_preactivation(params, x).is_some_and(|z| z < 1e-3) {
        return None;
    }
    let (_, grads) = backward(params, x, label).unwrap();
    let analytic: Vec<f64> = grads.iter().copied().collect();
    let flat = params.flatten();
    let arch = params.architecture();
    let loss_at = |v: &[f64]| {
        let p = ModelParams::from_flat(arch, v).unwrap();
        bce_loss(&forward(&p, x).unwrap(), label)
    };
    let mut worst: f64 = 0.0;
    let mut probe = flat.clone();
    for k in 0..flat.len() {
        probe[k] = flat[k] + FD_STEP;
        let up = loss_at(&probe);
        probe[k] = flat[k] - FD_STEP;
        let down = loss_at(&probe);
        probe[k] = flat[k];
        let numeric = (up - down) / (2.0 * FD_STEP);
        let a = analytic[k];
        let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(GRAD_FLOOR);
        worst = worst.max(err);
    }
    Some(worst)
}
