//! Feed-forward classifier with a two-way softmax head.
//!
//! Hidden layers use ReLU, the last layer is linear and its two logits go
//! through a numerically stable softmax. Class 0 is negative, class 1
//! positive. All arithmetic is `f64`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::Polarity;
use crate::featurize::Features;
use crate::{Error, Result};

pub const OUTPUT_DIM: usize = 2;

/// Floor and ceiling applied to probabilities before taking logs.
pub const PROB_CLAMP: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    pub input_dim: usize,
    #[serde(default)]
    pub hidden: Vec<usize>,
}

impl Architecture {
    pub fn new(input_dim: usize, hidden: Vec<usize>) -> Self {
        Architecture { input_dim, hidden }
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 {
            return Err(Error::validation("input dimension must be positive"));
        }
        if self.hidden.contains(&0) {
            return Err(Error::validation("hidden layer widths must be positive"));
        }
        Ok(())
    }

    /// `(inputs, outputs)` per layer, input side first.
    pub fn layer_shapes(&self) -> Vec<(usize, usize)> {
        let mut widths = Vec::with_capacity(self.hidden.len() + 2);
        widths.push(self.input_dim);
        widths.extend(&self.hidden);
        widths.push(OUTPUT_DIM);
        widths.windows(2).map(|w| (w[0], w[1])).collect()
    }
}

/// Dense affine layer; `weights` is row-major `outputs x inputs`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub inputs: usize,
    pub outputs: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Layer {
    fn zeros(inputs: usize, outputs: usize) -> Self {
        Layer {
            inputs,
            outputs,
            weights: vec![0.0; inputs * outputs],
            bias: vec![0.0; outputs],
        }
    }

    #[inline]
    pub fn weight(&self, out: usize, inp: usize) -> f64 {
        self.weights[out * self.inputs + inp]
    }

    fn affine(&self, x: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                self.bias[o] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    fn affine_features(&self, x: &Features) -> Vec<f64> {
        match x {
            Features::Dense(d) => self.affine(d),
            Features::Sparse(s) => (0..self.outputs)
                .map(|o| {
                    let row = &self.weights[o * self.inputs..(o + 1) * self.inputs];
                    self.bias[o] + s.iter().map(|(i, v)| row[i] * v).sum::<f64>()
                })
                .collect(),
        }
    }

    fn params_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.bias.iter_mut())
    }

    fn params(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(self.bias.iter())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    arch: Architecture,
    layers: Vec<Layer>,
}

/// Same shape as the parameters they differentiate.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub layers: Vec<Layer>,
}

impl Gradients {
    pub fn zeros_like(params: &ModelParams) -> Self {
        Gradients {
            layers: params
                .layers
                .iter()
                .map(|l| Layer::zeros(l.inputs, l.outputs))
                .collect(),
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.layers.iter().flat_map(Layer::params)
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Layer::params_mut)
    }

    fn scale(&mut self, factor: f64) {
        self.iter_mut().for_each(|g| *g *= factor);
    }
}

impl ModelParams {
    /// Glorot-uniform weights in `(-s, s)`, `s = sqrt(6 / (fan_in + fan_out))`,
    /// zero biases.
    pub fn init(arch: &Architecture, seed: u64) -> Result<Self> {
        arch.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(inputs, outputs)| {
                let s = (6.0 / (inputs + outputs) as f64).sqrt();
                let mut layer = Layer::zeros(inputs, outputs);
                layer
                    .weights
                    .iter_mut()
                    .for_each(|w| *w = rng.gen_range(-s..s));
                layer
            })
            .collect();
        Ok(ModelParams {
            arch: arch.clone(),
            layers,
        })
    }

    /// All-zero parameters.
    pub fn zeros(arch: &Architecture) -> Result<Self> {
        arch.validate()?;
        let layers = arch
            .layer_shapes()
            .into_iter()
            .map(|(i, o)| Layer::zeros(i, o))
            .collect();
        Ok(ModelParams {
            arch: arch.clone(),
            layers,
        })
    }

    /// Rebuild from a flat parameter vector in [`Self::flatten`] order.
    pub fn from_flat(arch: &Architecture, flat: &[f64]) -> Result<Self> {
        let mut params = ModelParams::zeros(arch)?;
        if flat.len() != params.num_params() {
            return Err(Error::Dimension {
                what: "parameter block".into(),
                expected: params.num_params(),
                actual: flat.len(),
            });
        }
        if flat.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data(
                "parameter block holds non-finite values".into(),
            ));
        }
        params
            .layers
            .iter_mut()
            .flat_map(Layer::params_mut)
            .zip(flat)
            .for_each(|(p, &v)| *p = v);
        Ok(params)
    }

    pub fn architecture(&self) -> &Architecture {
        &self.arch
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.bias.len())
            .sum()
    }

    /// Layer by layer: weights (row-major), then bias.
    pub fn flatten(&self) -> Vec<f64> {
        self.layers
            .iter()
            .flat_map(Layer::params)
            .copied()
            .collect()
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.layers.iter_mut().flat_map(Layer::params_mut)
    }

    pub fn is_finite(&self) -> bool {
        self.layers
            .iter()
            .flat_map(Layer::params)
            .all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    /// `(P(negative), P(positive))`.
    pub probs: [f64; 2],
    pub logits: [f64; 2],
}

impl Prediction {
    pub fn from_logits(logits: [f64; 2]) -> Self {
        Prediction {
            probs: softmax(logits),
            logits,
        }
    }

    /// Argmax with ties going to negative.
    pub fn polarity(&self) -> Polarity {
        if self.probs[1] > self.probs[0] {
            Polarity::Positive
        } else {
            Polarity::Negative
        }
    }
}

/// Softmax with the max logit subtracted first.
pub fn softmax(logits: [f64; 2]) -> [f64; 2] {
    let m = logits[0].max(logits[1]);
    let e = [(logits[0] - m).exp(), (logits[1] - m).exp()];
    let z = e[0] + e[1];
    [e[0] / z, e[1] / z]
}

fn check_input(params: &ModelParams, x: &Features) -> Result<()> {
    if x.dim() != params.arch.input_dim {
        return Err(Error::Dimension {
            what: "model input".into(),
            expected: params.arch.input_dim,
            actual: x.dim(),
        });
    }
    Ok(())
}

/// Pre-activations of every layer; the last entry holds the logits.
fn pre_activations(params: &ModelParams, x: &Features) -> Vec<Vec<f64>> {
    let mut zs: Vec<Vec<f64>> = Vec::with_capacity(params.layers.len());
    for (k, layer) in params.layers.iter().enumerate() {
        let z = if k == 0 {
            layer.affine_features(x)
        } else {
            let a: Vec<f64> = zs[k - 1].iter().map(|v| v.max(0.0)).collect();
            layer.affine(&a)
        };
        zs.push(z);
    }
    zs
}

pub fn forward(params: &ModelParams, x: &Features) -> Result<Prediction> {
    check_input(params, x)?;
    let zs = pre_activations(params, x);
    let out = zs.last().expect("at least one layer");
    Ok(Prediction::from_logits([out[0], out[1]]))
}

/// `-ln p[label]` with `p` clamped to `[1e-12, 1 - 1e-12]`.
pub fn bce_loss(pred: &Prediction, label: Polarity) -> f64 {
    -pred.probs[label.index()]
        .clamp(PROB_CLAMP, 1.0 - PROB_CLAMP)
        .ln()
}

/// Adds `scale * dL/dtheta` for one example into `grads` and returns the loss.
fn accumulate(
    params: &ModelParams,
    x: &Features,
    label: Polarity,
    scale: f64,
    grads: &mut Gradients,
) -> f64 {
    let zs = pre_activations(params, x);
    let last = zs.len() - 1;
    let pred = Prediction::from_logits([zs[last][0], zs[last][1]]);
    let loss = bce_loss(&pred, label);

    // Fused softmax + cross-entropy: dL/dlogits = p - onehot(label).
    let mut delta = pred.probs.to_vec();
    delta[label.index()] -= 1.0;

    for k in (0..=last).rev() {
        let layer = &params.layers[k];
        let g = &mut grads.layers[k];
        for (o, &d) in delta.iter().enumerate() {
            g.bias[o] += scale * d;
        }
        if k == 0 {
            for (o, &d) in delta.iter().enumerate() {
                if d == 0.0 {
                    continue;
                }
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                x.for_each_nonzero(|i, v| row[i] += scale * d * v);
            }
        } else {
            let prev = &zs[k - 1];
            for (o, &d) in delta.iter().enumerate() {
                let row = &mut g.weights[o * layer.inputs..(o + 1) * layer.inputs];
                for (gw, &z) in row.iter_mut().zip(prev) {
                    *gw += scale * d * z.max(0.0);
                }
            }
            delta = (0..layer.inputs)
                .map(|i| {
                    if prev[i] > 0.0 {
                        (0..layer.outputs)
                            .map(|o| layer.weight(o, i) * delta[o])
                            .sum()
                    } else {
                        0.0
                    }
                })
                .collect();
        }
    }
    loss
}

/// Loss and exact gradient of [`bce_loss`] through [`forward`] for one example.
pub fn backward(params: &ModelParams, x: &Features, label: Polarity) -> Result<(f64, Gradients)> {
    check_input(params, x)?;
    let mut grads = Gradients::zeros_like(params);
    let loss = accumulate(params, x, label, 1.0, &mut grads);
    Ok((loss, grads))
}

/// Mean loss and mean gradient over a batch, summed in batch order.
pub fn batch_gradients(
    params: &ModelParams,
    batch: &[(&Features, Polarity)],
) -> Result<(f64, Gradients)> {
    if batch.is_empty() {
        return Err(Error::validation("empty batch"));
    }
    for (x, _) in batch {
        check_input(params, x)?;
    }
    let mut grads = Gradients::zeros_like(params);
    let mut total = 0.0;
    for (x, label) in batch {
        total += accumulate(params, x, *label, 1.0, &mut grads);
    }
    let n = batch.len() as f64;
    grads.scale(1.0 / n);
    Ok((total / n, grads))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum OptimizerKind {
    Sgd,
    Adam { beta1: f64, beta2: f64, eps: f64 },
}

impl OptimizerKind {
    pub const ADAM: OptimizerKind = OptimizerKind::Adam {
        beta1: 0.9,
        beta2: 0.999,
        eps: 1e-8,
    };
}

impl Default for OptimizerKind {
    fn default() -> Self {
        OptimizerKind::ADAM
    }
}

impl std::str::FromStr for OptimizerKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "sgd" => Ok(OptimizerKind::Sgd),
            "adam" => Ok(OptimizerKind::ADAM),
            other => Err(format!(
                "unknown optimizer {other:?} (expected sgd or adam)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub first: Gradients,
    pub second: Gradients,
    pub step: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    kind: OptimizerKind,
    learning_rate: f64,
    moments: Option<AdamMoments>,
}

impl OptimizerState {
    /// Fresh state shaped after `params`. A learning rate of zero is accepted
    /// (the update is then a no-op).
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &ModelParams) -> Result<Self> {
        if !learning_rate.is_finite() || learning_rate < 0.0 {
            return Err(Error::validation(format!(
                "learning rate {learning_rate} must be finite and non-negative"
            )));
        }
        let moments = match kind {
            OptimizerKind::Sgd => None,
            OptimizerKind::Adam { .. } => Some(AdamMoments {
                first: Gradients::zeros_like(params),
                second: Gradients::zeros_like(params),
                step: 0,
            }),
        };
        Ok(OptimizerState {
            kind,
            learning_rate,
            moments,
        })
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    pub fn learning_rate(&self) -> f64 {
        self.learning_rate
    }

    pub fn moments(&self) -> Option<&AdamMoments> {
        self.moments.as_ref()
    }

    pub fn step_count(&self) -> u64 {
        self.moments.as_ref().map_or(0, |m| m.step)
    }

    /// Apply one update with precomputed gradients.
    pub fn apply(&mut self, params: &mut ModelParams, grads: &Gradients) {
        let lr = self.learning_rate;
        match (self.kind, self.moments.as_mut()) {
            (OptimizerKind::Sgd, _) => {
                for (p, g) in params.iter_mut().zip(grads.iter()) {
                    *p -= lr * g;
                }
            }
            (OptimizerKind::Adam { beta1, beta2, eps }, Some(m)) => {
                m.step += 1;
                let t = m.step as i32;
                let bc1 = 1.0 - beta1.powi(t);
                let bc2 = 1.0 - beta2.powi(t);
                let update = |p: &mut [f64], g: &[f64], m1: &mut [f64], m2: &mut [f64]| {
                    for (((p, &g), m1), m2) in p.iter_mut().zip(g).zip(m1).zip(m2) {
                        *m1 = beta1 * *m1 + (1.0 - beta1) * g;
                        *m2 = beta2 * *m2 + (1.0 - beta2) * g * g;
                        *p -= lr * (*m1 / bc1) / ((*m2 / bc2).sqrt() + eps);
                    }
                };
                let layers = params.layers.iter_mut().zip(&grads.layers);
                let moments = m.first.layers.iter_mut().zip(m.second.layers.iter_mut());
                for ((p, g), (m1, m2)) in layers.zip(moments) {
                    update(&mut p.weights, &g.weights, &mut m1.weights, &mut m2.weights);
                    update(&mut p.bias, &g.bias, &mut m1.bias, &mut m2.bias);
                }
            }
            (OptimizerKind::Adam { .. }, None) => unreachable!("adam state always has moments"),
        }
    }
}

/// One optimizer step on the mean gradient of `batch`; returns the mean loss
/// measured before the update.
pub fn batch_step(
    params: &mut ModelParams,
    opt: &mut OptimizerState,
    batch: &[(&Features, Polarity)],
) -> Result<f64> {
    if let Some(m) = &opt.moments {
        if m.first.layers.len() != params.layers.len()
            || m.first
                .layers
                .iter()
                .zip(&params.layers)
                .any(|(a, b)| a.weights.len() != b.weights.len() || a.bias.len() != b.bias.len())
        {
            return Err(Error::validation(
                "optimizer state does not match parameter shapes",
            ));
        }
    }
    let (loss, grads) = batch_gradients(params, batch)?;
    opt.apply(params, &grads);
    Ok(loss)
}
