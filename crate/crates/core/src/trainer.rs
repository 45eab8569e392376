//! Two-stage training schedule and single-stage baselines.
//!
//! Stage one makes a fixed number of passes over a weakly labeled dataset
//! at a low learning rate. Stage two starts a fresh optimizer and trains on
//! the fully labeled dataset, holding out a validation slice and stopping
//! once validation loss stalls; the parameters with the lowest validation
//! loss are kept.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{shuffle_cut, Dataset, DatasetKind, Fraction, Polarity};
use crate::featurize::{Encoder, EncoderSpec, Features};
use crate::model::{
    batch_step, bce_loss, forward, Architecture, ModelParams, OptimizerKind, OptimizerState,
};
use crate::{Error, Result};

/// `(pretrain, train)` learning rates for the hashed encoder.
pub const HASHED_LEARNING_RATES: (f64, f64) = (3e-6, 3e-3);
/// `(pretrain, train)` learning rates for frozen sentence embeddings.
pub const FROZEN_LEARNING_RATES: (f64, f64) = (3e-8, 3e-5);
pub const DEFAULT_BATCH_SIZE: usize = 64;
pub const DEFAULT_PRETRAIN_EPOCHS: usize = 1;
pub const DEFAULT_MAX_EPOCHS: usize = 200;

const VALIDATION_SEED_SALT: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Stage {
    Pretrain,
    Train,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Pretrain => "pretrain",
            Stage::Train => "train",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageConfig {
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub batch_size: usize,
    pub shuffle_seed: u64,
    #[serde(default)]
    pub optimizer: OptimizerKind,
}

impl StageConfig {
    pub fn new(learning_rate: f64, max_epochs: usize) -> Self {
        StageConfig {
            learning_rate,
            max_epochs,
            batch_size: DEFAULT_BATCH_SIZE,
            shuffle_seed: 0,
            optimizer: OptimizerKind::default(),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.shuffle_seed = seed;
        self
    }

    pub fn with_batch_size(mut self, batch_size: usize) -> Self {
        self.batch_size = batch_size;
        self
    }

    pub fn with_optimizer(mut self, optimizer: OptimizerKind) -> Self {
        self.optimizer = optimizer;
        self
    }

    /// Learning rate zero is allowed and freezes the parameters.
    pub fn validate(&self) -> Result<()> {
        if !self.learning_rate.is_finite() || self.learning_rate < 0.0 {
            return Err(Error::validation(format!(
                "learning rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if self.max_epochs == 0 {
            return Err(Error::validation("max_epochs must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(Error::validation("batch_size must be at least 1"));
        }
        Ok(())
    }

    pub fn optimizer_state(&self, params: &ModelParams) -> Result<OptimizerState> {
        OptimizerState::new(self.optimizer, self.learning_rate, params)
    }
}

/// Early stopping settings for the clean-label stage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub patience: usize,
    pub min_delta: f64,
    pub val_fraction: Fraction,
}

impl Default for Convergence {
    fn default() -> Self {
        Convergence {
            patience: 5,
            min_delta: 1e-4,
            val_fraction: Fraction::new(1, 10).expect("valid"),
        }
    }
}

impl Convergence {
    pub fn validate(&self) -> Result<()> {
        if self.patience == 0 {
            return Err(Error::validation("patience must be at least 1"));
        }
        if !self.min_delta.is_finite() || self.min_delta < 0.0 {
            return Err(Error::validation(
                "min_delta must be finite and non-negative",
            ));
        }
        if self.val_fraction.as_f64() > 0.5 {
            return Err(Error::validation(format!(
                "val_fraction {} must be at most 0.5",
                self.val_fraction
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TwoStagePlan {
    pretrain: Option<StageConfig>,
    train: StageConfig,
    convergence: Convergence,
}

impl TwoStagePlan {
    /// Checks each stage and that pretraining runs at a strictly lower
    /// learning rate than training.
    pub fn new(
        pretrain: Option<StageConfig>,
        train: StageConfig,
        convergence: Convergence,
    ) -> Result<Self> {
        train.validate()?;
        convergence.validate()?;
        if let Some(pre) = &pretrain {
            pre.validate()?;
            if pre.learning_rate >= train.learning_rate {
                return Err(Error::validation(format!(
                    "pretrain learning rate {} must be below train learning rate {}",
                    pre.learning_rate, train.learning_rate
                )));
            }
        }
        Ok(TwoStagePlan {
            pretrain,
            train,
            convergence,
        })
    }

    /// Default rates for the given encoder, one pretraining epoch, batch 64.
    pub fn default_for(encoder: &EncoderSpec, seed: u64) -> Self {
        let (pre_lr, train_lr) = match encoder {
            EncoderSpec::HashedNgram { .. } => HASHED_LEARNING_RATES,
            EncoderSpec::FrozenEmbedding { .. } => FROZEN_LEARNING_RATES,
        };
        TwoStagePlan::new(
            Some(StageConfig::new(pre_lr, DEFAULT_PRETRAIN_EPOCHS).with_seed(seed)),
            StageConfig::new(train_lr, DEFAULT_MAX_EPOCHS).with_seed(seed),
            Convergence::default(),
        )
        .expect("default plan is valid")
    }

    pub fn pretrain(&self) -> Option<&StageConfig> {
        self.pretrain.as_ref()
    }

    pub fn train(&self) -> &StageConfig {
        &self.train
    }

    pub fn convergence(&self) -> &Convergence {
        &self.convergence
    }

    /// Same plan with the pretraining stage dropped.
    pub fn without_pretrain(&self) -> Self {
        TwoStagePlan {
            pretrain: None,
            ..self.clone()
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub stage: Stage,
    /// 1-based within the stage.
    pub epoch: usize,
    pub mean_train_loss: f64,
    pub val_loss: Option<f64>,
    pub val_accuracy: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    Converged,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epochs: Vec<EpochRecord>,
    pub stopped_reason: Option<StopReason>,
    /// Epoch of the returned snapshot in the clean-label stage.
    pub best_epoch: Option<usize>,
}

/// Validation-loss tracker.
///
/// An epoch counts as progress when it beats the last progress point by at
/// least `min_delta`; `patience` epochs without progress stop training. The
/// snapshot to keep is the strict minimum seen so far, which can move on
/// sub-`min_delta` improvements.
#[derive(Debug, Clone)]
pub struct EarlyStopping {
    patience: usize,
    min_delta: f64,
    reference: f64,
    best: f64,
    best_epoch: Option<usize>,
    stale: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Verdict {
    pub new_best: bool,
    pub stop: bool,
}

impl EarlyStopping {
    pub fn new(patience: usize, min_delta: f64) -> Self {
        EarlyStopping {
            patience,
            min_delta,
            reference: f64::INFINITY,
            best: f64::INFINITY,
            best_epoch: None,
            stale: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> Verdict {
        let new_best = val_loss < self.best || self.best_epoch.is_none();
        if new_best {
            self.best = val_loss;
            self.best_epoch = Some(epoch);
        }
        if self.reference.is_infinite() || val_loss <= self.reference - self.min_delta {
            self.reference = val_loss;
            self.stale = 0;
        } else {
            self.stale += 1;
        }
        Verdict {
            new_best,
            stop: self.stale >= self.patience,
        }
    }

    pub fn best_epoch(&self) -> Option<usize> {
        self.best_epoch
    }
}

/// An encoded example.
#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub review_id: u64,
    pub features: Features,
    pub label: Polarity,
}

pub fn encode_dataset(encoder: &Encoder, dataset: &Dataset) -> Result<Vec<Sample>> {
    dataset
        .examples()
        .iter()
        .map(|ex| {
            Ok(Sample {
                review_id: ex.review_id,
                features: encoder.encode(ex)?,
                label: ex.label,
            })
        })
        .collect()
}

/// Mean loss and accuracy of `params` over `samples`.
pub fn loss_and_accuracy(params: &ModelParams, samples: &[Sample]) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut correct = 0usize;
    for s in samples {
        let pred = forward(params, &s.features)?;
        loss += bce_loss(&pred, s.label);
        correct += usize::from(pred.polarity() == s.label);
    }
    let n = samples.len().max(1) as f64;
    Ok((loss / n, correct as f64 / n))
}

/// One entry of the optional visit log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Visit {
    pub stage: Stage,
    pub review_id: u64,
}

/// Result of a full training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub params: ModelParams,
    pub record: TrainRecord,
    /// Parameters right after pretraining, when a pretraining stage ran.
    pub pretrained: Option<ModelParams>,
}

/// Runs training stages against one encoder.
pub struct Trainer<'a> {
    encoder: &'a Encoder,
    visits: Option<Vec<Visit>>,
}

impl<'a> Trainer<'a> {
    pub fn new(encoder: &'a Encoder) -> Self {
        Trainer {
            encoder,
            visits: None,
        }
    }

    /// Log every example visited by a gradient step.
    pub fn recording_visits(mut self) -> Self {
        self.visits = Some(Vec::new());
        self
    }

    pub fn visits(&self) -> &[Visit] {
        self.visits.as_deref().unwrap_or_default()
    }

    fn architecture(&self, hidden: &[usize]) -> Architecture {
        Architecture::new(self.encoder.input_dim(), hidden.to_vec())
    }

    fn check_dataset(dataset: &Dataset, expected: DatasetKind) -> Result<()> {
        if dataset.kind() != expected {
            return Err(Error::Kind {
                expected,
                actual: dataset.kind(),
            });
        }
        if dataset.is_empty() {
            return Err(Error::EmptyDataset(dataset.name().to_string()));
        }
        Ok(())
    }

    /// One pass over `samples` in an order keyed by `(shuffle_seed, epoch)`.
    fn run_epoch(
        &mut self,
        stage: Stage,
        epoch: usize,
        params: &mut ModelParams,
        opt: &mut OptimizerState,
        samples: &[Sample],
        cfg: &StageConfig,
    ) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.shuffle_seed);
        rng.set_stream(epoch as u64);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        order.shuffle(&mut rng);

        let mut total = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<(&Features, Polarity)> = chunk
                .iter()
                .map(|&i| (&samples[i].features, samples[i].label))
                .collect();
            if let Some(log) = self.visits.as_mut() {
                log.extend(chunk.iter().map(|&i| Visit {
                    stage,
                    review_id: samples[i].review_id,
                }));
            }
            total += batch_step(params, opt, &batch)? * chunk.len() as f64;
        }
        Ok(total / samples.len() as f64)
    }

    /// Fixed-budget pass over a weakly labeled dataset, no validation.
    pub fn pretrain_stage(
        &mut self,
        params: &mut ModelParams,
        opt: &mut OptimizerState,
        wld: &Dataset,
        cfg: &StageConfig,
    ) -> Result<Vec<EpochRecord>> {
        Self::check_dataset(wld, DatasetKind::Wld)?;
        cfg.validate()?;
        let samples = encode_dataset(self.encoder, wld)?;
        self.pretrain_samples(params, opt, &samples, cfg)
    }

    fn pretrain_samples(
        &mut self,
        params: &mut ModelParams,
        opt: &mut OptimizerState,
        samples: &[Sample],
        cfg: &StageConfig,
    ) -> Result<Vec<EpochRecord>> {
        let mut records = Vec::with_capacity(cfg.max_epochs);
        for epoch in 1..=cfg.max_epochs {
            let loss = self.run_epoch(Stage::Pretrain, epoch, params, opt, samples, cfg)?;
            tracing::debug!(epoch, loss, "pretrain epoch");
            records.push(EpochRecord {
                stage: Stage::Pretrain,
                epoch,
                mean_train_loss: loss,
                val_loss: None,
                val_accuracy: None,
            });
        }
        Ok(records)
    }

    /// Train on a fully labeled dataset until validation loss stalls.
    /// `params` ends up holding the lowest-validation-loss snapshot.
    pub fn train_stage(
        &mut self,
        params: &mut ModelParams,
        opt: &mut OptimizerState,
        fld_train: &Dataset,
        convergence: &Convergence,
        cfg: &StageConfig,
    ) -> Result<(Vec<EpochRecord>, StopReason)> {
        Self::check_dataset(fld_train, DatasetKind::Fld)?;
        self.fit_until_converged(params, opt, fld_train, convergence, cfg)
    }

    fn fit_until_converged(
        &mut self,
        params: &mut ModelParams,
        opt: &mut OptimizerState,
        dataset: &Dataset,
        convergence: &Convergence,
        cfg: &StageConfig,
    ) -> Result<(Vec<EpochRecord>, StopReason)> {
        cfg.validate()?;
        convergence.validate()?;
        let samples = encode_dataset(self.encoder, dataset)?;
        let (fit, val) = shuffle_cut(
            &samples,
            convergence.val_fraction.complement(),
            cfg.shuffle_seed ^ VALIDATION_SEED_SALT,
        );
        if fit.is_empty() || val.is_empty() {
            return Err(Error::validation(format!(
                "{} has {} examples, too few for a {} validation slice",
                dataset.name(),
                samples.len(),
                convergence.val_fraction
            )));
        }

        let mut stopper = EarlyStopping::new(convergence.patience, convergence.min_delta);
        let mut best = params.clone();
        let mut records = Vec::new();
        let mut reason = StopReason::MaxEpochs;
        for epoch in 1..=cfg.max_epochs {
            let train_loss = self.run_epoch(Stage::Train, epoch, params, opt, &fit, cfg)?;
            let (val_loss, val_acc) = loss_and_accuracy(params, &val)?;
            tracing::debug!(epoch, train_loss, val_loss, val_acc, "train epoch");
            records.push(EpochRecord {
                stage: Stage::Train,
                epoch,
                mean_train_loss: train_loss,
                val_loss: Some(val_loss),
                val_accuracy: Some(val_acc),
            });
            let verdict = stopper.observe(epoch, val_loss);
            if verdict.new_best {
                best.clone_from(params);
            }
            if verdict.stop {
                reason = StopReason::Converged;
                break;
            }
        }
        *params = best;
        Ok((records, reason))
    }

    /// Initialize, optionally pretrain on `source_wld`, reset the optimizer,
    /// then train on `source_fld_train`.
    pub fn run_two_stage(
        &mut self,
        plan: &TwoStagePlan,
        hidden: &[usize],
        source_wld: Option<&Dataset>,
        source_fld_train: &Dataset,
        seed: u64,
    ) -> Result<TrainOutcome> {
        let params = ModelParams::init(&self.architecture(hidden), seed)?;
        self.continue_two_stage(plan, params, source_wld, source_fld_train)
    }

    /// As [`Self::run_two_stage`] but starting from given parameters.
    pub fn continue_two_stage(
        &mut self,
        plan: &TwoStagePlan,
        mut params: ModelParams,
        source_wld: Option<&Dataset>,
        source_fld_train: &Dataset,
    ) -> Result<TrainOutcome> {
        let stage_err = |stage: Stage| {
            move |e: Error| Error::Stage {
                stage: stage.as_str().to_string(),
                source: Box::new(e),
            }
        };
        if params.architecture().input_dim != self.encoder.input_dim() {
            return Err(Error::Dimension {
                what: "model input".into(),
                expected: params.architecture().input_dim,
                actual: self.encoder.input_dim(),
            });
        }
        let mut record = TrainRecord::default();
        let mut pretrained = None;

        if let Some(cfg) = plan.pretrain() {
            let wld = source_wld.ok_or_else(|| {
                stage_err(Stage::Pretrain)(Error::validation(
                    "plan has a pretraining stage but no weakly labeled dataset was given",
                ))
            })?;
            // Check the train-stage input before spending time on pretraining.
            Self::check_dataset(source_fld_train, DatasetKind::Fld)
                .map_err(stage_err(Stage::Train))?;
            let mut opt = cfg
                .optimizer_state(&params)
                .map_err(stage_err(Stage::Pretrain))?;
            let epochs = self
                .pretrain_stage(&mut params, &mut opt, wld, cfg)
                .map_err(stage_err(Stage::Pretrain))?;
            record.epochs.extend(epochs);
            pretrained = Some(params.clone());
        }

        let mut opt = plan
            .train()
            .optimizer_state(&params)
            .map_err(stage_err(Stage::Train))?;
        let (epochs, reason) = self
            .train_stage(
                &mut params,
                &mut opt,
                source_fld_train,
                plan.convergence(),
                plan.train(),
            )
            .map_err(stage_err(Stage::Train))?;
        record.best_epoch = best_epoch(&epochs);
        record.epochs.extend(epochs);
        record.stopped_reason = Some(reason);
        Ok(TrainOutcome {
            params,
            record,
            pretrained,
        })
    }

    /// Single-stage training on weak labels with clean-stage stopping rules;
    /// the validation slice comes from the weak dataset itself.
    pub fn run_baseline_wld_only(
        &mut self,
        source_wld: &Dataset,
        cfg: &StageConfig,
        convergence: &Convergence,
        hidden: &[usize],
        seed: u64,
    ) -> Result<TrainOutcome> {
        Self::check_dataset(source_wld, DatasetKind::Wld)?;
        let mut params = ModelParams::init(&self.architecture(hidden), seed)?;
        let mut opt = cfg.optimizer_state(&params)?;
        let (epochs, reason) =
            self.fit_until_converged(&mut params, &mut opt, source_wld, convergence, cfg)?;
        Ok(TrainOutcome {
            params,
            record: TrainRecord {
                best_epoch: best_epoch(&epochs),
                epochs,
                stopped_reason: Some(reason),
            },
            pretrained: None,
        })
    }
}

fn best_epoch(epochs: &[EpochRecord]) -> Option<usize> {
    let mut best: Option<(usize, f64)> = None;
    for e in epochs {
        if let Some(v) = e.val_loss {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((e.epoch, v));
            }
        }
    }
    best.map(|(e, _)| e)
}
