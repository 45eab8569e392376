//! Flat `key = value` configuration files.
//!
//! One entry per line, `#` starts a comment, keys use dots for sections
//! (`plan.pretrain.lr = 3e-6`). Keys may appear once. Relative paths are
//! resolved against the directory holding the file.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::corpus::Fraction;
use crate::featurize::{EncoderSpec, DEFAULT_HASH_DIM, DEFAULT_NGRAM_MAX};
use crate::model::OptimizerKind;
use crate::trainer::{
    Convergence, StageConfig, TwoStagePlan, DEFAULT_BATCH_SIZE, DEFAULT_MAX_EPOCHS,
    DEFAULT_PRETRAIN_EPOCHS, FROZEN_LEARNING_RATES, HASHED_LEARNING_RATES,
};
use crate::{audit, Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    key: String,
    value: String,
    line: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KvConfig {
    origin: PathBuf,
    entries: Vec<Entry>,
}

impl KvConfig {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let mut entries: Vec<Entry> = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split_once('#').map_or(raw, |(before, _)| before).trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line,
                msg: format!("expected `key = value`, got {content:?}"),
            })?;
            let key = key.trim();
            if key.is_empty() || key.contains(char::is_whitespace) {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line,
                    msg: format!("invalid key {key:?}"),
                });
            }
            if let Some(prev) = entries.iter().find(|e| e.key == key) {
                return Err(Error::Parse {
                    path: origin.to_path_buf(),
                    line,
                    msg: format!("duplicate key {key:?} (first set on line {})", prev.line),
                });
            }
            entries.push(Entry {
                key: key.to_string(),
                value: value.trim().to_string(),
                line,
            });
        }
        Ok(KvConfig {
            origin: origin.to_path_buf(),
            entries,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        audit::record_read(path);
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        KvConfig::parse(&text, path)
    }

    pub fn origin(&self) -> &Path {
        &self.origin
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries
            .iter()
            .find(|e| e.key == key)
            .map(|e| e.value.as_str())
            .filter(|v| !v.is_empty())
    }

    fn err(&self, key: &str, msg: impl std::fmt::Display) -> Error {
        let line = self
            .entries
            .iter()
            .find(|e| e.key == key)
            .map_or(0, |e| e.line);
        Error::Parse {
            path: self.origin.clone(),
            line,
            msg: format!("{key}: {msg}"),
        }
    }

    pub fn parsed<T>(&self, key: &str) -> Result<Option<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| v.parse::<T>().map_err(|e| self.err(key, e)))
            .transpose()
    }

    pub fn parsed_or<T>(&self, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        Ok(self.parsed(key)?.unwrap_or(default))
    }

    pub fn list<T>(&self, key: &str) -> Result<Vec<T>>
    where
        T: FromStr,
        T::Err: std::fmt::Display,
    {
        self.get(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<T>().map_err(|e| self.err(key, e)))
                    .collect()
            })
            .unwrap_or_else(|| Ok(Vec::new()))
    }

    /// A path value resolved against the config file's directory.
    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.get(key).map(|v| self.resolve(v))
    }

    pub fn resolve(&self, value: &str) -> PathBuf {
        let p = Path::new(value);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.origin
                .parent()
                .unwrap_or_else(|| Path::new("."))
                .join(p)
        }
    }

    /// `(key, value)` pairs under `prefix.`, in file order.
    pub fn section<'a>(&'a self, prefix: &'a str) -> impl Iterator<Item = (&'a str, &'a str)> + 'a {
        self.entries.iter().filter_map(move |e| {
            e.key
                .strip_prefix(prefix)
                .and_then(|rest| rest.strip_prefix('.'))
                .map(|rest| (rest, e.value.as_str()))
        })
    }

    /// Reject keys that are not listed in `allowed` and do not start with one
    /// of `allowed_prefixes`.
    pub fn check_keys(&self, allowed: &[&str], allowed_prefixes: &[&str]) -> Result<()> {
        for e in &self.entries {
            let known = allowed.contains(&e.key.as_str())
                || allowed_prefixes.iter().any(|p| e.key.starts_with(p));
            if !known {
                return Err(Error::Parse {
                    path: self.origin.clone(),
                    line: e.line,
                    msg: format!("unknown key {:?}", e.key),
                });
            }
        }
        Ok(())
    }
}

/// What `train` should run, derived from which sources are present.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunMode {
    TwoStage,
    FldOnly,
    WldOnly,
}

/// Training experiment settings.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub label: String,
    pub source_wld: Option<PathBuf>,
    pub source_fld: Option<PathBuf>,
    pub targets: Vec<PathBuf>,
    pub encoder: EncoderSpec,
    pub hidden: Vec<usize>,
    pub plan: TwoStagePlan,
    pub seed: u64,
    /// Unset means the caller must supply one (flag or environment).
    pub output_dir: Option<PathBuf>,
    /// Pretraining checkpoint to continue from; skips the pretraining stage.
    pub resume: Option<PathBuf>,
}

const EXPERIMENT_KEYS: &[&str] = &[
    "label",
    "seed",
    "output_dir",
    "source.wld",
    "source.fld",
    "targets",
    "encoder.kind",
    "encoder.dim",
    "encoder.ngram_max",
    "encoder.embeddings",
    "encoder.source_tag",
    "model.hidden",
    "plan.pretrain.lr",
    "plan.pretrain.epochs",
    "plan.pretrain.batch_size",
    "plan.pretrain.optimizer",
    "plan.train.lr",
    "plan.train.max_epochs",
    "plan.train.batch_size",
    "plan.train.optimizer",
    "plan.convergence.patience",
    "plan.convergence.min_delta",
    "plan.convergence.val_fraction",
    "resume",
];

impl ExperimentConfig {
    /// `seed_override` replaces the file's seed; the file must otherwise
    /// provide one.
    pub fn from_kv(kv: &KvConfig, seed_override: Option<u64>) -> Result<Self> {
        kv.check_keys(EXPERIMENT_KEYS, &[])?;
        let seed = match seed_override {
            Some(s) => s,
            None => kv
                .parsed("seed")?
                .ok_or_else(|| kv.err("seed", "missing (set `seed` or pass --seed)"))?,
        };

        let encoder = match kv.get("encoder.kind").unwrap_or("hashed") {
            "hashed" => EncoderSpec::hashed(
                kv.parsed_or("encoder.dim", DEFAULT_HASH_DIM)?,
                kv.parsed_or("encoder.ngram_max", DEFAULT_NGRAM_MAX)?,
            ),
            "frozen" => {
                let path = kv
                    .path("encoder.embeddings")
                    .ok_or_else(|| kv.err("encoder.embeddings", "required for frozen encoders"))?;
                EncoderSpec::FrozenEmbedding {
                    dim: kv
                        .parsed("encoder.dim")?
                        .ok_or_else(|| kv.err("encoder.dim", "required for frozen encoders"))?,
                    source_tag: kv.get("encoder.source_tag").unwrap_or_default().to_string(),
                    path: Some(path),
                }
            }
            other => return Err(kv.err("encoder.kind", format!("unknown kind {other:?}"))),
        };
        encoder.validate()?;

        let (default_pre_lr, default_lr) = match encoder {
            EncoderSpec::HashedNgram { .. } => HASHED_LEARNING_RATES,
            EncoderSpec::FrozenEmbedding { .. } => FROZEN_LEARNING_RATES,
        };
        let source_wld = kv.path("source.wld");
        let source_fld = kv.path("source.fld");
        let stage = |prefix: &str,
                     default_lr: f64,
                     epochs_key: &str,
                     default_epochs: usize|
         -> Result<StageConfig> {
            Ok(StageConfig {
                learning_rate: kv.parsed_or(&format!("{prefix}.lr"), default_lr)?,
                max_epochs: kv.parsed_or(&format!("{prefix}.{epochs_key}"), default_epochs)?,
                batch_size: kv.parsed_or(&format!("{prefix}.batch_size"), DEFAULT_BATCH_SIZE)?,
                shuffle_seed: seed,
                optimizer: kv
                    .parsed_or(&format!("{prefix}.optimizer"), OptimizerKind::default())?,
            })
        };
        let pretrain = match (&source_wld, &source_fld) {
            (Some(_), Some(_)) => Some(stage(
                "plan.pretrain",
                default_pre_lr,
                "epochs",
                DEFAULT_PRETRAIN_EPOCHS,
            )?),
            _ => None,
        };
        let defaults = Convergence::default();
        let convergence = Convergence {
            patience: kv.parsed_or("plan.convergence.patience", defaults.patience)?,
            min_delta: kv.parsed_or("plan.convergence.min_delta", defaults.min_delta)?,
            val_fraction: kv
                .parsed_or::<Fraction>("plan.convergence.val_fraction", defaults.val_fraction)?,
        };
        let plan = TwoStagePlan::new(
            pretrain,
            stage("plan.train", default_lr, "max_epochs", DEFAULT_MAX_EPOCHS)?,
            convergence,
        )?;

        let targets: Vec<PathBuf> = kv
            .list::<String>("targets")?
            .iter()
            .map(|t| kv.resolve(t))
            .collect();

        let cfg = ExperimentConfig {
            label: kv.get("label").unwrap_or("run").to_string(),
            source_wld,
            source_fld,
            targets,
            encoder,
            hidden: kv.list("model.hidden")?,
            plan,
            seed,
            output_dir: kv.path("output_dir"),
            resume: kv.path("resume"),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path, seed_override: Option<u64>) -> Result<Self> {
        ExperimentConfig::from_kv(&KvConfig::load(path)?, seed_override)
    }

    pub fn mode(&self) -> RunMode {
        match (&self.source_wld, &self.source_fld) {
            (Some(_), Some(_)) => RunMode::TwoStage,
            (None, _) => RunMode::FldOnly,
            (Some(_), None) => RunMode::WldOnly,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.source_wld.is_none() && self.source_fld.is_none() {
            return Err(Error::validation(
                "config needs source.wld, source.fld or both",
            ));
        }
        if self.label.is_empty() || self.label.contains(['/', '\\', '.']) {
            return Err(Error::validation(format!(
                "label {:?} must be non-empty and free of '/', '\\' and '.'",
                self.label
            )));
        }
        let mut paths: Vec<&PathBuf> = self
            .source_wld
            .iter()
            .chain(&self.source_fld)
            .chain(&self.targets)
            .collect();
        let n = paths.len();
        paths.sort();
        paths.dedup();
        if paths.len() != n {
            return Err(Error::validation(
                "source and target paths must all be distinct",
            ));
        }
        Ok(())
    }
}
