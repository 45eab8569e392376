//! Command-line front end.
//!
//! Output layout under the output directory:
//!
//! ```text
//! manifests/    prepared datasets plus header and stats sidecars
//! checkpoints/  {label}.{stage}.ckpt
//! records/      {label}.record.json
//! reports/      transfer.csv, transfer.md, transfer.json
//! ```
//!
//! Exit codes: 0 success, 1 invalid input, 2 runtime failure, 3 transfer
//! matrix written with failed cells.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::checkpoint::{load_checkpoint, save_checkpoint};
use crate::config::{ExperimentConfig, KvConfig, RunMode};
use crate::corpus::{
    build_fld, build_wld, load_corpus, load_manifest, save_manifest, split, stats,
    write_corpus_jsonl, CorpusFormat, Dataset, DatasetKind, DatasetStats, Fraction, Split,
};
use crate::eval::{
    evaluate, render_report, Cell, ConfusionCounts, ReportFormat, ReportMetadata, TransferReport,
};
use crate::featurize::{Encoder, EncoderSpec};
use crate::model::ModelParams;
use crate::synth::{self, SynthConfig, EXPERIMENT_LEARNING_RATES};
use crate::trainer::{Stage, TrainRecord, Trainer};
use crate::{Error, Result};

pub const OUT_ENV: &str = "XFERLAB_OUT";
pub const EXIT_PARTIAL: i32 = 3;
const DEFAULT_TRAIN_FRACTION: &str = "0.85";

#[derive(Debug, Parser)]
#[command(
    name = "xferlab",
    version,
    about = "Weakly supervised sentiment transfer experiments"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a WLD or FLD manifest from a raw corpus file.
    Prepare(PrepareArgs),
    /// Train one experiment described by a config file.
    Train(TrainArgs),
    /// Score a checkpoint on a prepared FLD manifest.
    Eval(EvalArgs),
    /// Train and score a grid of runs against a set of targets.
    Matrix(MatrixArgs),
    /// Write a synthetic two-domain corpus and matching configs.
    Synth(SynthArgs),
}

#[derive(Debug, clap::Args)]
pub struct PrepareArgs {
    /// Raw corpus file.
    pub input: PathBuf,
    #[arg(long, default_value = "jsonl")]
    pub format: CorpusFormat,
    /// wld or fld.
    #[arg(long)]
    pub kind: DatasetKind,
    #[arg(long)]
    pub domain: String,
    /// Manifest base name; defaults to `{domain}WLD` or `{domain}FLD`.
    #[arg(long)]
    pub name: Option<String>,
    /// Split seed, required for FLDs.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Train share of an FLD, as a decimal or `n/d`.
    #[arg(long)]
    pub train_fraction: Option<Fraction>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub manifest: PathBuf,
    /// Embedding file to use instead of the one recorded in the checkpoint.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum OutputFormat {
    Csv,
    Markdown,
    Json,
    All,
}

#[derive(Debug, clap::Args)]
pub struct MatrixArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Single seed, overriding `seed` and `seeds` in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Training threads.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    #[arg(long, value_enum, default_value = "all")]
    pub format: OutputFormat,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, clap::Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Multiplier applied to every dataset size.
    #[arg(long, default_value_t = 1.0)]
    pub scale: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parse `args`, run the command and return the process exit code. Errors
/// are reported on stderr.
pub fn run_from<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn run(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Prepare(a) => prepare(&a).map(|_| 0),
        Command::Train(a) => train(&a).map(|_| 0),
        Command::Eval(a) => eval(&a).map(|_| 0),
        Command::Matrix(a) => matrix(&a),
        Command::Synth(a) => synth_cmd(&a).map(|_| 0),
    }
}

/// `--out`, then `XFERLAB_OUT`, then the config value.
fn output_dir(flag: Option<&Path>, config: Option<&Path>) -> Result<PathBuf> {
    flag.map(Path::to_path_buf)
        .or_else(|| std::env::var_os(OUT_ENV).map(PathBuf::from))
        .or_else(|| config.map(Path::to_path_buf))
        .ok_or_else(|| {
            Error::validation(format!("no output directory: pass --out or set {OUT_ENV}"))
        })
}

fn ensure_dir(path: &Path) -> Result<PathBuf> {
    std::fs::create_dir_all(path)
        .map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    Ok(path.to_path_buf())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_text(path, &text)
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Manifests written by `prepare`.
#[derive(Debug, Clone, PartialEq)]
pub struct Prepared {
    pub manifests: Vec<PathBuf>,
    pub stats_path: PathBuf,
}

pub fn prepare(args: &PrepareArgs) -> Result<Prepared> {
    let reviews = load_corpus(&args.input, args.format)?;
    let dir = ensure_dir(&output_dir(args.out.as_deref(), None)?.join("manifests"))?;
    let mut written = Vec::new();
    let mut all_stats: Vec<(Split, DatasetStats)> = Vec::new();
    let name;
    match args.kind {
        DatasetKind::Wld => {
            if args.train_fraction.is_some() {
                return Err(Error::validation(
                    "WLDs are not split; drop --train-fraction",
                ));
            }
            let wld = build_wld(&reviews, &args.domain)?;
            let wld = match &args.name {
                Some(n) => wld.with_name(n.clone()),
                None => wld,
            };
            name = wld.name().to_string();
            let path = dir.join(format!("{name}.all.jsonl"));
            save_manifest(&wld, &path, None, None)?;
            all_stats.push((Split::All, stats(&wld)));
            written.push(path);
        }
        DatasetKind::Fld => {
            let seed = args
                .seed
                .ok_or_else(|| Error::validation("--seed is required to split an FLD"))?;
            let fraction = match args.train_fraction {
                Some(f) => f,
                None => DEFAULT_TRAIN_FRACTION.parse()?,
            };
            let fld = build_fld(&reviews, &args.domain)?;
            let fld = match &args.name {
                Some(n) => fld.with_name(n.clone()),
                None => fld,
            };
            name = fld.name().to_string();
            all_stats.push((Split::All, stats(&fld)));
            let (train, test) = split(&fld, fraction, seed)?;
            for part in [&train, &test] {
                let path = dir.join(format!("{name}.{}.jsonl", part.split().as_str()));
                save_manifest(part, &path, Some(seed), Some(fraction))?;
                all_stats.push((part.split(), stats(part)));
                written.push(path);
            }
        }
    }
    let stats_path = dir.join(format!("{name}.stats.json"));
    let map: serde_json::Map<String, serde_json::Value> = all_stats
        .into_iter()
        .map(|(s, st)| Ok((s.as_str().to_string(), serde_json::to_value(st)?)))
        .collect::<Result<_>>()?;
    write_json(&stats_path, &map)?;
    for p in &written {
        println!("{}", p.display());
    }
    Ok(Prepared {
        manifests: written,
        stats_path,
    })
}

fn load_kind(path: &Path, kind: DatasetKind) -> Result<Dataset> {
    let (ds, _) = load_manifest(path)?;
    if ds.kind() != kind {
        return Err(Error::Kind {
            expected: kind,
            actual: ds.kind(),
        });
    }
    Ok(ds)
}

#[derive(Debug, Serialize)]
struct RecordFile<'a> {
    label: &'a str,
    mode: &'static str,
    seed: u64,
    checkpoints: Vec<&'a Path>,
    record: &'a TrainRecord,
}

/// Result of one `train` run.
#[derive(Debug, Clone)]
pub struct Trained {
    pub checkpoint: PathBuf,
    pub pretrain_checkpoint: Option<PathBuf>,
    pub record_path: PathBuf,
    pub params: ModelParams,
    pub encoder: Encoder,
}

/// Train `cfg` and write its checkpoints and record under `out`. Target
/// manifests listed in the config are never opened.
pub fn train_experiment(cfg: &ExperimentConfig, out: &Path) -> Result<Trained> {
    let encoder = Encoder::from_spec(&cfg.encoder)?;
    let wld = cfg
        .source_wld
        .as_deref()
        .map(|p| load_kind(p, DatasetKind::Wld))
        .transpose()?;
    let fld = cfg
        .source_fld
        .as_deref()
        .map(|p| load_kind(p, DatasetKind::Fld))
        .transpose()?;
    if let Some(f) = &fld {
        if f.split() == Split::Test {
            return Err(Error::validation(format!(
                "{} is a test split and cannot be used for training",
                f.name()
            )));
        }
    }
    let resumed = cfg
        .resume
        .as_deref()
        .map(|p| -> Result<ModelParams> {
            let ck = load_checkpoint(p)?;
            if ck.header.encoder.dim() != encoder.input_dim() {
                return Err(Error::Dimension {
                    what: format!("resume checkpoint {}", p.display()),
                    expected: encoder.input_dim(),
                    actual: ck.header.encoder.dim(),
                });
            }
            Ok(ck.params)
        })
        .transpose()?;

    let mut trainer = Trainer::new(&encoder);
    let mode = cfg.mode();
    let outcome = match (mode, wld.as_ref(), fld.as_ref()) {
        (RunMode::WldOnly, Some(w), _) => {
            if resumed.is_some() {
                return Err(Error::validation(
                    "resume is not supported for WLD-only runs",
                ));
            }
            let plan = &cfg.plan;
            trainer.run_baseline_wld_only(
                w,
                plan.train(),
                plan.convergence(),
                &cfg.hidden,
                cfg.seed,
            )?
        }
        (_, w, Some(f)) => match resumed {
            Some(params) => {
                trainer.continue_two_stage(&cfg.plan.without_pretrain(), params, None, f)?
            }
            None => trainer.run_two_stage(&cfg.plan, &cfg.hidden, w, f, cfg.seed)?,
        },
        _ => unreachable!("config validation guarantees a source"),
    };

    let ck_dir = ensure_dir(&out.join("checkpoints"))?;
    let rec_dir = ensure_dir(&out.join("records"))?;
    let label = Some(cfg.label.clone());
    let pretrain_checkpoint = match &outcome.pretrained {
        Some(p) => {
            let path = ck_dir.join(format!("{}.{}.ckpt", cfg.label, Stage::Pretrain.as_str()));
            save_checkpoint(
                &path,
                p,
                cfg.encoder.clone(),
                cfg.seed,
                Stage::Pretrain.as_str(),
                label.clone(),
            )?;
            Some(path)
        }
        None => None,
    };
    let checkpoint = ck_dir.join(format!("{}.{}.ckpt", cfg.label, Stage::Train.as_str()));
    save_checkpoint(
        &checkpoint,
        &outcome.params,
        cfg.encoder.clone(),
        cfg.seed,
        Stage::Train.as_str(),
        label,
    )?;
    let record_path = rec_dir.join(format!("{}.record.json", cfg.label));
    write_json(
        &record_path,
        &RecordFile {
            label: &cfg.label,
            mode: match mode {
                RunMode::TwoStage => "two_stage",
                RunMode::FldOnly => "fld_only",
                RunMode::WldOnly => "wld_only",
            },
            seed: cfg.seed,
            checkpoints: pretrain_checkpoint
                .iter()
                .chain([&checkpoint])
                .map(PathBuf::as_path)
                .collect(),
            record: &outcome.record,
        },
    )?;
    Ok(Trained {
        checkpoint,
        pretrain_checkpoint,
        record_path,
        params: outcome.params,
        encoder,
    })
}

pub fn train(args: &TrainArgs) -> Result<Trained> {
    let cfg = ExperimentConfig::load(&args.config, args.seed)?;
    let out = output_dir(args.out.as_deref(), cfg.output_dir.as_deref())?;
    let trained = train_experiment(&cfg, &out)?;
    for p in trained
        .pretrain_checkpoint
        .iter()
        .chain([&trained.checkpoint, &trained.record_path])
    {
        println!("{}", p.display());
    }
    Ok(trained)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalOutput {
    pub accuracy: f64,
    pub f1: f64,
    pub confusion: ConfusionCounts,
}

fn checkpoint_encoder(spec: &EncoderSpec, embeddings: Option<&Path>) -> Result<Encoder> {
    match (spec, embeddings) {
        (
            EncoderSpec::FrozenEmbedding {
                dim, source_tag, ..
            },
            Some(p),
        ) => Encoder::from_spec(&EncoderSpec::FrozenEmbedding {
            dim: *dim,
            source_tag: source_tag.clone(),
            path: Some(p.to_path_buf()),
        }),
        (EncoderSpec::HashedNgram { .. }, Some(_)) => Err(Error::validation(
            "--embeddings given but the checkpoint uses a hashed encoder",
        )),
        (spec, None) => Encoder::from_spec(spec),
    }
}

pub fn eval(args: &EvalArgs) -> Result<EvalOutput> {
    let ck = load_checkpoint(&args.checkpoint)?;
    let encoder = checkpoint_encoder(&ck.header.encoder, args.embeddings.as_deref())?;
    let test = load_kind(&args.manifest, DatasetKind::Fld)?;
    let (confusion, m) = evaluate(&ck.params, &encoder, &test)?;
    let out = EvalOutput {
        accuracy: m.accuracy,
        f1: m.f1,
        confusion,
    };
    println!("{}", serde_json::to_string_pretty(&out)?);
    Ok(out)
}

#[derive(Debug, Clone)]
enum RunSource {
    Checkpoint(PathBuf),
    Config(PathBuf),
}

struct MatrixSpec {
    runs: Vec<(String, RunSource)>,
    targets: Vec<(String, PathBuf)>,
    seeds: Vec<u64>,
    output_dir: Option<PathBuf>,
}

fn matrix_spec(kv: &KvConfig, seed_override: Option<u64>) -> Result<MatrixSpec> {
    kv.check_keys(&["output_dir", "seed", "seeds"], &["run.", "target."])?;
    let mut runs: Vec<(String, RunSource)> = Vec::new();
    for (rest, value) in kv.section("run") {
        let (label, field) = rest.rsplit_once('.').ok_or_else(|| {
            Error::validation(format!(
                "run key run.{rest} must be run.<label>.checkpoint or run.<label>.config"
            ))
        })?;
        let source = match field {
            "checkpoint" => RunSource::Checkpoint(kv.resolve(value)),
            "config" => RunSource::Config(kv.resolve(value)),
            other => {
                return Err(Error::validation(format!(
                    "unknown run field {other:?} for run {label}"
                )))
            }
        };
        if label.is_empty() || label.contains(['.', '/', '\\']) {
            return Err(Error::validation(format!("invalid run label {label:?}")));
        }
        if runs.iter().any(|(l, _)| l == label) {
            return Err(Error::validation(format!("run {label} is defined twice")));
        }
        runs.push((label.to_string(), source));
    }
    let targets: Vec<(String, PathBuf)> = kv
        .section("target")
        .map(|(label, value)| (label.to_string(), kv.resolve(value)))
        .collect();
    if runs.is_empty() || targets.is_empty() {
        return Err(Error::validation(
            "matrix config needs at least one run.* and one target.* entry",
        ));
    }
    let seeds = match seed_override {
        Some(s) => vec![s],
        None => {
            let listed: Vec<u64> = kv.list("seeds")?;
            match (listed.is_empty(), kv.parsed::<u64>("seed")?) {
                (false, _) => listed,
                (true, Some(s)) => vec![s],
                (true, None) => Vec::new(),
            }
        }
    };
    let needs_seed = runs.iter().any(|(_, s)| matches!(s, RunSource::Config(_)));
    if needs_seed && seeds.is_empty() {
        return Err(Error::validation(
            "matrix config trains runs but sets neither seed nor seeds",
        ));
    }
    let mut unique = seeds.clone();
    unique.sort_unstable();
    unique.dedup();
    if unique.len() != seeds.len() {
        return Err(Error::validation("seeds must be distinct"));
    }
    Ok(MatrixSpec {
        runs,
        targets,
        seeds,
        output_dir: kv.path("output_dir"),
    })
}

type Model = (ModelParams, Encoder);

fn load_model(path: &Path) -> Result<Model> {
    let ck = load_checkpoint(path)?;
    let encoder = Encoder::from_spec(&ck.header.encoder)?;
    Ok((ck.params, encoder))
}

/// Run `jobs` closures on up to `threads` threads; results keep job order.
fn fan_out<T: Send>(n: usize, threads: usize, job: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<T>>> = Mutex::new((0..n).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..threads.clamp(1, n.max(1)) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let r = job(i);
                slots.lock().expect("no panics while holding the lock")[i] = Some(r);
            });
        }
    });
    slots
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every job ran"))
        .collect()
}

/// Reports written by `matrix`.
#[derive(Debug, Clone)]
pub struct MatrixOutput {
    pub report: TransferReport,
    pub files: Vec<PathBuf>,
}

fn created_unix() -> u64 {
    std::env::var("SOURCE_DATE_EPOCH")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or_else(|| {
            std::time::SystemTime::now()
                .duration_since(std::time::UNIX_EPOCH)
                .map_or(0, |d| d.as_secs())
        })
}

pub fn run_matrix(args: &MatrixArgs) -> Result<MatrixOutput> {
    let kv = KvConfig::load(&args.config)?;
    let spec = matrix_spec(&kv, args.seed)?;
    let out = output_dir(args.out.as_deref(), spec.output_dir.as_deref())?;
    let multi = spec.seeds.len() > 1;

    // Validate every run config up front so bad input fails before training.
    let mut configs = Vec::new();
    for (label, source) in &spec.runs {
        if let RunSource::Config(path) = source {
            for &seed in &spec.seeds {
                let mut cfg = ExperimentConfig::load(path, Some(seed))?;
                cfg.label = if multi {
                    format!("{label}-s{seed}")
                } else {
                    label.clone()
                };
                for (t, tp) in &spec.targets {
                    if cfg.source_wld.as_ref() == Some(tp) || cfg.source_fld.as_ref() == Some(tp) {
                        return Err(Error::validation(format!(
                            "target {t} ({}) is also a training source of run {label}",
                            tp.display()
                        )));
                    }
                }
                configs.push((label.clone(), seed, cfg));
            }
        }
    }

    let trained = fan_out(configs.len(), args.jobs, |i| {
        let (label, seed, cfg) = &configs[i];
        tracing::info!(run = %label, seed, "training");
        train_experiment(cfg, &out).map(|t| (t.params, t.encoder))
    });

    let mut fixed: Vec<Option<Result<Model>>> = Vec::new();
    for (_, source) in &spec.runs {
        fixed.push(match source {
            RunSource::Checkpoint(p) => Some(load_model(p)),
            RunSource::Config(_) => None,
        });
    }
    let targets: Vec<Result<Dataset>> = spec
        .targets
        .iter()
        .map(|(_, p)| load_kind(p, DatasetKind::Fld))
        .collect();

    let sources: Vec<String> = spec.runs.iter().map(|(l, _)| l.clone()).collect();
    let target_labels: Vec<String> = spec.targets.iter().map(|(l, _)| l.clone()).collect();
    let mut specs: Vec<EncoderSpec> = Vec::new();
    let report_seeds: Vec<Option<u64>> = if spec.seeds.is_empty() {
        vec![None]
    } else {
        spec.seeds.iter().copied().map(Some).collect()
    };
    let mut reports = Vec::new();
    for seed in &report_seeds {
        let mut cells = Vec::new();
        for (r, (label, _)) in spec.runs.iter().enumerate() {
            let model: std::result::Result<&Model, String> = match &fixed[r] {
                Some(m) => m.as_ref().map_err(|e| e.to_string()),
                None => {
                    let i = configs
                        .iter()
                        .position(|(l, s, _)| l == label && Some(*s) == *seed)
                        .expect("a trained job per run and seed");
                    trained[i].as_ref().map_err(|e| e.to_string())
                }
            };
            if let Ok((_, enc)) = &model {
                let s = enc.spec();
                if !specs.contains(&s) {
                    specs.push(s);
                }
            }
            let row = targets
                .iter()
                .map(|target| match (&model, target) {
                    (Err(e), _) => Cell::Failed(e.clone()),
                    (_, Err(e)) => Cell::Failed(e.to_string()),
                    (Ok((params, enc)), Ok(test)) => match evaluate(params, enc, test) {
                        Ok((counts, _)) => Cell::Ok(counts.into()),
                        Err(e) => Cell::Failed(e.to_string()),
                    },
                })
                .collect();
            cells.push(row);
        }
        reports.push(TransferReport::new(
            sources.clone(),
            target_labels.clone(),
            cells,
            ReportMetadata {
                seeds: seed.iter().copied().collect(),
                encoder: None,
                created_unix: 0,
            },
        )?);
    }
    let mut report = TransferReport::average(&reports)?;
    report.metadata.encoder = match specs.as_slice() {
        [only] => Some(only.clone()),
        _ => None,
    };
    report.metadata.created_unix = created_unix();
    for (s, row) in report.sources.iter().zip(&report.cells) {
        for (t, cell) in report.targets.iter().zip(row) {
            if let Cell::Failed(msg) = cell {
                eprintln!("cell {s} -> {t} failed: {msg}");
            }
        }
    }

    let dir = ensure_dir(&out.join("reports"))?;
    let mut files = Vec::new();
    let wants = |f: OutputFormat| args.format == f || args.format == OutputFormat::All;
    if wants(OutputFormat::Csv) {
        let p = dir.join("transfer.csv");
        write_text(&p, &render_report(&report, ReportFormat::Csv))?;
        files.push(p);
    }
    if wants(OutputFormat::Markdown) {
        let p = dir.join("transfer.md");
        write_text(&p, &render_report(&report, ReportFormat::Markdown))?;
        files.push(p);
    }
    if wants(OutputFormat::Json) {
        let p = dir.join("transfer.json");
        write_json(&p, &report)?;
        files.push(p);
    }
    Ok(MatrixOutput { report, files })
}

fn matrix(args: &MatrixArgs) -> Result<i32> {
    let output = run_matrix(args)?;
    for p in &output.files {
        println!("{}", p.display());
    }
    Ok(if output.report.failed_cells() > 0 {
        EXIT_PARTIAL
    } else {
        0
    })
}

/// Files written by `synth`, relative to the output directory.
pub const SYNTH_CORPORA: [&str; 3] = [
    "corpora/a_wld.jsonl",
    "corpora/a_fld.jsonl",
    "corpora/b_fld.jsonl",
];

fn synth_config(sources: &[(&str, &str)]) -> String {
    let (pre, lr) = EXPERIMENT_LEARNING_RATES;
    let mut text = String::from("output_dir = ..\nseed = 0\n");
    for (key, manifest) in sources {
        text.push_str(&format!("{key} = ../manifests/{manifest}\n"));
    }
    text.push_str(&format!(
        "\nencoder.kind = hashed\nencoder.dim = 65536\nencoder.ngram_max = 2\nmodel.hidden =\n\n\
         plan.pretrain.lr = {pre}\nplan.pretrain.epochs = 1\nplan.train.lr = {lr}\nplan.train.max_epochs = 200\n"
    ));
    text
}

pub fn synth_cmd(args: &SynthArgs) -> Result<Vec<PathBuf>> {
    if !(args.scale > 0.0 && args.scale.is_finite()) {
        return Err(Error::validation(format!(
            "--scale must be positive, got {}",
            args.scale
        )));
    }
    let out = output_dir(args.out.as_deref(), None)?;
    let base = SynthConfig::default();
    let scaled = |n: usize| ((n as f64 * args.scale).round() as usize).max(1);
    let cfg = SynthConfig {
        wld_size: scaled(base.wld_size),
        source_fld_size: scaled(base.source_fld_size),
        target_fld_size: scaled(base.target_fld_size),
        ..base
    };
    let fixture = synth::generate(&cfg, args.seed);
    ensure_dir(&out.join("corpora"))?;
    let configs = ensure_dir(&out.join("configs"))?;
    let mut files = Vec::new();
    for (rel, reviews) in SYNTH_CORPORA.iter().zip([
        &fixture.source_wld,
        &fixture.source_fld,
        &fixture.target_fld,
    ]) {
        let p = out.join(rel);
        write_corpus_jsonl(reviews, &p)?;
        files.push(p);
    }
    let runs: [(&str, Vec<(&str, &str)>); 3] = [
        (
            "two_stage",
            vec![
                ("source.wld", "AWLD.all.jsonl"),
                ("source.fld", "AFLD.train.jsonl"),
            ],
        ),
        ("fld_only", vec![("source.fld", "AFLD.train.jsonl")]),
        ("wld_only", vec![("source.wld", "AWLD.all.jsonl")]),
    ];
    let mut matrix = String::from("output_dir = ..\nseed = 0\n\n");
    for (name, sources) in &runs {
        let p = configs.join(format!("{name}.conf"));
        write_text(&p, &format!("label = {name}\n{}", synth_config(sources)))?;
        matrix.push_str(&format!("run.{name}.config = {name}.conf\n"));
        files.push(p);
    }
    matrix.push_str(
        "\ntarget.A = ../manifests/AFLD.test.jsonl\ntarget.B = ../manifests/BFLD.test.jsonl\n",
    );
    let p = configs.join("matrix.conf");
    write_text(&p, &matrix)?;
    files.push(p);
    for p in &files {
        println!("{}", p.display());
    }
    Ok(files)
}
