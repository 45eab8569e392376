//! Accuracy / F1 scoring and source x target transfer reports.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::corpus::{Dataset, DatasetKind, Polarity};
use crate::featurize::{Encoder, EncoderSpec};
use crate::model::{forward, ModelParams};
use crate::{Error, Result};

/// Confusion counts with positive as the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn from_pairs(pairs: impl IntoIterator<Item = (Polarity, Polarity)>) -> Self {
        let mut c = ConfusionCounts::default();
        for (gold, pred) in pairs {
            c.add(gold, pred);
        }
        c
    }

    pub fn add(&mut self, gold: Polarity, pred: Polarity) {
        match (gold, pred) {
            (Polarity::Positive, Polarity::Positive) => self.tp += 1,
            (Polarity::Negative, Polarity::Positive) => self.fp += 1,
            (Polarity::Negative, Polarity::Negative) => self.tn += 1,
            (Polarity::Positive, Polarity::Negative) => self.fn_ += 1,
        }
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn accuracy(&self) -> f64 {
        match self.total() {
            0 => 0.0,
            n => (self.tp + self.tn) as f64 / n as f64,
        }
    }

    /// Positive-class F1, `2tp / (2tp + fp + fn)`; zero when undefined.
    pub fn f1(&self) -> f64 {
        binary_f1(self.tp, self.fp, self.fn_)
    }

    /// Unweighted mean of the positive- and negative-class F1.
    pub fn macro_f1(&self) -> f64 {
        (self.f1() + binary_f1(self.tn, self.fn_, self.fp)) / 2.0
    }

    pub fn metrics(&self) -> MetricPair {
        MetricPair {
            accuracy: self.accuracy(),
            f1: self.f1(),
        }
    }
}

fn binary_f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    match 2 * tp + fp + fn_ {
        0 => 0.0,
        d => (2 * tp) as f64 / d as f64,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricPair {
    pub accuracy: f64,
    pub f1: f64,
}

/// Score `params` on a fully labeled dataset. Probability ties predict
/// negative.
pub fn evaluate(
    params: &ModelParams,
    encoder: &Encoder,
    test: &Dataset,
) -> Result<(ConfusionCounts, MetricPair)> {
    let preds = predict_dataset(params, encoder, test)?;
    let counts = ConfusionCounts::from_pairs(test.examples().iter().map(|e| e.label).zip(preds));
    Ok((counts, counts.metrics()))
}

/// Predicted polarity of every example, in dataset order.
pub fn predict_dataset(
    params: &ModelParams,
    encoder: &Encoder,
    test: &Dataset,
) -> Result<Vec<Polarity>> {
    if test.kind() != DatasetKind::Fld {
        return Err(Error::Kind {
            expected: DatasetKind::Fld,
            actual: test.kind(),
        });
    }
    if test.is_empty() {
        return Err(Error::EmptyDataset(test.name().to_string()));
    }
    if encoder.input_dim() != params.architecture().input_dim {
        return Err(Error::Dimension {
            what: "checkpoint input".into(),
            expected: params.architecture().input_dim,
            actual: encoder.input_dim(),
        });
    }
    test.examples()
        .iter()
        .map(|ex| Ok(forward(params, &encoder.encode(ex)?)?.polarity()))
        .collect()
}

/// Metrics of one transfer-matrix cell.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellMetrics {
    pub accuracy: f64,
    pub f1: f64,
    pub macro_f1: f64,
}

impl From<ConfusionCounts> for CellMetrics {
    fn from(c: ConfusionCounts) -> Self {
        CellMetrics {
            accuracy: c.accuracy(),
            f1: c.f1(),
            macro_f1: c.macro_f1(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Ok(CellMetrics),
    Failed(String),
}

impl Cell {
    pub fn metrics(&self) -> Option<&CellMetrics> {
        match self {
            Cell::Ok(m) => Some(m),
            Cell::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportMetadata {
    pub seeds: Vec<u64>,
    pub encoder: Option<EncoderSpec>,
    pub created_unix: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransferReport {
    pub sources: Vec<String>,
    pub targets: Vec<String>,
    /// Row-major: `cells[source][target]`.
    pub cells: Vec<Vec<Cell>>,
    pub metadata: ReportMetadata,
}

impl TransferReport {
    pub fn new(
        sources: Vec<String>,
        targets: Vec<String>,
        cells: Vec<Vec<Cell>>,
        metadata: ReportMetadata,
    ) -> Result<Self> {
        let unique = |labels: &[String], what: &str| {
            let mut seen = std::collections::HashSet::new();
            match labels.iter().find(|l| !seen.insert(l.as_str())) {
                Some(dup) => Err(Error::validation(format!("duplicate {what} label {dup:?}"))),
                None => Ok(()),
            }
        };
        unique(&sources, "source")?;
        unique(&targets, "target")?;
        if cells.len() != sources.len() || cells.iter().any(|row| row.len() != targets.len()) {
            return Err(Error::validation("report cells do not match its labels"));
        }
        Ok(TransferReport {
            sources,
            targets,
            cells,
            metadata,
        })
    }

    pub fn cell(&self, source: usize, target: usize) -> &Cell {
        &self.cells[source][target]
    }

    pub fn failed_cells(&self) -> usize {
        self.cells
            .iter()
            .flatten()
            .filter(|c| matches!(c, Cell::Failed(_)))
            .count()
    }

    /// Cell-wise mean over reports with identical labels. A cell that failed
    /// in any report fails in the average.
    pub fn average(reports: &[TransferReport]) -> Result<TransferReport> {
        let first = reports
            .first()
            .ok_or_else(|| Error::validation("no reports to average"))?;
        if reports
            .iter()
            .any(|r| r.sources != first.sources || r.targets != first.targets)
        {
            return Err(Error::validation(
                "reports to average have different layouts",
            ));
        }
        let n = reports.len() as f64;
        let mut cells = first.cells.clone();
        for (s, row) in cells.iter_mut().enumerate() {
            for (t, cell) in row.iter_mut().enumerate() {
                let mut sum = CellMetrics {
                    accuracy: 0.0,
                    f1: 0.0,
                    macro_f1: 0.0,
                };
                let mut failure = None;
                for r in reports {
                    match &r.cells[s][t] {
                        Cell::Ok(m) => {
                            sum.accuracy += m.accuracy;
                            sum.f1 += m.f1;
                            sum.macro_f1 += m.macro_f1;
                        }
                        Cell::Failed(msg) => {
                            failure.get_or_insert_with(|| msg.clone());
                        }
                    }
                }
                *cell = match failure {
                    Some(msg) => Cell::Failed(msg),
                    None => Cell::Ok(CellMetrics {
                        accuracy: sum.accuracy / n,
                        f1: sum.f1 / n,
                        macro_f1: sum.macro_f1 / n,
                    }),
                };
            }
        }
        let mut metadata = first.metadata.clone();
        metadata.seeds = reports
            .iter()
            .flat_map(|r| r.metadata.seeds.clone())
            .collect();
        TransferReport::new(
            first.sources.clone(),
            first.targets.clone(),
            cells,
            metadata,
        )
    }
}

/// Evaluate every run on every target. A failing cell is recorded as
/// [`Cell::Failed`] and the sweep continues.
pub fn transfer_matrix(
    runs: &[(String, &ModelParams)],
    targets: &[(String, &Dataset)],
    encoder: &Encoder,
) -> Result<TransferReport> {
    let cells = runs
        .iter()
        .map(|(_, params)| {
            targets
                .iter()
                .map(|(_, test)| match evaluate(params, encoder, test) {
                    Ok((counts, _)) => Cell::Ok(counts.into()),
                    Err(e) => Cell::Failed(e.to_string()),
                })
                .collect()
        })
        .collect();
    TransferReport::new(
        runs.iter().map(|(l, _)| l.clone()).collect(),
        targets.iter().map(|(l, _)| l.clone()).collect(),
        cells,
        ReportMetadata {
            encoder: Some(encoder.spec()),
            ..ReportMetadata::default()
        },
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Markdown,
}

pub fn format_accuracy(acc: f64) -> String {
    format!("{:.2}", acc * 100.0)
}

pub fn format_f1(f1: f64) -> String {
    format!("{f1:.3}")
}

const FAILED: &str = "ERR";

pub fn render_report(report: &TransferReport, format: ReportFormat) -> String {
    match format {
        ReportFormat::Csv => render_csv(report),
        ReportFormat::Markdown => render_markdown(report),
    }
}

fn csv_header(report: &TransferReport) -> Vec<String> {
    let mut header = vec!["source".to_string()];
    for t in &report.targets {
        header.push(format!("{t} acc"));
        header.push(format!("{t} f1"));
        header.push(format!("{t} macro_f1"));
    }
    header
}

fn render_csv(report: &TransferReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(csv_header(report)).expect("in-memory write");
    for (source, row) in report.sources.iter().zip(&report.cells) {
        let mut rec = vec![source.clone()];
        for cell in row {
            match cell {
                Cell::Ok(m) => {
                    rec.push(format_accuracy(m.accuracy));
                    rec.push(format_f1(m.f1));
                    rec.push(format_f1(m.macro_f1));
                }
                Cell::Failed(_) => rec.extend([FAILED; 3].map(String::from)),
            }
        }
        w.write_record(rec).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("utf-8 input")
}

/// Rank markers for one accuracy column: every cell equal to the maximum is
/// best, every cell equal to the largest strictly smaller value is second.
pub fn column_ranks(values: &[Option<f64>]) -> Vec<Option<Rank>> {
    let best = values
        .iter()
        .flatten()
        .copied()
        .fold(f64::NEG_INFINITY, f64::max);
    let second = values
        .iter()
        .flatten()
        .copied()
        .filter(|&v| v < best)
        .fold(f64::NEG_INFINITY, f64::max);
    values
        .iter()
        .map(|v| match v {
            Some(v) if *v == best => Some(Rank::Best),
            Some(v) if *v == second => Some(Rank::Second),
            _ => None,
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rank {
    Best,
    Second,
}

/// Markdown grid; the best accuracy per target is bold, the second best
/// italic. Ranking uses the printed (rounded) values.
fn render_markdown(report: &TransferReport) -> String {
    let mut out = String::new();
    out.push_str("| source |");
    for t in &report.targets {
        let _ = write!(out, " {t} acc | {t} F1 |");
    }
    out.push_str("\n|---|");
    for _ in &report.targets {
        out.push_str("---:|---:|");
    }
    out.push('\n');

    let ranks: Vec<Vec<Option<Rank>>> = (0..report.targets.len())
        .map(|t| {
            let column: Vec<Option<f64>> = report
                .cells
                .iter()
                .map(|row| {
                    row[t].metrics().map(|m| {
                        format_accuracy(m.accuracy)
                            .parse()
                            .expect("formatted float")
                    })
                })
                .collect();
            column_ranks(&column)
        })
        .collect();

    for (s, (source, row)) in report.sources.iter().zip(&report.cells).enumerate() {
        let _ = write!(out, "| {source} |");
        for (t, cell) in row.iter().enumerate() {
            match cell {
                Cell::Ok(m) => {
                    let acc = format_accuracy(m.accuracy);
                    let acc = match ranks[t][s] {
                        Some(Rank::Best) => format!("**{acc}**"),
                        Some(Rank::Second) => format!("*{acc}*"),
                        None => acc,
                    };
                    let _ = write!(out, " {acc} | {} |", format_f1(m.f1));
                }
                Cell::Failed(_) => {
                    let _ = write!(out, " {FAILED} | {FAILED} |");
                }
            }
        }
        out.push('\n');
    }
    out
}

/// A CSV report read back at printed precision. `None` marks failed cells.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub targets: Vec<String>,
    pub rows: Vec<(String, Vec<Option<CellMetrics>>)>,
}

pub fn parse_csv_report(text: &str) -> Result<ParsedReport> {
    let bad = |msg: String| Error::Format(format!("transfer CSV: {msg}"));
    let mut reader = csv::Reader::from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| bad(e.to_string()))?.clone();
    if header.get(0) != Some("source") || (header.len() - 1) % 3 != 0 {
        return Err(bad("unexpected header".into()));
    }
    let targets: Vec<String> = header
        .iter()
        .skip(1)
        .step_by(3)
        .map(|h| {
            h.strip_suffix(" acc")
                .map(str::to_string)
                .ok_or_else(|| bad(format!("bad column {h:?}")))
        })
        .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|e| bad(e.to_string()))?;
        let source = rec.get(0).unwrap_or_default().to_string();
        let fields: Vec<&str> = rec.iter().skip(1).collect();
        let cells = fields
            .chunks(3)
            .map(|c| {
                if c.contains(&FAILED) {
                    return Ok(None);
                }
                let num = |s: &str| s.parse::<f64>().map_err(|e| bad(format!("{s:?}: {e}")));
                Ok(Some(CellMetrics {
                    accuracy: num(c[0])? / 100.0,
                    f1: num(c[1])?,
                    macro_f1: num(c[2])?,
                }))
            })
            .collect::<Result<_>>()?;
        rows.push((source, cells));
    }
    Ok(ParsedReport { targets, rows })
}
