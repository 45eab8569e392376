//! Review ingestion, star-rating weak labels, splits and dataset manifests.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::featurize::FEATURE_HASH_VERSION;
use crate::{audit, Error, Result};

/// Binary sentiment label. Neutral reviews never reach this type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Negative,
    Positive,
}

impl Polarity {
    /// Position of this class in a `(P(neg), P(pos))` probability pair.
    pub fn index(self) -> usize {
        match self {
            Polarity::Negative => 0,
            Polarity::Positive => 1,
        }
    }

    pub fn flipped(self) -> Self {
        match self {
            Polarity::Negative => Polarity::Positive,
            Polarity::Positive => Polarity::Negative,
        }
    }
}

/// Human-assigned label as found in fully labeled corpora.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GoldLabel {
    Positive,
    Negative,
    Neutral,
}

impl GoldLabel {
    pub fn polarity(self) -> Option<Polarity> {
        match self {
            GoldLabel::Positive => Some(Polarity::Positive),
            GoldLabel::Negative => Some(Polarity::Negative),
            GoldLabel::Neutral => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            GoldLabel::Positive => "positive",
            GoldLabel::Negative => "negative",
            GoldLabel::Neutral => "neutral",
        }
    }
}

impl FromStr for GoldLabel {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "positive" => Ok(GoldLabel::Positive),
            "negative" => Ok(GoldLabel::Negative),
            "neutral" => Ok(GoldLabel::Neutral),
            other => Err(format!("unknown label {other:?}")),
        }
    }
}

impl From<Polarity> for GoldLabel {
    fn from(p: Polarity) -> Self {
        match p {
            Polarity::Positive => GoldLabel::Positive,
            Polarity::Negative => GoldLabel::Negative,
        }
    }
}

/// A review as it comes out of a corpus file.
///
/// `domain` is empty when the source file does not tag it; the dataset
/// builders then assign the dataset's domain.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawReview {
    pub id: u64,
    pub text: String,
    pub rating: Option<u8>,
    pub gold_polarity: Option<GoldLabel>,
    pub domain: String,
}

impl RawReview {
    pub fn validate(&self) -> Result<()> {
        if self.rating.is_none() && self.gold_polarity.is_none() {
            return Err(Error::validation(format!(
                "review {} has neither a rating nor a label",
                self.id
            )));
        }
        if let Some(r) = self.rating {
            check_rating(self.id, i64::from(r))?;
        }
        Ok(())
    }
}

fn check_rating(id: u64, rating: i64) -> Result<u8> {
    if (1..=5).contains(&rating) {
        Ok(rating as u8)
    } else {
        Err(Error::validation(format!(
            "review {id}: rating {rating} outside [1, 5]"
        )))
    }
}

/// Where a label came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    /// Derived from a star rating.
    Weak,
    /// Assigned by an annotator.
    Full,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Example {
    pub review_id: u64,
    pub text: String,
    pub label: Polarity,
    pub provenance: Provenance,
    pub domain: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DatasetKind {
    /// Weakly labeled (star ratings).
    #[serde(rename = "WLD")]
    Wld,
    /// Fully labeled.
    #[serde(rename = "FLD")]
    Fld,
}

impl DatasetKind {
    fn provenance(self) -> Provenance {
        match self {
            DatasetKind::Wld => Provenance::Weak,
            DatasetKind::Fld => Provenance::Full,
        }
    }
}

impl fmt::Display for DatasetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DatasetKind::Wld => "WLD",
            DatasetKind::Fld => "FLD",
        })
    }
}

impl FromStr for DatasetKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wld" => Ok(DatasetKind::Wld),
            "fld" => Ok(DatasetKind::Fld),
            other => Err(format!(
                "unknown dataset kind {other:?} (expected wld or fld)"
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    All,
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::All => "all",
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

/// A named, single-domain collection of labeled examples.
///
/// Construction checks that every example carries the dataset's domain and
/// that provenance agrees with the kind, so a `Dataset` in hand always
/// satisfies both.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    name: String,
    kind: DatasetKind,
    domain: String,
    split: Split,
    examples: Vec<Example>,
}

impl Dataset {
    pub fn new(
        name: impl Into<String>,
        kind: DatasetKind,
        domain: impl Into<String>,
        split: Split,
        examples: Vec<Example>,
    ) -> Result<Self> {
        let domain = domain.into();
        let provenance = kind.provenance();
        for ex in &examples {
            if ex.domain != domain {
                return Err(Error::validation(format!(
                    "example {} has domain {:?}, dataset domain is {domain:?}",
                    ex.review_id, ex.domain
                )));
            }
            if ex.provenance != provenance {
                return Err(Error::validation(format!(
                    "example {} has {:?} provenance in a {kind} dataset",
                    ex.review_id, ex.provenance
                )));
            }
        }
        Ok(Dataset {
            name: name.into(),
            kind,
            domain,
            split,
            examples,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn kind(&self) -> DatasetKind {
        self.kind
    }

    pub fn domain(&self) -> &str {
        &self.domain
    }

    pub fn split(&self) -> Split {
        self.split
    }

    pub fn examples(&self) -> &[Example] {
        &self.examples
    }

    pub fn len(&self) -> usize {
        self.examples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.examples.is_empty()
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = name.into();
        self
    }
}

/// Label counts of a dataset.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub count: usize,
    pub positive_count: usize,
    pub negative_count: usize,
    /// `None` when there are no negatives.
    pub pn_ratio: Option<f64>,
}

/// A fraction strictly between 0 and 1, held as an exact ratio so that
/// `floor(fraction * n)` never suffers from binary rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fraction {
    num: u64,
    den: u64,
}

impl Fraction {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if den == 0 || num == 0 || num >= den {
            return Err(Error::validation(format!(
                "fraction {num}/{den} must lie strictly between 0 and 1"
            )));
        }
        Ok(Fraction { num, den })
    }

    /// `floor(self * n)`.
    pub fn portion_of(self, n: usize) -> usize {
        (n as u128 * self.num as u128 / self.den as u128) as usize
    }

    /// `1 - self`.
    pub fn complement(self) -> Self {
        Fraction {
            num: self.den - self.num,
            den: self.den,
        }
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl FromStr for Fraction {
    type Err = Error;

    /// Accepts decimals (`0.85`) and ratios (`17/20`).
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let bad = || Error::validation(format!("invalid fraction {s:?}"));
        if let Some((n, d)) = s.split_once('/') {
            let num = n.trim().parse().map_err(|_| bad())?;
            let den = d.trim().parse().map_err(|_| bad())?;
            return Fraction::new(num, den);
        }
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if frac.len() > 18
            || !int.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
            || (int.is_empty() && frac.is_empty())
        {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int: u64 = if int.is_empty() {
            0
        } else {
            int.parse().map_err(|_| bad())?
        };
        let frac_val: u64 = if frac.is_empty() {
            0
        } else {
            frac.parse().map_err(|_| bad())?
        };
        let num = int
            .checked_mul(den)
            .and_then(|v| v.checked_add(frac_val))
            .ok_or_else(bad)?;
        Fraction::new(num, den)
    }
}

impl fmt::Display for Fraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut den = self.den;
        let mut decimals = 0usize;
        while den > 1 && den.is_multiple_of(10) {
            den /= 10;
            decimals += 1;
        }
        if den == 1 {
            write!(f, "0.{:0width$}", self.num, width = decimals)
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

impl Serialize for Fraction {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Fraction {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Star rating to polarity: 4-5 stars positive, 1-2 negative, 3 dropped.
pub fn weak_label(review_id: u64, rating: i64) -> Result<Option<Polarity>> {
    Ok(match check_rating(review_id, rating)? {
        1 | 2 => Some(Polarity::Negative),
        3 => None,
        _ => Some(Polarity::Positive),
    })
}

fn example_domain(review: &RawReview, domain: &str) -> Result<String> {
    if review.domain.is_empty() || review.domain == domain {
        Ok(domain.to_string())
    } else {
        Err(Error::validation(format!(
            "review {} is tagged {:?} but the dataset domain is {domain:?}",
            review.id, review.domain
        )))
    }
}

/// Weakly labeled dataset from star ratings. Three-star reviews are dropped;
/// input order is preserved.
pub fn build_wld(reviews: &[RawReview], domain: &str) -> Result<Dataset> {
    let mut examples = Vec::with_capacity(reviews.len());
    for review in reviews {
        let rating = review
            .rating
            .ok_or_else(|| Error::validation(format!("review {} has no rating", review.id)))?;
        if let Some(label) = weak_label(review.id, i64::from(rating))? {
            examples.push(Example {
                review_id: review.id,
                text: review.text.clone(),
                label,
                provenance: Provenance::Weak,
                domain: example_domain(review, domain)?,
            });
        }
    }
    if examples.is_empty() {
        tracing::warn!(
            domain,
            input = reviews.len(),
            "weakly labeled dataset is empty after dropping 3-star reviews"
        );
    }
    Dataset::new(
        format!("{domain}WLD"),
        DatasetKind::Wld,
        domain,
        Split::All,
        examples,
    )
}

/// Fully labeled dataset from gold labels. Neutral reviews are dropped.
pub fn build_fld(reviews: &[RawReview], domain: &str) -> Result<Dataset> {
    let mut examples = Vec::with_capacity(reviews.len());
    for review in reviews {
        let gold = review
            .gold_polarity
            .ok_or_else(|| Error::validation(format!("review {} has no gold label", review.id)))?;
        if let Some(label) = gold.polarity() {
            examples.push(Example {
                review_id: review.id,
                text: review.text.clone(),
                label,
                provenance: Provenance::Full,
                domain: example_domain(review, domain)?,
            });
        }
    }
    if examples.is_empty() {
        tracing::warn!(
            domain,
            input = reviews.len(),
            "fully labeled dataset is empty after dropping neutral reviews"
        );
    }
    Dataset::new(
        format!("{domain}FLD"),
        DatasetKind::Fld,
        domain,
        Split::All,
        examples,
    )
}

/// Seeded shuffle, then cut: the first `floor(fraction * n)` items of the
/// permutation go left, the rest right.
pub(crate) fn shuffle_cut<T: Clone>(
    items: &[T],
    fraction: Fraction,
    seed: u64,
) -> (Vec<T>, Vec<T>) {
    let mut order: Vec<usize> = (0..items.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let cut = fraction.portion_of(items.len());
    let pick = |idx: &[usize]| idx.iter().map(|&i| items[i].clone()).collect::<Vec<_>>();
    (pick(&order[..cut]), pick(&order[cut..]))
}

/// Random train/test split of a fully labeled dataset.
///
/// Weakly labeled datasets are never split.
pub fn split(dataset: &Dataset, train_fraction: Fraction, seed: u64) -> Result<(Dataset, Dataset)> {
    if dataset.kind == DatasetKind::Wld {
        return Err(Error::validation(format!(
            "WLDs are not split ({} is weakly labeled)",
            dataset.name
        )));
    }
    if dataset.split != Split::All {
        return Err(Error::validation(format!(
            "{} is already a {} split",
            dataset.name,
            dataset.split.as_str()
        )));
    }
    if dataset.is_empty() {
        return Err(Error::EmptyDataset(dataset.name.clone()));
    }
    let (train, test) = shuffle_cut(&dataset.examples, train_fraction, seed);
    let part = |split: Split, examples| Dataset {
        name: dataset.name.clone(),
        kind: dataset.kind,
        domain: dataset.domain.clone(),
        split,
        examples,
    };
    Ok((part(Split::Train, train), part(Split::Test, test)))
}

pub fn stats(dataset: &Dataset) -> DatasetStats {
    stats_of(dataset.examples.iter().map(|e| e.label))
}

pub(crate) fn stats_of(labels: impl IntoIterator<Item = Polarity>) -> DatasetStats {
    let (mut pos, mut neg) = (0usize, 0usize);
    for label in labels {
        match label {
            Polarity::Positive => pos += 1,
            Polarity::Negative => neg += 1,
        }
    }
    DatasetStats {
        count: pos + neg,
        positive_count: pos,
        negative_count: neg,
        pn_ratio: (neg > 0).then(|| pos as f64 / neg as f64),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorpusFormat {
    Jsonl,
    Csv,
}

impl FromStr for CorpusFormat {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "jsonl" | "json" => Ok(CorpusFormat::Jsonl),
            "csv" => Ok(CorpusFormat::Csv),
            other => Err(format!(
                "unknown corpus format {other:?} (expected jsonl or csv)"
            )),
        }
    }
}

#[derive(Deserialize)]
struct JsonRow {
    id: u64,
    text: String,
    #[serde(default)]
    rating: Option<i64>,
    #[serde(default)]
    label: Option<String>,
    #[serde(default)]
    domain: Option<String>,
}

/// Read a corpus file in file order. Line numbers in errors are 1-based and
/// count the CSV header.
pub fn load_corpus(path: &Path, format: CorpusFormat) -> Result<Vec<RawReview>> {
    audit::record_read(path);
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let reviews = match format {
        CorpusFormat::Jsonl => load_jsonl(path, BufReader::new(file))?,
        CorpusFormat::Csv => load_csv(path, file)?,
    };
    let mut seen = HashSet::with_capacity(reviews.len());
    for (line, review) in &reviews {
        if !seen.insert(review.id) {
            return Err(parse_err(
                path,
                *line,
                format!("duplicate id {}", review.id),
            ));
        }
    }
    Ok(reviews.into_iter().map(|(_, r)| r).collect())
}

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

fn make_review(
    path: &Path,
    line: usize,
    id: u64,
    text: String,
    rating: Option<i64>,
    label: Option<&str>,
    domain: Option<String>,
) -> Result<RawReview> {
    let rating = rating
        .map(|r| check_rating(id, r))
        .transpose()
        .map_err(|e| parse_err(path, line, e.to_string()))?;
    let gold_polarity = label
        .map(str::parse::<GoldLabel>)
        .transpose()
        .map_err(|e| parse_err(path, line, format!("review {id}: {e}")))?;
    let review = RawReview {
        id,
        text,
        rating,
        gold_polarity,
        domain: domain.unwrap_or_default(),
    };
    review
        .validate()
        .map_err(|e| parse_err(path, line, e.to_string()))?;
    Ok(review)
}

fn load_jsonl(path: &Path, reader: impl BufRead) -> Result<Vec<(usize, RawReview)>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let lineno = i + 1;
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let row: JsonRow =
            serde_json::from_str(&line).map_err(|e| parse_err(path, lineno, e.to_string()))?;
        let review = make_review(
            path,
            lineno,
            row.id,
            row.text,
            row.rating,
            row.label.as_deref(),
            row.domain,
        )?;
        out.push((lineno, review));
    }
    Ok(out)
}

const CSV_HEADER: [&str; 5] = ["id", "text", "rating", "label", "domain"];

fn load_csv(path: &Path, file: File) -> Result<Vec<(usize, RawReview)>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(file);
    let header = reader
        .headers()
        .map_err(|e| parse_err(path, 1, e.to_string()))?
        .clone();
    if header.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(parse_err(
            path,
            1,
            format!("expected header {}", CSV_HEADER.join(",")),
        ));
    }
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line() as usize);
            parse_err(path, line, e.to_string())
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        let field = |i: usize| record.get(i).filter(|s| !s.is_empty());
        let id = field(0)
            .ok_or_else(|| parse_err(path, line, "missing id"))?
            .parse::<u64>()
            .map_err(|e| parse_err(path, line, format!("bad id: {e}")))?;
        let rating = field(2)
            .map(|s| s.trim().parse::<i64>())
            .transpose()
            .map_err(|e| parse_err(path, line, format!("review {id}: bad rating: {e}")))?;
        let review = make_review(
            path,
            line,
            id,
            record.get(1).unwrap_or_default().to_string(),
            rating,
            field(3),
            field(4).map(str::to_string),
        )?;
        out.push((line, review));
    }
    Ok(out)
}

/// Write reviews as JSON lines in the corpus input format.
pub fn write_corpus_jsonl(reviews: &[RawReview], path: &Path) -> Result<()> {
    let file =
        File::create(path).map_err(|e| Error::io(format!("creating {}", path.display()), e))?;
    let mut w = BufWriter::new(file);
    for r in reviews {
        let mut obj = serde_json::Map::new();
        obj.insert("id".into(), r.id.into());
        obj.insert("text".into(), r.text.clone().into());
        if let Some(rating) = r.rating {
            obj.insert("rating".into(), rating.into());
        }
        if let Some(label) = r.gold_polarity {
            obj.insert("label".into(), label.as_str().into());
        }
        if !r.domain.is_empty() {
            obj.insert("domain".into(), r.domain.clone().into());
        }
        serde_json::to_writer(&mut w, &obj)?;
        w.write_all(b"\n")
            .map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    }
    w.flush()
        .map_err(|e| Error::io(format!("writing {}", path.display()), e))
}

/// Sidecar header stored next to a manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub name: String,
    pub kind: DatasetKind,
    pub domain: String,
    pub split: Split,
    pub seed: Option<u64>,
    pub train_fraction: Option<Fraction>,
    pub stats: DatasetStats,
    pub feature_hash: String,
}

/// `foo.train.jsonl` -> `foo.train.header.json`.
pub fn header_path(manifest: &Path) -> PathBuf {
    manifest.with_extension("header.json")
}

/// Write `dataset` as JSON lines of examples plus a header sidecar.
pub fn save_manifest(
    dataset: &Dataset,
    path: &Path,
    seed: Option<u64>,
    train_fraction: Option<Fraction>,
) -> Result<ManifestHeader> {
    let io_err = |e| Error::io(format!("writing {}", path.display()), e);
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    for ex in &dataset.examples {
        serde_json::to_writer(&mut w, ex)?;
        w.write_all(b"\n").map_err(io_err)?;
    }
    w.flush().map_err(io_err)?;

    let header = ManifestHeader {
        name: dataset.name.clone(),
        kind: dataset.kind,
        domain: dataset.domain.clone(),
        split: dataset.split,
        seed,
        train_fraction,
        stats: stats(dataset),
        feature_hash: FEATURE_HASH_VERSION.to_string(),
    };
    let hpath = header_path(path);
    let mut text = serde_json::to_string_pretty(&header)?;
    text.push('\n');
    std::fs::write(&hpath, text)
        .map_err(|e| Error::io(format!("writing {}", hpath.display()), e))?;
    Ok(header)
}

/// Inverse of [`save_manifest`]. Counts in the header are checked against the
/// examples.
pub fn load_manifest(path: &Path) -> Result<(Dataset, ManifestHeader)> {
    let hpath = header_path(path);
    audit::record_read(&hpath);
    let htext = std::fs::read_to_string(&hpath)
        .map_err(|e| Error::io(format!("reading {}", hpath.display()), e))?;
    let header: ManifestHeader =
        serde_json::from_str(&htext).map_err(|e| parse_err(&hpath, e.line(), e.to_string()))?;

    audit::record_read(path);
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut examples = Vec::new();
    let mut seen = HashSet::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
        if line.trim().is_empty() {
            continue;
        }
        let ex: Example =
            serde_json::from_str(&line).map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        if !seen.insert(ex.review_id) {
            return Err(parse_err(
                path,
                i + 1,
                format!("duplicate id {}", ex.review_id),
            ));
        }
        examples.push(ex);
    }
    let dataset = Dataset::new(
        header.name.clone(),
        header.kind,
        header.domain.clone(),
        header.split,
        examples,
    )?;
    let actual = stats(&dataset);
    if actual.count != header.stats.count || actual.positive_count != header.stats.positive_count {
        return Err(Error::Data(format!(
            "{}: header declares {} examples ({} positive), manifest holds {} ({} positive)",
            path.display(),
            header.stats.count,
            header.stats.positive_count,
            actual.count,
            actual.positive_count
        )));
    }
    Ok((dataset, header))
}
