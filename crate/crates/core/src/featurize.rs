//! Text to fixed-width numeric inputs.
//!
//! Two encoders are provided. [`Encoder::Hashed`] lowercases and filters the
//! text, hashes every n-gram up to `ngram_max` into a power-of-two sized
//! vector and L2-normalizes the counts. [`Encoder::Frozen`] looks up a
//! precomputed sentence embedding by review id from a WSEB file.
//!
//! # WSEB layout
//!
//! All integers little-endian:
//!
//! ```text
//! b"WSEB" | u32 version (= 1) | u32 dim | u64 count
//! count x ( u64 review_id | dim x f32 )
//! ```

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use crate::corpus::Example;
use crate::{audit, Error, Result};

/// Identifies the n-gram hash; stored in manifests and checkpoints.
pub const FEATURE_HASH_VERSION: &str = "fnv1a64-space-joined/v1";

pub const DEFAULT_HASH_DIM: usize = 1 << 18;
pub const DEFAULT_NGRAM_MAX: usize = 2;

const WSEB_MAGIC: &[u8; 4] = b"WSEB";
const WSEB_VERSION: u32 = 1;

/// Lowercase tokens over letters, digits and apostrophes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TokenSeq(pub Vec<String>);

impl TokenSeq {
    pub fn as_slice(&self) -> &[String] {
        &self.0
    }

    pub fn join(&self) -> String {
        self.0.join(" ")
    }
}

/// Lowercase, replace everything except letters, digits and apostrophes with
/// whitespace, split on whitespace.
pub fn preprocess(text: &str) -> TokenSeq {
    let mut cleaned = String::with_capacity(text.len());
    for c in text.chars() {
        for lc in c.to_lowercase() {
            // Characters that stay uppercase after lowercasing count as
            // special characters.
            if (lc.is_alphanumeric() && !lc.is_uppercase()) || lc == '\'' {
                cleaned.push(lc);
            } else {
                cleaned.push(' ');
            }
        }
    }
    TokenSeq(cleaned.split_whitespace().map(str::to_string).collect())
}

/// Sparse vector with strictly increasing indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseVec {
    dim: usize,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseVec {
    pub fn new(dim: usize, indices: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation(
                "sparse vector dimension must be positive",
            ));
        }
        if indices.len() != values.len() {
            return Err(Error::validation(
                "sparse vector index/value length mismatch",
            ));
        }
        if indices.windows(2).any(|w| w[0] >= w[1]) || indices.last().is_some_and(|&i| i >= dim) {
            return Err(Error::validation(
                "sparse vector indices must be strictly increasing and below dim",
            ));
        }
        Ok(SparseVec {
            dim,
            indices,
            values,
        })
    }

    pub fn zeros(dim: usize) -> Self {
        SparseVec {
            dim,
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.indices
            .iter()
            .copied()
            .zip(self.values.iter().copied())
    }

    pub fn norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (i, v) in self.iter() {
            out[i] = v;
        }
        out
    }

    fn scale(&mut self, factor: f64) {
        self.values.iter_mut().for_each(|v| *v *= factor);
    }
}

/// Model input: sparse hashed features or a dense embedding.
#[derive(Debug, Clone, PartialEq)]
pub enum Features {
    Sparse(SparseVec),
    Dense(Vec<f64>),
}

impl Features {
    pub fn dim(&self) -> usize {
        match self {
            Features::Sparse(s) => s.dim(),
            Features::Dense(d) => d.len(),
        }
    }

    /// Non-zero (or stored) components as `(index, value)`.
    pub fn for_each_nonzero(&self, mut f: impl FnMut(usize, f64)) {
        match self {
            Features::Sparse(s) => s.iter().for_each(|(i, v)| f(i, v)),
            Features::Dense(d) => d.iter().enumerate().for_each(|(i, &v)| f(i, v)),
        }
    }

    pub fn scaled(&self, factor: f64) -> Features {
        match self {
            Features::Sparse(s) => {
                let mut s = s.clone();
                s.scale(factor);
                Features::Sparse(s)
            }
            Features::Dense(d) => Features::Dense(d.iter().map(|v| v * factor).collect()),
        }
    }
}

/// 64-bit FNV-1a.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Index of an n-gram: FNV-1a of its tokens joined by single spaces, modulo
/// `dim`.
pub fn ngram_index(ngram: &[String], dim: usize) -> usize {
    let key = ngram.join(" ");
    (fnv1a64(key.as_bytes()) % dim as u64) as usize
}

/// Hashed bag of n-grams (`1..=ngram_max`), L2-normalized.
///
/// `dim` must be a power of two and `ngram_max` in `1..=3`; use
/// [`EncoderSpec::validate`] to check both up front.
pub fn encode_hashed(tokens: &TokenSeq, dim: usize, ngram_max: usize) -> SparseVec {
    debug_assert!(dim.is_power_of_two() && (1..=3).contains(&ngram_max));
    let mut hits: Vec<usize> = Vec::new();
    for n in 1..=ngram_max {
        hits.extend(tokens.0.windows(n).map(|g| ngram_index(g, dim)));
    }
    hits.sort_unstable();
    let mut indices = Vec::new();
    let mut values: Vec<f64> = Vec::new();
    for idx in hits {
        if indices.last() == Some(&idx) {
            *values.last_mut().unwrap() += 1.0;
        } else {
            indices.push(idx);
            values.push(1.0);
        }
    }
    let mut v = SparseVec {
        dim,
        indices,
        values,
    };
    let norm = v.norm();
    if norm > 0.0 {
        v.scale(1.0 / norm);
    }
    v
}

/// Frozen sentence embeddings keyed by review id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    dim: usize,
    rows: IndexMap<u64, Vec<f32>>,
    source_tag: String,
}

impl EmbeddingTable {
    pub fn new(dim: usize, source_tag: impl Into<String>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::validation("embedding dimension must be positive"));
        }
        Ok(EmbeddingTable {
            dim,
            rows: IndexMap::new(),
            source_tag: source_tag.into(),
        })
    }

    pub fn insert(&mut self, review_id: u64, row: Vec<f32>) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::Dimension {
                what: format!("embedding row {review_id}"),
                expected: self.dim,
                actual: row.len(),
            });
        }
        if let Some(pos) = row.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!(
                "embedding row {review_id} has a non-finite value at component {pos}"
            )));
        }
        if self.rows.insert(review_id, row).is_some() {
            return Err(Error::Data(format!("duplicate embedding row {review_id}")));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn source_tag(&self) -> &str {
        &self.source_tag
    }

    pub fn get(&self, review_id: u64) -> Option<&[f32]> {
        self.rows.get(&review_id).map(Vec::as_slice)
    }

    /// Rows in insertion (file) order.
    pub fn rows(&self) -> impl Iterator<Item = (u64, &[f32])> {
        self.rows.iter().map(|(&id, row)| (id, row.as_slice()))
    }
}

/// Sidecar written next to a WSEB file.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EmbeddingSidecar {
    pub source_tag: String,
    pub dim: usize,
    pub count: u64,
    pub corpus_checksum: Option<String>,
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

pub fn write_embedding_file(
    table: &EmbeddingTable,
    path: &Path,
    corpus_checksum: Option<String>,
) -> Result<()> {
    let io_err = |e| Error::io(format!("writing {}", path.display()), e);
    let file = File::create(path).map_err(io_err)?;
    let mut w = BufWriter::new(file);
    w.write_all(WSEB_MAGIC).map_err(io_err)?;
    w.write_all(&WSEB_VERSION.to_le_bytes()).map_err(io_err)?;
    w.write_all(&(table.dim as u32).to_le_bytes())
        .map_err(io_err)?;
    w.write_all(&(table.len() as u64).to_le_bytes())
        .map_err(io_err)?;
    for (id, row) in table.rows() {
        w.write_all(&id.to_le_bytes()).map_err(io_err)?;
        for v in row {
            w.write_all(&v.to_le_bytes()).map_err(io_err)?;
        }
    }
    w.flush().map_err(io_err)?;

    let sidecar = EmbeddingSidecar {
        source_tag: table.source_tag.clone(),
        dim: table.dim,
        count: table.len() as u64,
        corpus_checksum,
    };
    let spath = sidecar_path(path);
    std::fs::write(&spath, serde_json::to_string_pretty(&sidecar)? + "\n")
        .map_err(|e| Error::io(format!("writing {}", spath.display()), e))
}

fn read_exact_or_truncated(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf).map_err(|e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            Error::Truncated(format!("embedding file ended inside {what}"))
        } else {
            Error::io("reading embedding file", e)
        }
    })
}

/// Load and fully validate a WSEB file. The source tag comes from the sidecar
/// when present, otherwise from the file stem.
pub fn load_embedding_file(path: &Path) -> Result<EmbeddingTable> {
    audit::record_read(path);
    let file = File::open(path).map_err(|e| Error::io(format!("opening {}", path.display()), e))?;
    let mut r = BufReader::new(file);

    let mut head = [0u8; 20];
    read_exact_or_truncated(&mut r, &mut head, "the header")?;
    if &head[0..4] != WSEB_MAGIC {
        return Err(Error::Format(format!(
            "{}: bad magic bytes",
            path.display()
        )));
    }
    let version = u32::from_le_bytes(head[4..8].try_into().unwrap());
    if version != WSEB_VERSION {
        return Err(Error::Format(format!(
            "{}: unsupported WSEB version {version}",
            path.display()
        )));
    }
    let dim = u32::from_le_bytes(head[8..12].try_into().unwrap()) as usize;
    let count = u64::from_le_bytes(head[12..20].try_into().unwrap());

    let spath = sidecar_path(path);
    let source_tag = match std::fs::read_to_string(&spath) {
        Ok(text) => {
            let sidecar: EmbeddingSidecar = serde_json::from_str(&text)?;
            if sidecar.dim != dim || sidecar.count != count {
                return Err(Error::Format(format!(
                    "{}: sidecar declares dim {} count {}, file has dim {dim} count {count}",
                    spath.display(),
                    sidecar.dim,
                    sidecar.count
                )));
            }
            sidecar.source_tag
        }
        Err(_) => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
    };

    let mut table = EmbeddingTable::new(dim, source_tag)?;
    let mut record = vec![0u8; 8 + 4 * dim];
    for n in 0..count {
        read_exact_or_truncated(
            &mut r,
            &mut record,
            &format!("record {n} of {count} (count mismatch)"),
        )?;
        let id = u64::from_le_bytes(record[0..8].try_into().unwrap());
        let row: Vec<f32> = record[8..]
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        table.insert(id, row)?;
    }
    let mut extra = [0u8; 1];
    if r.read(&mut extra)
        .map_err(|e| Error::io("reading embedding file", e))?
        != 0
    {
        return Err(Error::Format(format!(
            "{}: trailing bytes after {count} records",
            path.display()
        )));
    }
    Ok(table)
}

/// Serializable description of an encoder, stored in checkpoints.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EncoderSpec {
    HashedNgram {
        dim: usize,
        ngram_max: usize,
        hash: String,
    },
    FrozenEmbedding {
        dim: usize,
        source_tag: String,
        path: Option<PathBuf>,
    },
}

impl EncoderSpec {
    pub fn hashed(dim: usize, ngram_max: usize) -> Self {
        EncoderSpec::HashedNgram {
            dim,
            ngram_max,
            hash: FEATURE_HASH_VERSION.to_string(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            EncoderSpec::HashedNgram { dim, .. } | EncoderSpec::FrozenEmbedding { dim, .. } => *dim,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            EncoderSpec::HashedNgram {
                dim,
                ngram_max,
                hash,
            } => {
                if *dim == 0 || !dim.is_power_of_two() {
                    return Err(Error::validation(format!(
                        "hashed encoder dim {dim} must be a positive power of two"
                    )));
                }
                if !(1..=3).contains(ngram_max) {
                    return Err(Error::validation(format!(
                        "ngram_max {ngram_max} must be 1, 2 or 3"
                    )));
                }
                if hash != FEATURE_HASH_VERSION {
                    return Err(Error::validation(format!(
                        "feature hash {hash:?} is not supported (expected {FEATURE_HASH_VERSION:?})"
                    )));
                }
            }
            EncoderSpec::FrozenEmbedding { dim, .. } => {
                if *dim == 0 {
                    return Err(Error::validation("embedding dim must be positive"));
                }
            }
        }
        Ok(())
    }
}

/// Runtime encoder built from an [`EncoderSpec`].
#[derive(Debug, Clone)]
pub enum Encoder {
    Hashed {
        dim: usize,
        ngram_max: usize,
    },
    Frozen {
        table: Arc<EmbeddingTable>,
        path: Option<PathBuf>,
    },
}

impl Encoder {
    pub fn hashed(dim: usize, ngram_max: usize) -> Result<Self> {
        EncoderSpec::hashed(dim, ngram_max).validate()?;
        Ok(Encoder::Hashed { dim, ngram_max })
    }

    pub fn frozen(table: Arc<EmbeddingTable>, path: Option<PathBuf>) -> Self {
        Encoder::Frozen { table, path }
    }

    /// Build from a spec; frozen specs reload their table from `path`.
    pub fn from_spec(spec: &EncoderSpec) -> Result<Self> {
        spec.validate()?;
        match spec {
            EncoderSpec::HashedNgram { dim, ngram_max, .. } => Ok(Encoder::Hashed {
                dim: *dim,
                ngram_max: *ngram_max,
            }),
            EncoderSpec::FrozenEmbedding { dim, path, .. } => {
                let path = path.as_ref().ok_or_else(|| {
                    Error::validation("frozen embedding encoder needs an embedding file path")
                })?;
                let table = load_embedding_file(path)?;
                if table.dim() != *dim {
                    return Err(Error::Dimension {
                        what: format!("embedding file {}", path.display()),
                        expected: *dim,
                        actual: table.dim(),
                    });
                }
                Ok(Encoder::frozen(Arc::new(table), Some(path.clone())))
            }
        }
    }

    pub fn spec(&self) -> EncoderSpec {
        match self {
            Encoder::Hashed { dim, ngram_max } => EncoderSpec::hashed(*dim, *ngram_max),
            Encoder::Frozen { table, path } => EncoderSpec::FrozenEmbedding {
                dim: table.dim(),
                source_tag: table.source_tag().to_string(),
                path: path.clone(),
            },
        }
    }

    pub fn input_dim(&self) -> usize {
        match self {
            Encoder::Hashed { dim, .. } => *dim,
            Encoder::Frozen { table, .. } => table.dim(),
        }
    }

    pub fn encode(&self, example: &Example) -> Result<Features> {
        match self {
            Encoder::Hashed { dim, ngram_max } => Ok(Features::Sparse(encode_hashed(
                &preprocess(&example.text),
                *dim,
                *ngram_max,
            ))),
            Encoder::Frozen { table, .. } => table
                .get(example.review_id)
                .map(|row| Features::Dense(row.iter().map(|&v| f64::from(v)).collect()))
                .ok_or(Error::MissingEmbedding(example.review_id)),
        }
    }
}
