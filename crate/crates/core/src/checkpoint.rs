//! Model checkpoint files.
//!
//! ```text
//! b"XFCK" | u32 version (= 1) | u32 header_len | header JSON
//! param_count x f64 (little-endian, ModelParams::flatten order)
//! ```
//!
//! The header records the architecture, encoder spec, seed and stage plus a
//! SHA-256 of the parameter block.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::featurize::EncoderSpec;
use crate::model::{Architecture, ModelParams};
use crate::{audit, Error, Result};

const MAGIC: &[u8; 4] = b"XFCK";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub architecture: Architecture,
    pub encoder: EncoderSpec,
    pub seed: u64,
    /// `pretrain` or `train`.
    pub stage: String,
    #[serde(default)]
    pub label: Option<String>,
    pub param_count: usize,
    pub checksum: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    pub header: CheckpointHeader,
    pub params: ModelParams,
}

fn param_block(params: &ModelParams) -> Vec<u8> {
    params
        .flatten()
        .iter()
        .flat_map(|v| v.to_le_bytes())
        .collect()
}

pub fn save_checkpoint(
    path: &Path,
    params: &ModelParams,
    encoder: EncoderSpec,
    seed: u64,
    stage: &str,
    label: Option<String>,
) -> Result<CheckpointHeader> {
    if encoder.dim() != params.architecture().input_dim {
        return Err(Error::Dimension {
            what: "checkpoint encoder".into(),
            expected: params.architecture().input_dim,
            actual: encoder.dim(),
        });
    }
    let block = param_block(params);
    let header = CheckpointHeader {
        architecture: params.architecture().clone(),
        encoder,
        seed,
        stage: stage.to_string(),
        label,
        param_count: params.num_params(),
        checksum: hex::encode(Sha256::digest(&block)),
    };
    let json = serde_json::to_vec(&header)?;
    let mut bytes = Vec::with_capacity(12 + json.len() + block.len());
    bytes.extend_from_slice(MAGIC);
    bytes.extend_from_slice(&VERSION.to_le_bytes());
    bytes.extend_from_slice(&(json.len() as u32).to_le_bytes());
    bytes.extend_from_slice(&json);
    bytes.extend_from_slice(&block);
    std::fs::write(path, bytes).map_err(|e| Error::io(format!("writing {}", path.display()), e))?;
    Ok(header)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint> {
    audit::record_read(path);
    let bytes =
        std::fs::read(path).map_err(|e| Error::io(format!("reading {}", path.display()), e))?;
    let fail = |msg: &str| Error::Format(format!("{}: {msg}", path.display()));
    if bytes.len() < 12 || &bytes[0..4] != MAGIC {
        return Err(fail("not a checkpoint file"));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().unwrap());
    if version != VERSION {
        return Err(fail(&format!("unsupported checkpoint version {version}")));
    }
    let hlen = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
    let body = bytes
        .get(12..12 + hlen)
        .ok_or_else(|| fail("truncated header"))?;
    let header: CheckpointHeader = serde_json::from_slice(body)?;
    let block = &bytes[12 + hlen..];
    if block.len() != header.param_count * 8 {
        return Err(Error::Truncated(format!(
            "{}: expected {} parameters, found {} bytes",
            path.display(),
            header.param_count,
            block.len()
        )));
    }
    if hex::encode(Sha256::digest(block)) != header.checksum {
        return Err(Error::Data(format!(
            "{}: checksum mismatch",
            path.display()
        )));
    }
    let flat: Vec<f64> = block
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
        .collect();
    let params = ModelParams::from_flat(&header.architecture, &flat)?;
    Ok(Checkpoint { header, params })
}
