//! Weight checkpoints: JSON manifest + little-endian f64 blob in manifest order.

use crate::error::{Result, SimError};
use crate::numerics::tensor::Tensor;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct ManifestEntry {
    name: String,
    shape: Vec<usize>,
    /// Offset into the blob, in f64 elements.
    offset: u64,
    len: u64,
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    version: u32,
    blob: String,
    entries: Vec<ManifestEntry>,
    hyper: BTreeMap<String, serde_json::Value>,
}

/// Write `<path>.json` + `<path>.bin`. Round-trips bit-exactly.
pub fn save_checkpoint(
    path: &Path,
    params: &[(String, Tensor)],
    hyper: &BTreeMap<String, serde_json::Value>,
) -> Result<()> {
    let json_path = path.with_extension("json");
    let bin_path = path.with_extension("bin");
    let mut entries = Vec::new();
    let mut blob: Vec<u8> = Vec::new();
    let mut offset = 0u64;
    for (name, t) in params {
        entries.push(ManifestEntry {
            name: name.clone(),
            shape: t.shape.clone(),
            offset,
            len: t.numel() as u64,
        });
        for v in &t.data {
            blob.extend_from_slice(&v.to_le_bytes());
        }
        offset += t.numel() as u64;
    }
    let manifest = Manifest {
        version: CHECKPOINT_VERSION,
        blob: bin_path
            .file_name()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        entries,
        hyper: hyper.clone(),
    };
    fs::write(&json_path, serde_json::to_vec_pretty(&manifest)?)
        .map_err(|e| SimError::io(json_path.display().to_string(), e))?;
    fs::write(&bin_path, blob).map_err(|e| SimError::io(bin_path.display().to_string(), e))?;
    Ok(())
}

/// Load a checkpoint written by [`save_checkpoint`]; `path` may carry either
/// extension or none.
pub fn load_checkpoint(
    path: &Path,
) -> Result<(Vec<(String, Tensor)>, BTreeMap<String, serde_json::Value>)> {
    let json_path = path.with_extension("json");
    let raw = fs::read(&json_path).map_err(|e| SimError::io(json_path.display().to_string(), e))?;
    let manifest: Manifest = serde_json::from_slice(&raw)?;
    if manifest.version != CHECKPOINT_VERSION {
        return Err(SimError::Data(format!(
            "unsupported checkpoint version {} in {}",
            manifest.version,
            json_path.display()
        )));
    }
    let bin_path = json_path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&manifest.blob);
    let blob = fs::read(&bin_path).map_err(|e| SimError::io(bin_path.display().to_string(), e))?;
    let mut params = Vec::new();
    for e in &manifest.entries {
        let start = e.offset as usize * 8;
        let end = start + e.len as usize * 8;
        if end > blob.len() {
            return Err(SimError::Data(format!(
                "checkpoint blob truncated: entry `{}` needs bytes {}..{}, blob has {}",
                e.name,
                start,
                end,
                blob.len()
            )));
        }
        let data: Vec<f64> = blob[start..end]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        params.push((e.name.clone(), Tensor::from_vec(&e.shape, data)?));
    }
    Ok((params, manifest.hyper))
}
