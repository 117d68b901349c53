//! Dataset generation and on-disk persistence.
//!
//! A dataset directory holds `meta.json` plus `dl.c64` / `ul.c64`:
//! little-endian float32 interleaved (re, im), row-major [ue][rb][antenna].
//! Each UE draws from its own ChaCha sub-stream, so output is byte-identical
//! regardless of thread count.

use crate::channel::{paths_to_csi, sample_paths, ChannelPair, DsLabel, SimConfig};
use crate::dsp::CMat;
use crate::error::{Result, SimError};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

pub const DATASET_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub version: u32,
    pub cfg: SimConfig,
    pub n_ue: usize,
    pub seed: u64,
    /// Realized DS histogram keyed by cluster name.
    pub ds_counts: BTreeMap<String, usize>,
}

/// Draw one channel pair from the UE's private sub-stream.
pub fn draw_channel(cfg: &SimConfig, seed: u64, ue: u64) -> Result<ChannelPair> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(ue.wrapping_add(1));
    let paths = sample_paths(cfg, &mut rng)?;
    Ok(paths_to_csi(&paths, cfg, ue))
}

fn write_c64(path: &Path, mats: &[&CMat]) -> Result<()> {
    let mut buf: Vec<u8> =
        Vec::with_capacity(mats.iter().map(|m| m.data.len() * 8).sum());
    for m in mats {
        for z in &m.data {
            buf.extend_from_slice(&(z.re as f32).to_le_bytes());
            buf.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
    }
    fs::write(path, buf).map_err(|e| SimError::io(path.display().to_string(), e))
}

/// Generate `n_ue` independent channels and persist them under `dir`.
/// Parallel over UEs; output bytes depend only on (cfg, seed, n_ue).
pub fn generate_dataset(cfg: &SimConfig, n_ue: usize, seed: u64, dir: &Path) -> Result<DatasetMeta> {
    cfg.validate()?;
    if n_ue == 0 {
        return Err(SimError::Config("dataset needs n_ue >= 1".into()));
    }
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir.display().to_string(), e))?;
    let pairs: Vec<ChannelPair> = (0..n_ue as u64)
        .into_par_iter()
        .map(|ue| draw_channel(cfg, seed, ue))
        .collect::<Result<_>>()?;
    let mut ds_counts: BTreeMap<String, usize> = BTreeMap::new();
    for p in &pairs {
        *ds_counts
            .entry(p.paths.ds_label().name().to_string())
            .or_default() += 1;
    }
    write_c64(
        &dir.join("dl.c64"),
        &pairs.iter().map(|p| &p.dl).collect::<Vec<_>>(),
    )?;
    write_c64(
        &dir.join("ul.c64"),
        &pairs.iter().map(|p| &p.ul).collect::<Vec<_>>(),
    )?;
    let meta = DatasetMeta {
        version: DATASET_VERSION,
        cfg: cfg.clone(),
        n_ue,
        seed,
        ds_counts,
    };
    let meta_path = dir.join("meta.json");
    fs::write(&meta_path, serde_json::to_vec_pretty(&meta)?)
        .map_err(|e| SimError::io(meta_path.display().to_string(), e))?;
    Ok(meta)
}

#[derive(Debug, Clone)]
pub struct LoadedDataset {
    pub meta: DatasetMeta,
    pub dl: Vec<CMat>,
    pub ul: Vec<CMat>,
}

fn read_c64(path: &Path, n_ue: usize, n_rb: usize, n_ant: usize) -> Result<Vec<CMat>> {
    let bytes = fs::read(path).map_err(|e| SimError::io(path.display().to_string(), e))?;
    let want = n_ue * n_rb * n_ant * 8;
    if bytes.len() != want {
        return Err(SimError::Data(format!(
            "{}: expected {want} bytes for {n_ue}x{n_rb}x{n_ant} c64 samples, got {}",
            path.display(),
            bytes.len()
        )));
    }
    let mut out = Vec::with_capacity(n_ue);
    let per_ue = n_rb * n_ant * 8;
    for ue in 0..n_ue {
        let chunk = &bytes[ue * per_ue..(ue + 1) * per_ue];
        let data: Vec<Complex64> = chunk
            .chunks_exact(8)
            .map(|b| {
                Complex64::new(
                    f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64,
                    f32::from_le_bytes([b[4], b[5], b[6], b[7]]) as f64,
                )
            })
            .collect();
        out.push(CMat {
            rows: n_rb,
            cols: n_ant,
            data,
        });
    }
    Ok(out)
}

pub fn load_dataset(dir: &Path) -> Result<LoadedDataset> {
    let meta_path = dir.join("meta.json");
    let raw = fs::read(&meta_path).map_err(|e| SimError::io(meta_path.display().to_string(), e))?;
    let meta: DatasetMeta = serde_json::from_slice(&raw)?;
    if meta.version != DATASET_VERSION {
        return Err(SimError::Data(format!(
            "unsupported dataset version {} in {}",
            meta.version,
            meta_path.display()
        )));
    }
    let (n_ue, n_rb, n_ant) = (meta.n_ue, meta.cfg.n_rb, meta.cfg.n_ant);
    let dl = read_c64(&dir.join("dl.c64"), n_ue, n_rb, n_ant)?;
    let ul = read_c64(&dir.join("ul.c64"), n_ue, n_rb, n_ant)?;
    Ok(LoadedDataset { meta, dl, ul })
}

/// Cluster label from the DL CSI via the PDP's RMS delay spread.
pub fn cluster_by_ds(dl: &CMat, bin_width: f64) -> Result<DsLabel> {
    let pdp = crate::channel::compute_pdp(dl, bin_width);
    let m = crate::channel::pdp_metrics(&pdp, 0.1)?;
    Ok(DsLabel::from_rms_ds(m.rms_ds))
}
