//! Experiment runner: evaluates the feedback/upsampling pipeline over a
//! generated dataset and emits one CSV per result family.
//!
//! - `fig4.csv`: capacity ratio (network / interpolation, same reports) per
//!   SNR and DS cluster. The baseline is always the interpolated variant of
//!   the same reports; capacity is C = (1/N_RB) sum_f log2(1 + rho |h_f^H
//!   w_f|^2) with unit-norm precoders.
//! - `fig5.csv`: mean normalized gain vs feedback overhead (complex
//!   coefficient count) for a Type II SB sweep and an eType II compression
//!   sweep.
//! - `fig6.csv`: gain/complexity operating points for random, threshold, and
//!   learned switches.

use crate::channel::{compute_pdp, DsLabel, Pdp};
use crate::codebook::{
    encode_etype2, encode_type2, overhead, BeamCodebook, EType2Variant, PrecoderReport, SbGrid,
    Type2Criterion,
};
use crate::error::{Result, SimError};
use crate::harness::dataset::{cluster_by_ds, load_dataset, LoadedDataset};
use crate::harness::metrics::{capacity, normalized_gain};
use crate::switch::{
    gain_cost, learned_switch_forward, load_switch, threshold_switch, SwitchMetric, C_ITP, C_SRP,
};
use crate::upsample::srpnet::{srpnet_forward, SrpnetParams};
use crate::upsample::{
    deterministic_upsample, interpolate_linear, RbPrecoders, SampledPrecoders,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ThresholdSpec {
    pub metric: SwitchMetric,
    /// Threshold in seconds.
    pub thres: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub dataset_dir: PathBuf,
    pub out_dir: PathBuf,
    pub snr_db: Vec<f64>,
    /// RBs per SB for the primary eType II configuration.
    pub n_rbpsb: usize,
    pub l: usize,
    pub m_v: usize,
    /// Compression ratio of the primary configuration.
    pub r: usize,
    /// eType II compression sweep (fig5).
    pub r_list: Vec<usize>,
    /// Type II SB-count sweep (fig5); each must divide N_RB.
    pub n3_list: Vec<usize>,
    pub oversampling: usize,
    /// Significant-bin threshold for PDP metrics.
    pub eta: f64,
    /// Upsampling network checkpoint; absent = deterministic core.
    pub srpnet_checkpoint: Option<PathBuf>,
    /// Random-switch probability grid.
    pub random_p: Vec<f64>,
    /// Threshold-switch operating points; empty = a default max-excess sweep.
    pub thresholds: Vec<ThresholdSpec>,
    /// Learned-switch checkpoints.
    pub switch_checkpoints: Vec<PathBuf>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            dataset_dir: PathBuf::from("dataset"),
            out_dir: PathBuf::from("eval"),
            snr_db: vec![-10.0, -5.0, 0.0, 5.0, 10.0],
            n_rbpsb: 4,
            l: 4,
            m_v: 12,
            r: 2,
            r_list: vec![1, 2, 4, 8],
            n3_list: vec![3, 6, 12, 24],
            oversampling: 4,
            eta: 0.1,
            srpnet_checkpoint: None,
            random_p: (0..=10).map(|k| k as f64 / 10.0).collect(),
            thresholds: Vec::new(),
            switch_checkpoints: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig4Row {
    pub snr_db: f64,
    pub cluster: &'static str,
    pub scheme: String,
    /// None when the interpolation baseline has zero capacity on every
    /// channel of the cluster.
    pub capacity_ratio: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig5Row {
    pub overhead: usize,
    pub scheme: String,
    pub cluster: &'static str,
    pub ng: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Fig6Row {
    pub switch: String,
    pub mean_complexity: f64,
    pub mean_ng: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct EvalReport {
    pub fig4: Vec<Fig4Row>,
    pub fig5: Vec<Fig5Row>,
    pub fig6: Vec<Fig6Row>,
    /// Documents the ratio baseline for fig4.
    pub baseline: String,
}

/// Network-or-core upsampling for one report.
fn upsample_net(
    sp: &SampledPrecoders,
    ul_pdp: &Pdp,
    params: Option<&SrpnetParams>,
) -> Result<RbPrecoders> {
    match params {
        Some(p) => srpnet_forward(sp, ul_pdp, p),
        None => deterministic_upsample(sp, ul_pdp),
    }
}

struct PerChannel {
    cluster: DsLabel,
    ul_pdp: Pdp,
    ng_itp: f64,
    ng_srp: f64,
    cap_itp: Vec<f64>,
    cap_srp: Vec<f64>,
    /// (scheme, overhead, ng) rows of the fig5 sweeps.
    sweep: Vec<(String, usize, f64)>,
}

fn eval_channel(
    cfg: &EvalConfig,
    ds: &LoadedDataset,
    cb: &BeamCodebook,
    grid: &SbGrid,
    params: Option<&SrpnetParams>,
    ue: usize,
) -> Result<PerChannel> {
    let dl = &ds.dl[ue];
    let ul = &ds.ul[ue];
    let bw = ds.meta.cfg.bin_width();
    let ul_pdp = compute_pdp(ul, bw);
    let cluster = cluster_by_ds(dl, bw)?;

    let report = encode_etype2(
        dl,
        cb,
        grid,
        cfg.l,
        cfg.m_v,
        cfg.r,
        EType2Variant::Modified,
        0,
    )?;
    let sp = SampledPrecoders::from_etype2(&report, cb)?;
    let w_itp = interpolate_linear(&sp)?;
    let w_srp = upsample_net(&sp, &ul_pdp, params)?;
    let (_, ng_itp) = normalized_gain(&w_itp.values, dl)?;
    let (_, ng_srp) = normalized_gain(&w_srp.values, dl)?;
    let cap_itp = cfg
        .snr_db
        .iter()
        .map(|&s| capacity(&w_itp.values, dl, s))
        .collect::<Result<Vec<_>>>()?;
    let cap_srp = cfg
        .snr_db
        .iter()
        .map(|&s| capacity(&w_srp.values, dl, s))
        .collect::<Result<Vec<_>>>()?;

    let mut sweep = Vec::new();
    for &n3 in &cfg.n3_list {
        if n3 == 0 || ds.meta.cfg.n_rb % n3 != 0 {
            return Err(SimError::Config(format!(
                "N_3={n3} must divide N_RB={}",
                ds.meta.cfg.n_rb
            )));
        }
        let g3 = SbGrid::new(ds.meta.cfg.n_rb, ds.meta.cfg.n_rb / n3)?;
        let rep = encode_type2(dl, cb, &g3, cfg.l, Type2Criterion::Modified)?;
        let oh = overhead(&PrecoderReport::TypeII(rep.clone()), cb.n_beams()).complex_coeffs;
        let sb = crate::codebook::type2_precoders(&rep, cb);
        let sp3 = SampledPrecoders::from_sb_precoders(sb, &g3)?;
        let w = interpolate_linear(&sp3)?;
        let (_, ng) = normalized_gain(&w.values, dl)?;
        sweep.push(("type2_interp".to_string(), oh, ng));
    }
    for &r in &cfg.r_list {
        let rep = encode_etype2(dl, cb, grid, cfg.l, cfg.m_v, r, EType2Variant::Modified, 0)?;
        let oh = overhead(&PrecoderReport::ETypeII(rep.clone()), cb.n_beams()).complex_coeffs;
        let spr = SampledPrecoders::from_etype2(&rep, cb)?;
        let wi = interpolate_linear(&spr)?;
        let (_, ngi) = normalized_gain(&wi.values, dl)?;
        sweep.push(("etype2_interp".to_string(), oh, ngi));
        let wn = upsample_net(&spr, &ul_pdp, params)?;
        let (_, ngn) = normalized_gain(&wn.values, dl)?;
        sweep.push(("etype2_srpnet".to_string(), oh, ngn));
    }

    Ok(PerChannel {
        cluster,
        ul_pdp,
        ng_itp,
        ng_srp,
        cap_itp,
        cap_srp,
        sweep,
    })
}

const CLUSTERS: [DsLabel; 3] = [DsLabel::Low, DsLabel::Medium, DsLabel::High];

fn default_thresholds(n_rb: usize, bin_width: f64) -> Vec<ThresholdSpec> {
    let span = n_rb as f64 * bin_width;
    [0.0, 1.0 / 16.0, 1.0 / 8.0, 1.0 / 4.0, 1.0 / 2.0, 1.0]
        .iter()
        .map(|&f| ThresholdSpec {
            metric: SwitchMetric::MaxExcess,
            thres: f * span,
        })
        .collect()
}

/// Run the full evaluation. Parallel over channels; results are reduced in
/// channel-index order, so output is deterministic for a fixed dataset.
pub fn run_experiment(cfg: &EvalConfig) -> Result<EvalReport> {
    let ds = load_dataset(&cfg.dataset_dir)?;
    let cb = BeamCodebook::build(ds.meta.cfg.n_ant, cfg.oversampling)?;
    let grid = SbGrid::new(ds.meta.cfg.n_rb, cfg.n_rbpsb)?;
    let params = match &cfg.srpnet_checkpoint {
        Some(p) => Some(SrpnetParams::from_blocks(
            crate::numerics::load_checkpoint(p)?.0,
        )?),
        None => None,
    };
    let per: Vec<PerChannel> = (0..ds.meta.n_ue)
        .into_par_iter()
        .map(|ue| eval_channel(cfg, &ds, &cb, &grid, params.as_ref(), ue))
        .collect::<Result<_>>()?;

    // fig4: mean per-channel capacity ratio per (snr, cluster).
    let mut fig4 = Vec::new();
    for (si, &snr) in cfg.snr_db.iter().enumerate() {
        for cl in CLUSTERS {
            let mut acc = 0.0;
            let mut n = 0usize;
            for c in per.iter().filter(|c| c.cluster == cl) {
                if c.cap_itp[si] > 0.0 {
                    acc += c.cap_srp[si] / c.cap_itp[si];
                    n += 1;
                }
            }
            fig4.push(Fig4Row {
                snr_db: snr,
                cluster: cl.name(),
                scheme: "srpnet_over_interp".to_string(),
                capacity_ratio: (n > 0).then(|| acc / n as f64),
            });
        }
    }

    // fig5: mean NG per (scheme, overhead, cluster).
    let mut fig5 = Vec::new();
    if let Some(first) = per.first() {
        for (key_idx, (scheme, oh, _)) in first.sweep.iter().enumerate() {
            for cl in CLUSTERS {
                let vals: Vec<f64> = per
                    .iter()
                    .filter(|c| c.cluster == cl)
                    .map(|c| c.sweep[key_idx].2)
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                fig5.push(Fig5Row {
                    overhead: *oh,
                    scheme: scheme.clone(),
                    cluster: cl.name(),
                    ng: vals.iter().sum::<f64>() / vals.len() as f64,
                });
            }
        }
    }

    // fig6: switch operating points over the whole dataset.
    let n = per.len() as f64;
    let mean_ng_itp = per.iter().map(|c| c.ng_itp).sum::<f64>() / n;
    let mean_ng_srp = per.iter().map(|c| c.ng_srp).sum::<f64>() / n;
    let mut fig6 = Vec::new();
    for &p in &cfg.random_p {
        // Expected value of the Bernoulli(p) switch: exactly the line segment
        // between the all-interpolation and all-network endpoints.
        fig6.push(Fig6Row {
            switch: format!("random_p{p:.2}"),
            mean_complexity: p * C_SRP + (1.0 - p) * C_ITP,
            mean_ng: p * mean_ng_srp + (1.0 - p) * mean_ng_itp,
        });
    }
    let thresholds = if cfg.thresholds.is_empty() {
        default_thresholds(ds.meta.cfg.n_rb, ds.meta.cfg.bin_width())
    } else {
        cfg.thresholds.clone()
    };
    for t in &thresholds {
        let mut c_acc = 0.0;
        let mut g_acc = 0.0;
        for c in &per {
            let d = threshold_switch(&c.ul_pdp, t.metric, t.thres, cfg.eta)?;
            c_acc += d.complexity_charged;
            g_acc += if d.s { c.ng_srp } else { c.ng_itp };
        }
        fig6.push(Fig6Row {
            switch: format!("threshold_{:?}_{:.3e}", t.metric, t.thres),
            mean_complexity: c_acc / n,
            mean_ng: g_acc / n,
        });
    }
    for path in &cfg.switch_checkpoints {
        let sw = load_switch(path)?;
        let mut c_acc = 0.0;
        let mut g_acc = 0.0;
        for c in &per {
            let d = learned_switch_forward(&c.ul_pdp, &sw)?;
            let s = if d.s { 1.0 } else { 0.0 };
            let (g, cost) = gain_cost(s, c.ng_srp, c.ng_itp);
            c_acc += cost;
            g_acc += g;
        }
        fig6.push(Fig6Row {
            switch: format!("learned_lambda{:e}", sw.lambda),
            mean_complexity: c_acc / n,
            mean_ng: g_acc / n,
        });
    }

    let report = EvalReport {
        fig4,
        fig5,
        fig6,
        baseline: "capacity ratio baseline: linear interpolation of the same reports".to_string(),
    };
    write_artifacts(&report, &cfg.out_dir)?;
    Ok(report)
}

fn write_file(path: &Path, content: &str) -> Result<()> {
    std::fs::write(path, content).map_err(|e| SimError::io(path.display().to_string(), e))
}

fn write_artifacts(report: &EvalReport, out_dir: &Path) -> Result<()> {
    std::fs::create_dir_all(out_dir).map_err(|e| SimError::io(out_dir.display().to_string(), e))?;
    let mut f4 = String::from("snr_db,cluster,scheme,capacity_ratio\n");
    for r in &report.fig4 {
        let ratio = r
            .capacity_ratio
            .map(|v| v.to_string())
            .unwrap_or_else(|| "undefined".to_string());
        f4.push_str(&format!("{},{},{},{}\n", r.snr_db, r.cluster, r.scheme, ratio));
    }
    write_file(&out_dir.join("fig4.csv"), &f4)?;
    let mut f5 = String::from("overhead,scheme,cluster,ng\n");
    for r in &report.fig5 {
        f5.push_str(&format!("{},{},{},{}\n", r.overhead, r.scheme, r.cluster, r.ng));
    }
    write_file(&out_dir.join("fig5.csv"), &f5)?;
    let mut f6 = String::from("switch,mean_complexity,mean_ng\n");
    for r in &report.fig6 {
        f6.push_str(&format!("{},{},{}\n", r.switch, r.mean_complexity, r.mean_ng));
    }
    write_file(&out_dir.join("fig6.csv"), &f6)?;
    write_file(
        &out_dir.join("report.json"),
        &serde_json::to_string_pretty(report)?,
    )
}
