//! Synthetic FDD multipath channel generator.
//!
//! A tapped-delay-line stand-in for a geometric channel simulator: each UE
//! draws a set of paths (delay, angle, independent DL/UL complex gains) and
//! the CSI matrices follow from a half-wavelength ULA steering model. DL and
//! UL share path delays and angles (path reciprocity) while fading phases are
//! independent.

use crate::dsp::{self, CMat};
use crate::error::{Result, SimError};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

pub const NS: f64 = 1e-9;

/// RMS delay-spread scenario bins: low < 500 ns, medium 500..1000 ns,
/// high >= 1000 ns. `Mixed` draws one of the three per channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DsScenario {
    Low,
    Medium,
    High,
    Mixed,
}

/// Cluster label by realized RMS DS (no `Mixed`).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DsLabel {
    Low,
    Medium,
    High,
}

impl DsLabel {
    pub fn from_rms_ds(ds_seconds: f64) -> DsLabel {
        // Boundaries inclusive upward: 500 ns -> medium, 1000 ns -> high.
        if ds_seconds < 500.0 * NS {
            DsLabel::Low
        } else if ds_seconds < 1000.0 * NS {
            DsLabel::Medium
        } else {
            DsLabel::High
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DsLabel::Low => "low",
            DsLabel::Medium => "medium",
            DsLabel::High => "high",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimConfig {
    /// Antenna count at the gNB ULA.
    pub n_ant: usize,
    /// RB count in the bandwidth part.
    pub n_rb: usize,
    /// Hz per RB.
    pub rb_bandwidth: f64,
    pub dl_carrier: f64,
    /// UL carrier; the UL grid reuses `n_rb`/`rb_bandwidth`, so UL and DL
    /// delay bins are aligned. The carrier separation is an assumption (the
    /// duplex spacing is an arbitrary but representative FDD choice).
    pub ul_carrier: f64,
    /// Inclusive path-count interval.
    pub n_paths_range: (usize, usize),
    pub ds_scenario: DsScenario,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        // Desk-scale defaults; 128 antennas / 96 RBs remain selectable.
        SimConfig {
            n_ant: 16,
            n_rb: 48,
            rb_bandwidth: 200e3,
            dl_carrier: 2.11e9,
            ul_carrier: 1.92e9,
            n_paths_range: (3, 10),
            ds_scenario: DsScenario::Mixed,
            seed: 0,
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_ant < 2 {
            return Err(SimError::Config(format!("n_ant must be >= 2, got {}", self.n_ant)));
        }
        if self.n_rb < 2 {
            return Err(SimError::Config(format!("n_rb must be >= 2, got {}", self.n_rb)));
        }
        if self.rb_bandwidth <= 0.0 || self.dl_carrier <= 0.0 || self.ul_carrier <= 0.0 {
            return Err(SimError::Config(
                "rb_bandwidth and carriers must be positive".into(),
            ));
        }
        if self.n_paths_range.0 == 0 || self.n_paths_range.0 > self.n_paths_range.1 {
            return Err(SimError::Config(format!(
                "invalid n_paths_range {:?}",
                self.n_paths_range
            )));
        }
        Ok(())
    }

    /// Delay-bin width of the PDP grid: 1 / (n_rb * rb_bandwidth).
    pub fn bin_width(&self) -> f64 {
        1.0 / (self.n_rb as f64 * self.rb_bandwidth)
    }

    /// Unambiguous delay range of the grid: n_rb * bin_width = 1 / rb_bandwidth.
    pub fn max_grid_delay(&self) -> f64 {
        1.0 / self.rb_bandwidth
    }
}

/// Multipath geometry shared by UL and DL, with independent complex gains.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PathSet {
    /// Seconds, non-negative, ascending.
    pub delays: Vec<f64>,
    /// Radians.
    pub angles: Vec<f64>,
    pub dl_gains: Vec<Complex64>,
    pub ul_gains: Vec<Complex64>,
}

impl PathSet {
    pub fn len(&self) -> usize {
        self.delays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.delays.is_empty()
    }

    /// Power-weighted RMS delay spread from the DL gains.
    pub fn rms_ds_dl(&self) -> f64 {
        rms_ds(&self.delays, &self.dl_gains)
    }

    pub fn ds_label(&self) -> DsLabel {
        DsLabel::from_rms_ds(self.rms_ds_dl())
    }
}

fn rms_ds(delays: &[f64], gains: &[Complex64]) -> f64 {
    let ptot: f64 = gains.iter().map(|g| g.norm_sqr()).sum();
    if ptot == 0.0 {
        return 0.0;
    }
    let mean: f64 = delays
        .iter()
        .zip(gains)
        .map(|(t, g)| t * g.norm_sqr())
        .sum::<f64>()
        / ptot;
    let m2: f64 = delays
        .iter()
        .zip(gains)
        .map(|(t, g)| t * t * g.norm_sqr())
        .sum::<f64>()
        / ptot;
    (m2 - mean * mean).max(0.0).sqrt()
}

/// One UE's reciprocal-geometry channel pair: rows are RBs, columns antennas.
#[derive(Debug, Clone)]
pub struct ChannelPair {
    pub dl: CMat,
    pub ul: CMat,
    pub paths: PathSet,
    pub ue_id: u64,
}

/// Delay-domain power profile over `n_rb` bins.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Pdp {
    pub p: Vec<f64>,
    /// Seconds per bin.
    pub bin_width: f64,
}

impl Pdp {
    pub fn total(&self) -> f64 {
        self.p.iter().sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PdpMetrics {
    pub max_excess_delay: f64,
    pub mean_excess_delay: f64,
    pub rms_ds: f64,
}

const MAX_REJECTION_TRIES: usize = 1000;

/// Draw a path set whose realized DL RMS DS lands in the configured scenario
/// bin (rejection sampling, bounded retries).
pub fn sample_paths(cfg: &SimConfig, rng: &mut impl Rng) -> Result<PathSet> {
    cfg.validate()?;
    let target = match cfg.ds_scenario {
        DsScenario::Low => DsLabel::Low,
        DsScenario::Medium => DsLabel::Medium,
        DsScenario::High => DsLabel::High,
        DsScenario::Mixed => match rng.gen_range(0..3) {
            0 => DsLabel::Low,
            1 => DsLabel::Medium,
            _ => DsLabel::High,
        },
    };
    // Per-scenario delay window and exponential power-decay constant; the
    // window stays inside the unambiguous grid range to avoid delay wrap.
    // Low keeps its energy within a couple of delay bins of the default grid,
    // so subsampled frequency tracks rotate slowly between samples.
    let grid_max = 0.9 * cfg.max_grid_delay();
    let (tau_max, decay) = match target {
        DsLabel::Low => ((400.0 * NS).min(grid_max), 80.0 * NS),
        DsLabel::Medium => ((3000.0 * NS).min(grid_max), 900.0 * NS),
        DsLabel::High => (grid_max, 2000.0 * NS),
    };
    for _ in 0..MAX_REJECTION_TRIES {
        let n_paths = rng.gen_range(cfg.n_paths_range.0..=cfg.n_paths_range.1);
        let mut delays: Vec<f64> = (0..n_paths)
            .map(|i| if i == 0 { 0.0 } else { rng.gen_range(0.0..tau_max) })
            .collect();
        delays.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut dl_gains = Vec::with_capacity(n_paths);
        let mut ul_gains = Vec::with_capacity(n_paths);
        for &tau in &delays {
            let sigma = (-tau / decay).exp().sqrt();
            dl_gains.push(complex_gaussian(rng, sigma));
            ul_gains.push(complex_gaussian(rng, sigma));
        }
        let angles: Vec<f64> = (0..n_paths)
            .map(|_| rng.gen_range(-PI / 2.0..PI / 2.0))
            .collect();
        let ps = PathSet {
            delays,
            angles,
            dl_gains,
            ul_gains,
        };
        if ps.ds_label() == target {
            return Ok(ps);
        }
    }
    Err(SimError::Config(format!(
        "scenario unreachable with current n_paths_range {:?} after {} tries",
        cfg.n_paths_range, MAX_REJECTION_TRIES
    )))
}

fn complex_gaussian(rng: &mut impl Rng, sigma: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * (sigma / 2f64.sqrt())
}

/// Tapped-delay-line synthesis: h_f = sum_p gain_p a(theta_p) exp(-j 2π f_f tau_p)
/// with a half-wavelength ULA steering vector and f_f the RB-f center
/// frequency on the respective carrier.
pub fn paths_to_csi(paths: &PathSet, cfg: &SimConfig, ue_id: u64) -> ChannelPair {
    let synth = |gains: &[Complex64], carrier: f64| -> CMat {
        let mut m = CMat::zeros(cfg.n_rb, cfg.n_ant);
        for (p, &tau) in paths.delays.iter().enumerate() {
            let steer_phase = PI * paths.angles[p].sin();
            for f in 0..cfg.n_rb {
                let freq = carrier + f as f64 * cfg.rb_bandwidth;
                let base = gains[p] * Complex64::from_polar(1.0, -2.0 * PI * freq * tau);
                for a in 0..cfg.n_ant {
                    let v = base * Complex64::from_polar(1.0, steer_phase * a as f64);
                    m.data[f * cfg.n_ant + a] += v;
                }
            }
        }
        m
    };
    ChannelPair {
        dl: synth(&paths.dl_gains, cfg.dl_carrier),
        ul: synth(&paths.ul_gains, cfg.ul_carrier),
        paths: paths.clone(),
        ue_id,
    }
}

/// RB-level PDP: antenna-averaged squared magnitude of the unitary IDFT of
/// each antenna's frequency response. Parseval: sum(p) = |csi|_F^2 / N_a.
pub fn compute_pdp(csi: &CMat, bin_width: f64) -> Pdp {
    let n_rb = csi.rows;
    let n_ant = csi.cols;
    let mut p = vec![0.0; n_rb];
    for a in 0..n_ant {
        let col = csi.col(a);
        let delay = dsp::idft(&col);
        for (t, z) in delay.iter().enumerate() {
            p[t] += z.norm_sqr();
        }
    }
    for v in &mut p {
        *v /= n_ant as f64;
    }
    Pdp { p, bin_width }
}

/// Max/mean excess delay and RMS DS of a PDP. `eta` is the relative threshold
/// defining "significant" bins for the max excess delay.
pub fn pdp_metrics(pdp: &Pdp, eta: f64) -> Result<PdpMetrics> {
    if !(0.0..1.0).contains(&eta) || eta == 0.0 {
        return Err(SimError::Config(format!("eta must be in (0,1), got {eta}")));
    }
    let total = pdp.total();
    if total <= 0.0 {
        return Err(SimError::Numerical("pdp_metrics on zero-energy PDP".into()));
    }
    let peak = pdp.p.iter().cloned().fold(0.0, f64::max);
    let significant: Vec<usize> = pdp
        .p
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= eta * peak)
        .map(|(t, _)| t)
        .collect();
    let first = significant[0];
    let max_excess = (significant[significant.len() - 1] - first) as f64 * pdp.bin_width;
    let mean_bins: f64 = pdp
        .p
        .iter()
        .enumerate()
        .map(|(t, v)| t as f64 * v)
        .sum::<f64>()
        / total;
    let m2: f64 = pdp
        .p
        .iter()
        .enumerate()
        .map(|(t, v)| (t * t) as f64 * v)
        .sum::<f64>()
        / total;
    // Excess delays are measured from the first significant arrival, so a
    // single-tap PDP scores zero on all three metrics.
    Ok(PdpMetrics {
        max_excess_delay: max_excess,
        mean_excess_delay: (mean_bins - first as f64) * pdp.bin_width,
        rms_ds: (m2 - mean_bins * mean_bins).max(0.0).sqrt() * pdp.bin_width,
    })
}

/// Significant-bin support of a PDP at relative threshold `eta`.
pub fn significant_bins(pdp: &Pdp, eta: f64) -> Vec<usize> {
    let peak = pdp.p.iter().cloned().fold(0.0, f64::max);
    pdp.p
        .iter()
        .enumerate()
        .filter(|(_, &v)| v >= eta * peak)
        .map(|(t, _)| t)
        .collect()
}
