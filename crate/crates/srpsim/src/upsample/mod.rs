//! SB-to-RB precoder upsamplers.
//!
//! Three routes from a set of uniformly sampled frequency-domain precoders to
//! RB-level precoders:
//!
//! 1. linear interpolation of real/imag parts ([`interpolate_linear`]),
//! 2. the deterministic delay-domain core ([`deterministic_upsample`]):
//!    periodic delay-domain tiling of the sub-Nyquist samples
//!    ([`initial_upsample`]) followed by a reciprocity bandpass mask built
//!    from the UL PDP ([`reciprocity_bpf`], [`apply_bpf`]),
//! 3. the trainable network wrapping that core ([`srpnet`]).
//!
//! The tiling places every aliased delay tap at all T = N_RB/M candidate
//! replica positions; the mask keeps the true ones.

pub mod srpnet;

use crate::channel::Pdp;
use crate::codebook::{decode_etype2, BeamCodebook, ETypeIIReport, EType2Variant, SbGrid};
use crate::dsp::{self, CMat};
use crate::error::{Result, SimError};
use num_complex::Complex64;
use std::f64::consts::PI;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Antenna,
    Beam,
}

/// Uniformly sampled frequency-domain precoders: M samples with RB stride
/// T = n_rb / M, either antenna-domain vectors (D = N_a) or beam-combining
/// coefficient vectors (D = L, with the beam matrix attached).
#[derive(Debug, Clone)]
pub struct SampledPrecoders {
    /// M x D.
    pub values: CMat,
    pub stride: usize,
    pub offset: usize,
    pub domain: Domain,
    /// N_a x L when `domain == Beam`.
    pub beams: Option<CMat>,
    pub n_rb: usize,
}

impl SampledPrecoders {
    pub fn new(
        values: CMat,
        stride: usize,
        offset: usize,
        domain: Domain,
        beams: Option<CMat>,
        n_rb: usize,
    ) -> Result<Self> {
        if stride == 0 || values.rows * stride != n_rb || offset >= stride {
            return Err(SimError::Config(format!(
                "sampled precoders need M*stride == n_rb and offset < stride, got M={}, stride={stride}, offset={offset}, n_rb={n_rb}",
                values.rows
            )));
        }
        if domain == Domain::Beam {
            match &beams {
                Some(b) if b.cols == values.cols => {}
                _ => {
                    return Err(SimError::Config(
                        "beam-domain sampled precoders need an N_a x L beam matrix".into(),
                    ))
                }
            }
        }
        Ok(SampledPrecoders {
            values,
            stride,
            offset,
            domain,
            beams,
            n_rb,
        })
    }

    pub fn n_samples(&self) -> usize {
        self.values.rows
    }

    pub fn sample_positions(&self) -> Vec<usize> {
        (0..self.n_samples())
            .map(|k| k * self.stride + self.offset)
            .collect()
    }

    /// Antenna-domain sample matrix (M x N_a); expands beam coefficients.
    pub fn antenna_samples(&self) -> Result<CMat> {
        match self.domain {
            Domain::Antenna => Ok(self.values.clone()),
            Domain::Beam => {
                let b = self.beams.as_ref().unwrap();
                // row_k = B c_k  =>  (M x L) * B^T
                self.values.matmul(&b.transpose())
            }
        }
    }

    /// Per-SB precoders as samples: one sample per SB at the SB's first RB.
    pub fn from_sb_precoders(sb_precoders: CMat, grid: &SbGrid) -> Result<Self> {
        SampledPrecoders::new(
            sb_precoders,
            grid.n_rbpsb,
            0,
            Domain::Antenna,
            None,
            grid.n_rb,
        )
    }

    /// Decode an eType II report into sampled precoders. The modified variant
    /// yields M_v beam-coefficient samples on its RB sampling grid; the
    /// truncated variant yields per-SB samples.
    pub fn from_etype2(report: &ETypeIIReport, cb: &BeamCodebook) -> Result<Self> {
        let dec = decode_etype2(report)?;
        let b = cb.beam_matrix(&report.beam_indices);
        match report.variant {
            EType2Variant::Modified => SampledPrecoders::new(
                dec.freq.transpose(),
                report.n_rb / report.m_v,
                report.sample_offset,
                Domain::Beam,
                Some(b),
                report.n_rb,
            ),
            EType2Variant::Truncated => SampledPrecoders::new(
                dec.freq.transpose(),
                report.n_rb / report.n_sb,
                0,
                Domain::Beam,
                Some(b),
                report.n_rb,
            ),
        }
    }
}

/// Delay-domain bandpass mask over n_rb bins, entries in [0, 1].
#[derive(Debug, Clone)]
pub struct Bpf {
    pub mask: Vec<f64>,
}

/// RB-level precoders with unit-norm rows (N_RB x N_a).
#[derive(Debug, Clone)]
pub struct RbPrecoders {
    pub values: CMat,
}

impl RbPrecoders {
    /// Normalize each row to unit L2 norm; errors on a zero row.
    pub fn from_unnormalized(values: CMat) -> Result<Self> {
        let mut out = values;
        for f in 0..out.rows {
            let n = dsp::vec_norm(out.row(f));
            if n == 0.0 || !n.is_finite() {
                return Err(SimError::Numerical(format!(
                    "cannot normalize precoder row {f} (norm {n})"
                )));
            }
            for a in 0..out.cols {
                let v = out.get(f, a) / n;
                out.set(f, a, v);
            }
        }
        Ok(RbPrecoders { values: out })
    }
}

/// Linear interpolation of real and imaginary parts between sample positions,
/// endpoint hold outside, rows renormalized.
pub fn interpolate_linear(sp: &SampledPrecoders) -> Result<RbPrecoders> {
    if sp.n_samples() < 2 {
        return Err(SimError::Config(format!(
            "linear interpolation needs at least 2 samples, got {}",
            sp.n_samples()
        )));
    }
    let samples = sp.antenna_samples()?;
    let positions = sp.sample_positions();
    let n_ant = samples.cols;
    let mut out = CMat::zeros(sp.n_rb, n_ant);
    for f in 0..sp.n_rb {
        // Find the surrounding sample pair.
        let row: Vec<Complex64> = if f <= positions[0] {
            samples.row(0).to_vec()
        } else if f >= positions[positions.len() - 1] {
            samples.row(positions.len() - 1).to_vec()
        } else {
            let hi = positions.iter().position(|&p| p >= f).unwrap();
            let lo = hi - 1;
            let w = (f - positions[lo]) as f64 / (positions[hi] - positions[lo]) as f64;
            samples
                .row(lo)
                .iter()
                .zip(samples.row(hi))
                .map(|(a, b)| a * (1.0 - w) + b * w)
                .collect()
        };
        for a in 0..n_ant {
            out.set(f, a, row[a]);
        }
    }
    RbPrecoders::from_unnormalized(out)
}

/// Periodic tiling of the sampled precoders into the full delay grid:
/// e[d][tau] = sqrt(T) * x_s[tau mod M] (twiddled for a nonzero sampling
/// offset), where x_s is the unitary IDFT of coefficient column d.
///
/// Folding identity: for the delay transform x of the full RB-level track,
/// sum_k x[t + kM] = sqrt(T) * x_s[t].
pub fn initial_upsample(sp: &SampledPrecoders) -> Result<CMat> {
    let m = sp.n_samples();
    let n = sp.n_rb;
    let t_fold = n / m;
    let sqrt_t = (t_fold as f64).sqrt();
    let d = sp.values.cols;
    let mut e = CMat::zeros(d, n);
    for di in 0..d {
        let xs = dsp::idft(&sp.values.col(di));
        for tau in 0..n {
            // Offset sampling folds x[tau]*exp(-j2π*offset*tau/N); undo it so
            // an ideal mask reproduces the true taps.
            let twiddle = Complex64::from_polar(1.0, 2.0 * PI * (sp.offset * tau) as f64 / n as f64);
            e.set(di, tau, xs[tau % m] * sqrt_t * twiddle);
        }
    }
    Ok(e)
}

/// Reciprocity bandpass mask from the UL PDP: within each residue class
/// modulo M, weight each replica position by its share of the class energy
/// (uniform 1/T for empty classes).
pub fn reciprocity_bpf(ul_pdp: &Pdp, m: usize) -> Result<Bpf> {
    let n = ul_pdp.p.len();
    if m == 0 || n % m != 0 {
        return Err(SimError::Config(format!(
            "reciprocity_bpf needs M | N_RB, got M={m}, N_RB={n}"
        )));
    }
    let t_fold = n / m;
    let mut mask = vec![0.0; n];
    for residue in 0..m {
        let class_sum: f64 = (0..t_fold).map(|k| ul_pdp.p[residue + k * m]).sum();
        for k in 0..t_fold {
            let tau = residue + k * m;
            mask[tau] = if class_sum > 0.0 {
                ul_pdp.p[tau] / class_sum
            } else {
                1.0 / t_fold as f64
            };
        }
    }
    Ok(Bpf { mask })
}

/// Mask the extended delay tensor and transform back to frequency with the
/// unitary forward DFT. Returns the D x N_RB frequency-coefficient tracks.
pub fn apply_bpf(e: &CMat, bpf: &Bpf) -> Result<CMat> {
    if e.cols != bpf.mask.len() {
        return Err(SimError::shape(
            "apply_bpf",
            format!("{} delay bins", bpf.mask.len()),
            format!("{} columns", e.cols),
        ));
    }
    let mut out = CMat::zeros(e.rows, e.cols);
    for d in 0..e.rows {
        let masked: Vec<Complex64> = e
            .row(d)
            .iter()
            .zip(&bpf.mask)
            .map(|(v, m)| v * m)
            .collect();
        let track = dsp::dft(&masked);
        for f in 0..e.cols {
            out.set(d, f, track[f]);
        }
    }
    Ok(out)
}

/// Expand frequency-coefficient tracks (D x N_RB) to antenna-domain RB
/// precoders (N_RB x N_a) according to the sampled precoders' domain.
pub fn tracks_to_precoders(tracks: &CMat, sp: &SampledPrecoders) -> Result<CMat> {
    match sp.domain {
        Domain::Antenna => Ok(tracks.transpose()),
        Domain::Beam => {
            let b = sp.beams.as_ref().unwrap();
            // w_f = B c_f: (N_RB x L) * B^T
            tracks.transpose().matmul(&b.transpose())
        }
    }
}

/// The deterministic core: tiling, reciprocity mask, frequency reconstruction
/// and row normalization.
pub fn deterministic_upsample(sp: &SampledPrecoders, ul_pdp: &Pdp) -> Result<RbPrecoders> {
    let e = initial_upsample(sp)?;
    let bpf = reciprocity_bpf(ul_pdp, sp.n_samples())?;
    let tracks = apply_bpf(&e, &bpf)?;
    RbPrecoders::from_unnormalized(tracks_to_precoders(&tracks, sp)?)
}

/// Training objective: 1 - mean_f |h_f^H w_f| / (|h_f| |w_f|), in [0, 1],
/// zero iff every precoder row is aligned with its channel row.
pub fn loss_neg_gain(w: &CMat, h: &CMat) -> Result<f64> {
    if w.rows != h.rows || w.cols != h.cols {
        return Err(SimError::shape(
            "loss_neg_gain",
            format!("{}x{}", h.rows, h.cols),
            format!("{}x{}", w.rows, w.cols),
        ));
    }
    let mut acc = 0.0;
    for f in 0..h.rows {
        let hn = dsp::vec_norm(h.row(f));
        let wn = dsp::vec_norm(w.row(f));
        if hn == 0.0 {
            return Err(SimError::Numerical(format!("zero channel row {f}")));
        }
        if wn == 0.0 {
            return Err(SimError::Numerical(format!("zero precoder row {f}")));
        }
        acc += dsp::inner(h.row(f), w.row(f)).norm() / (hn * wn);
    }
    Ok(1.0 - acc / h.rows as f64)
}
