//! Oversampled DFT beam codebooks and the Type I / Type II / eType II
//! feedback encoders and decoders, including the modified least-squares
//! selection criterion and the modified eType II frequency-domain
//! downsampling.
//!
//! Conventions: the delay domain is reached from frequency by the unitary
//! IDFT (short delays at low tap indices) and frequency is recovered with the
//! unitary forward DFT, matching the upsampling pipeline. All tie-breaks are
//! by lowest index for determinism.

use crate::dsp::{self, CMat};
use crate::error::{Result, SimError};
use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Shared gNB/UE codebook of oversampled DFT beams; column m of `beams` is
/// exp(j 2π n m / (O N_a)) / sqrt(N_a).
#[derive(Debug, Clone)]
pub struct BeamCodebook {
    pub n_ant: usize,
    pub oversampling: usize,
    pub beams: CMat,
}

impl BeamCodebook {
    pub fn build(n_ant: usize, oversampling: usize) -> Result<Self> {
        if n_ant < 2 || oversampling < 1 {
            return Err(SimError::Config(format!(
                "codebook needs n_ant >= 2 and O >= 1, got {n_ant}/{oversampling}"
            )));
        }
        let nb = n_ant * oversampling;
        let scale = 1.0 / (n_ant as f64).sqrt();
        let beams = CMat::from_fn(n_ant, nb, |n, m| {
            Complex64::from_polar(scale, 2.0 * PI * (n * m) as f64 / nb as f64)
        });
        Ok(BeamCodebook {
            n_ant,
            oversampling,
            beams,
        })
    }

    pub fn n_beams(&self) -> usize {
        self.beams.cols
    }

    pub fn beam(&self, m: usize) -> Vec<Complex64> {
        self.beams.col(m)
    }

    /// N_a x L matrix of the selected beam columns.
    pub fn beam_matrix(&self, indices: &[usize]) -> CMat {
        CMat::from_fn(self.n_ant, indices.len(), |r, c| {
            self.beams.get(r, indices[c])
        })
    }
}

/// Subband partition of the bandwidth part.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SbGrid {
    pub n_rb: usize,
    pub n_rbpsb: usize,
    pub n_sb: usize,
}

impl SbGrid {
    pub fn new(n_rb: usize, n_rbpsb: usize) -> Result<Self> {
        if n_rbpsb == 0 || n_rb % n_rbpsb != 0 {
            return Err(SimError::Config(format!(
                "n_rbpsb {n_rbpsb} must divide n_rb {n_rb}"
            )));
        }
        Ok(SbGrid {
            n_rb,
            n_rbpsb,
            n_sb: n_rb / n_rbpsb,
        })
    }

    /// SB index of RB f (floor mapping).
    pub fn sb_of_rb(&self, f: usize) -> usize {
        f / self.n_rbpsb
    }
}

/// Per-SB channel: arithmetic mean of the member RB rows.
pub fn sb_reduce(csi: &CMat, grid: &SbGrid) -> Result<CMat> {
    if csi.rows != grid.n_rb {
        return Err(SimError::shape(
            "sb_reduce",
            format!("{} RB rows", grid.n_rb),
            format!("{} rows", csi.rows),
        ));
    }
    let mut out = CMat::zeros(grid.n_sb, csi.cols);
    for f in 0..grid.n_rb {
        let sb = grid.sb_of_rb(f);
        for a in 0..csi.cols {
            let v = out.get(sb, a) + csi.get(f, a) / grid.n_rbpsb as f64;
            out.set(sb, a, v);
        }
    }
    Ok(out)
}

// ── Selection ────────────────────────────────────────────────────────────

/// Beam index maximizing |h^H w| (ties broken by lowest index).
pub fn select_type1(h: &[Complex64], cb: &BeamCodebook) -> Result<usize> {
    if dsp::vec_norm(h) == 0.0 {
        return Err(SimError::Numerical("select_type1 on zero channel".into()));
    }
    let mut best = 0usize;
    let mut best_score = -1.0f64;
    for m in 0..cb.n_beams() {
        let score = dsp::inner(&cb.beam(m), h).norm();
        if score > best_score {
            best_score = score;
            best = m;
        }
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Type2Criterion {
    /// Matched (conjugate-projection) combining.
    Original,
    /// Least-squares fit to the normalized channel.
    Modified,
}

#[derive(Debug, Clone)]
pub struct Type2Selection {
    pub beam_indices: Vec<usize>,
    /// Combining coefficients; the precoder is sum_i alpha_i w_i / L.
    pub alpha: Vec<Complex64>,
    /// Set when the LS system was rank-deficient and a ridge was applied.
    pub ls_ridge_applied: bool,
}

impl Type2Selection {
    /// Reconstruct the (unnormalized) precoder sum_i alpha_i w_i / L.
    pub fn precoder(&self, cb: &BeamCodebook) -> Vec<Complex64> {
        let l = self.beam_indices.len();
        let mut w = vec![Complex64::new(0.0, 0.0); cb.n_ant];
        for (i, &m) in self.beam_indices.iter().enumerate() {
            let col = cb.beam(m);
            for a in 0..cb.n_ant {
                w[a] += self.alpha[i] * col[a] / l as f64;
            }
        }
        w
    }
}

/// Top-L beams by |h^H w| plus combining coefficients under the requested
/// criterion.
pub fn select_type2(
    h: &[Complex64],
    cb: &BeamCodebook,
    l: usize,
    criterion: Type2Criterion,
) -> Result<Type2Selection> {
    let hn = dsp::vec_norm(h);
    if hn == 0.0 {
        return Err(SimError::Numerical("select_type2 on zero channel".into()));
    }
    if l == 0 || l > cb.n_beams() {
        return Err(SimError::Config(format!(
            "L must be in 1..={}, got {l}",
            cb.n_beams()
        )));
    }
    let mut scored: Vec<(usize, f64)> = (0..cb.n_beams())
        .map(|m| (m, dsp::inner(&cb.beam(m), h).norm()))
        .collect();
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut beam_indices: Vec<usize> = scored[..l].iter().map(|(m, _)| *m).collect();
    beam_indices.sort_unstable();

    let b = cb.beam_matrix(&beam_indices);
    let (alpha, ridge) = match criterion {
        Type2Criterion::Original => {
            let alpha = beam_indices
                .iter()
                .map(|&m| l as f64 * dsp::inner(&cb.beam(m), h) / hn)
                .collect();
            (alpha, false)
        }
        Type2Criterion::Modified => {
            let hnorm: Vec<Complex64> = h.iter().map(|z| z / hn).collect();
            let (c, ridge) = ls_solve(&b, &hnorm)?;
            (c.iter().map(|z| z * l as f64).collect(), ridge)
        }
    };
    Ok(Type2Selection {
        beam_indices,
        alpha,
        ls_ridge_applied: ridge,
    })
}

/// Least squares `argmin_c |y - B c|` via normal equations; falls back to a
/// ridge of 1e-12 when the Gram matrix is not positive definite.
pub fn ls_solve(b: &CMat, y: &[Complex64]) -> Result<(Vec<Complex64>, bool)> {
    if b.rows != y.len() {
        return Err(SimError::shape(
            "ls_solve",
            format!("{} rows", b.rows),
            format!("y of length {}", y.len()),
        ));
    }
    let l = b.cols;
    let bm = DMatrix::from_fn(b.rows, l, |r, c| b.get(r, c));
    let yv = DMatrix::from_fn(y.len(), 1, |r, _| y[r]);
    let gram = bm.adjoint() * &bm;
    let rhs = bm.adjoint() * yv;
    if let Some(chol) = gram.clone().cholesky() {
        let sol = chol.solve(&rhs);
        return Ok(((0..l).map(|i| sol[(i, 0)]).collect(), false));
    }
    let ridged = gram + DMatrix::identity(l, l) * Complex64::new(1e-12, 0.0);
    let chol = ridged.cholesky().ok_or_else(|| {
        SimError::Numerical("ls_solve: Gram matrix not PSD even with ridge".into())
    })?;
    let sol = chol.solve(&rhs);
    Ok(((0..l).map(|i| sol[(i, 0)]).collect(), true))
}

// ── Reports ──────────────────────────────────────────────────────────────

mod b64c32 {
    //! Vec<Complex64> as base64 little-endian interleaved f32.
    use base64::Engine;
    use num_complex::Complex64;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &Vec<Complex64>, s: S) -> Result<S::Ok, S::Error> {
        let mut bytes = Vec::with_capacity(v.len() * 8);
        for z in v {
            bytes.extend_from_slice(&(z.re as f32).to_le_bytes());
            bytes.extend_from_slice(&(z.im as f32).to_le_bytes());
        }
        base64::engine::general_purpose::STANDARD
            .encode(bytes)
            .serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<Complex64>, D::Error> {
        let s = String::deserialize(d)?;
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(s)
            .map_err(serde::de::Error::custom)?;
        if bytes.len() % 8 != 0 {
            return Err(serde::de::Error::custom("complex f32 blob length not a multiple of 8"));
        }
        Ok(bytes
            .chunks_exact(8)
            .map(|c| {
                Complex64::new(
                    f32::from_le_bytes(c[0..4].try_into().unwrap()) as f64,
                    f32::from_le_bytes(c[4..8].try_into().unwrap()) as f64,
                )
            })
            .collect())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeIReport {
    /// PMI per SB.
    pub beam_indices: Vec<usize>,
    pub n_sb: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeIISbEntry {
    pub beam_indices: Vec<usize>,
    #[serde(with = "b64c32")]
    pub alpha: Vec<Complex64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TypeIIReport {
    pub sb: Vec<TypeIISbEntry>,
    pub l: usize,
    pub criterion: Type2Criterion,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EType2Variant {
    /// Per-SB coefficients, delay truncation to the first M_v taps.
    Truncated,
    /// Uniform RB-domain sampling of M_v coefficient vectors, no truncation.
    Modified,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ETypeIIReport {
    /// Wideband beam indices shared across the BWP.
    pub beam_indices: Vec<usize>,
    pub variant: EType2Variant,
    pub m_v: usize,
    pub r: usize,
    /// Kept delay-domain entries after R-compression: (beam, tap) positions.
    pub positions: Vec<(u32, u32)>,
    #[serde(with = "b64c32")]
    pub values: Vec<Complex64>,
    pub n_rb: usize,
    pub n_sb: usize,
    /// RB offset of the uniform sampling grid (modified variant).
    pub sample_offset: usize,
}

/// Feedback payload, one of the three schemes.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "scheme", rename_all = "lowercase")]
pub enum PrecoderReport {
    TypeI(TypeIReport),
    TypeII(TypeIIReport),
    ETypeII(ETypeIIReport),
}

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
pub struct ReportFile {
    pub version: u32,
    pub reports: Vec<PrecoderReport>,
}

// ── Encoders ─────────────────────────────────────────────────────────────

/// Type I PMI per SB.
pub fn encode_type1(csi: &CMat, cb: &BeamCodebook, grid: &SbGrid) -> Result<TypeIReport> {
    let sb_csi = sb_reduce(csi, grid)?;
    let beam_indices = (0..grid.n_sb)
        .map(|f| select_type1(sb_csi.row(f), cb))
        .collect::<Result<Vec<_>>>()?;
    Ok(TypeIReport {
        beam_indices,
        n_sb: grid.n_sb,
    })
}

/// Per-SB Type II report.
pub fn encode_type2(
    csi: &CMat,
    cb: &BeamCodebook,
    grid: &SbGrid,
    l: usize,
    criterion: Type2Criterion,
) -> Result<TypeIIReport> {
    let sb_csi = sb_reduce(csi, grid)?;
    let sb = (0..grid.n_sb)
        .map(|f| {
            let sel = select_type2(sb_csi.row(f), cb, l, criterion)?;
            Ok(TypeIISbEntry {
                beam_indices: sel.beam_indices,
                alpha: sel.alpha,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TypeIIReport { sb, l, criterion })
}

/// Wideband beams maximizing sum_f |h_f^H w|^2 (ties by lowest index).
pub fn select_wideband_beams(csi: &CMat, cb: &BeamCodebook, l: usize) -> Result<Vec<usize>> {
    if l == 0 || l > cb.n_beams() {
        return Err(SimError::Config(format!(
            "L must be in 1..={}, got {l}",
            cb.n_beams()
        )));
    }
    let mut scores = vec![0.0f64; cb.n_beams()];
    for f in 0..csi.rows {
        let hf = csi.row(f);
        for m in 0..cb.n_beams() {
            scores[m] += dsp::inner(&cb.beam(m), hf).norm_sqr();
        }
    }
    let mut idx: Vec<usize> = (0..cb.n_beams()).collect();
    idx.sort_by(|a, b| scores[*b].partial_cmp(&scores[*a]).unwrap().then(a.cmp(b)));
    let mut chosen = idx[..l].to_vec();
    chosen.sort_unstable();
    Ok(chosen)
}

/// LS coefficients of each row of `rows` against the beam matrix `b`,
/// returned as an L x n_rows matrix (column f = coefficients of row f).
fn ls_coefficients(rows: &CMat, b: &CMat) -> Result<CMat> {
    let l = b.cols;
    let mut out = CMat::zeros(l, rows.rows);
    for f in 0..rows.rows {
        let hf = rows.row(f);
        let hn = dsp::vec_norm(hf);
        if hn == 0.0 {
            return Err(SimError::Numerical(format!(
                "ls_coefficients: zero channel row {f}"
            )));
        }
        let y: Vec<Complex64> = hf.iter().map(|z| z / hn).collect();
        let (c, _) = ls_solve(b, &y)?;
        for i in 0..l {
            out.set(i, f, c[i]);
        }
    }
    Ok(out)
}

/// eType II encoder. Spatial compression to L wideband beams, LS coefficients
/// on the variant's frequency grid, unitary IDFT to the delay domain, and
/// top-k R-compression keeping ceil(L*M_v/R) entries.
#[allow(clippy::too_many_arguments)]
pub fn encode_etype2(
    csi: &CMat,
    cb: &BeamCodebook,
    grid: &SbGrid,
    l: usize,
    m_v: usize,
    r: usize,
    variant: EType2Variant,
    sample_offset: usize,
) -> Result<ETypeIIReport> {
    if r < 1 {
        return Err(SimError::Config("R must be >= 1".into()));
    }
    match variant {
        EType2Variant::Modified => {
            if m_v == 0 || grid.n_rb % m_v != 0 {
                return Err(SimError::Config(format!(
                    "modified eType II requires M_v | N_RB, got M_v={m_v}, N_RB={}",
                    grid.n_rb
                )));
            }
            if sample_offset >= grid.n_rb / m_v {
                return Err(SimError::Config(format!(
                    "sample_offset {sample_offset} must be < stride {}",
                    grid.n_rb / m_v
                )));
            }
        }
        EType2Variant::Truncated => {
            if m_v == 0 || m_v > grid.n_sb {
                return Err(SimError::Config(format!(
                    "truncated eType II requires M_v <= N_3, got M_v={m_v}, N_3={}",
                    grid.n_sb
                )));
            }
        }
    }
    let beam_indices = select_wideband_beams(csi, cb, l)?;
    let b = cb.beam_matrix(&beam_indices);

    // Delay-domain coefficient matrix, L x M_v.
    let delay: CMat = match variant {
        EType2Variant::Truncated => {
            let sb_csi = sb_reduce(csi, grid)?;
            let coef = ls_coefficients(&sb_csi, &b)?; // L x N_3
            let mut d = CMat::zeros(l, m_v);
            for i in 0..l {
                let track: Vec<Complex64> = (0..grid.n_sb).map(|f| coef.get(i, f)).collect();
                let taps = dsp::idft(&track);
                for t in 0..m_v {
                    d.set(i, t, taps[t]);
                }
            }
            d
        }
        EType2Variant::Modified => {
            let stride = grid.n_rb / m_v;
            let sampled = CMat::from_fn(m_v, csi.cols, |k, a| {
                csi.get(k * stride + sample_offset, a)
            });
            let coef = ls_coefficients(&sampled, &b)?; // L x M_v
            let mut d = CMat::zeros(l, m_v);
            for i in 0..l {
                let track: Vec<Complex64> = (0..m_v).map(|k| coef.get(i, k)).collect();
                let taps = dsp::idft(&track);
                for t in 0..m_v {
                    d.set(i, t, taps[t]);
                }
            }
            d
        }
    };

    // Top-k magnitude compression; ties by (beam, tap) lexicographic order.
    let k = (l * m_v).div_ceil(r);
    let mut entries: Vec<(usize, usize, Complex64)> = (0..l)
        .flat_map(|i| (0..m_v).map(move |t| (i, t)))
        .map(|(i, t)| (i, t, delay.get(i, t)))
        .collect();
    entries.sort_by(|a, b| {
        b.2.norm()
            .partial_cmp(&a.2.norm())
            .unwrap()
            .then((a.0, a.1).cmp(&(b.0, b.1)))
    });
    entries.truncate(k);
    entries.sort_by_key(|e| (e.0, e.1));
    Ok(ETypeIIReport {
        beam_indices,
        variant,
        m_v,
        r,
        positions: entries.iter().map(|e| (e.0 as u32, e.1 as u32)).collect(),
        values: entries.iter().map(|e| e.2).collect(),
        n_rb: grid.n_rb,
        n_sb: grid.n_sb,
        sample_offset,
    })
}

/// Decoded eType II payload: the (zero-filled) delay matrix and its
/// frequency-domain reconstruction — sampled-RB coefficients for the modified
/// variant, per-SB coefficients (zero-padded taps) for the truncated one.
#[derive(Debug, Clone)]
pub struct DecodedEType2 {
    /// L x M_v.
    pub delay: CMat,
    /// L x M_v (modified) or L x N_3 (truncated).
    pub freq: CMat,
}

pub fn decode_etype2(report: &ETypeIIReport) -> Result<DecodedEType2> {
    let l = report.beam_indices.len();
    let mut delay = CMat::zeros(l, report.m_v);
    let mut seen = std::collections::HashSet::new();
    for (pos, val) in report.positions.iter().zip(&report.values) {
        let (i, t) = (pos.0 as usize, pos.1 as usize);
        if i >= l || t >= report.m_v {
            return Err(SimError::Data(format!(
                "eType II position ({i},{t}) out of range {l}x{}",
                report.m_v
            )));
        }
        if !seen.insert((i, t)) {
            return Err(SimError::Data(format!(
                "duplicate eType II position ({i},{t})"
            )));
        }
        delay.set(i, t, *val);
    }
    let n_freq = match report.variant {
        EType2Variant::Modified => report.m_v,
        EType2Variant::Truncated => report.n_sb,
    };
    let mut freq = CMat::zeros(l, n_freq);
    for i in 0..l {
        let mut taps = vec![Complex64::new(0.0, 0.0); n_freq];
        for t in 0..report.m_v {
            taps[t] = delay.get(i, t);
        }
        let track = dsp::dft(&taps);
        for f in 0..n_freq {
            freq.set(i, f, track[f]);
        }
    }
    Ok(DecodedEType2 { delay, freq })
}

/// Per-SB precoders of a Type I report (n_sb x N_a).
pub fn type1_precoders(report: &TypeIReport, cb: &BeamCodebook) -> CMat {
    CMat::from_fn(report.n_sb, cb.n_ant, |f, a| {
        cb.beams.get(a, report.beam_indices[f])
    })
}

/// Per-SB precoders of a Type II report (n_sb x N_a), w_f = sum alpha w / L.
pub fn type2_precoders(report: &TypeIIReport, cb: &BeamCodebook) -> CMat {
    let mut out = CMat::zeros(report.sb.len(), cb.n_ant);
    for (f, entry) in report.sb.iter().enumerate() {
        for (i, &m) in entry.beam_indices.iter().enumerate() {
            let col = cb.beam(m);
            for a in 0..cb.n_ant {
                let v = out.get(f, a) + entry.alpha[i] * col[a] / report.l as f64;
                out.set(f, a, v);
            }
        }
    }
    out
}

// ── Overhead accounting ──────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FeedbackOverhead {
    pub complex_coeffs: usize,
    pub index_bits: usize,
}

fn bits_for(n: usize) -> usize {
    (usize::BITS - (n.max(1) - 1).leading_zeros()) as usize
}

pub fn overhead(report: &PrecoderReport, n_beams: usize) -> FeedbackOverhead {
    match report {
        PrecoderReport::TypeI(r) => FeedbackOverhead {
            complex_coeffs: 0,
            index_bits: r.n_sb * bits_for(n_beams),
        },
        PrecoderReport::TypeII(r) => FeedbackOverhead {
            complex_coeffs: r.sb.len() * r.l,
            index_bits: r.sb.len() * r.l * bits_for(n_beams),
        },
        PrecoderReport::ETypeII(r) => {
            let k = r.values.len();
            let l = r.beam_indices.len();
            FeedbackOverhead {
                complex_coeffs: k,
                index_bits: l * bits_for(n_beams) + k * bits_for(l * r.m_v),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{paths_to_csi, sample_paths, SimConfig};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rand_h(n: usize, rng: &mut ChaCha8Rng) -> Vec<Complex64> {
        (0..n)
            .map(|_| Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn two_antenna_codebook_is_the_2pt_dft() {
        let cb = BeamCodebook::build(2, 1).unwrap();
        let s = 1.0 / 2f64.sqrt();
        assert!((cb.beams.get(0, 0) - Complex64::new(s, 0.0)).norm() < 1e-12);
        assert!((cb.beams.get(1, 0) - Complex64::new(s, 0.0)).norm() < 1e-12);
        assert!((cb.beams.get(0, 1) - Complex64::new(s, 0.0)).norm() < 1e-12);
        assert!((cb.beams.get(1, 1) - Complex64::new(-s, 0.0)).norm() < 1e-12);
    }

    #[test]
    fn codebook_columns_unit_norm_and_orthogonal_at_o1() {
        for (n_ant, o) in [(4usize, 1usize), (8, 4), (16, 2)] {
            let cb = BeamCodebook::build(n_ant, o).unwrap();
            for m in 0..cb.n_beams() {
                assert!((dsp::vec_norm(&cb.beam(m)) - 1.0).abs() < 1e-12);
            }
        }
        let cb = BeamCodebook::build(4, 1).unwrap();
        for m1 in 0..4 {
            for m2 in 0..4 {
                let g = dsp::inner(&cb.beam(m1), &cb.beam(m2)).norm();
                let expect = if m1 == m2 { 1.0 } else { 0.0 };
                assert!((g - expect).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn type1_returns_matching_column() {
        let cb = BeamCodebook::build(8, 4).unwrap();
        let idx = select_type1(&cb.beam(13), &cb).unwrap();
        assert_eq!(idx, 13);
    }

    #[test]
    fn type1_two_beam_hand_case() {
        let cb = BeamCodebook::build(2, 1).unwrap();
        let h = vec![Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0)];
        let idx = select_type1(&h, &cb).unwrap();
        assert_eq!(idx, 0);
        let score = dsp::inner(&cb.beam(idx), &h).norm();
        assert!((score - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn type1_matches_exhaustive_oracle() {
        let cb = BeamCodebook::build(8, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let h = rand_h(8, &mut rng);
            let idx = select_type1(&h, &cb).unwrap();
            let oracle = (0..cb.n_beams())
                .max_by(|&a, &b| {
                    dsp::inner(&cb.beam(a), &h)
                        .norm()
                        .partial_cmp(&dsp::inner(&cb.beam(b), &h).norm())
                        .unwrap()
                })
                .unwrap();
            assert_eq!(idx, oracle);
        }
    }

    #[test]
    fn type1_rejects_zero_channel() {
        let cb = BeamCodebook::build(4, 1).unwrap();
        assert!(select_type1(&vec![Complex64::new(0.0, 0.0); 4], &cb).is_err());
    }

    #[test]
    fn type2_l1_modified_aligns_phase() {
        let cb = BeamCodebook::build(8, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let h = rand_h(8, &mut rng);
        let t1 = select_type1(&h, &cb).unwrap();
        let sel = select_type2(&h, &cb, 1, Type2Criterion::Modified).unwrap();
        assert_eq!(sel.beam_indices, vec![t1]);
        // The LS coefficient minimizes |h/|h| - alpha w|; perturbing the phase
        // must not reduce the residual.
        let hn = dsp::vec_norm(&h);
        let hnorm: Vec<Complex64> = h.iter().map(|z| z / hn).collect();
        let w = sel.precoder(&cb);
        let resid = |w: &[Complex64]| -> f64 {
            hnorm
                .iter()
                .zip(w)
                .map(|(a, b)| (a - b).norm_sqr())
                .sum::<f64>()
                .sqrt()
        };
        let base = resid(&w);
        for rot in [0.01, -0.01] {
            let rotated: Vec<Complex64> = w
                .iter()
                .map(|z| z * Complex64::from_polar(1.0, rot))
                .collect();
            assert!(resid(&rotated) >= base);
        }
    }

    #[test]
    fn type2_modified_exact_on_beam_span() {
        // h in the span of orthogonal beams -> exact reconstruction.
        let cb = BeamCodebook::build(8, 1).unwrap();
        let coeffs = [Complex64::new(0.7, -0.2), Complex64::new(-0.1, 0.9)];
        let mut h = vec![Complex64::new(0.0, 0.0); 8];
        for (c, m) in coeffs.iter().zip([2usize, 5]) {
            for (a, v) in cb.beam(m).iter().enumerate() {
                h[a] += c * v;
            }
        }
        let sel = select_type2(&h, &cb, 2, Type2Criterion::Modified).unwrap();
        assert_eq!(sel.beam_indices, vec![2, 5]);
        let w = sel.precoder(&cb);
        let hn = dsp::vec_norm(&h);
        let err: f64 = h
            .iter()
            .zip(&w)
            .map(|(a, b)| (a / hn - b).norm_sqr())
            .sum::<f64>()
            .sqrt();
        assert!(err <= 1e-10, "residual {err}");
    }

    #[test]
    fn type2_modified_beats_random_coefficients() {
        let cb = BeamCodebook::build(8, 4).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = rand_h(8, &mut rng);
        let hn = dsp::vec_norm(&h);
        let hnorm: Vec<Complex64> = h.iter().map(|z| z / hn).collect();
        let sel = select_type2(&h, &cb, 4, Type2Criterion::Modified).unwrap();
        let b = cb.beam_matrix(&sel.beam_indices);
        let resid = |c: &[Complex64]| -> f64 {
            (0..8)
                .map(|a| {
                    let mut acc = hnorm[a];
                    for i in 0..4 {
                        acc -= b.get(a, i) * c[i];
                    }
                    acc.norm_sqr()
                })
                .sum::<f64>()
        };
        let c_star: Vec<Complex64> = sel.alpha.iter().map(|z| z / 4.0).collect();
        let best = resid(&c_star);
        for _ in 0..1000 {
            let c = rand_h(4, &mut rng);
            assert!(resid(&c) >= best - 1e-12);
        }
    }

    #[test]
    fn sb_reduce_matches_direct_mean() {
        let cfg = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ps = sample_paths(&cfg, &mut rng).unwrap();
        let ch = paths_to_csi(&ps, &cfg, 0);
        let grid = SbGrid::new(cfg.n_rb, 4).unwrap();
        let sb = sb_reduce(&ch.dl, &grid).unwrap();
        for f in 0..grid.n_sb {
            for a in 0..cfg.n_ant {
                let mean: Complex64 = (0..4)
                    .map(|k| ch.dl.get(f * 4 + k, a))
                    .sum::<Complex64>()
                    / 4.0;
                assert!((sb.get(f, a) - mean).norm() < 1e-12);
            }
        }
        // n_rbpsb = 1 is the identity.
        let grid1 = SbGrid::new(cfg.n_rb, 1).unwrap();
        let sb1 = sb_reduce(&ch.dl, &grid1).unwrap();
        assert_eq!(sb1.data, ch.dl.data);
    }

    #[test]
    fn etype2_round_trip_r1_is_exact() {
        let cfg = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let ps = sample_paths(&cfg, &mut rng).unwrap();
        let ch = paths_to_csi(&ps, &cfg, 0);
        let cb = BeamCodebook::build(cfg.n_ant, 4).unwrap();
        let grid = SbGrid::new(cfg.n_rb, 4).unwrap();
        for variant in [EType2Variant::Modified, EType2Variant::Truncated] {
            let rep = encode_etype2(&ch.dl, &cb, &grid, 4, 12, 1, variant, 0).unwrap();
            assert_eq!(rep.values.len(), 48);
            let dec = decode_etype2(&rep).unwrap();
            // All entries kept: delay matrix reproduced exactly.
            for (pos, val) in rep.positions.iter().zip(&rep.values) {
                let d = dec.delay.get(pos.0 as usize, pos.1 as usize);
                assert!((d - val).norm() < 1e-12);
            }
            // Frequency round trip is unitary for the modified variant.
            if variant == EType2Variant::Modified {
                assert!((dec.delay.frob_norm() - dec.freq.frob_norm()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn etype2_topk_keeps_largest() {
        let cfg = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let ps = sample_paths(&cfg, &mut rng).unwrap();
        let ch = paths_to_csi(&ps, &cfg, 0);
        let cb = BeamCodebook::build(cfg.n_ant, 4).unwrap();
        let grid = SbGrid::new(cfg.n_rb, 4).unwrap();
        let full = encode_etype2(&ch.dl, &cb, &grid, 4, 12, 1, EType2Variant::Modified, 0).unwrap();
        let half = encode_etype2(&ch.dl, &cb, &grid, 4, 12, 2, EType2Variant::Modified, 0).unwrap();
        assert_eq!(half.values.len(), 24);
        let kept_min = half.values.iter().map(|z| z.norm()).fold(f64::MAX, f64::min);
        let kept: std::collections::HashSet<_> = half.positions.iter().cloned().collect();
        for (pos, val) in full.positions.iter().zip(&full.values) {
            if !kept.contains(pos) {
                assert!(val.norm() <= kept_min + 1e-15);
            }
        }
    }

    #[test]
    fn etype2_single_tap_survives_max_compression() {
        let cfg = SimConfig::default();
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let ps = sample_paths(&cfg, &mut rng).unwrap();
        let ch = paths_to_csi(&ps, &cfg, 0);
        let cb = BeamCodebook::build(cfg.n_ant, 4).unwrap();
        let grid = SbGrid::new(cfg.n_rb, 4).unwrap();
        let (l, m_v) = (4, 12);
        let rep =
            encode_etype2(&ch.dl, &cb, &grid, l, m_v, l * m_v, EType2Variant::Modified, 0).unwrap();
        assert_eq!(rep.values.len(), 1);
        let dec = decode_etype2(&rep).unwrap();
        // Reconstruction is the rank-1 delay atom of the surviving tap.
        let (bi, ti) = (rep.positions[0].0 as usize, rep.positions[0].1 as usize);
        for i in 0..l {
            for t in 0..m_v {
                let expect = if (i, t) == (bi, ti) { rep.values[0] } else { Complex64::new(0.0, 0.0) };
                assert!((dec.delay.get(i, t) - expect).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn etype2_divisibility_is_enforced() {
        let cb = BeamCodebook::build(4, 1).unwrap();
        let grid = SbGrid::new(48, 4).unwrap();
        let csi = CMat::from_fn(48, 4, |r, c| Complex64::new((r + c) as f64 + 1.0, 0.3));
        let err = encode_etype2(&csi, &cb, &grid, 2, 7, 1, EType2Variant::Modified, 0);
        assert!(err.is_err());
        assert!(err.unwrap_err().to_string().contains("M_v | N_RB"));
    }

    #[test]
    fn decode_rejects_duplicate_positions() {
        let rep = ETypeIIReport {
            beam_indices: vec![0, 1],
            variant: EType2Variant::Modified,
            m_v: 4,
            r: 2,
            positions: vec![(0, 1), (0, 1), (1, 2), (0, 0)],
            values: vec![Complex64::new(1.0, 0.0); 4],
            n_rb: 16,
            n_sb: 4,
            sample_offset: 0,
        };
        assert!(decode_etype2(&rep).is_err());
    }

    #[test]
    fn report_json_round_trip() {
        let rep = PrecoderReport::ETypeII(ETypeIIReport {
            beam_indices: vec![3, 9],
            variant: EType2Variant::Modified,
            m_v: 4,
            r: 2,
            positions: vec![(0, 1), (1, 3)],
            values: vec![Complex64::new(0.5, -0.25), Complex64::new(-1.5, 2.0)],
            n_rb: 16,
            n_sb: 4,
            sample_offset: 0,
        });
        let s = serde_json::to_string(&ReportFile {
            version: REPORT_SCHEMA_VERSION,
            reports: vec![rep],
        })
        .unwrap();
        let back: ReportFile = serde_json::from_str(&s).unwrap();
        match &back.reports[0] {
            PrecoderReport::ETypeII(r) => {
                assert_eq!(r.positions, vec![(0, 1), (1, 3)]);
                // Values survive the f32 wire format exactly (representable).
                assert_eq!(r.values[0], Complex64::new(0.5, -0.25));
            }
            _ => panic!("wrong variant"),
        }
    }

    #[test]
    fn overhead_counts() {
        let grid = SbGrid::new(48, 4).unwrap();
        let t2 = PrecoderReport::TypeII(TypeIIReport {
            sb: (0..grid.n_sb)
                .map(|_| TypeIISbEntry {
                    beam_indices: vec![0, 1, 2, 3],
                    alpha: vec![Complex64::new(1.0, 0.0); 4],
                })
                .collect(),
            l: 4,
            criterion: Type2Criterion::Modified,
        });
        assert_eq!(overhead(&t2, 64).complex_coeffs, grid.n_sb * 4);
        // eType II keeps exactly ceil(L*M_v/R) coefficients.
        for r in [2usize, 4, 8, 16] {
            let rep = PrecoderReport::ETypeII(ETypeIIReport {
                beam_indices: (0..12).collect(),
                variant: EType2Variant::Modified,
                m_v: 24,
                r,
                positions: (0..(12 * 24usize).div_ceil(r))
                    .map(|i| ((i / 24) as u32, (i % 24) as u32))
                    .collect(),
                values: vec![Complex64::new(1.0, 0.0); (12 * 24usize).div_ceil(r)],
                n_rb: 96,
                n_sb: 24,
                sample_offset: 0,
            });
            assert_eq!(overhead(&rep, 128).complex_coeffs, 288 / r);
        }
    }
}
