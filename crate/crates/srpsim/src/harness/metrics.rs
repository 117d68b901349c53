//! Evaluation metrics: normalized gain and per-RB capacity.

use crate::dsp::{self, CMat};
use crate::error::{Result, SimError};

/// g = sum_f |h_f^H w_f| / (|h_f| |w_f|) and NG = g / N_RB.
/// `w` and `h` are N_RB x N_a with row f the precoder / channel for RB f.
pub fn normalized_gain(w: &CMat, h: &CMat) -> Result<(f64, f64)> {
    if w.rows != h.rows || w.cols != h.cols {
        return Err(SimError::shape(
            "normalized_gain",
            format!("{}x{}", h.rows, h.cols),
            format!("{}x{}", w.rows, w.cols),
        ));
    }
    let mut g = 0.0;
    for f in 0..h.rows {
        let hn = dsp::vec_norm(h.row(f));
        let wn = dsp::vec_norm(w.row(f));
        if hn == 0.0 || wn == 0.0 {
            return Err(SimError::Numerical(format!(
                "normalized_gain: zero row at RB {f} (|h|={hn}, |w|={wn})"
            )));
        }
        g += dsp::inner(h.row(f), w.row(f)).norm() / (hn * wn);
    }
    Ok((g, g / h.rows as f64))
}

/// Mean per-RB capacity C = (1/N_RB) sum_f log2(1 + rho |h_f^H w_f|^2) with
/// rho = 10^(snr_db/10); rows of `w` must be unit-norm.
pub fn capacity(w: &CMat, h: &CMat, snr_db: f64) -> Result<f64> {
    if w.rows != h.rows || w.cols != h.cols {
        return Err(SimError::shape(
            "capacity",
            format!("{}x{}", h.rows, h.cols),
            format!("{}x{}", w.rows, w.cols),
        ));
    }
    let rho = 10f64.powf(snr_db / 10.0);
    let mut acc = 0.0;
    for f in 0..h.rows {
        let z = dsp::inner(h.row(f), w.row(f)).norm_sqr();
        acc += (1.0 + rho * z).log2();
    }
    Ok(acc / h.rows as f64)
}
