//! Dense complex matrices and unitary DFT helpers shared across modules.
//!
//! Sizes here are desk-scale (tens of RBs, tens of antennas), so the DFTs are
//! plain matrix products against precomputed unitary DFT matrices. The matrix
//! form is also what the autodiff tape consumes for its linear complex ops.

use crate::error::{Result, SimError};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Row-major dense complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CMat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMat {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = CMat::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn col(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn transpose(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self.get(c, r))
    }

    /// `self * other`, plain complex matrix product.
    pub fn matmul(&self, other: &CMat) -> Result<CMat> {
        if self.cols != other.rows {
            return Err(SimError::shape(
                "matmul",
                format!("lhs cols == rhs rows"),
                format!("{}x{} * {}x{}", self.rows, self.cols, other.rows, other.cols),
            ));
        }
        let mut out = CMat::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == Complex64::new(0.0, 0.0) {
                    continue;
                }
                for c in 0..other.cols {
                    out.data[r * other.cols + c] += a * other.get(k, c);
                }
            }
        }
        Ok(out)
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

/// Hermitian inner product `a^H b`.
pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub fn vec_norm(a: &[Complex64]) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Unitary forward DFT matrix: `F[f,t] = exp(-j 2π f t / n) / sqrt(n)`.
pub fn dft_matrix(n: usize) -> CMat {
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |f, t| {
        let phase = -2.0 * PI * (f * t) as f64 / n as f64;
        Complex64::from_polar(scale, phase)
    })
}

/// Unitary inverse DFT matrix, conjugate of [`dft_matrix`].
pub fn idft_matrix(n: usize) -> CMat {
    let scale = 1.0 / (n as f64).sqrt();
    CMat::from_fn(n, n, |t, f| {
        let phase = 2.0 * PI * (f * t) as f64 / n as f64;
        Complex64::from_polar(scale, phase)
    })
}

/// Unitary forward DFT of a vector (O(n^2); fine at these sizes).
pub fn dft(x: &[Complex64]) -> Vec<Complex64> {
    apply_fourier(x, -1.0)
}

/// Unitary inverse DFT of a vector.
pub fn idft(x: &[Complex64]) -> Vec<Complex64> {
    apply_fourier(x, 1.0)
}

fn apply_fourier(x: &[Complex64], sign: f64) -> Vec<Complex64> {
    let n = x.len();
    let scale = 1.0 / (n as f64).sqrt();
    (0..n)
        .map(|k| {
            let mut acc = Complex64::new(0.0, 0.0);
            for (t, v) in x.iter().enumerate() {
                let phase = sign * 2.0 * PI * (k * t) as f64 / n as f64;
                acc += v * Complex64::from_polar(1.0, phase);
            }
            acc * scale
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dft_round_trip_and_norm() {
        let x: Vec<Complex64> = (0..8)
            .map(|i| Complex64::new(i as f64, -(i as f64) * 0.5))
            .collect();
        let y = dft(&x);
        let back = idft(&y);
        let nx: f64 = x.iter().map(|z| z.norm_sqr()).sum();
        let ny: f64 = y.iter().map(|z| z.norm_sqr()).sum();
        assert!((nx - ny).abs() < 1e-12 * nx);
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    proptest::proptest! {
        // Unitary DFT preserves energy and idft inverts dft for any input.
        #[test]
        fn dft_unitary_property(re in proptest::collection::vec(-1e3f64..1e3, 1..32),
                                im in proptest::collection::vec(-1e3f64..1e3, 1..32)) {
            let n = re.len().min(im.len());
            let x: Vec<Complex64> = (0..n).map(|i| Complex64::new(re[i], im[i])).collect();
            let y = dft(&x);
            let nx: f64 = x.iter().map(|z| z.norm_sqr()).sum();
            let ny: f64 = y.iter().map(|z| z.norm_sqr()).sum();
            proptest::prop_assert!((nx - ny).abs() <= 1e-9 * nx.max(1.0));
            let back = idft(&y);
            for (a, b) in x.iter().zip(&back) {
                proptest::prop_assert!((a - b).norm() <= 1e-9 * nx.sqrt().max(1.0));
            }
        }
    }

    #[test]
    fn dft_matrix_matches_direct() {
        let x: Vec<Complex64> = (0..5).map(|i| Complex64::new(1.0 / (i + 1) as f64, 0.3)).collect();
        let f = dft_matrix(5);
        for k in 0..5 {
            let via_mat: Complex64 = (0..5).map(|t| f.get(k, t) * x[t]).sum();
            assert!((via_mat - dft(&x)[k]).norm() < 1e-12);
        }
    }
}
