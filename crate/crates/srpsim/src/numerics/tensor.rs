//! Row-major dense f64 tensor.

use crate::error::{Result, SimError};
use num_complex::Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let n: usize = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(SimError::shape(
                "tensor_from_vec",
                format!("{} elements for shape {:?}", n, shape),
                format!("{} elements", data.len()),
            ));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    pub fn scalar(v: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![v],
        }
    }

    pub fn numel(&self) -> usize {
        self.data.len()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Pack a complex matrix (rows x cols) as a `[2, rows, cols]` tensor with
    /// channel 0 = real, channel 1 = imaginary.
    pub fn from_cmat(m: &crate::dsp::CMat) -> Self {
        let n = m.rows * m.cols;
        let mut data = vec![0.0; 2 * n];
        for (i, z) in m.data.iter().enumerate() {
            data[i] = z.re;
            data[n + i] = z.im;
        }
        Tensor {
            shape: vec![2, m.rows, m.cols],
            data,
        }
    }

    /// Inverse of [`Tensor::from_cmat`]; requires shape `[2, r, c]`.
    pub fn to_cmat(&self) -> Result<crate::dsp::CMat> {
        if self.shape.len() != 3 || self.shape[0] != 2 {
            return Err(SimError::shape(
                "tensor_to_cmat",
                "[2, rows, cols]",
                format!("{:?}", self.shape),
            ));
        }
        let (r, c) = (self.shape[1], self.shape[2]);
        let n = r * c;
        let data = (0..n)
            .map(|i| Complex64::new(self.data[i], self.data[n + i]))
            .collect();
        Ok(crate::dsp::CMat { rows: r, cols: c, data })
    }
}
