//! Minimal dense linear algebra: row-major matrices, affine forward/backward
//! rules, and a central finite-difference oracle that every analytic gradient
//! in the crate is validated against.

use crate::error::{Error, Result};

/// Dense row-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data. `data.len()` must equal `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                context: "Matrix::from_vec",
                expected: rows * cols,
                got: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col] = value;
    }

    pub fn transposed(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Computes `h[j] = sum_i w[i,j] * x[i] + b[j]` for an `n x m` weight matrix,
/// i.e. the unconstrained affine part of a dense layer.
pub fn affine_forward(w: &Matrix, x: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if x.len() != w.rows() {
        return Err(Error::DimensionMismatch {
            context: "affine_forward input",
            expected: w.rows(),
            got: x.len(),
        });
    }
    if b.len() != w.cols() {
        return Err(Error::DimensionMismatch {
            context: "affine_forward bias",
            expected: w.cols(),
            got: b.len(),
        });
    }
    let mut h = b.to_vec();
    for (i, &xi) in x.iter().enumerate() {
        let row = &w.data()[i * w.cols()..(i + 1) * w.cols()];
        for (j, &wij) in row.iter().enumerate() {
            h[j] += wij * xi;
        }
    }
    Ok(h)
}

/// Reverse-mode rule for [`affine_forward`] under a scalar loss with
/// `grad_out[j] = dL/dh[j]`. Returns `(dL/dW, dL/db, dL/dx)`.
pub fn affine_backward(
    w: &Matrix,
    x: &[f64],
    grad_out: &[f64],
) -> Result<(Matrix, Vec<f64>, Vec<f64>)> {
    if x.len() != w.rows() {
        return Err(Error::DimensionMismatch {
            context: "affine_backward input",
            expected: w.rows(),
            got: x.len(),
        });
    }
    if grad_out.len() != w.cols() {
        return Err(Error::DimensionMismatch {
            context: "affine_backward grad_out",
            expected: w.cols(),
            got: grad_out.len(),
        });
    }
    let mut grad_w = Matrix::zeros(w.rows(), w.cols());
    let mut grad_x = vec![0.0; x.len()];
    for i in 0..w.rows() {
        let mut acc = 0.0;
        for (j, &g) in grad_out.iter().enumerate() {
            grad_w.set(i, j, x[i] * g);
            acc += w.get(i, j) * g;
        }
        grad_x[i] = acc;
    }
    Ok((grad_w, grad_out.to_vec(), grad_x))
}

/// Central-difference gradient oracle: `(f(x+step*e_i) - f(x-step*e_i)) / (2*step)`.
///
/// Independent of every analytic backward rule in the crate; all of them are
/// tested against it.
pub fn finite_difference_gradient<F>(mut f: F, x: &[f64], step: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if step.is_nan() || step <= 0.0 {
        return Err(Error::InvalidConfig(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let mut grad = vec![0.0; x.len()];
    let mut probe = x.to_vec();
    for i in 0..x.len() {
        let orig = probe[i];
        probe[i] = orig + step;
        let plus = f(&probe);
        probe[i] = orig - step;
        let minus = f(&probe);
        probe[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::NonFinite("finite_difference_gradient evaluation"));
        }
        grad[i] = (plus - minus) / (2.0 * step);
    }
    Ok(grad)
}

/// Step size used by all finite-difference gradient checks in the crate.
pub const FD_STEP: f64 = 1e-5;

/// Pre-activation magnitudes below this are treated as "at a kink" and
/// excluded from finite-difference comparisons.
pub const KINK_EXCLUSION: f64 = 1e-3;

/// Relative error between an analytic and a numeric gradient entry, with the
/// denominator floored at 1e-3 so near-zero entries are compared absolutely.
pub fn gradient_relative_error(analytic: f64, numeric: f64) -> f64 {
    let scale = analytic.abs().max(numeric.abs()).max(1e-3);
    (analytic - numeric).abs() / scale
}

/// Worst [`gradient_relative_error`] across two gradient slices.
pub fn max_gradient_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| gradient_relative_error(a, n))
        .fold(0.0, f64::max)
}
