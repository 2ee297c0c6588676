//! Small dense linear algebra on the state space ℝⁿ.

use nalgebra::{DMatrix, DVector};

/// An `n × n` real operator on the state space.
///
/// `norm` is always the spectral norm (largest singular value).
#[derive(Debug, Clone, PartialEq)]
pub struct StateMatrix(pub DMatrix<f64>);

impl StateMatrix {
    pub fn identity(dim: usize) -> Self {
        StateMatrix(DMatrix::identity(dim, dim))
    }

    pub fn scalar(dim: usize, value: f64) -> Self {
        StateMatrix(DMatrix::identity(dim, dim) * value)
    }

    pub fn from_row_major(dim: usize, entries: &[f64]) -> Self {
        StateMatrix(DMatrix::from_row_slice(dim, dim, entries))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.0[(row, col)]
    }

    pub fn norm(&self) -> f64 {
        spectral_norm(&self.0)
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn mul(&self, other: &StateMatrix) -> StateMatrix {
        StateMatrix(&self.0 * &other.0)
    }

    pub fn scale(&self, factor: f64) -> StateMatrix {
        StateMatrix(&self.0 * factor)
    }

    pub fn sub(&self, other: &StateMatrix) -> StateMatrix {
        StateMatrix(&self.0 - &other.0)
    }

    /// `out = self · x`
    pub fn apply(&self, x: &[f64], out: &mut [f64]) {
        let n = self.dim();
        for (r, o) in out.iter_mut().enumerate().take(n) {
            let mut acc = 0.0;
            for (c, xc) in x.iter().enumerate().take(n) {
                acc += self.0[(r, c)] * xc;
            }
            *o = acc;
        }
    }

    pub fn try_inverse(&self) -> Option<StateMatrix> {
        self.0.clone().try_inverse().map(StateMatrix)
    }

    /// 2-norm condition number `σ_max / σ_min`; `+∞` for singular matrices.
    pub fn condition_number(&self) -> f64 {
        let n = self.dim();
        if n == 1 {
            return if self.0[(0, 0)] == 0.0 { f64::INFINITY } else { 1.0 };
        }
        let sv = self.0.clone().singular_values();
        let max = sv.max();
        let min = sv.min();
        if min == 0.0 {
            f64::INFINITY
        } else {
            max / min
        }
    }
}

/// Largest singular value of a square matrix.
///
/// Closed forms for `n <= 2`; an SVD otherwise.
pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    match m.nrows() {
        0 => 0.0,
        1 => m[(0, 0)].abs(),
        2 => norm_2x2(m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]),
        _ => m.clone().singular_values().max(),
    }
}

/// Largest singular value of `[[a, b], [c, d]]`.
pub fn norm_2x2(a: f64, b: f64, c: f64, d: f64) -> f64 {
    let scale = a.abs().max(b.abs()).max(c.abs()).max(d.abs());
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    let (a, b, c, d) = (a / scale, b / scale, c / scale, d / scale);
    // σ_max = (|z₁| + |z₂|) / 2 with z₁ = (a+d) + i(c−b), z₂ = (a−d) + i(b+c).
    let p = ((a + d).powi(2) + (b - c).powi(2)).sqrt();
    let q = ((a - d).powi(2) + (b + c).powi(2)).sqrt();
    scale * 0.5 * (p + q)
}

pub fn vec_norm(x: &[f64]) -> f64 {
    let scale = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return scale;
    }
    scale * x.iter().map(|v| (v / scale).powi(2)).sum::<f64>().sqrt()
}

pub fn to_dvector(x: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(x)
}
