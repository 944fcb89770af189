//! Dense and matrix-free linear algebra kernels.

use alloc::vec;
use alloc::vec::Vec;

use crate::{math, Error, Result};

mod dense;
mod krylov;
mod orth;
mod spd;

pub use dense::{cholesky, dense_svd, dense_sym_eig, lu, Cholesky, Lu, Matrix, Svd, SymEig};
pub use krylov::{cg_solve, minres_solve};
pub use orth::{b_orthonormalize, BOrthonormal};
pub use spd::{BlockDiagonal, DenseSpd, Identity, SymTridiagonal};

/// A linear map between coordinate spaces, applied without forming a matrix.
pub trait LinearMap: Sync + Send {
    fn nrows(&self) -> usize;
    fn ncols(&self) -> usize;
    /// `y = A x`. Implementations may assume correctly sized slices.
    fn apply_into(&self, x: &[f64], y: &mut [f64]);

    fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows()];
        self.apply_into(x, &mut y);
        y
    }

    fn checked_apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        check_len("linear map input", self.ncols(), x.len())?;
        Ok(self.apply(x))
    }
}

/// A symmetric positive definite operator that can also solve with itself.
pub trait SpdOperator: LinearMap {
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>>;

    fn dim(&self) -> usize {
        self.nrows()
    }

    /// `sqrt(vᵀ A v)`.
    fn norm(&self, v: &[f64]) -> f64 {
        math::sqrt(dot(v, &self.apply(v)).max(0.0))
    }

    fn inner(&self, v: &[f64], w: &[f64]) -> f64 {
        dot(v, &self.apply(w))
    }
}

/// Wraps a closure as a square or rectangular [`LinearMap`].
pub struct FnMap<F> {
    rows: usize,
    cols: usize,
    f: F,
}

impl<F> FnMap<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync + Send,
{
    pub fn new(rows: usize, cols: usize, f: F) -> Self {
        Self { rows, cols, f }
    }
}

impl<F> LinearMap for FnMap<F>
where
    F: Fn(&[f64], &mut [f64]) + Sync + Send,
{
    fn nrows(&self) -> usize {
        self.rows
    }
    fn ncols(&self) -> usize {
        self.cols
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        (self.f)(x, y)
    }
}

/// Outcome of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SolverStats {
    pub iterations: usize,
    pub final_relative_residual: f64,
    pub converged: bool,
    /// Zero or negative curvature met (CG) or Lanczos breakdown (MINRES).
    pub breakdown: bool,
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    math::sqrt(dot(a, a))
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale(alpha: f64, x: &mut [f64]) {
    for xi in x {
        *xi *= alpha;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn unit(n: usize, i: usize) -> Vec<f64> {
    let mut e = vec![0.0; n];
    e[i] = 1.0;
    e
}

pub fn check_len(context: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            context,
            expected,
            got,
        })
    }
}

pub fn ensure_finite(v: &[f64], context: &'static str) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(context))
    }
}

/// Forms the dense matrix of a linear map by applying it to unit vectors.
pub fn to_dense(op: &dyn LinearMap) -> Matrix {
    let (m, n) = (op.nrows(), op.ncols());
    let mut out = Matrix::zeros(m, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; m];
    for j in 0..n {
        e[j] = 1.0;
        op.apply_into(&e, &mut col);
        for i in 0..m {
            out[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    out
}
