use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use super::{check_len, cholesky, Cholesky, LinearMap, Matrix, SpdOperator};
use crate::{Error, Result};

/// The identity on `R^n`.
#[derive(Debug, Clone, Copy)]
pub struct Identity(pub usize);

impl LinearMap for Identity {
    fn nrows(&self) -> usize {
        self.0
    }
    fn ncols(&self) -> usize {
        self.0
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        y.copy_from_slice(x);
    }
}

impl SpdOperator for Identity {
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len("identity solve", self.0, rhs.len())?;
        Ok(rhs.to_vec())
    }
}

/// Symmetric positive definite tridiagonal matrix (1D P1 mass matrices),
/// factored once as `L D Lᵀ`.
#[derive(Debug, Clone)]
pub struct SymTridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
    // LDLᵀ factors: unit lower bidiagonal multipliers and pivots.
    mult: Vec<f64>,
    piv: Vec<f64>,
}

impl SymTridiagonal {
    pub fn new(diag: Vec<f64>, off: Vec<f64>) -> Result<Self> {
        let n = diag.len();
        check_len("tridiagonal off-diagonal", n.saturating_sub(1), off.len())?;
        let mut piv = vec![0.0; n];
        let mut mult = vec![0.0; n.saturating_sub(1)];
        for i in 0..n {
            let mut d = diag[i];
            if i > 0 {
                mult[i - 1] = off[i - 1] / piv[i - 1];
                d -= mult[i - 1] * off[i - 1];
            }
            if !(d > 0.0) {
                return Err(Error::NotPositiveDefinite { pivot: i });
            }
            piv[i] = d;
        }
        Ok(Self { diag, off, mult, piv })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    pub fn off(&self) -> &[f64] {
        &self.off
    }
}

impl LinearMap for SymTridiagonal {
    fn nrows(&self) -> usize {
        self.diag.len()
    }
    fn ncols(&self) -> usize {
        self.diag.len()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        let n = self.diag.len();
        for i in 0..n {
            let mut s = self.diag[i] * x[i];
            if i > 0 {
                s += self.off[i - 1] * x[i - 1];
            }
            if i + 1 < n {
                s += self.off[i] * x[i + 1];
            }
            y[i] = s;
        }
    }
}

impl SpdOperator for SymTridiagonal {
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let n = self.diag.len();
        check_len("tridiagonal solve", n, rhs.len())?;
        let mut x = rhs.to_vec();
        for i in 1..n {
            x[i] -= self.mult[i - 1] * x[i - 1];
        }
        for i in 0..n {
            x[i] /= self.piv[i];
        }
        for i in (0..n.saturating_sub(1)).rev() {
            x[i] -= self.mult[i] * x[i + 1];
        }
        Ok(x)
    }
}

/// Dense SPD matrix with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct DenseSpd {
    matrix: Matrix,
    factor: Cholesky,
}

impl DenseSpd {
    pub fn new(matrix: Matrix) -> Result<Self> {
        let factor = cholesky(&matrix)?;
        Ok(Self { matrix, factor })
    }

    pub fn matrix(&self) -> &Matrix {
        &self.matrix
    }
}

impl LinearMap for DenseSpd {
    fn nrows(&self) -> usize {
        self.matrix.rows()
    }
    fn ncols(&self) -> usize {
        self.matrix.cols()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        self.matrix.apply_into(x, y)
    }
}

impl SpdOperator for DenseSpd {
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len("dense spd solve", self.matrix.rows(), rhs.len())?;
        Ok(self.factor.solve(rhs))
    }
}

/// Block-diagonal SPD operator; block `k` acts on a contiguous coordinate
/// range.
pub struct BlockDiagonal {
    blocks: Vec<Box<dyn SpdOperator>>,
    offsets: Vec<usize>,
}

impl BlockDiagonal {
    pub fn new(blocks: Vec<Box<dyn SpdOperator>>) -> Self {
        let mut offsets = Vec::with_capacity(blocks.len() + 1);
        offsets.push(0);
        for b in &blocks {
            let last = *offsets.last().unwrap();
            offsets.push(last + b.dim());
        }
        Self { blocks, offsets }
    }

    /// Coordinate range of block `k`.
    pub fn range(&self, k: usize) -> core::ops::Range<usize> {
        self.offsets[k]..self.offsets[k + 1]
    }

    pub fn n_blocks(&self) -> usize {
        self.blocks.len()
    }
}

impl LinearMap for BlockDiagonal {
    fn nrows(&self) -> usize {
        *self.offsets.last().unwrap()
    }
    fn ncols(&self) -> usize {
        self.nrows()
    }
    fn apply_into(&self, x: &[f64], y: &mut [f64]) {
        for (k, b) in self.blocks.iter().enumerate() {
            let r = self.range(k);
            b.apply_into(&x[r.clone()], &mut y[r]);
        }
    }
}

impl SpdOperator for BlockDiagonal {
    fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        check_len("block diagonal solve", self.nrows(), rhs.len())?;
        let mut out = Vec::with_capacity(rhs.len());
        for (k, b) in self.blocks.iter().enumerate() {
            out.extend(b.solve(&rhs[self.range(k)])?);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm2, sub, to_dense};

    #[test]
    fn tridiagonal_solve_inverts_apply() {
        let n = 9;
        let t = SymTridiagonal::new(vec![4.0; n], vec![1.0; n - 1]).unwrap();
        let x: Vec<f64> = (0..n).map(|i| i as f64 - 3.0).collect();
        let y = t.solve(&t.apply(&x)).unwrap();
        assert!(norm2(&sub(&x, &y)) < 1e-13);
        let dense = to_dense(&t);
        assert_eq!(dense[(2, 3)], 1.0);
        assert_eq!(dense[(2, 4)], 0.0);
    }

    #[test]
    fn tridiagonal_rejects_indefinite() {
        assert!(matches!(
            SymTridiagonal::new(vec![1.0, 1.0], vec![2.0]),
            Err(Error::NotPositiveDefinite { pivot: 1 })
        ));
    }

    #[test]
    fn block_diagonal_layout() {
        let b = BlockDiagonal::new(vec![
            Box::new(SymTridiagonal::new(vec![2.0, 2.0], vec![0.5]).unwrap()),
            Box::new(Identity(1)),
        ]);
        assert_eq!(b.nrows(), 3);
        assert_eq!(b.range(1), 2..3);
        let y = b.apply(&[1.0, 1.0, 5.0]);
        assert_eq!(y, vec![2.5, 2.5, 5.0]);
        assert_eq!(b.solve(&y).unwrap(), vec![1.0, 1.0, 5.0]);
    }
}
