//! Piecewise-linear finite elements on uniform grids of `[0, 1]`.

use alloc::vec;


use crate::linalg::SymTridiagonal;
use crate::Result;

/// P1 mass matrix on `n` nodes with spacing `h`.
///
/// With `neumann = true` the grid includes both boundary nodes (half
/// weights at the ends); otherwise the nodes are the interior nodes of a
/// homogeneous Dirichlet problem.
pub fn mass_matrix(n: usize, h: f64, neumann: bool) -> Result<SymTridiagonal> {
    let mut diag = vec![2.0 * h / 3.0; n];
    if neumann && n > 0 {
        diag[0] = h / 3.0;
        diag[n - 1] = h / 3.0;
    }
    SymTridiagonal::new(diag, vec![h / 6.0; n.saturating_sub(1)])
}

/// Hat functions on `n` equally spaced nodes covering `[0, 1]`.
#[derive(Debug, Clone)]
pub struct HatBasis {
    n: usize,
    h: f64,
}

impl HatBasis {
    pub fn new(n: usize) -> Self {
        let h = if n > 1 { 1.0 / (n - 1) as f64 } else { 1.0 };
        Self { n, h }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    /// The (at most two) nonzero basis values at `x` as `(index, value)`.
    pub fn eval(&self, x: f64) -> [(usize, f64); 2] {
        if self.n == 1 {
            return [(0, 1.0), (0, 0.0)];
        }
        let t = (x / self.h).clamp(0.0, (self.n - 1) as f64);
        let k = (crate::math::floor(t) as usize).min(self.n - 2);
        let frac = t - k as f64;
        [(k, 1.0 - frac), (k + 1, frac)]
    }

    /// `Σ_k coeffs[k] φ_k(x)`
    pub fn combine(&self, coeffs: &[f64], x: f64) -> f64 {
        self.eval(x).iter().map(|&(k, v)| coeffs[k] * v).sum()
    }

    pub fn mass_matrix(&self) -> Result<SymTridiagonal> {
        mass_matrix(self.n, self.h, true)
    }
}

/// Linear interpolation weights of point `x` on the grid `0, h, …, (n−1)h`.
pub fn interpolation_weights(n: usize, h: f64, x: f64) -> [(usize, f64); 2] {
    HatBasis { n, h }.eval(x)
}
