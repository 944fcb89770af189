use alloc::vec::Vec;

use super::{axpy, check_len, dot, LinearMap};
use crate::{math, Result};

/// Columns that are orthonormal in the `B` inner product, together with
/// their images under `B`.
#[derive(Debug, Clone)]
pub struct BOrthonormal {
    pub q: Vec<Vec<f64>>,
    pub bq: Vec<Vec<f64>>,
    /// Input columns dropped as numerically dependent.
    pub dropped: usize,
}

/// Two-pass modified Gram–Schmidt in the `B` inner product.
///
/// A column whose `B`-norm after projection falls below `1e-10` times its
/// original `B`-norm is dropped.
pub fn b_orthonormalize(vectors: &[Vec<f64>], b: &dyn LinearMap) -> Result<BOrthonormal> {
    let n = b.nrows();
    check_len("b_orthonormalize operator", n, b.ncols())?;
    let mut q: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    let mut bq: Vec<Vec<f64>> = Vec::with_capacity(vectors.len());
    let mut dropped = 0;
    for v in vectors {
        check_len("b_orthonormalize vector", n, v.len())?;
        let mut w = v.clone();
        let original = math::sqrt(dot(&w, &b.apply(&w)).max(0.0));
        if original == 0.0 {
            dropped += 1;
            continue;
        }
        for _pass in 0..2 {
            for (qi, bqi) in q.iter().zip(&bq) {
                let c = dot(bqi, &w);
                axpy(-c, qi, &mut w);
            }
        }
        let mut bw = b.apply(&w);
        let nrm = math::sqrt(dot(&w, &bw).max(0.0));
        if nrm < 1e-10 * original {
            dropped += 1;
            continue;
        }
        let inv = 1.0 / nrm;
        w.iter_mut().for_each(|x| *x *= inv);
        bw.iter_mut().for_each(|x| *x *= inv);
        q.push(w);
        bq.push(bw);
    }
    Ok(BOrthonormal { q, bq, dropped })
}
