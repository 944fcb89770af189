use alloc::vec::Vec;

use super::sensitivity::SensitivityMap;
use super::{RandEigConfig, SingularTriple};
use crate::linalg::{b_orthonormalize, dense_sym_eig, dot, FnMap, Matrix, SpdOperator};
use crate::rng::{normal_vector, Domain};
use crate::{Executor, Result};

/// Output of [`randomized_geneig`].
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenEig {
    /// Leading triples, `σ` descending; at most `K`.
    pub triples: Vec<SingularTriple>,
    /// Fewer than `K` eigenvalues exceeded `1e-12 · λ_max`.
    pub rank_deficient: bool,
    /// Full Rayleigh–Ritz spectrum of the projected pencil, descending.
    pub ritz_values: Vec<f64>,
    pub probes: usize,
    /// Probe images dropped as numerically dependent during orthonormalization.
    pub dropped: usize,
}

impl GenEig {
    pub fn sigmas(&self) -> Vec<f64> {
        self.triples.iter().map(|t| t.sigma).collect()
    }
}

/// `A (z̃, θ̃) = (M_Z D θ̃, Dᵀ M_Z z̃)`, one application each of `D` and `Dᵀ`.
pub fn apply_pencil_a(d: &dyn SensitivityMap, m_z: &dyn SpdOperator, x: &[f64]) -> Result<Vec<f64>> {
    let m = d.n_z();
    crate::linalg::check_len("pencil vector", m + d.n_theta(), x.len())?;
    let (zt, tt) = x.split_at(m);
    let mut ax = m_z.apply(&d.apply(tt)?);
    ax.extend_from_slice(&d.apply_t(&m_z.apply(zt))?);
    Ok(ax)
}

// (A x, B⁻¹ A x)
fn pencil_apply(
    d: &dyn SensitivityMap,
    m_theta: &dyn SpdOperator,
    m_z: &dyn SpdOperator,
    x: &[f64],
) -> Result<(Vec<f64>, Vec<f64>)> {
    let m = d.n_z();
    let (zt, tt) = x.split_at(m);
    let dz = d.apply(tt)?;
    let dtmz = d.apply_t(&m_z.apply(zt))?;
    let mut ax = m_z.apply(&dz);
    ax.extend_from_slice(&dtmz);
    let mut binv_ax = dz;
    binv_ax.extend_from_slice(&m_theta.solve(&dtmz)?);
    Ok((ax, binv_ax))
}

/// Leading singular triples of `D` in the `M_Θ`/`M_Z` inner products by a
/// single-pass randomized solve of the pencil
/// `A = [[0, M_Z D], [Dᵀ M_Z, 0]]`, `B = blockdiag(M_Z, M_Θ)`.
///
/// Probe `i` of sample `sample` is drawn from the stream keyed by
/// `(cfg.seed, sample, i)`. Pencil applications run on `exec`; results are
/// gathered by index so the outcome does not depend on the executor.
pub fn randomized_geneig<E: Executor>(
    d: &dyn SensitivityMap,
    m_theta: &dyn SpdOperator,
    m_z: &dyn SpdOperator,
    cfg: &RandEigConfig,
    sample: u64,
    exec: &E,
) -> Result<GenEig> {
    cfg.validate()?;
    let (m, n) = (d.n_z(), d.n_theta());
    crate::linalg::check_len("parameter weighting", n, m_theta.dim())?;
    crate::linalg::check_len("optimization-variable weighting", m, m_z.dim())?;
    let dim = m + n;
    let probes = cfg.probes(dim);

    let pencil = |x: &[f64]| pencil_apply(d, m_theta, m_z, x);

    let y: Vec<Vec<f64>> = exec
        .map_indexed(probes, |i| {
            let x = normal_vector(cfg.seed, Domain::Probe, sample, i as u64, dim);
            pencil(&x).map(|r| r.1)
        })
        .into_iter()
        .collect::<Result<_>>()?;

    let b = FnMap::new(dim, dim, |x: &[f64], out: &mut [f64]| {
        m_z.apply_into(&x[..m], &mut out[..m]);
        m_theta.apply_into(&x[m..], &mut out[m..]);
    });
    let basis = b_orthonormalize(&y, &b)?;
    let q = basis.q;
    let r = q.len();

    let aq: Vec<Vec<f64>> = exec
        .map_indexed(r, |i| pencil(&q[i]).map(|r| r.0))
        .into_iter()
        .collect::<Result<_>>()?;
    let t = Matrix::from_fn(r, r, |i, j| dot(&q[i], &aq[j])).symmetrized();
    let eig = dense_sym_eig(&t)?;

    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);
    let mut triples = Vec::new();
    for (k, &lam) in eig.values.iter().enumerate() {
        if triples.len() == cfg.k_pairs || !(lam > 1e-12 * top) {
            break;
        }
        let v = eig.vectors.column(k);
        let mut w = alloc::vec![0.0; dim];
        for (qi, vi) in q.iter().zip(&v) {
            crate::linalg::axpy(*vi, qi, &mut w);
        }
        let (wz, wt) = w.split_at(m);
        let (nz, nt) = (m_z.norm(wz), m_theta.norm(wt));
        if !(nz > 0.0 && nt > 0.0) {
            break;
        }
        triples.push(
            SingularTriple {
                sigma: lam,
                theta_vec: wt.iter().map(|x| x / nt).collect(),
                z_vec: wz.iter().map(|x| x / nz).collect(),
            }
            .canonical(),
        );
    }
    Ok(GenEig {
        rank_deficient: triples.len() < cfg.k_pairs,
        triples,
        ritz_values: eig.values,
        probes,
        dropped: basis.dropped,
    })
}
