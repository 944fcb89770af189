use alloc::vec::Vec;

use super::sensitivity::SensitivityMap;
use super::{RandEigConfig, SingularTriple};
use crate::linalg::{
    b_orthonormalize, cholesky, dense_svd, dense_sym_eig, dot, to_dense, Matrix, SpdOperator,
};
use crate::rng::{normal_vector, Domain};
use crate::{math, Error, Executor, Result};

/// All singular triples of `D` from the dense matrix `R_Z D R_Θ⁻¹`, where
/// `Rᵀ R = M` are Cholesky factors of the weightings.
///
/// Builds `D` with one application per parameter coordinate; refuses when
/// `m + n` exceeds `dense_threshold`.
pub fn dense_oracle<E: Executor>(
    d: &dyn SensitivityMap,
    m_theta: &dyn SpdOperator,
    m_z: &dyn SpdOperator,
    dense_threshold: usize,
    exec: &E,
) -> Result<Vec<SingularTriple>> {
    let (m, n) = (d.n_z(), d.n_theta());
    if m + n > dense_threshold {
        return Err(Error::DenseThresholdExceeded {
            dim: m + n,
            threshold: dense_threshold,
        });
    }
    let cols: Vec<Vec<f64>> = exec
        .map_indexed(n, |j| d.apply(&crate::linalg::unit(n, j)))
        .into_iter()
        .collect::<Result<_>>()?;
    let dmat = Matrix::from_columns(m, &cols);
    let rz = cholesky(&to_dense(m_z))?;
    let rt = cholesky(&to_dense(m_theta))?;
    let c = rz.factor().matmul(&dmat);
    // W = C R_Θ⁻¹, one row at a time: Wᵢ = R_Θ⁻ᵀ Cᵢ.
    let rows: Vec<Vec<f64>> = (0..m).map(|i| rt.solve_rt(c.row(i))).collect();
    let w = Matrix::from_fn(m, n, |i, j| rows[i][j]);
    let svd = dense_svd(&w)?;
    let triples = svd
        .s
        .iter()
        .enumerate()
        .map(|(k, &sigma)| {
            let mut theta_vec = rt.solve_r(&svd.v.column(k));
            let mut z_vec = rz.solve_r(&svd.u.column(k));
            let (nt, nz) = (m_theta.norm(&theta_vec), m_z.norm(&z_vec));
            crate::linalg::scale(1.0 / nt, &mut theta_vec);
            crate::linalg::scale(1.0 / nz, &mut z_vec);
            SingularTriple {
                sigma,
                theta_vec,
                z_vec,
            }
            .canonical()
        })
        .collect();
    Ok(triples)
}

/// Eigenpairs of `Dᵀ M_Z D θ = α M_Θ θ` with left vectors `zₖ = D θₖ / σₖ`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AlternativeResult {
    /// `α = σ²`, descending.
    pub alphas: Vec<f64>,
    pub triples: Vec<SingularTriple>,
}

/// Randomized solve of the `n × n` pencil `(Dᵀ M_Z D, M_Θ)` with the same
/// probe budget as the primary formulation, capped at `n`.
pub fn alternative_formulation<E: Executor>(
    d: &dyn SensitivityMap,
    m_theta: &dyn SpdOperator,
    m_z: &dyn SpdOperator,
    cfg: &RandEigConfig,
    sample: u64,
    exec: &E,
) -> Result<AlternativeResult> {
    cfg.validate()?;
    let n = d.n_theta();
    let probes = cfg.probes(n);
    let gram = |x: &[f64]| -> Result<Vec<f64>> { d.apply_t(&m_z.apply(&d.apply(x)?)) };

    let y: Vec<Vec<f64>> = exec
        .map_indexed(probes, |i| {
            let x = normal_vector(cfg.seed, Domain::Probe, sample, i as u64, n);
            gram(&x).and_then(|g| m_theta.solve(&g))
        })
        .into_iter()
        .collect::<Result<_>>()?;
    let q = b_orthonormalize(&y, m_theta)?.q;
    let r = q.len();
    let gq: Vec<Vec<f64>> = exec
        .map_indexed(r, |i| gram(&q[i]))
        .into_iter()
        .collect::<Result<_>>()?;
    let t = Matrix::from_fn(r, r, |i, j| dot(&q[i], &gq[j])).symmetrized();
    let eig = dense_sym_eig(&t)?;
    let top = eig.values.first().copied().unwrap_or(0.0).max(0.0);

    let mut alphas = Vec::new();
    let mut thetas = Vec::new();
    for (k, &alpha) in eig.values.iter().enumerate() {
        if alphas.len() == cfg.k_pairs || !(alpha > 1e-12 * top) {
            break;
        }
        let v = eig.vectors.column(k);
        let mut theta = alloc::vec![0.0; n];
        for (qi, vi) in q.iter().zip(&v) {
            crate::linalg::axpy(*vi, qi, &mut theta);
        }
        let nt = m_theta.norm(&theta);
        crate::linalg::scale(1.0 / nt, &mut theta);
        alphas.push(alpha);
        thetas.push(theta);
    }
    let zs: Vec<Vec<f64>> = exec
        .map_indexed(thetas.len(), |k| d.apply(&thetas[k]))
        .into_iter()
        .collect::<Result<_>>()?;
    let triples = thetas
        .into_iter()
        .zip(zs)
        .zip(&alphas)
        .map(|((theta_vec, dz), &alpha)| {
            let sigma = math::sqrt(alpha);
            SingularTriple {
                sigma,
                theta_vec,
                z_vec: dz.iter().map(|x| x / sigma).collect(),
            }
            .canonical()
        })
        .collect();
    Ok(AlternativeResult { alphas, triples })
}
