use alloc::vec;
use alloc::vec::Vec;

use super::geneig::randomized_geneig;
use super::sensitivity::{Projected, SensitivityMap};
use super::{RandEigConfig, SingularTriple};
use crate::linalg::{dense_sym_eig, dot, LinearMap, Matrix, SpdOperator};
use crate::problems::SetPartition;
use crate::{math, Error, Executor, Result};

/// `Ŝᵢ = √(Σₖ σₖ² ((M_Θ θₖ)ᵢ)²)` for every parameter coordinate.
///
/// With a complete set of triples this is `‖D eᵢ‖_Z`; basis functions are
/// taken as they are, so indices scale with `‖eᵢ‖_Θ`.
pub fn local_indices(triples: &[SingularTriple], m_theta: &dyn LinearMap) -> Vec<f64> {
    let n = m_theta.nrows();
    let mut acc = vec![0.0; n];
    for t in triples {
        let mt = m_theta.apply(&t.theta_vec);
        for (a, x) in acc.iter_mut().zip(mt) {
            *a += t.sigma * t.sigma * x * x;
        }
    }
    acc.into_iter().map(math::sqrt).collect()
}

/// Relative cross-set coupling in `M_Θ` above which set indices are refused.
const COUPLING_TOL: f64 = 1e-12;

fn check_orthogonal(partition: &SetPartition, m_theta: &dyn LinearMap) -> Result<()> {
    let coupling = partition.coupling(m_theta);
    if coupling > COUPLING_TOL {
        return Err(Error::NonOrthogonalPartition { coupling });
    }
    Ok(())
}

/// Largest singular value of `φ ↦ Σₖ σₖ zₖ (θₖ, Π φ)_Θ` for each set.
///
/// Requires the sets to be mutually `M_Θ`-orthogonal.
pub fn set_indices(
    triples: &[SingularTriple],
    m_theta: &dyn LinearMap,
    partition: &SetPartition,
) -> Result<Vec<f64>> {
    check_orthogonal(partition, m_theta)?;
    let k = triples.len();
    let mut out = Vec::with_capacity(partition.sets.len());
    for set in &partition.sets {
        let projected: Vec<Vec<f64>> = triples
            .iter()
            .map(|t| {
                let mut v = vec![0.0; t.theta_vec.len()];
                v[set.range.clone()].copy_from_slice(&t.theta_vec[set.range.clone()]);
                v
            })
            .collect();
        let m_projected: Vec<Vec<f64>> = projected.iter().map(|v| m_theta.apply(v)).collect();
        if k == 0 {
            out.push(0.0);
            continue;
        }
        let s = Matrix::from_fn(k, k, |a, b| {
            triples[a].sigma * triples[b].sigma * dot(&projected[a], &m_projected[b])
        })
        .symmetrized();
        let top = dense_sym_eig(&s)?.values[0];
        out.push(math::sqrt(top.max(0.0)));
    }
    Ok(out)
}

/// Set indices as the leading singular value of `D Π` for each set, each
/// computed with its own randomized solve.
pub fn set_indices_direct<E: Executor>(
    d: &dyn SensitivityMap,
    m_theta: &dyn SpdOperator,
    m_z: &dyn SpdOperator,
    partition: &SetPartition,
    cfg: &RandEigConfig,
    sample: u64,
    exec: &E,
) -> Result<Vec<f64>> {
    check_orthogonal(partition, m_theta)?;
    let one = RandEigConfig {
        k_pairs: 1,
        ..cfg.clone()
    };
    partition
        .sets
        .iter()
        .map(|set| {
            let dp = Projected::new(d, set.range.clone());
            let r = randomized_geneig(&dp, m_theta, m_z, &one, sample, exec)?;
            Ok(r.triples.first().map_or(0.0, |t| t.sigma))
        })
        .collect()
}
