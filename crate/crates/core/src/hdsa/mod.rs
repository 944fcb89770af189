//! Sensitivity of the optimal solution with respect to the parameters.
//!
//! At a verified optimum the derivative of `z_opt` with respect to `θ` is
//! `D = 𝒫 𝒦⁻¹ ℬ`, where `𝒦` is the KKT operator, `ℬ` the negated mixed
//! Lagrangian derivatives and `𝒫` extracts the `z` block. Its leading
//! singular triples in the `M_Z` and `M_Θ` inner products are computed from
//! the symmetric pencil
//!
//! ```text
//! A = [[0, M_Z D], [Dᵀ M_Z, 0]],  B = blockdiag(M_Z, M_Θ)
//! ```
//!
//! whose positive eigenvalues are the singular values of `D`.

use alloc::vec::Vec;

mod diagnostics;
mod geneig;
mod global;
mod indices;
mod kkt;
mod oracle;
mod sensitivity;

pub use diagnostics::{perturbation_check, traditional_comparison, Perturbation};
pub use geneig::{apply_pencil_a, randomized_geneig, GenEig};
pub use global::{global_analysis, HdsaConfig, HdsaReport, IndexStats, SampleFailure, SampleResult, SetIndexMode};
pub use indices::{local_indices, set_indices, set_indices_direct};
pub use kkt::{KktConfig, KktOperator, KktStats, KktStrategy};
pub use oracle::{alternative_formulation, dense_oracle, AlternativeResult};
pub use sensitivity::{DenseSensitivity, Projected, SensitivityMap, SensitivityOperator};

/// Settings of the randomized eigensolver and the sample count.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct RandEigConfig {
    /// Number of singular pairs `K`.
    pub k_pairs: usize,
    /// Oversampling `L`.
    pub oversampling: usize,
    pub seed: u64,
    /// Number of parameter samples `N`.
    pub n_samples: usize,
}

impl Default for RandEigConfig {
    fn default() -> Self {
        Self {
            k_pairs: 4,
            oversampling: 8,
            seed: 0,
            n_samples: 1,
        }
    }
}

impl RandEigConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.k_pairs == 0 {
            return Err(crate::Error::InvalidConfig("k_pairs must be at least 1".into()));
        }
        if self.n_samples == 0 {
            return Err(crate::Error::InvalidConfig("n_samples must be at least 1".into()));
        }
        Ok(())
    }

    /// Probe count `2K + L`, capped at the pencil dimension.
    pub fn probes(&self, pencil_dim: usize) -> usize {
        (2 * self.k_pairs + self.oversampling).min(pencil_dim)
    }
}

/// `D θ = σ z` with `‖θ‖_{M_Θ} = ‖z‖_{M_Z} = 1`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SingularTriple {
    pub sigma: f64,
    pub theta_vec: Vec<f64>,
    pub z_vec: Vec<f64>,
}

impl SingularTriple {
    // Flips signs so the largest-magnitude entry of θ is positive.
    pub(crate) fn canonical(mut self) -> Self {
        let pivot = self
            .theta_vec
            .iter()
            .copied()
            .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if pivot < 0.0 {
            crate::linalg::scale(-1.0, &mut self.theta_vec);
            crate::linalg::scale(-1.0, &mut self.z_vec);
        }
        self
    }
}
