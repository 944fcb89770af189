//! Run configuration: a single JSON document, validated before any work.

use std::path::{Path, PathBuf};

use hdsa_core::hdsa::{HdsaConfig, KktConfig, RandEigConfig, SetIndexMode};
use hdsa_core::optimizer::{IterateMode, OptimizerConfig, SamplingPlan, ThetaDistribution};
use hdsa_core::problems::{
    AdvDiffConfig, AdvDiffInversion1d, CorruptedThetaJacobian, DiffusionConfig, DiffusionControl1d, LogisticToy,
    ParamSet, Problem, SetPartition,
};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "HDSA_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ProblemConfig {
    LogisticToy(LogisticSection),
    DiffusionControl(DiffusionConfig),
    AdvdiffInversion(AdvDiffConfig),
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LogisticSection {}

impl ProblemConfig {
    pub fn build(&self) -> hdsa_core::Result<Box<dyn Problem>> {
        Ok(match self {
            Self::LogisticToy(_) => Box::new(LogisticToy::new()),
            Self::DiffusionControl(c) => Box::new(DiffusionControl1d::new(c.clone())?),
            Self::AdvdiffInversion(c) => Box::new(AdvDiffInversion1d::new(c.clone())?),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplingSection {
    pub theta: Vec<ThetaDistribution>,
    pub iterate: IterateMode,
    pub iterate_scale: f64,
    /// Overrides the top-level seed for the draws of `(θ, I)` only.
    pub seed: Option<u64>,
}

impl Default for SamplingSection {
    fn default() -> Self {
        let plan = SamplingPlan::default();
        Self {
            theta: plan.theta,
            iterate: plan.iterate,
            iterate_scale: plan.iterate_scale,
            seed: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartitionEntry {
    pub name: String,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifySection {
    /// Finite-difference step of the derivative checks.
    pub derivative_step: f64,
    /// Perturbation sizes, largest first.
    pub perturbation_deltas: Vec<f64>,
    /// Number of parameter samples compared by the linearity check; 0 skips it.
    pub linearity_samples: usize,
    /// Test fixture: scale `c_θ` by `1 + eps` so that the derivative check fails.
    pub corrupt_theta_jacobian: Option<f64>,
    pub sigma_tol: f64,
    pub vector_tol: f64,
}

impl Default for VerifySection {
    fn default() -> Self {
        Self {
            derivative_step: 1e-4,
            perturbation_deltas: vec![1e-2, 1e-3, 1e-4],
            linearity_samples: 0,
            corrupt_theta_jacobian: None,
            sigma_tol: 1e-6,
            vector_tol: 1e-5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub problem: ProblemConfig,
    /// Master seed for probes and, unless overridden, sampling.
    pub seed: u64,
    pub n_samples: usize,
    pub k_pairs: usize,
    pub oversampling: usize,
    pub sampling: SamplingSection,
    pub optimizer: OptimizerConfig,
    pub kkt: KktConfig,
    pub set_index_mode: SetIndexMode,
    pub partition: Option<Vec<PartitionEntry>>,
    pub output_dir: Option<PathBuf>,
    /// Cross-check every sample against the dense oracle.
    pub oracle: bool,
    pub verify: VerifySection,
}

impl Default for RunConfig {
    fn default() -> Self {
        let eig = RandEigConfig::default();
        Self {
            problem: ProblemConfig::LogisticToy(LogisticSection {}),
            seed: 0,
            n_samples: eig.n_samples,
            k_pairs: eig.k_pairs,
            oversampling: eig.oversampling,
            sampling: SamplingSection::default(),
            optimizer: OptimizerConfig::default(),
            kkt: KktConfig::default(),
            set_index_mode: SetIndexMode::default(),
            partition: None,
            output_dir: None,
            oracle: false,
            verify: VerifySection::default(),
        }
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Usage(format!("config: {e}")))
    }

    /// Reads, applies the seed environment override, and validates.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seed = v
                .trim()
                .parse()
                .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v:?} is not an unsigned integer")))?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn eig(&self) -> RandEigConfig {
        RandEigConfig {
            k_pairs: self.k_pairs,
            oversampling: self.oversampling,
            seed: self.seed,
            n_samples: self.n_samples,
        }
    }

    pub fn plan(&self) -> SamplingPlan {
        SamplingPlan {
            theta: self.sampling.theta.clone(),
            iterate: self.sampling.iterate,
            iterate_scale: self.sampling.iterate_scale,
            seed: self.sampling.seed.unwrap_or(self.seed),
        }
    }

    pub fn hdsa(&self) -> HdsaConfig {
        HdsaConfig {
            eig: self.eig(),
            optimizer: self.optimizer.clone(),
            kkt: self.kkt.clone(),
            set_index_mode: self.set_index_mode,
            partition: self.partition.as_ref().map(|sets| SetPartition {
                sets: sets
                    .iter()
                    .map(|s| ParamSet {
                        name: s.name.clone(),
                        range: s.start..s.end,
                    })
                    .collect(),
            }),
        }
    }

    pub fn problem(&self) -> hdsa_core::Result<Box<dyn Problem>> {
        let p = self.problem.build()?;
        Ok(match self.verify.corrupt_theta_jacobian {
            Some(eps) => Box::new(CorruptedThetaJacobian::new(p, eps)),
            None => p,
        })
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let usage = |e: hdsa_core::Error| CliError::Usage(e.to_string());
        let problem = self.problem().map_err(usage)?;
        let n_theta = problem.dims().n_theta;
        self.eig().validate().map_err(usage)?;
        self.plan().validate(n_theta).map_err(usage)?;
        if let Some(sets) = &self.hdsa().partition {
            SetPartition::new(sets.sets.clone(), n_theta).map_err(usage)?;
        }
        if !(self.sampling.iterate_scale >= 0.0) {
            return Err(CliError::Usage("sampling.iterate_scale must be non-negative".into()));
        }
        let v = &self.verify;
        if !(1e-7..=1e-2).contains(&v.derivative_step) {
            return Err(CliError::Usage("verify.derivative_step must lie in [1e-7, 1e-2]".into()));
        }
        if v.perturbation_deltas.iter().any(|d| !(*d > 0.0)) {
            return Err(CliError::Usage("verify.perturbation_deltas must be positive".into()));
        }
        if !(v.sigma_tol > 0.0 && v.vector_tol > 0.0) {
            return Err(CliError::Usage("verify tolerances must be positive".into()));
        }
        Ok(())
    }
}
