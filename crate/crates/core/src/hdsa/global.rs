use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::geneig::randomized_geneig;
use super::indices::{local_indices, set_indices, set_indices_direct};
use super::kkt::{KktConfig, KktOperator, KktStats, KktStrategy};
use super::sensitivity::SensitivityOperator;
use super::{RandEigConfig, SingularTriple};
use crate::optimizer::{sample_inputs, solve_optimization, OptimalPoint, OptimizerConfig, SamplingPlan};
use crate::problems::{Problem, SetPartition};
use crate::{math, Executor, Result};

/// How set indices are computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum SetIndexMode {
    /// From the retained triples.
    #[default]
    Truncated,
    /// One extra randomized solve of `D Π` per set.
    Direct,
}

#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct HdsaConfig {
    pub eig: RandEigConfig,
    pub optimizer: OptimizerConfig,
    pub kkt: KktConfig,
    pub set_index_mode: SetIndexMode,
    /// Replaces the problem's own parameter partition.
    pub partition: Option<SetPartition>,
}

/// Everything computed for one parameter sample.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleResult {
    pub j: usize,
    pub optimal: OptimalPoint,
    pub triples: Vec<SingularTriple>,
    pub local_indices: Vec<f64>,
    pub set_indices: Vec<f64>,
    pub rank_deficient: bool,
    /// `σ_K / σ₁` over the retained triples.
    pub decay_ratio: f64,
    pub kkt_strategy: KktStrategy,
    pub kkt: KktStats,
}

impl SampleResult {
    pub fn sigmas(&self) -> Vec<f64> {
        self.triples.iter().map(|t| t.sigma).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SampleFailure {
    pub j: usize,
    pub theta: Vec<f64>,
    pub error: String,
}

/// Per-index mean and population standard deviation over the samples
/// that have the index.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct IndexStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl IndexStats {
    fn from_rows<'r>(rows: impl Iterator<Item = &'r [f64]> + Clone) -> Self {
        let len = rows.clone().map(|r| r.len()).max().unwrap_or(0);
        let mut mean = Vec::with_capacity(len);
        let mut std = Vec::with_capacity(len);
        for i in 0..len {
            let vals: Vec<f64> = rows.clone().filter_map(|r| r.get(i).copied()).collect();
            let n = vals.len() as f64;
            let mu = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / n;
            mean.push(mu);
            std.push(math::sqrt(var));
        }
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct HdsaReport {
    pub problem: String,
    pub set_names: Vec<String>,
    pub samples: Vec<SampleResult>,
    pub failures: Vec<SampleFailure>,
    pub sigma: IndexStats,
    /// Monte Carlo estimate of the global local-index function.
    pub local: IndexStats,
    pub sets: IndexStats,
}

fn analyze_sample<E: Executor>(
    problem: &dyn Problem,
    j: usize,
    theta: &[f64],
    init: &crate::optimizer::InitialIterate,
    partition: Option<&SetPartition>,
    cfg: &HdsaConfig,
    exec: &E,
) -> Result<SampleResult> {
    let optimal = solve_optimization(problem, theta, init, &cfg.optimizer)?;
    let kkt = KktOperator::new(problem, &optimal, cfg.kkt.clone())?;
    let d = SensitivityOperator::new(kkt);
    let spaces = problem.spaces();
    let eig = randomized_geneig(
        &d,
        spaces.m_theta.as_ref(),
        spaces.m_z.as_ref(),
        &cfg.eig,
        j as u64,
        exec,
    )?;
    let local = local_indices(&eig.triples, spaces.m_theta.as_ref());
    let sets = match (partition, cfg.set_index_mode) {
        (None, _) => Vec::new(),
        (Some(part), SetIndexMode::Truncated) => set_indices(&eig.triples, spaces.m_theta.as_ref(), part)?,
        (Some(part), SetIndexMode::Direct) => set_indices_direct(
            &d,
            spaces.m_theta.as_ref(),
            spaces.m_z.as_ref(),
            part,
            &cfg.eig,
            j as u64,
            exec,
        )?,
    };
    let decay_ratio = match (eig.triples.first(), eig.triples.last()) {
        (Some(a), Some(b)) if a.sigma > 0.0 => b.sigma / a.sigma,
        _ => 0.0,
    };
    let kkt_strategy = d.kkt().strategy();
    let kkt = d.kkt().stats();
    drop(d);
    Ok(SampleResult {
        j,
        optimal,
        triples: eig.triples,
        local_indices: local,
        set_indices: sets,
        rank_deficient: eig.rank_deficient,
        decay_ratio,
        kkt_strategy,
        kkt,
    })
}

/// Runs the full analysis for `cfg.eig.n_samples` samples of `(θ, I)`.
///
/// Samples whose optimization or sensitivity computation fails are
/// recorded as failures and left out of the aggregates. The report is a
/// deterministic function of the configuration and seeds.
pub fn global_analysis<E: Executor>(
    problem: &dyn Problem,
    plan: &SamplingPlan,
    cfg: &HdsaConfig,
    exec: &E,
) -> Result<HdsaReport> {
    cfg.eig.validate()?;
    let dims = problem.dims();
    plan.validate(dims.n_theta)?;
    let partition = match &cfg.partition {
        Some(p) => Some(SetPartition::new(p.sets.clone(), dims.n_theta)?),
        None => problem.spaces().partition.clone(),
    };
    let inputs: Vec<_> = (0..cfg.eig.n_samples)
        .map(|j| sample_inputs(plan, dims, j))
        .collect::<Result<_>>()?;
    let outcomes = exec.map_indexed(inputs.len(), |j| {
        let (theta, init) = &inputs[j];
        analyze_sample(problem, j, theta, init, partition.as_ref(), cfg, exec)
    });
    let mut samples = Vec::new();
    let mut failures = Vec::new();
    for (j, out) in outcomes.into_iter().enumerate() {
        match out {
            Ok(s) => samples.push(s),
            Err(e) => failures.push(SampleFailure {
                j,
                theta: inputs[j].0.clone(),
                error: e.to_string(),
            }),
        }
    }
    let sigmas: Vec<Vec<f64>> = samples.iter().map(|s| s.sigmas()).collect();
    let set_names = partition
        .as_ref()
        .map(|p| p.sets.iter().map(|s| s.name.clone()).collect())
        .unwrap_or_default();
    Ok(HdsaReport {
        problem: problem.name().into(),
        set_names,
        sigma: IndexStats::from_rows(sigmas.iter().map(|s| s.as_slice())),
        local: IndexStats::from_rows(samples.iter().map(|s| s.local_indices.as_slice())),
        sets: IndexStats::from_rows(samples.iter().map(|s| s.set_indices.as_slice())),
        samples,
        failures,
    })
}
