//! The `run`, `verify` and `report` commands.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use hdsa_core::hdsa::{
    alternative_formulation, dense_oracle, global_analysis, perturbation_check, randomized_geneig, HdsaReport,
    KktOperator, SensitivityOperator,
};
use hdsa_core::linalg::{norm2, SpdOperator};
use hdsa_core::optimizer::{sample_inputs, solve_optimization};
use hdsa_core::problems::{check_derivatives, Problem};

use crate::bundle::{self, Manifest, OracleComparison};
use crate::config::{RunConfig, SEED_ENV};
use crate::{CliError, RayonExecutor};

fn compute(e: impl std::fmt::Display) -> CliError {
    CliError::Compute(e.to_string())
}

#[derive(Debug)]
pub struct RunOutcome {
    pub dir: PathBuf,
    pub report: HdsaReport,
    /// Rendered summary of the written bundle.
    pub summary: String,
}

impl RunOutcome {
    pub fn failed(&self) -> bool {
        !self.report.failures.is_empty()
    }
}

fn prepare_dir(dir: &Path, force: bool) -> Result<(), CliError> {
    if dir.exists() {
        let mut entries = fs::read_dir(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))?;
        if entries.next().is_some() {
            if !force {
                return Err(CliError::Usage(format!(
                    "output directory {} is not empty (use --force to replace the bundle)",
                    dir.display()
                )));
            }
            for f in bundle::FILES {
                let p = dir.join(f);
                if p.exists() {
                    fs::remove_file(&p).map_err(|e| CliError::Usage(format!("{}: {e}", p.display())))?;
                }
            }
        }
    }
    fs::create_dir_all(dir).map_err(|e| CliError::Usage(format!("{}: {e}", dir.display())))
}

fn oracle_comparisons(
    problem: &dyn Problem,
    report: &HdsaReport,
    cfg: &RunConfig,
    exec: &RayonExecutor,
) -> Result<Vec<OracleComparison>, CliError> {
    let spaces = problem.spaces();
    report
        .samples
        .iter()
        .map(|s| {
            let kkt = KktOperator::new(problem, &s.optimal, cfg.kkt.clone()).map_err(compute)?;
            let d = SensitivityOperator::new(kkt);
            let oracle = dense_oracle(
                &d,
                spaces.m_theta.as_ref(),
                spaces.m_z.as_ref(),
                cfg.kkt.dense_threshold,
                exec,
            )
            .map_err(compute)?;
            let err = s
                .triples
                .iter()
                .zip(&oracle)
                .map(|(t, o)| (t.sigma - o.sigma).abs() / o.sigma.max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            Ok(OracleComparison {
                j: s.j,
                max_sigma_rel_error: err,
                oracle_sigma: oracle.iter().take(s.triples.len()).map(|t| t.sigma).collect(),
            })
        })
        .collect()
}

/// Runs the global analysis and writes a bundle.
///
/// The output directory is `out`, else the configured one. It must be
/// empty unless `force` is set.
pub fn cmd_run(config: &Path, out: Option<&Path>, force: bool, workers: Option<usize>) -> Result<RunOutcome, CliError> {
    let cfg = RunConfig::load(config)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output_dir.clone())
        .ok_or_else(|| CliError::Usage("no output directory: set output_dir or pass --out".into()))?;
    prepare_dir(&dir, force)?;
    let exec = RayonExecutor::new(workers).map_err(|e| CliError::Usage(e.to_string()))?;
    let problem = cfg.problem().map_err(|e| CliError::Usage(e.to_string()))?;
    let started = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let clock = Instant::now();
    let report = global_analysis(problem.as_ref(), &cfg.plan(), &cfg.hdsa(), &exec).map_err(compute)?;
    let oracle = if cfg.oracle {
        Some(oracle_comparisons(problem.as_ref(), &report, &cfg, &exec)?)
    } else {
        None
    };
    bundle::write_tables(&dir, &report, oracle.as_deref())?;
    let manifest = Manifest {
        format: bundle::FORMAT.into(),
        format_version: bundle::FORMAT_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").into(),
        problem: report.problem.clone(),
        config: cfg.clone(),
        seed: cfg.seed,
        sampling_seed: cfg.plan().seed,
        seed_from_env: std::env::var_os(SEED_ENV).is_some(),
        workers: exec.workers(),
        n_samples: cfg.n_samples,
        n_failures: report.failures.len(),
        started_unix_seconds: started,
        wall_clock_seconds: clock.elapsed().as_secs_f64(),
        files: bundle::FILES.iter().map(|f| f.to_string()).collect(),
    };
    bundle::write_manifest(&dir, &manifest)?;
    let summary = bundle::render(&bundle::load_summary(&dir)?);
    Ok(RunOutcome { dir, report, summary })
}

/// Renders the tables of an existing bundle.
pub fn cmd_report(dir: &Path) -> Result<String, CliError> {
    Ok(bundle::render(&bundle::load_summary(dir)?))
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckRow {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub rows: Vec<CheckRow>,
}

impl VerifyOutcome {
    pub fn passed(&self) -> bool {
        self.rows.iter().all(|r| r.passed)
    }

    pub fn row(&self, name: &str) -> Option<&CheckRow> {
        self.rows.iter().find(|r| r.name == name)
    }

    pub fn render(&self) -> String {
        let mut o = format!("{:<24} {:<6} {}\n", "check", "result", "detail");
        for r in &self.rows {
            let status = if r.passed { "PASS" } else { "FAIL" };
            o += &format!("{:<24} {:<6} {}\n", r.name, status, r.detail);
        }
        o
    }
}

fn row(name: &'static str, passed: bool, detail: String) -> CheckRow {
    CheckRow { name, passed, detail }
}

fn aligned_distance(m: &dyn SpdOperator, a: &[f64], b: &[f64]) -> f64 {
    let plus: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let minus: Vec<f64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
    m.norm(&plus).min(m.norm(&minus))
}

/// Derivative checks, oracle cross-validation, formulation equivalence,
/// a perturbation sweep and, when configured, the linearity check.
pub fn cmd_verify(config: &Path, workers: Option<usize>) -> Result<VerifyOutcome, CliError> {
    let cfg = RunConfig::load(config)?;
    let exec = RayonExecutor::new(workers).map_err(|e| CliError::Usage(e.to_string()))?;
    let problem = cfg.problem().map_err(|e| CliError::Usage(e.to_string()))?;
    let p = problem.as_ref();
    let v = &cfg.verify;
    let mut rows = Vec::new();

    let (theta, init) = sample_inputs(&cfg.plan(), p.dims(), 0).map_err(compute)?;
    let opt = match solve_optimization(p, &theta, &init, &cfg.optimizer) {
        Ok(o) => o,
        Err(e) => {
            rows.push(row("optimization", false, e.to_string()));
            return Ok(VerifyOutcome { rows });
        }
    };
    rows.push(row(
        "optimization",
        true,
        format!("{} iterations, gradient {:.2e}", opt.iterations, opt.grad_norm),
    ));

    match check_derivatives(p, opt.point(), v.derivative_step) {
        Ok(rep) => {
            let failed: Vec<String> = rep
                .failures()
                .map(|b| format!("{} ({:.2e} > {:.2e})", b.block, b.error, b.tolerance))
                .collect();
            let detail = if failed.is_empty() {
                format!("{} blocks", rep.blocks.len())
            } else {
                format!("failed: {}", failed.join(", "))
            };
            rows.push(row("derivatives", failed.is_empty(), detail));
        }
        Err(e) => rows.push(row("derivatives", false, e.to_string())),
    }

    let spaces = p.spaces();
    let (mt, mz) = (spaces.m_theta.as_ref(), spaces.m_z.as_ref());
    let kkt = KktOperator::new(p, &opt, cfg.kkt.clone()).map_err(compute)?;
    let d = SensitivityOperator::new(kkt);
    let eig = cfg.eig();
    let primary = randomized_geneig(&d, mt, mz, &eig, 0, &exec).map_err(compute)?;
    let k = primary.triples.len();

    match dense_oracle(&d, mt, mz, cfg.kkt.dense_threshold, &exec) {
        Ok(oracle) => {
            let sig_err = primary
                .triples
                .iter()
                .zip(&oracle)
                .map(|(t, o)| (t.sigma - o.sigma).abs() / o.sigma.max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            let gap = match oracle.get(k) {
                Some(next) if next.sigma > 0.0 => oracle[k - 1].sigma / next.sigma,
                _ => f64::INFINITY,
            };
            let vec_err = primary
                .triples
                .iter()
                .zip(&oracle)
                .map(|(t, o)| aligned_distance(mt, &t.theta_vec, &o.theta_vec).max(aligned_distance(mz, &t.z_vec, &o.z_vec)))
                .fold(0.0, f64::max);
            // Vectors are compared only across a clear spectral gap.
            let vectors_ok = gap < 10.0 || vec_err <= v.vector_tol;
            let detail = if gap < 10.0 {
                format!("sigma error {sig_err:.2e}; vectors skipped, gap {gap:.2}")
            } else {
                format!("sigma error {sig_err:.2e}, vector error {vec_err:.2e}")
            };
            rows.push(row("oracle", sig_err <= v.sigma_tol && vectors_ok, detail));
        }
        Err(e) => rows.push(row("oracle", false, e.to_string())),
    }

    match alternative_formulation(&d, mt, mz, &eig, 0, &exec) {
        Ok(alt) => {
            let err = primary
                .triples
                .iter()
                .zip(&alt.alphas)
                .map(|(t, a)| (a - t.sigma * t.sigma).abs() / (t.sigma * t.sigma).max(f64::MIN_POSITIVE))
                .fold(0.0, f64::max);
            let count_ok = alt.alphas.len() == k;
            rows.push(row(
                "alternative-formulation",
                count_ok && err <= v.sigma_tol,
                format!("{} eigenvalues, max |alpha - sigma^2| / sigma^2 = {err:.2e}", alt.alphas.len()),
            ));
        }
        Err(e) => rows.push(row("alternative-formulation", false, e.to_string())),
    }

    if let Some(lead) = primary.triples.first() {
        let mut errs = Vec::new();
        let mut detail = Vec::new();
        let mut failure = None;
        for &delta in &v.perturbation_deltas {
            match perturbation_check(&d, &lead.theta_vec, delta, &cfg.optimizer) {
                Ok(r) => {
                    errs.push((r.ratio - 1.0).abs());
                    detail.push(format!("{delta:.0e}: {:.6}", r.ratio));
                }
                Err(e) => failure = Some(e.to_string()),
            }
        }
        let passed = match (&failure, errs.last()) {
            (None, Some(last)) => {
                let decreasing = errs.windows(2).all(|w| w[1] <= w[0]);
                let exact = errs.iter().all(|e| *e <= 1e-6);
                *last <= 1e-2 && (decreasing || exact)
            }
            _ => false,
        };
        let detail = failure.unwrap_or_else(|| format!("ratios {}", detail.join(", ")));
        rows.push(row("perturbation", passed, detail));
    } else {
        rows.push(row("perturbation", false, "no singular triple retained".into()));
    }

    if v.linearity_samples > 0 {
        let mut hcfg = cfg.hdsa();
        hcfg.eig.n_samples = v.linearity_samples;
        match global_analysis(p, &cfg.plan(), &hcfg, &exec) {
            Ok(rep) if rep.failures.is_empty() => {
                let base = rep.samples[0].sigmas();
                let lead = base.first().copied().unwrap_or(0.0);
                let mut worst: f64 = 0.0;
                for s in &rep.samples[1..] {
                    for (a, b) in s.sigmas().iter().zip(&base) {
                        worst = worst.max((a - b).abs() / b.max(f64::MIN_POSITIVE));
                    }
                    for (a, b) in s.local_indices.iter().zip(&rep.samples[0].local_indices) {
                        worst = worst.max((a - b).abs() / lead.max(f64::MIN_POSITIVE));
                    }
                }
                let distinct = rep
                    .samples
                    .windows(2)
                    .all(|w| norm2(&hdsa_core::linalg::sub(&w[0].optimal.theta0, &w[1].optimal.theta0)) > 0.0);
                rows.push(row(
                    "linearity",
                    worst <= 1e-6 && distinct,
                    format!("{} samples, max relative deviation {worst:.2e}", rep.samples.len()),
                ));
            }
            Ok(rep) => rows.push(row(
                "linearity",
                false,
                format!("{} samples failed: {}", rep.failures.len(), rep.failures[0].error),
            )),
            Err(e) => rows.push(row("linearity", false, e.to_string())),
        }
    }
    Ok(VerifyOutcome { rows })
}
