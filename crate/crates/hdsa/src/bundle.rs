//! Result bundle: a manifest, the full report as JSON, and flat CSV tables.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use hdsa_core::hdsa::HdsaReport;
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::CliError;

pub const FORMAT: &str = "hdsa-bundle";
pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST: &str = "manifest.json";
pub const REPORT: &str = "report.json";
pub const SINGULAR_VALUES: &str = "singular_values.csv";
pub const LOCAL_INDICES: &str = "local_indices.csv";
pub const SET_INDICES: &str = "set_indices.csv";
pub const VECTORS_THETA: &str = "singular_vectors_theta.csv";
pub const VECTORS_Z: &str = "singular_vectors_z.csv";
pub const OPTIMAL_Z: &str = "optimal_z.csv";

pub const FILES: [&str; 8] = [
    MANIFEST,
    REPORT,
    SINGULAR_VALUES,
    LOCAL_INDICES,
    SET_INDICES,
    VECTORS_THETA,
    VECTORS_Z,
    OPTIMAL_Z,
];

pub const CSV_FILES: [&str; 6] = [SINGULAR_VALUES, LOCAL_INDICES, SET_INDICES, VECTORS_THETA, VECTORS_Z, OPTIMAL_Z];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub format_version: u32,
    pub tool_version: String,
    pub problem: String,
    /// Effective configuration after the seed override.
    pub config: RunConfig,
    pub seed: u64,
    pub sampling_seed: u64,
    pub seed_from_env: bool,
    pub workers: usize,
    pub n_samples: usize,
    pub n_failures: usize,
    pub started_unix_seconds: u64,
    pub wall_clock_seconds: f64,
    pub files: Vec<String>,
}

/// Dense-oracle agreement for one sample.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleComparison {
    pub j: usize,
    pub max_sigma_rel_error: f64,
    pub oracle_sigma: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ReportDocument<'a> {
    #[serde(flatten)]
    pub report: &'a HdsaReport,
    pub oracle: Option<&'a [OracleComparison]>,
}

fn num(x: f64) -> String {
    format!("{x:e}")
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Compute(format!("{}: {e}", path.display()))
}

fn write_csv(dir: &Path, name: &str, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<(), CliError> {
    let path = dir.join(name);
    let mut w = csv::Writer::from_path(&path).map_err(|e| io_err(&path, e))?;
    w.write_record(header).map_err(|e| io_err(&path, e))?;
    for r in rows {
        w.write_record(&r).map_err(|e| io_err(&path, e))?;
    }
    w.flush().map_err(|e| io_err(&path, e))
}

/// Writes the CSV tables and the report document.
pub fn write_tables(dir: &Path, report: &HdsaReport, oracle: Option<&[OracleComparison]>) -> Result<(), CliError> {
    let s = &report.samples;
    write_csv(
        dir,
        SINGULAR_VALUES,
        &["j", "k", "sigma"],
        s.iter()
            .flat_map(|r| r.triples.iter().enumerate().map(move |(k, t)| vec![r.j.to_string(), k.to_string(), num(t.sigma)])),
    )?;
    write_csv(
        dir,
        LOCAL_INDICES,
        &["j", "i", "S_hat"],
        s.iter()
            .flat_map(|r| r.local_indices.iter().enumerate().map(move |(i, v)| vec![r.j.to_string(), i.to_string(), num(*v)])),
    )?;
    let names = &report.set_names;
    write_csv(
        dir,
        SET_INDICES,
        &["j", "set", "value"],
        s.iter().flat_map(|r| {
            r.set_indices
                .iter()
                .zip(names)
                .map(move |(v, n)| vec![r.j.to_string(), n.clone(), num(*v)])
        }),
    )?;
    let vectors = |pick: fn(&hdsa_core::hdsa::SingularTriple) -> &Vec<f64>| {
        s.iter().flat_map(move |r| {
            r.triples.iter().enumerate().flat_map(move |(k, t)| {
                pick(t)
                    .iter()
                    .enumerate()
                    .map(move |(i, v)| vec![r.j.to_string(), k.to_string(), i.to_string(), num(*v)])
            })
        })
    };
    write_csv(dir, VECTORS_THETA, &["j", "k", "i", "value"], vectors(|t| &t.theta_vec))?;
    write_csv(dir, VECTORS_Z, &["j", "k", "i", "value"], vectors(|t| &t.z_vec))?;
    write_csv(
        dir,
        OPTIMAL_Z,
        &["j", "i", "value"],
        s.iter()
            .flat_map(|r| r.optimal.z0.iter().enumerate().map(move |(i, v)| vec![r.j.to_string(), i.to_string(), num(*v)])),
    )?;
    let doc = ReportDocument { report, oracle };
    let path = dir.join(REPORT);
    let text = serde_json::to_string_pretty(&doc).map_err(|e| io_err(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

pub fn write_manifest(dir: &Path, m: &Manifest) -> Result<(), CliError> {
    let path = dir.join(MANIFEST);
    let text = serde_json::to_string_pretty(m).map_err(|e| io_err(&path, e))?;
    fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, CliError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let m: Manifest =
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    if m.format != FORMAT || m.format_version != FORMAT_VERSION {
        return Err(CliError::Usage(format!(
            "{}: not a {FORMAT} v{FORMAT_VERSION} manifest",
            path.display()
        )));
    }
    for f in &m.files {
        if !dir.join(f).is_file() {
            return Err(CliError::Usage(format!("bundle is missing {f}")));
        }
    }
    Ok(m)
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

fn stat(vals: &[f64]) -> Stat {
    let n = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / n;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Stat { mean, std: var.sqrt() }
}

/// Aggregates recomputed from the CSV tables of a bundle.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub problem: String,
    pub n_samples: usize,
    pub n_failures: usize,
    /// In partition order.
    pub sets: Vec<(String, Stat)>,
    pub local: Vec<(usize, Stat)>,
    pub sigma: Vec<(usize, Stat)>,
}

fn read_rows(dir: &Path, name: &str, header: &[&str]) -> Result<Vec<csv::StringRecord>, CliError> {
    let path = dir.join(name);
    let bad = |e: &dyn std::fmt::Display| CliError::Usage(format!("{}: {e}", path.display()));
    let mut r = csv::Reader::from_path(&path).map_err(|e| bad(&e))?;
    let h = r.headers().map_err(|e| bad(&e))?;
    if h.iter().ne(header.iter().copied()) {
        return Err(bad(&format!("expected header {}", header.join(","))));
    }
    r.records().collect::<Result<_, _>>().map_err(|e| bad(&e))
}

fn field<T: std::str::FromStr>(rec: &csv::StringRecord, i: usize, file: &str) -> Result<T, CliError> {
    rec.get(i)
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| CliError::Usage(format!("{file}: malformed row {:?}", rec.iter().collect::<Vec<_>>())))
}

fn grouped<K: Ord + Clone>(rows: impl Iterator<Item = (K, f64)>) -> Vec<(K, Stat)> {
    let mut g: BTreeMap<K, Vec<f64>> = BTreeMap::new();
    for (k, v) in rows {
        g.entry(k).or_default().push(v);
    }
    g.into_iter().map(|(k, v)| (k, stat(&v))).collect()
}

pub fn load_summary(dir: &Path) -> Result<Summary, CliError> {
    let m = read_manifest(dir)?;
    let sigma = read_rows(dir, SINGULAR_VALUES, &["j", "k", "sigma"])?
        .iter()
        .map(|r| Ok((field::<usize>(r, 1, SINGULAR_VALUES)?, field::<f64>(r, 2, SINGULAR_VALUES)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let local = read_rows(dir, LOCAL_INDICES, &["j", "i", "S_hat"])?
        .iter()
        .map(|r| Ok((field::<usize>(r, 1, LOCAL_INDICES)?, field::<f64>(r, 2, LOCAL_INDICES)?)))
        .collect::<Result<Vec<_>, CliError>>()?;
    let set_rows = read_rows(dir, SET_INDICES, &["j", "set", "value"])?;
    let mut order: Vec<String> = Vec::new();
    let mut sets: Vec<(usize, f64)> = Vec::new();
    for r in &set_rows {
        let name = r.get(1).unwrap_or_default().to_string();
        let pos = match order.iter().position(|n| *n == name) {
            Some(p) => p,
            None => {
                order.push(name);
                order.len() - 1
            }
        };
        sets.push((pos, field::<f64>(r, 2, SET_INDICES)?));
    }
    Ok(Summary {
        problem: m.problem,
        n_samples: m.n_samples,
        n_failures: m.n_failures,
        sets: grouped(sets.into_iter())
            .into_iter()
            .map(|(p, s)| (order[p].clone(), s))
            .collect(),
        local: grouped(local.into_iter()),
        sigma: grouped(sigma.into_iter()),
    })
}

fn by_mean_desc<K: Ord>(a: &(K, Stat), b: &(K, Stat)) -> std::cmp::Ordering {
    b.1.mean.total_cmp(&a.1.mean).then(a.0.cmp(&b.0))
}

/// Plain-text tables: set indices, top-10 parameter indices, spectral decay.
pub fn render(s: &Summary) -> String {
    let mut o = String::new();
    let _ = writeln!(o, "problem {}: {} samples, {} failed", s.problem, s.n_samples, s.n_failures);
    let _ = writeln!(o);
    let _ = writeln!(o, "set indices (mean ± std over samples)");
    let _ = writeln!(o, "{:<20} {:>14} {:>14}", "set", "mean", "std");
    let mut sets = s.sets.clone();
    sets.sort_by(|a, b| b.1.mean.total_cmp(&a.1.mean).then(a.0.cmp(&b.0)));
    for (name, st) in &sets {
        let _ = writeln!(o, "{:<20} {:>14.6e} {:>14.6e}", name, st.mean, st.std);
    }
    let _ = writeln!(o);
    let _ = writeln!(o, "top parameter indices");
    let _ = writeln!(o, "{:>4} {:>6} {:>14}   {:<14}", "rank", "i", "mean", "± std");
    let mut local = s.local.clone();
    local.sort_by(by_mean_desc);
    for (rank, (i, st)) in local.iter().take(10).enumerate() {
        let _ = writeln!(o, "{:>4} {:>6} {:>14.6e} ± {:<14.6e}", rank + 1, i, st.mean, st.std);
    }
    let _ = writeln!(o);
    let _ = writeln!(o, "spectral decay");
    let _ = writeln!(o, "{:>4} {:>14} {:>14} {:>14}", "k", "mean sigma", "std", "sigma_k/sigma_0");
    let lead = s.sigma.first().map(|x| x.1.mean).unwrap_or(0.0);
    for (k, st) in &s.sigma {
        let ratio = if lead > 0.0 { st.mean / lead } else { 0.0 };
        let _ = writeln!(o, "{:>4} {:>14.6e} {:>14.6e} {:>14.6e}", k, st.mean, st.std, ratio);
    }
    o
}
