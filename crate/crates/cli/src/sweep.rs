//! Parameter sweeps: one independently seeded run per value, executed on a
//! bounded worker pool, reduced into a deterministic summary table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use maglev_core::derive_seed;
use rayon::prelude::*;
use serde_json::Value as Json;

use crate::error::CliError;
use crate::feasibility::run_feasibility;
use crate::manifest::{Manifest, ManifestKind, OutputDir, SweepRun, MANIFEST_NAME};
use crate::pipeline::run_scenario;
use crate::scenario::{format_value, param, parse_value, valid_keys, Kind, Scenario, Value};

pub const WORKERS_ENV: &str = "MAGLEV_WORKERS";
pub const SUMMARY_FILE: &str = "summary.csv";

/// Worker count from the environment, defaulting to the available cores.
pub fn workers_from_env() -> Result<usize, CliError> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(CliError::Usage(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

/// Parse a comma-separated value list with the key's type. List-valued keys
/// take one element per sweep point.
pub fn parse_values(key: &str, text: &str) -> Result<Vec<Value>, CliError> {
    let p = param(key).ok_or_else(|| CliError::UnknownKey {
        key: key.to_string(),
        valid: valid_keys().join(", "),
    })?;
    if matches!(p.kind, Kind::Text | Kind::Words) {
        return Err(CliError::Usage(format!("'{key}' cannot be swept")));
    }
    let mut problems = Vec::new();
    let mut out = Vec::new();
    for item in text.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        match parse_value(item, p.kind) {
            Ok(v) => out.push(v),
            Err(e) => problems.push(format!("{key}: {e}")),
        }
    }
    if problems.is_empty() {
        Ok(out)
    } else {
        Err(CliError::Invalid(problems))
    }
}

struct RunResult {
    exit_code: u8,
    metrics: BTreeMap<String, f64>,
}

fn run_one(s: &Scenario, dir: &Path, feasibility: bool) -> Result<RunResult, CliError> {
    let mut metrics = BTreeMap::new();
    if feasibility {
        let (m, _) = run_feasibility(s, dir)?;
        for (k, v) in &m.results {
            match v {
                Json::Array(items) => {
                    for (i, item) in items.iter().enumerate() {
                        for (field, x) in item.as_object().into_iter().flatten() {
                            if let Some(x) = x.as_f64() {
                                metrics.insert(format!("{k}{i}_{field}"), x);
                            }
                        }
                    }
                }
                other => {
                    if let Some(x) = other.as_f64() {
                        metrics.insert(k.clone(), x);
                    }
                }
            }
        }
        return Ok(RunResult { exit_code: 0, metrics });
    }
    let outcome = run_scenario(s, dir)?;
    for st in &outcome.manifest.stages {
        if let Some(x) = st.exit_rms_m {
            metrics.insert(format!("{}_exit_rms_m", st.name), x);
        }
    }
    Ok(RunResult {
        exit_code: outcome.error.as_ref().map(CliError::code).unwrap_or(0),
        metrics,
    })
}

pub struct SweepOutcome {
    pub manifest: Manifest,
    pub manifest_path: PathBuf,
    /// Exit code of the first failing run in value order, or 0.
    pub exit_code: u8,
}

pub fn run_sweep(base: &Scenario, key: &str, values: &[Value], out: &Path, workers: usize) -> Result<SweepOutcome, CliError> {
    let p = param(key).ok_or_else(|| CliError::UnknownKey {
        key: key.to_string(),
        valid: valid_keys().join(", "),
    })?;
    let feasibility = key.starts_with("feasibility.");
    // validate every point before starting any work
    let mut scenarios = Vec::with_capacity(values.len());
    let mut problems = Vec::new();
    for (i, v) in values.iter().enumerate() {
        let mut s = base.with_value(p.key, v.clone());
        if p.key != "run.seed" {
            s = s.and_then(|s| s.with_value("run.seed", Value::Int(derive_seed(base.seed(), i as u64))));
        }
        match s {
            Ok(s) => scenarios.push(s),
            Err(CliError::Invalid(e)) => problems.extend(e.into_iter().map(|e| format!("value {}: {e}", i + 1))),
            Err(e) => return Err(e),
        }
    }
    if !problems.is_empty() {
        return Err(CliError::Invalid(problems));
    }
    let mut dir = OutputDir::create(out)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| CliError::Usage(format!("cannot start worker pool: {e}")))?;
    let results: Vec<Result<RunResult, CliError>> = pool.install(|| {
        scenarios
            .par_iter()
            .enumerate()
            .map(|(i, s)| run_one(s, &out.join(run_dir(i)), feasibility))
            .collect()
    });

    let mut manifest = Manifest::new(ManifestKind::Sweep, base.hash(), base.seed());
    manifest.parameter = Some(p.key.to_string());
    let mut rows = Vec::new();
    let mut exit_code = 0;
    for (i, (s, r)) in scenarios.iter().zip(results).enumerate() {
        let r = r?;
        if exit_code == 0 {
            exit_code = r.exit_code;
        }
        let sub = format!("{}/{MANIFEST_NAME}", run_dir(i));
        dir.adopt(&sub)?;
        manifest.runs.push(SweepRun {
            index: i,
            value: format_value(&values[i], p.kind),
            seed: s.seed(),
            directory: run_dir(i),
            exit_code: r.exit_code,
        });
        rows.push(r);
    }
    let columns: BTreeSet<&String> = rows.iter().flat_map(|r| r.metrics.keys()).collect();
    let mut table = String::new();
    let _ = write!(table, "index,value,seed,exit_code");
    for c in &columns {
        let _ = write!(table, ",{c}");
    }
    table.push('\n');
    for (run, r) in manifest.runs.iter().zip(&rows) {
        let _ = write!(table, "{},\"{}\",{},{}", run.index, run.value, run.seed, run.exit_code);
        for c in &columns {
            match r.metrics.get(*c) {
                Some(x) => {
                    let _ = write!(table, ",{x:e}");
                }
                None => table.push(','),
            }
        }
        table.push('\n');
    }
    dir.write_bytes(SUMMARY_FILE, table.as_bytes())?;
    manifest.complete = exit_code == 0;
    let manifest_path = dir.finish(&mut manifest)?;
    Ok(SweepOutcome {
        manifest,
        manifest_path,
        exit_code,
    })
}

fn run_dir(i: usize) -> String {
    format!("run_{i:03}")
}
