//! Seeded batches of independent trials.

use std::fs;
use std::io;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::trial::{run_trial, TrialOutcome, TrialResult};
use super::{generate_scenario, ScenarioConfig};

/// One trial's line in the summary.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub seed: u64,
    /// `completed`, `bootstrap_infeasible` or `scenario_infeasible`.
    pub status: String,
    pub result: Option<TrialResult>,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub n_trials: usize,
    /// Trials that flew to the end of the leader path.
    pub completed: usize,
    pub bootstrap_infeasible: usize,
    pub scenario_infeasible: usize,
    /// Successes over completed trials.
    pub success_rate: f64,
    /// Mean of the per-trial mean deviations over completed trials.
    pub mean_formation_error: f64,
    pub min_interagent_distance: Option<f64>,
    pub min_static_clearance: Option<f64>,
    pub audit_violations: usize,
    pub trials: Vec<TrialRow>,
}

impl BatchSummary {
    fn from_rows(trials: Vec<TrialRow>) -> Self {
        let done: Vec<&TrialResult> = trials
            .iter()
            .filter_map(|r| r.result.as_ref())
            .filter(|r| r.outcome == TrialOutcome::Completed)
            .collect();
        let count = |s: &str| trials.iter().filter(|r| r.status == s).count();
        let successes = done.iter().filter(|r| r.success).count();
        let fold_min =
            |f: fn(&TrialResult) -> Option<f64>| done.iter().filter_map(|r| f(r)).reduce(f64::min);
        BatchSummary {
            n_trials: trials.len(),
            completed: done.len(),
            bootstrap_infeasible: count("bootstrap_infeasible"),
            scenario_infeasible: count("scenario_infeasible"),
            success_rate: if done.is_empty() {
                0.0
            } else {
                successes as f64 / done.len() as f64
            },
            mean_formation_error: if done.is_empty() {
                0.0
            } else {
                done.iter()
                    .filter_map(|r| r.mean_formation_error)
                    .sum::<f64>()
                    / done.len() as f64
            },
            min_interagent_distance: fold_min(|r| r.min_interagent_distance),
            min_static_clearance: fold_min(|r| r.min_static_clearance),
            audit_violations: done.iter().map(|r| r.audit_violations).sum(),
            trials,
        }
    }

    /// CSV with one line per trial.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record([
            "seed",
            "success",
            "min_sep",
            "min_clear",
            "mean_dev",
            "commit_failures",
            "wall_time",
            "status",
        ])?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for row in &self.trials {
            let r = row.result.as_ref();
            w.write_record([
                row.seed.to_string(),
                r.is_some_and(|r| r.success).to_string(),
                opt(r.and_then(|r| r.min_interagent_distance)),
                opt(r.and_then(|r| r.min_static_clearance)),
                opt(r.and_then(|r| r.mean_formation_error)),
                r.map_or(String::new(), |r| r.commitment_failures.to_string()),
                r.map_or(String::new(), |r| format!("{:.3}", r.wall_time)),
                row.status.clone(),
            ])?;
        }
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }
}

/// Per-trial output file of `seed` inside `dir`.
pub fn trial_file(dir: &Path, seed: u64) -> std::path::PathBuf {
    dir.join(format!("trial_{seed}.json"))
}

fn run_one(config: &ScenarioConfig, seed: u64, out: Option<&Path>) -> io::Result<TrialRow> {
    let cfg = ScenarioConfig {
        seed,
        ..config.clone()
    };
    let scenario = match generate_scenario(&cfg) {
        Ok(s) => s,
        Err(e) => {
            log::warn!("seed {seed}: {e}");
            let row = TrialRow {
                seed,
                status: "scenario_infeasible".into(),
                result: None,
                detail: Some(e.to_string()),
            };
            if let Some(dir) = out {
                fs::write(trial_file(dir, seed), serde_json::to_vec(&row)?)?;
            }
            return Ok(row);
        }
    };
    let artifacts = run_trial(&scenario);
    if let Some(dir) = out {
        let doc = artifacts.to_json(&scenario, false);
        fs::write(trial_file(dir, seed), serde_json::to_vec(&doc)?)?;
    }
    let r = artifacts.result;
    let (status, detail) = match &r.outcome {
        TrialOutcome::Completed => ("completed", None),
        TrialOutcome::BootstrapInfeasible { agent } => (
            "bootstrap_infeasible",
            Some(format!("no initial commitment for agent {agent}")),
        ),
    };
    log::info!(
        "seed {seed}: {status} success={} min_sep={:?}",
        r.success,
        r.min_interagent_distance
    );
    Ok(TrialRow {
        seed,
        status: status.into(),
        result: Some(r),
        detail,
    })
}

/// Runs seeds `base_seed .. base_seed + n` in parallel.
///
/// With `out` set, each trial is written to `trial_<seed>.json` without its
/// state log (a scenario that could not be built gets its row instead), then
/// `summary.csv` and `summary.json` once all are done.
pub fn run_batch(
    n: usize,
    base_seed: u64,
    config: &ScenarioConfig,
    out: Option<&Path>,
) -> io::Result<BatchSummary> {
    let rows = (0..n as u64)
        .into_par_iter()
        .map(|i| run_one(config, base_seed + i, out))
        .collect::<io::Result<Vec<_>>>()?;
    let summary = BatchSummary::from_rows(rows);
    if let Some(dir) = out {
        let csv = summary.to_csv().map_err(io::Error::other)?;
        fs::write(dir.join("summary.csv"), csv)?;
        fs::write(
            dir.join("summary.json"),
            serde_json::to_vec_pretty(&summary)?,
        )?;
    }
    Ok(summary)
}
