use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use formation_gatekeeper::geometry::Environment;
use formation_gatekeeper::leader::{LeaderPath, RrtParams};
use formation_gatekeeper::sim::{
    certify_leader, generate_environment, generate_scenario, run_batch, run_trial, trial_file,
    FormationSpec, Scenario, ScenarioConfig, ScenarioError, TrialOutcome,
};

use crate::manifest::RunManifest;
use crate::{config, Common, Failure};

type Outcome = Result<(), Failure>;

fn setup(name: &str, common: &Common) -> Result<(ScenarioConfig, RunManifest), Failure> {
    let mut cfg = config::load(common.profile, common.config.as_deref())?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    let mut manifest =
        RunManifest::new(name, common.config.as_deref(), &common.out, common.profile);
    manifest.seeds.push(cfg.seed);
    Ok((cfg, manifest))
}

fn write(path: PathBuf, bytes: &[u8]) -> Result<(), Failure> {
    fs::write(&path, bytes)
        .with_context(|| format!("writing {}", path.display()))
        .map_err(Failure::Usage)
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))
        .map_err(Failure::Usage)
}

fn scenario_failure(e: ScenarioError) -> Failure {
    match e {
        ScenarioError::Infeasible { .. } => Failure::Planner(e.to_string()),
        other => Failure::Usage(other.into()),
    }
}

pub fn gen_env(common: &Common) -> Outcome {
    let (cfg, mut manifest) = setup("gen-env", common)?;
    let name = format!("env_{}.json", cfg.seed);
    manifest.files.push(name.clone());
    manifest.write()?;
    let env = generate_environment(&cfg).map_err(scenario_failure)?;
    let json = serde_json::to_vec_pretty(&env).map_err(anyhow::Error::from)?;
    write(common.out.join(&name), &json)?;
    println!("{} obstacles -> {}", env.obstacles.len(), name);
    Ok(())
}

pub fn plan_leader(common: &Common, env_path: &Path) -> Outcome {
    let (cfg, mut manifest) = setup("plan-leader", common)?;
    let name = format!("leader_{}.json", cfg.seed);
    manifest.files.push(name.clone());
    manifest.write()?;
    let env: Environment = serde_json::from_str(&read(env_path)?)
        .with_context(|| format!("parsing {}", env_path.display()))?;
    let rrt = RrtParams {
        seed: cfg.seed,
        dt: cfg.dt,
        sample_min: Some(cfg.workspace_min),
        sample_max: Some(cfg.workspace_max),
        ..cfg.rrt
    };
    let leader = certify_leader(&env, &cfg, &rrt).map_err(Failure::Planner)?;
    write(common.out.join(&name), leader.to_json().as_bytes())?;
    println!(
        "leader {:.1} s, epsilon {:.4} -> {}",
        leader.t_final() - leader.t0(),
        leader.epsilon,
        name
    );
    Ok(())
}

fn scenario_from_files(
    cfg: &ScenarioConfig,
    leader: &Path,
    env: &Path,
) -> Result<Scenario, Failure> {
    let leader = LeaderPath::from_json(&read(leader)?)
        .with_context(|| format!("parsing {}", leader.display()))?;
    let env: Environment =
        serde_json::from_str(&read(env)?).with_context(|| format!("parsing {}", env.display()))?;
    Ok(Scenario {
        config: cfg.clone(),
        env,
        leader,
        formation: FormationSpec {
            offsets: cfg.offsets.clone(),
            initial: cfg.follower_starts(),
        },
        attempts: 0,
    })
}

pub fn run(common: &Common, files: Option<(PathBuf, PathBuf)>) -> Outcome {
    let (cfg, mut manifest) = setup("run", common)?;
    let seed = cfg.seed;
    let (trial, log, metrics) = (
        format!("trial_{seed}.json"),
        format!("state_log_{seed}.csv"),
        format!("metrics_{seed}.json"),
    );
    manifest.files = vec![trial.clone(), log.clone(), metrics.clone()];
    manifest.write()?;
    let scenario = match &files {
        Some((leader, env)) => scenario_from_files(&cfg, leader, env)?,
        None => generate_scenario(&cfg).map_err(scenario_failure)?,
    };
    let artifacts = run_trial(&scenario);
    let doc = artifacts.to_json(&scenario, false);
    write(
        common.out.join(&trial),
        &serde_json::to_vec(&doc).map_err(anyhow::Error::from)?,
    )?;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["t", "agent", "x", "y", "z", "psi", "omega", "gamma", "tag"])
        .map_err(anyhow::Error::from)?;
    for row in &artifacts.state_log {
        w.serialize(row).map_err(anyhow::Error::from)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| anyhow::anyhow!("{}", e.error()))?;
    write(common.out.join(&log), &bytes)?;
    let r = &artifacts.result;
    write(
        common.out.join(&metrics),
        &serde_json::to_vec_pretty(r).map_err(anyhow::Error::from)?,
    )?;

    if let TrialOutcome::BootstrapInfeasible { agent } = r.outcome {
        return Err(Failure::Bootstrap(format!(
            "no initial commitment for agent {agent}"
        )));
    }
    let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.4}"));
    println!(
        "seed {seed}: success {} min separation {} min clearance {} mean deviation {}",
        r.success,
        fmt(r.min_interagent_distance),
        fmt(r.min_static_clearance),
        fmt(r.mean_formation_error),
    );
    if !r.success || r.audit_violations > 0 {
        return Err(Failure::Safety(format!(
            "seed {seed}: {} audit violations",
            r.audit_violations
        )));
    }
    Ok(())
}

pub fn batch(common: &Common, trials: u64) -> Outcome {
    let (cfg, mut manifest) = setup("batch", common)?;
    let base = cfg.seed;
    manifest.seeds = (base..base + trials).collect();
    manifest.files = manifest
        .seeds
        .iter()
        .map(|&s| trial_file(Path::new(""), s).to_string_lossy().into_owned())
        .chain(["summary.csv".to_string(), "summary.json".to_string()])
        .collect();
    manifest.write()?;
    let summary = run_batch(trials as usize, base, &cfg, Some(&common.out))
        .context("writing batch outputs")?;
    println!(
        "success rate {:.1}% over {} completed of {} trials, mean deviation {:.3} m, \
         bootstrap infeasible {}, scenario infeasible {}",
        100.0 * summary.success_rate,
        summary.completed,
        summary.n_trials,
        summary.mean_formation_error,
        summary.bootstrap_infeasible,
        summary.scenario_infeasible,
    );
    let unsafe_trials = summary
        .trials
        .iter()
        .filter_map(|t| t.result.as_ref())
        .filter(|r| r.outcome == TrialOutcome::Completed && !r.success)
        .count();
    if unsafe_trials > 0 || summary.audit_violations > 0 {
        return Err(Failure::Safety(format!(
            "{unsafe_trials} unsafe trials, {} audit violations",
            summary.audit_violations
        )));
    }
    Ok(())
}
