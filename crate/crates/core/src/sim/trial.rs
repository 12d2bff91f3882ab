//! One closed-loop trial of the leader and its followers.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::gatekeeper::{
    bootstrap, evaluate_committed, gatekeeper_iteration, BootstrapError, CommitRecord,
    TdmaSchedule, LEADER_ID,
};
use crate::geometry::Vec3;
use crate::trajectory::SegmentTag;

use super::audit::{audit_committed_set, AuditViolation};
use super::{formation_error, nominal_reference, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum TrialOutcome {
    Completed,
    BootstrapInfeasible { agent: usize },
}

/// Metrics of one trial. Distances are `None` when the trial never flew.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialResult {
    pub seed: u64,
    pub outcome: TrialOutcome,
    /// Completed with no collision of any kind.
    pub success: bool,
    pub min_interagent_distance: Option<f64>,
    pub min_static_clearance: Option<f64>,
    /// Distance from the formation slot, averaged over followers and steps.
    pub mean_formation_error: Option<f64>,
    /// Replanning slots that ended without a new commitment.
    pub commitment_failures: usize,
    pub commitments: usize,
    pub audit_violations: usize,
    pub epsilon: f64,
    pub leader_length: f64,
    pub mission_time: f64,
    #[serde(skip)]
    pub wall_time: f64,
}

/// One state log row: t, agent, x, y, z, psi, omega, gamma, tag.
pub type LogRow = (f64, usize, f64, f64, f64, f64, f64, f64, SegmentTag);

#[derive(Debug, Clone, PartialEq)]
pub struct TrialArtifacts {
    pub result: TrialResult,
    pub state_log: Vec<LogRow>,
    /// Per step: t, E, then each follower's deviation.
    pub series: Vec<Vec<f64>>,
    pub commits: Vec<CommitRecord>,
    pub audit: Vec<AuditViolation>,
}

impl TrialArtifacts {
    /// Output document with the scenario echoed. The state log is left out
    /// when `with_log` is false.
    pub fn to_json(&self, scenario: &Scenario, with_log: bool) -> serde_json::Value {
        let mut doc = json!({
            "scenario": {
                "config": scenario.config,
                "environment": scenario.env,
                "attempts": scenario.attempts,
                "leader": {
                    "epsilon": scenario.leader.epsilon,
                    "delta": scenario.leader.delta,
                    "t_final": scenario.leader.t_final(),
                    "samples": scenario.leader.len(),
                },
            },
            "result": self.result,
            "series": self.series,
            "commits": self.commits,
            "audit": self.audit,
        });
        if with_log {
            doc["state_log"] = json!(self.state_log);
        }
        doc
    }
}

/// Runs the formation flight of `scenario` from bootstrap to the end of the
/// leader path.
///
/// Every agent flies its committed trajectory. Followers replan in turn, one
/// per TDMA slot, and every new commitment is audited on the spot.
pub fn run_trial(scenario: &Scenario) -> TrialArtifacts {
    let clock = Instant::now();
    let cfg = &scenario.config;
    let leader = &scenario.leader;
    let env = &scenario.env;
    let params = scenario.gatekeeper_params();
    let offsets = &scenario.formation.offsets;
    let dt = leader.trajectory.dt;
    let t0 = leader.t0();
    let reference = |agent: usize, t: f64| nominal_reference(leader, offsets[agent - 1], t);

    let followers: Vec<(usize, _)> = scenario
        .formation
        .initial
        .iter()
        .enumerate()
        .map(|(i, &s)| (i + 1, s))
        .collect();
    let mut result = TrialResult {
        seed: cfg.seed,
        outcome: TrialOutcome::Completed,
        success: false,
        min_interagent_distance: None,
        min_static_clearance: None,
        mean_formation_error: None,
        commitment_failures: 0,
        commitments: 0,
        audit_violations: 0,
        epsilon: leader.epsilon,
        leader_length: (leader.t_final() - t0) * leader.speed(),
        mission_time: leader.t_final() - t0,
        wall_time: 0.0,
    };
    let mut artifacts = TrialArtifacts {
        result: result.clone(),
        state_log: Vec::new(),
        series: Vec::new(),
        commits: Vec::new(),
        audit: Vec::new(),
    };

    let boot = bootstrap(
        &followers,
        t0,
        reference,
        leader,
        env,
        &cfg.limits,
        &cfg.gains,
        &params,
    );
    let (mut committed, records) = match boot {
        Ok(b) => b,
        Err(BootstrapError::Infeasible { agent }) => {
            result.outcome = TrialOutcome::BootstrapInfeasible { agent };
            result.wall_time = clock.elapsed().as_secs_f64();
            artifacts.result = result;
            return artifacts;
        }
    };
    // Audit each bootstrap commitment against those made before it.
    let mut partial = crate::gatekeeper::CommittedSet::new();
    partial.commit(
        LEADER_ID,
        committed.get(LEADER_ID).expect("leader committed").clone(),
    );
    for r in &records {
        partial.commit(
            r.agent,
            committed.get(r.agent).expect("bootstrapped").clone(),
        );
        artifacts
            .audit
            .extend(audit_committed_set(&partial, r.agent, t0, dt, env, leader));
    }
    result.commitments = records.len();
    artifacts.commits.extend(records);

    let ids: Vec<usize> = followers.iter().map(|&(i, _)| i).collect();
    let schedule = TdmaSchedule::new(cfg.slot_period, dt, ids);
    let steps = ((leader.t_final() - t0) / dt).round() as usize;
    let mut min_sep = f64::INFINITY;
    let mut min_clear = f64::INFINITY;
    let mut dev_sum = 0.0;
    let mut dev_count = 0usize;
    let n_agents = followers.len() + 1;
    let mut positions = vec![Vec3::ZERO; n_agents];

    for n in 0..=steps {
        let t = t0 + n as f64 * dt;
        if let Some(agent) = schedule.owner(n) {
            let traj = &committed.get(agent).expect("follower committed").trajectory;
            let now = evaluate_committed(traj, leader, t).expect("commitment covers the present");
            let r = |t: f64| reference(agent, t);
            let out = gatekeeper_iteration(
                agent,
                now.state,
                t,
                r,
                &mut committed,
                leader,
                env,
                &cfg.limits,
                &cfg.gains,
                &params,
            );
            match out.record {
                Some(rec) => {
                    result.commitments += 1;
                    artifacts.commits.push(rec);
                    artifacts
                        .audit
                        .extend(audit_committed_set(&committed, agent, t, dt, env, leader));
                }
                None => result.commitment_failures += 1,
            }
        }

        for (id, c) in committed.iter() {
            let s = evaluate_committed(&c.trajectory, leader, t)
                .expect("commitment covers the present");
            positions[id] = s.state.position();
            min_clear = min_clear.min(env.min_clearance(positions[id]));
            if n % cfg.log_stride == 0 {
                let x = s.state;
                artifacts.state_log.push((
                    t,
                    id,
                    x.x,
                    x.y,
                    x.z,
                    x.psi,
                    s.control.omega,
                    s.control.gamma,
                    s.tag,
                ));
            }
        }
        for a in 0..n_agents {
            for b in a + 1..n_agents {
                min_sep = min_sep.min(positions[a].distance(positions[b]));
            }
        }
        let (ls, _) = leader.state_at(t);
        let (e, devs) = formation_error(ls.position(), ls.psi, &positions[1..], offsets);
        dev_sum += devs.iter().sum::<f64>();
        dev_count += devs.len();
        let mut row = vec![t, e];
        row.extend(devs);
        artifacts.series.push(row);
    }

    result.min_interagent_distance = Some(min_sep);
    result.min_static_clearance = Some(min_clear);
    result.mean_formation_error = Some(if dev_count > 0 {
        dev_sum / dev_count as f64
    } else {
        0.0
    });
    result.audit_violations = artifacts.audit.len();
    result.success = min_sep >= leader.delta && min_clear > 0.0;
    result.wall_time = clock.elapsed().as_secs_f64();
    artifacts.result = result;
    artifacts
}

/// Mean follower deviation recomputed from a trial's series.
pub fn mean_deviation_of(series: &[Vec<f64>]) -> f64 {
    let (sum, count) = series.iter().fold((0.0, 0usize), |(s, c), row| {
        (s + row[2..].iter().sum::<f64>(), c + row.len() - 2)
    });
    if count == 0 {
        0.0
    } else {
        sum / count as f64
    }
}
