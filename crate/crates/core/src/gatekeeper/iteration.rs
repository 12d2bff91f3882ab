//! The gatekeeper loop: bootstrap at the start and one replanning step per
//! TDMA slot.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Environment;
use crate::leader::LeaderPath;
use crate::trajectory::{MergeInfo, PiecewiseTrajectory, Sample, SegmentTag};
use crate::vehicle::{propagate_nominal, AirplaneState, NominalGains, Reference, VehicleLimits};

use super::candidate::construct_candidate;
use super::{Commitment, CommittedSet, GatekeeperParams};

/// Agent id of the leader on the blackboard.
pub const LEADER_ID: usize = 0;

/// One line of the commitment log.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommitRecord {
    pub t: f64,
    pub agent: usize,
    pub k: u64,
    pub t_s: f64,
    pub t_merge: f64,
    #[serde(rename = "t_L")]
    pub t_leader: f64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationOutcome {
    /// A new candidate replaced the previous commitment.
    pub committed: bool,
    pub record: Option<CommitRecord>,
}

#[derive(Debug, Error, PartialEq)]
pub enum BootstrapError {
    #[error("initial commitment infeasible for agent {agent}")]
    Infeasible { agent: usize },
}

/// The leader's commitment: its own path from the start.
pub fn leader_commitment(leader: &LeaderPath) -> Commitment {
    let first = leader.trajectory.samples[0];
    let mut trajectory = PiecewiseTrajectory::new(
        leader.t0(),
        leader.trajectory.dt,
        leader.speed(),
        vec![Sample {
            tag: SegmentTag::LeaderPath,
            ..first
        }],
    );
    trajectory.merge = Some(MergeInfo {
        t_merge: leader.t0(),
        t_leader: leader.t0(),
    });
    Commitment {
        k: 0,
        t_s: leader.t0(),
        trajectory,
    }
}

fn plan_and_commit<F: Fn(f64) -> Reference>(
    agent: usize,
    k: u64,
    x_now: AirplaneState,
    t_now: f64,
    reference: F,
    committed: &mut CommittedSet,
    leader: &LeaderPath,
    env: &Environment,
    limits: &VehicleLimits,
    gains: &NominalGains,
    params: &GatekeeperParams,
) -> Option<CommitRecord> {
    let dt = leader.trajectory.dt;
    let remaining = (leader.t_final() - t_now).max(0.0);
    // Near the end no merge target is left, so roll out all the way instead.
    let reach = params.horizon + params.join_lead_radii * limits.r_min() / limits.v_max;
    let horizon = if remaining <= reach {
        remaining
    } else {
        params.horizon
    };
    let horizon = (horizon / dt + 1e-9).floor() * dt;
    let nominal = propagate_nominal(x_now, reference, t_now, horizon, dt, limits, gains);
    let c = construct_candidate(agent, &nominal, committed, leader, env, limits, params)?;
    let record = CommitRecord {
        t: t_now,
        agent,
        k,
        t_s: c.t_s,
        t_merge: c.t_merge,
        t_leader: c.t_leader,
        n_samples: c.trajectory.len(),
    };
    committed.commit(
        agent,
        Commitment {
            k,
            t_s: c.t_s,
            trajectory: c.trajectory,
        },
    );
    Some(record)
}

/// One gatekeeper step for `agent` in its slot at `t_now`.
///
/// Rolls out the nominal controller from the current state, builds the
/// candidate with the latest valid switch time and commits it. If none is
/// valid the previous commitment stays in place untouched.
pub fn gatekeeper_iteration<F: Fn(f64) -> Reference>(
    agent: usize,
    x_now: AirplaneState,
    t_now: f64,
    reference: F,
    committed: &mut CommittedSet,
    leader: &LeaderPath,
    env: &Environment,
    limits: &VehicleLimits,
    gains: &NominalGains,
    params: &GatekeeperParams,
) -> IterationOutcome {
    let k = committed.get(agent).map_or(0, |c| c.k + 1);
    let record = plan_and_commit(
        agent, k, x_now, t_now, reference, committed, leader, env, limits, gains, params,
    );
    IterationOutcome {
        committed: record.is_some(),
        record,
    }
}

/// Initial commitments at `t0`: the leader's path first, then each follower
/// in ascending id order against everything committed before it.
pub fn bootstrap<F: Fn(usize, f64) -> Reference>(
    followers: &[(usize, AirplaneState)],
    t0: f64,
    reference: F,
    leader: &LeaderPath,
    env: &Environment,
    limits: &VehicleLimits,
    gains: &NominalGains,
    params: &GatekeeperParams,
) -> Result<(CommittedSet, Vec<CommitRecord>), BootstrapError> {
    let mut committed = CommittedSet::new();
    committed.commit(LEADER_ID, leader_commitment(leader));
    let mut order: Vec<_> = followers.to_vec();
    order.sort_by_key(|&(id, _)| id);
    let mut records = Vec::with_capacity(order.len());
    for (agent, x0) in order {
        let r = |t: f64| reference(agent, t);
        let record = plan_and_commit(
            agent,
            0,
            x0,
            t0,
            r,
            &mut committed,
            leader,
            env,
            limits,
            gains,
            params,
        )
        .ok_or(BootstrapError::Infeasible { agent })?;
        records.push(record);
    }
    Ok((committed, records))
}

/// Round-robin slot assignment: one follower every `period_steps` steps,
/// starting one period after the bootstrap.
#[derive(Debug, Clone, PartialEq)]
pub struct TdmaSchedule {
    pub period_steps: usize,
    pub agents: Vec<usize>,
}

impl TdmaSchedule {
    pub fn new(period: f64, dt: f64, mut agents: Vec<usize>) -> Self {
        agents.sort_unstable();
        TdmaSchedule {
            period_steps: ((period / dt).round() as usize).max(1),
            agents,
        }
    }

    /// Agent owning the slot that begins at `step`, if any.
    pub fn owner(&self, step: usize) -> Option<usize> {
        if self.agents.is_empty() || step == 0 || step % self.period_steps != 0 {
            return None;
        }
        let slot = step / self.period_steps - 1;
        Some(self.agents[slot % self.agents.len()])
    }
}
