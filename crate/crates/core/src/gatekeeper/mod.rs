//! Per-agent gatekeeper: every follower holds a committed trajectory that
//! ends on the leader path and only swaps it for a candidate verified
//! against obstacles and all other commitments.

mod candidate;
mod iteration;
mod join;

pub use candidate::{construct_candidate, validate_candidate, Candidate, Violation};
pub use iteration::{
    bootstrap, gatekeeper_iteration, leader_commitment, BootstrapError, CommitRecord,
    IterationOutcome, TdmaSchedule, LEADER_ID,
};
pub use join::{join_options, plan_join_to_backup, JoinOption};

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;
use crate::leader::LeaderPath;
use crate::trajectory::{PiecewiseTrajectory, SegmentTag};
use crate::vehicle::{AirplaneState, ControlInput};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GatekeeperParams {
    /// Planning horizon of the nominal rollout, seconds.
    pub horizon: f64,
    /// Spacing of the switch times tried inside the horizon.
    pub switch_time_step: f64,
    /// Merge points tried per switch time.
    pub join_targets: usize,
    /// First merge point: this many turn radii of arc past the closest point.
    pub join_lead_radii: f64,
    /// Spacing of later merge points, in turn radii.
    pub join_spacing_radii: f64,
    /// Collision radius between agents.
    pub delta: f64,
    /// Curvature margin of the leader path.
    pub epsilon: f64,
    /// Sampling step of the inter-agent checks.
    pub check_dt: f64,
    /// Arc step of the obstacle check along joins.
    pub join_check_step: f64,
    /// Sideways midpoint shifts tried per join, each way, and their spacing.
    pub detour_lateral_count: usize,
    pub detour_lateral_step: f64,
    /// Vertical midpoint shifts tried per join, each way, and their spacing.
    pub detour_vertical_count: usize,
    pub detour_vertical_step: f64,
    /// Candidates validated per iteration before giving up on this slot.
    pub candidate_budget: usize,
}

impl Default for GatekeeperParams {
    fn default() -> Self {
        GatekeeperParams {
            horizon: 10.0,
            switch_time_step: 0.5,
            join_targets: 8,
            join_lead_radii: 2.0,
            join_spacing_radii: 1.0,
            delta: 1.0,
            epsilon: 0.0,
            check_dt: 0.05,
            join_check_step: 0.5,
            detour_lateral_count: 4,
            detour_lateral_step: 1.5,
            detour_vertical_count: 2,
            detour_vertical_step: 1.5,
            candidate_budget: 300,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ParamsError {
    #[error("gatekeeper parameters out of range: {0}")]
    OutOfRange(&'static str),
}

impl GatekeeperParams {
    pub fn check(&self) -> Result<(), ParamsError> {
        if !(self.switch_time_step > 0.0 && self.switch_time_step <= self.horizon) {
            return Err(ParamsError::OutOfRange(
                "need 0 < switch_time_step <= horizon",
            ));
        }
        if !(self.delta > 0.0) || !(self.epsilon >= 0.0) {
            return Err(ParamsError::OutOfRange("need delta > 0 and epsilon >= 0"));
        }
        if !(self.check_dt > 0.0 && self.check_dt <= self.switch_time_step) {
            return Err(ParamsError::OutOfRange(
                "need 0 < check_dt <= switch_time_step",
            ));
        }
        if self.join_targets == 0 || self.candidate_budget == 0 || !(self.join_check_step > 0.0) {
            return Err(ParamsError::OutOfRange(
                "need join targets, a candidate budget and a positive join check step",
            ));
        }
        Ok(())
    }
}

/// A commitment: the trajectory an agent has bound itself to fly.
#[derive(Debug, Clone, PartialEq)]
pub struct Commitment {
    /// Iteration that produced it.
    pub k: u64,
    pub t_s: f64,
    pub trajectory: PiecewiseTrajectory,
}

/// The shared blackboard: one commitment per agent.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommittedSet {
    entries: BTreeMap<usize, Commitment>,
}

impl CommittedSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, agent: usize) -> Option<&Commitment> {
        self.entries.get(&agent)
    }

    /// Replaces the agent's commitment and returns the old one.
    pub fn commit(&mut self, agent: usize, c: Commitment) -> Option<Commitment> {
        self.entries.insert(agent, c)
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, &Commitment)> {
        self.entries.iter().map(|(&i, c)| (i, c))
    }

    /// Everyone except `agent`.
    pub fn others(&self, agent: usize) -> impl Iterator<Item = (usize, &Commitment)> {
        self.iter().filter(move |&(i, _)| i != agent)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum EvalError {
    #[error("time {t} precedes the trajectory start {start}")]
    BeforeStart { t: f64, start: f64 },
    #[error("trajectory ends at {end} without reaching the leader path")]
    NoContinuation { end: f64 },
}

/// Committed state at a given time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommittedState {
    pub state: AirplaneState,
    pub control: ControlInput,
    pub tag: SegmentTag,
    /// The leader path parameter has run past the end of the path.
    pub mission_complete: bool,
}

/// Leader path parameter of a merged trajectory at time `t`.
pub fn leader_param(traj: &PiecewiseTrajectory, t: f64) -> Option<f64> {
    traj.merge.map(|m| m.t_leader + (t - m.t_merge))
}

/// State of a committed trajectory at `t`: interpolated within the stored
/// samples, then the leader path from the merge parameter onward, held at
/// the leader's final state once the path runs out.
pub fn evaluate_committed(
    traj: &PiecewiseTrajectory,
    leader: &LeaderPath,
    t: f64,
) -> Result<CommittedState, EvalError> {
    if traj.contains(t) {
        let (state, control) = traj.sample_at(t).expect("time inside the stored samples");
        let tag = traj.tag_at(t).expect("time inside the stored samples");
        let complete = tag == SegmentTag::LeaderPath
            && leader_param(traj, t).is_some_and(|p| p > leader.t_final());
        return Ok(CommittedState {
            state,
            control,
            tag,
            mission_complete: complete,
        });
    }
    if traj.is_empty() || t < traj.t_start {
        return Err(EvalError::BeforeStart {
            t,
            start: traj.t_start,
        });
    }
    let param = leader_param(traj, t).ok_or(EvalError::NoContinuation { end: traj.t_end() })?;
    let (state, control) = leader.state_at(param);
    Ok(CommittedState {
        state,
        control,
        tag: SegmentTag::LeaderPath,
        mission_complete: param > leader.t_final(),
    })
}

/// Position-only [`evaluate_committed`] for the checking loops.
pub fn committed_position(traj: &PiecewiseTrajectory, leader: &LeaderPath, t: f64) -> Option<Vec3> {
    if traj.contains(t) {
        return traj.position_at(t).ok();
    }
    if t < traj.t_start {
        return None;
    }
    leader_param(traj, t).map(|p| leader.position_at(p))
}
