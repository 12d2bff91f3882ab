//! Candidate construction and validation.

use std::fmt;

use crate::geometry::Environment;
use crate::leader::LeaderPath;
use crate::trajectory::{MergeInfo, PiecewiseTrajectory, Sample, SegmentTag};
use crate::vehicle::VehicleLimits;

use super::join::{join_options, sample_join, JoinOption};
use super::{committed_position, CommittedSet, GatekeeperParams};

/// A validated candidate and where it switches and merges.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub trajectory: PiecewiseTrajectory,
    pub t_s: f64,
    pub t_merge: f64,
    pub t_leader: f64,
}

/// Why a candidate was rejected.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Violation {
    /// The trajectory never reaches the leader path.
    NoMerge,
    /// The merge point is ahead of the leader's own schedule.
    AheadOfLeader { t_merge: f64, t_leader: f64 },
    /// A sample before the merge is too close to an obstacle.
    Static { t: f64, clearance: f64 },
    /// Too close to another agent before both are on the leader path.
    Separation { other: usize, t: f64, distance: f64 },
    /// Slots on the leader path too close once both have merged.
    Slot { other: usize, t: f64, distance: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::NoMerge => write!(f, "no merge onto the leader path"),
            Violation::AheadOfLeader { t_merge, t_leader } => {
                write!(
                    f,
                    "merge at t={t_merge:.2} onto parameter {t_leader:.2} is ahead of the leader"
                )
            }
            Violation::Static { t, clearance } => {
                write!(f, "clearance {clearance:.4} m at t={t:.2}")
            }
            Violation::Separation { other, t, distance } => {
                write!(f, "{distance:.3} m from agent {other} at t={t:.2}")
            }
            Violation::Slot { other, t, distance } => {
                write!(f, "slot {distance:.3} m from agent {other} at t={t:.2}")
            }
        }
    }
}

/// Checks a candidate against obstacles and every other commitment.
///
/// Before the later of the two merges, the agents must stay `delta` apart;
/// at that time their slots on the leader path must be `delta + epsilon`
/// apart. Thresholds carry `2 * v * check_dt` of inter-sample slack. All
/// checks stop at the end of the leader path, where the mission ends. A
/// trajectory that merges exactly there has no join and is checked for
/// separation up to and including that instant.
pub fn validate_candidate(
    candidate: &PiecewiseTrajectory,
    agent: usize,
    committed: &CommittedSet,
    env: &Environment,
    leader: &LeaderPath,
    params: &GatekeeperParams,
) -> Result<(), Violation> {
    let merge = candidate.merge.ok_or(Violation::NoMerge)?;
    if merge.t_leader > merge.t_merge + 1e-9 {
        return Err(Violation::AheadOfLeader {
            t_merge: merge.t_merge,
            t_leader: merge.t_leader,
        });
    }
    let t_k = candidate.t_start;
    let t_end = leader.t_final();
    let slack = 2.0 * candidate.speed * params.check_dt;

    for (other, c) in committed.others(agent) {
        let other_merge = c.trajectory.merge.ok_or(Violation::NoMerge)?.t_merge;
        let t_max = merge.t_merge.max(other_merge).max(t_k);
        let stop = t_max.min(t_end);
        // Past the end of the mission there is no slot to reach, so the last
        // instant is checked like any other.
        let last = if t_max >= t_end { Some(t_end) } else { None };
        let grid = (0..)
            .map(|m| t_k + m as f64 * params.check_dt)
            .take_while(|&t| t < stop);
        for t in grid.chain(last) {
            let a = committed_position(candidate, leader, t).ok_or(Violation::NoMerge)?;
            let b = committed_position(&c.trajectory, leader, t).ok_or(Violation::NoMerge)?;
            let distance = a.distance(b);
            if distance < params.delta + slack {
                return Err(Violation::Separation { other, t, distance });
            }
        }
        if t_max < t_end {
            let a = committed_position(candidate, leader, t_max).ok_or(Violation::NoMerge)?;
            let b = committed_position(&c.trajectory, leader, t_max).ok_or(Violation::NoMerge)?;
            let distance = a.distance(b);
            if distance < params.delta + params.epsilon + slack {
                return Err(Violation::Slot {
                    other,
                    t: t_max,
                    distance,
                });
            }
        }
    }

    let margin = candidate.speed * candidate.dt / 2.0;
    for (i, s) in candidate.samples.iter().enumerate() {
        let t = candidate.time_of(i);
        if t >= merge.t_merge || t > t_end {
            break;
        }
        let clearance = env.min_clearance(s.state.position());
        if !(clearance > margin) {
            return Err(Violation::Static { t, clearance });
        }
    }
    Ok(())
}

/// Assembles nominal prefix, join and the start of the leader path.
fn assemble(
    nominal: &PiecewiseTrajectory,
    i_s: usize,
    option: &JoinOption,
    leader: &LeaderPath,
    limits: &VehicleLimits,
    params: &GatekeeperParams,
) -> PiecewiseTrajectory {
    let dt = nominal.dt;
    let t_s = nominal.time_of(i_s);
    let (join, merge) = sample_join(&nominal.samples[i_s].state, t_s, option, leader, limits);
    let tail = ((params.horizon / dt).round() as usize).max(1);
    let mut samples: Vec<Sample> = Vec::with_capacity(i_s + join.len() + tail);
    samples.extend_from_slice(&nominal.samples[..i_s]);
    samples.extend(join);
    for n in 0..tail {
        let param = merge.t_leader + n as f64 * dt;
        if n > 0 && param > leader.t_final() {
            break;
        }
        samples.push(Sample {
            state: leader.interpolated(param),
            control: leader.state_at(param).1,
            tag: SegmentTag::LeaderPath,
        });
    }
    let mut traj = PiecewiseTrajectory::new(nominal.t_start, dt, nominal.speed, samples);
    traj.merge = Some(merge);
    traj
}

/// The whole nominal rollout, when it reaches the end of the mission safely.
/// Nothing is flown after the leader path ends, so no join is needed.
fn terminal_candidate(
    agent: usize,
    nominal: &PiecewiseTrajectory,
    safe_until: usize,
    committed: &CommittedSet,
    leader: &LeaderPath,
    env: &Environment,
    params: &GatekeeperParams,
) -> Option<Candidate> {
    let t_end = leader.t_final();
    if nominal.t_end() < t_end - 1e-9 || safe_until < nominal.len() {
        return None;
    }
    let mut traj = nominal.clone();
    traj.merge = Some(MergeInfo {
        t_merge: t_end,
        t_leader: t_end,
    });
    validate_candidate(&traj, agent, committed, env, leader, params).ok()?;
    Some(Candidate {
        t_s: t_end,
        t_merge: t_end,
        t_leader: t_end,
        trajectory: traj,
    })
}

/// Candidate with the latest valid switch time.
///
/// Switch times run from the end of the nominal rollout back to its start
/// on the switch-time grid. At each one the joins are tried in order and
/// the first candidate that validates wins, so the result has the maximal
/// valid switch time among those tried. At most `candidate_budget`
/// candidates are validated.
pub fn construct_candidate(
    agent: usize,
    nominal: &PiecewiseTrajectory,
    committed: &CommittedSet,
    leader: &LeaderPath,
    env: &Environment,
    limits: &VehicleLimits,
    params: &GatekeeperParams,
) -> Option<Candidate> {
    if nominal.is_empty() {
        return None;
    }
    let margin = nominal.speed * nominal.dt / 2.0;
    let safe_until = nominal
        .samples
        .iter()
        .position(|s| !env.clear_by(s.state.position(), margin))
        .unwrap_or(nominal.len());
    if let Some(c) = terminal_candidate(agent, nominal, safe_until, committed, leader, env, params)
    {
        return Some(c);
    }
    let per_switch = ((params.switch_time_step / nominal.dt).round() as usize).max(1);
    let switches = (params.horizon / params.switch_time_step + 1e-9).floor() as usize;
    let mut budget = params.candidate_budget;
    for m in (0..=switches).rev() {
        let i_s = m * per_switch;
        if i_s >= nominal.len() || i_s >= safe_until {
            continue;
        }
        let x_s = nominal.samples[i_s].state;
        for option in join_options(&x_s, leader, env, limits, params) {
            if budget == 0 {
                return None;
            }
            budget -= 1;
            let traj = assemble(nominal, i_s, &option, leader, limits, params);
            if validate_candidate(&traj, agent, committed, env, leader, params).is_ok() {
                let merge = traj.merge.expect("assembled candidates carry a merge");
                return Some(Candidate {
                    t_s: nominal.time_of(i_s),
                    t_merge: merge.t_merge,
                    t_leader: merge.t_leader,
                    trajectory: traj,
                });
            }
        }
    }
    None
}
