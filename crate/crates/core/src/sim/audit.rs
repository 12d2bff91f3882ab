//! Independent re-check of commitments against each other and the map.

use serde::{Deserialize, Serialize};

use crate::gatekeeper::{committed_position, leader_param, CommittedSet};
use crate::geometry::Environment;
use crate::leader::LeaderPath;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AuditKind {
    /// Trajectory does not end on the leader path.
    NoMerge,
    /// Sample before the merge outside the safe set.
    Static,
    /// Two commitments closer than delta before both merged.
    Separation,
    /// Both on the path with less than delta + epsilon of arc between them.
    Slot,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AuditViolation {
    /// Agent whose new commitment was audited.
    pub agent: usize,
    /// Time the commitment was made.
    pub committed_at: f64,
    pub other: Option<usize>,
    pub kind: AuditKind,
    /// Time of the offending sample.
    pub t: f64,
    /// Distance, clearance or arc gap at that time.
    pub value: f64,
}

/// Audits `agent`'s commitment in `committed` at time `t_now` against every
/// other held commitment.
///
/// Unlike the planner's check this walks every step of size `dt`, uses
/// exact thresholds without sampling slack, and measures slot spacing as arc
/// length on the leader path. Everything stops at the end of the path.
pub fn audit_committed_set(
    committed: &CommittedSet,
    agent: usize,
    t_now: f64,
    dt: f64,
    env: &Environment,
    leader: &LeaderPath,
) -> Vec<AuditViolation> {
    let mut out = Vec::new();
    let Some(mine) = committed.get(agent) else {
        return out;
    };
    let report = |other, kind, t, value| AuditViolation {
        agent,
        committed_at: t_now,
        other,
        kind,
        t,
        value,
    };
    let traj = &mine.trajectory;
    let Some(merge) = traj.merge else {
        out.push(report(None, AuditKind::NoMerge, t_now, 0.0));
        return out;
    };
    let t_end = leader.t_final();

    for (i, s) in traj.samples.iter().enumerate() {
        let t = traj.time_of(i);
        if t < t_now - 1e-9 {
            continue;
        }
        if t > t_end || (t >= merge.t_merge && merge.t_merge < t_end) {
            break;
        }
        let c = env.min_clearance(s.state.position());
        if !(c > 0.0) {
            out.push(report(None, AuditKind::Static, t, c));
            break;
        }
    }

    for (other, c) in committed.others(agent) {
        let Some(their) = c.trajectory.merge else {
            out.push(report(Some(other), AuditKind::NoMerge, t_now, 0.0));
            continue;
        };
        let t_max = merge.t_merge.max(their.t_merge).max(t_now);
        let mut n = 0usize;
        loop {
            let t = t_now + n as f64 * dt;
            if t > t_max.min(t_end) + 1e-9 {
                break;
            }
            let a = committed_position(traj, leader, t);
            let b = committed_position(&c.trajectory, leader, t);
            let (Some(a), Some(b)) = (a, b) else {
                out.push(report(Some(other), AuditKind::NoMerge, t, 0.0));
                break;
            };
            let d = a.distance(b);
            if d < leader.delta {
                out.push(report(Some(other), AuditKind::Separation, t, d));
                break;
            }
            n += 1;
        }
        if t_max < t_end {
            let pa = leader_param(traj, t_max).expect("merged");
            let pb = leader_param(&c.trajectory, t_max).expect("merged");
            let gap = (pa - pb).abs() * leader.speed();
            if gap < leader.delta + leader.epsilon {
                out.push(report(Some(other), AuditKind::Slot, t_max, gap));
            }
        }
    }
    out
}
