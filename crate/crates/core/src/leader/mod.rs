//! Offline leader planning and certification of the shared backup path.

mod epsilon;
mod rrt;
mod validate;

pub use epsilon::{estimate_epsilon, EpsilonError, EPSILON_WINDOW};
pub use rrt::{plan_leader, plan_leader_with_stats, PlanError, PlanStats, RrtParams};
pub use validate::{validate_leader, LeaderCheck, LeaderDefect};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dubins::{DubinsPath3, SegmentKind};
use crate::geometry::Vec3;
use crate::trajectory::{interpolate_state, PiecewiseTrajectory, Sample, SegmentTag};
use crate::vehicle::{AirplaneState, ControlInput, VehicleLimits};

/// Turn-rate input that flies a horizontal arc of radius `r` at pitch `gamma`.
pub fn arc_turn_rate(kind: SegmentKind, v: f64, gamma: f64, r: f64) -> f64 {
    kind.turn_sign() * v * gamma.cos() / r
}

/// Samples a chain of 3D Dubins pieces at `v * dt` arc spacing.
///
/// The grid stops at the last whole step, so the final sample lies within
/// `v * dt` of the chain's end.
pub fn sample_pieces(
    pieces: &[DubinsPath3],
    t0: f64,
    dt: f64,
    limits: &VehicleLimits,
    tag: SegmentTag,
) -> PiecewiseTrajectory {
    let v = limits.v_max;
    let r = limits.r_min();
    let total: f64 = pieces.iter().map(|p| p.length()).sum();
    let steps = (total / (v * dt) + 1e-9).floor() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut piece = 0;
    let mut offset = 0.0;
    for n in 0..=steps {
        let s = n as f64 * v * dt;
        while piece + 1 < pieces.len() && s >= offset + pieces[piece].length() {
            offset += pieces[piece].length();
            piece += 1;
        }
        let pt = pieces[piece].sample_clamped(s - offset);
        samples.push(Sample {
            state: AirplaneState::from_position(pt.position, pt.heading),
            control: ControlInput {
                omega: arc_turn_rate(pt.segment, v, pt.pitch, r),
                gamma: pt.pitch,
            },
            tag,
        });
    }
    PiecewiseTrajectory::new(t0, dt, v, samples)
}

/// The leader trajectory together with its certified separation data. It is
/// the backup set every follower can merge onto.
#[derive(Debug, Clone, PartialEq)]
pub struct LeaderPath {
    pub trajectory: PiecewiseTrajectory,
    /// Inter-agent collision radius the path was certified for.
    pub delta: f64,
    /// Curvature margin: arc separation `delta + epsilon` keeps agents
    /// `delta` apart for as long as both follow the path.
    pub epsilon: f64,
    /// Arc length between samples.
    pub sample_spacing: f64,
}

impl LeaderPath {
    pub fn new(trajectory: PiecewiseTrajectory, delta: f64, epsilon: f64) -> Self {
        let sample_spacing = trajectory.speed * trajectory.dt;
        let mut trajectory = trajectory;
        for s in &mut trajectory.samples {
            s.tag = SegmentTag::LeaderPath;
        }
        LeaderPath {
            trajectory,
            delta,
            epsilon,
            sample_spacing,
        }
    }

    pub fn t0(&self) -> f64 {
        self.trajectory.t_start
    }

    pub fn t_final(&self) -> f64 {
        self.trajectory.t_end()
    }

    pub fn speed(&self) -> f64 {
        self.trajectory.speed
    }

    pub fn len(&self) -> usize {
        self.trajectory.len()
    }

    pub fn is_empty(&self) -> bool {
        self.trajectory.is_empty()
    }

    pub fn clamp_param(&self, t: f64) -> f64 {
        t.clamp(self.t0(), self.t_final())
    }

    /// State and control at path parameter `t`, clamped to the path.
    pub fn state_at(&self, t: f64) -> (AirplaneState, ControlInput) {
        self.trajectory
            .sample_at(self.clamp_param(t))
            .expect("clamped parameter is inside the leader domain")
    }

    pub fn position_at(&self, t: f64) -> Vec3 {
        self.state_at(t).0.position()
    }

    /// Leader pitch (flight-path angle) at `t`.
    pub fn pitch_at(&self, t: f64) -> f64 {
        self.state_at(t).1.gamma
    }

    /// Sample index nearest to parameter `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let f = ((self.clamp_param(t) - self.t0()) / self.trajectory.dt).round();
        (f as usize).min(self.len() - 1)
    }

    pub fn param_of(&self, index: usize) -> f64 {
        self.trajectory.time_of(index)
    }

    /// Parameter of the sample closest to `p`: a coarse scan followed by a
    /// local fine scan.
    pub fn closest_param(&self, p: Vec3) -> f64 {
        let n = self.len();
        let stride = 25.max(1);
        let dist = |i: usize| self.trajectory.samples[i].state.position().distance(p);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        let mut i = 0;
        while i < n {
            let d = dist(i);
            if d < best_d {
                best_d = d;
                best = i;
            }
            i += stride;
        }
        let lo = best.saturating_sub(stride);
        let hi = (best + stride).min(n - 1);
        for j in lo..=hi {
            let d = dist(j);
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        self.param_of(best)
    }

    /// Interpolated state between parameters (used by tests and oracles).
    pub fn interpolated(&self, t: f64) -> AirplaneState {
        let t = self.clamp_param(t);
        let f = (t - self.t0()) / self.trajectory.dt;
        let i = (f.floor() as usize).min(self.len() - 1);
        if i + 1 >= self.len() {
            return self.trajectory.samples[i].state;
        }
        interpolate_state(
            &self.trajectory.samples[i].state,
            &self.trajectory.samples[i + 1].state,
            f - i as f64,
        )
    }

    pub fn to_file_format(&self) -> LeaderPathFile {
        let traj = &self.trajectory;
        LeaderPathFile {
            dt: traj.dt,
            v_max: traj.speed,
            delta: self.delta,
            epsilon: self.epsilon,
            states: traj
                .samples
                .iter()
                .enumerate()
                .map(|(i, s)| {
                    [
                        traj.time_of(i),
                        s.state.x,
                        s.state.y,
                        s.state.z,
                        s.state.psi,
                        s.control.gamma,
                    ]
                })
                .collect(),
            controls: traj
                .samples
                .iter()
                .map(|s| [s.control.omega, s.control.gamma])
                .collect(),
        }
    }

    pub fn from_file_format(f: LeaderPathFile) -> Result<Self, LeaderFileError> {
        if f.states.is_empty() {
            return Err(LeaderFileError::Empty);
        }
        if f.states.len() != f.controls.len() {
            return Err(LeaderFileError::LengthMismatch(
                f.states.len(),
                f.controls.len(),
            ));
        }
        if !(f.dt > 0.0 && f.v_max > 0.0 && f.delta > 0.0 && f.epsilon >= 0.0) {
            return Err(LeaderFileError::BadScalars);
        }
        let samples = f
            .states
            .iter()
            .zip(&f.controls)
            .map(|(s, c)| Sample {
                state: AirplaneState::new(s[1], s[2], s[3], s[4]),
                control: ControlInput {
                    omega: c[0],
                    gamma: c[1],
                },
                tag: SegmentTag::LeaderPath,
            })
            .collect();
        let traj = PiecewiseTrajectory::new(f.states[0][0], f.dt, f.v_max, samples);
        Ok(LeaderPath::new(traj, f.delta, f.epsilon))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&self.to_file_format()).expect("leader path serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, LeaderFileError> {
        let f: LeaderPathFile =
            serde_json::from_str(s).map_err(|e| LeaderFileError::Parse(e.to_string()))?;
        Self::from_file_format(f)
    }
}

/// On-disk leader path layout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderPathFile {
    pub dt: f64,
    pub v_max: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// `[t, x, y, z, psi, gamma]` per sample.
    pub states: Vec<[f64; 6]>,
    /// `[omega, gamma]` per sample.
    pub controls: Vec<[f64; 2]>,
}

#[derive(Debug, Error, PartialEq)]
pub enum LeaderFileError {
    #[error("leader file has no samples")]
    Empty,
    #[error("state and control counts differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("leader file scalars out of range")]
    BadScalars,
    #[error("leader file parse error: {0}")]
    Parse(String),
}
