//! Uniformly sampled, segment-tagged trajectories.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dubins::wrap_angle;
use crate::geometry::Vec3;
use crate::vehicle::{step, AirplaneState, ControlInput, VehicleLimits};

/// Which part of a candidate a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SegmentTag {
    Nominal,
    Join,
    LeaderPath,
}

impl SegmentTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SegmentTag::Nominal => "NOMINAL",
            SegmentTag::Join => "JOIN",
            SegmentTag::LeaderPath => "LEADER_PATH",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub state: AirplaneState,
    pub control: ControlInput,
    pub tag: SegmentTag,
}

/// Where a trajectory reaches the leader path: wall-clock time and leader
/// path parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MergeInfo {
    pub t_merge: f64,
    pub t_leader: f64,
}

#[derive(Debug, Error, PartialEq)]
pub enum TrajectoryError {
    #[error("time {t} outside trajectory domain [{start}, {end}]")]
    OutOfDomain { t: f64, start: f64, end: f64 },
    #[error("trajectory has no samples")]
    Empty,
}

/// Samples at `t_start + i * dt` of a vehicle flying at constant `speed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseTrajectory {
    pub t_start: f64,
    pub dt: f64,
    pub speed: f64,
    pub samples: Vec<Sample>,
    pub merge: Option<MergeInfo>,
}

/// Relative tolerance, in steps, for snapping a time onto the sample grid.
const GRID_SNAP: f64 = 1e-6;

impl PiecewiseTrajectory {
    pub fn new(t_start: f64, dt: f64, speed: f64, samples: Vec<Sample>) -> Self {
        PiecewiseTrajectory {
            t_start,
            dt,
            speed,
            samples,
            merge: None,
        }
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn t_end(&self) -> f64 {
        self.time_of(self.samples.len().saturating_sub(1))
    }

    pub fn time_of(&self, i: usize) -> f64 {
        self.t_start + i as f64 * self.dt
    }

    pub fn contains(&self, t: f64) -> bool {
        !self.samples.is_empty()
            && t >= self.t_start - GRID_SNAP * self.dt
            && t <= self.t_end() + GRID_SNAP * self.dt
    }

    /// Locates `t` as `(i, w)` with `t = t_i + w * dt`, `w` in `[0, 1)`.
    /// Times within a millionth of a step of a sample snap onto it.
    fn locate(&self, t: f64) -> Option<(usize, f64)> {
        if !self.contains(t) {
            return None;
        }
        let f = ((t - self.t_start) / self.dt).max(0.0);
        let r = f.round();
        if (f - r).abs() < GRID_SNAP {
            let i = (r as usize).min(self.samples.len() - 1);
            return Some((i, 0.0));
        }
        let i = f.floor() as usize;
        if i + 1 >= self.samples.len() {
            return Some((self.samples.len() - 1, 0.0));
        }
        Some((i, f - i as f64))
    }

    /// State and control at `t`: positions interpolate linearly, heading along
    /// the shorter arc, and the control is held from the earlier sample.
    pub fn sample_at(&self, t: f64) -> Result<(AirplaneState, ControlInput), TrajectoryError> {
        let (i, w) = self.locate(t).ok_or_else(|| self.out_of_domain(t))?;
        let a = &self.samples[i];
        if w == 0.0 {
            return Ok((a.state, a.control));
        }
        let b = &self.samples[i + 1];
        Ok((interpolate_state(&a.state, &b.state, w), a.control))
    }

    pub fn position_at(&self, t: f64) -> Result<Vec3, TrajectoryError> {
        self.sample_at(t).map(|(s, _)| s.position())
    }

    pub fn tag_at(&self, t: f64) -> Option<SegmentTag> {
        self.locate(t).map(|(i, _)| self.samples[i].tag)
    }

    fn out_of_domain(&self, t: f64) -> TrajectoryError {
        if self.samples.is_empty() {
            return TrajectoryError::Empty;
        }
        TrajectoryError::OutOfDomain {
            t,
            start: self.t_start,
            end: self.t_end(),
        }
    }

    /// Arc length between two times: the integral of the model speed, which
    /// is constant for this vehicle.
    pub fn arc_length(&self, t1: f64, t2: f64) -> Result<f64, TrajectoryError> {
        if !self.contains(t1) || !self.contains(t2) || t2 < t1 {
            let bad = if self.contains(t1) { t2 } else { t1 };
            return Err(self.out_of_domain(bad));
        }
        Ok(self.speed * (t2 - t1))
    }

    /// Tags must appear as Nominal*, Join*, LeaderPath*.
    pub fn tags_ordered(&self) -> bool {
        self.samples.windows(2).all(|w| w[0].tag <= w[1].tag)
    }

    /// Largest position error when each step is re-integrated from the stored
    /// control. Steps whose endpoint control differs from the start control
    /// and that do not belong to the nominal segment contain a control switch
    /// between samples and are skipped.
    pub fn replay_error(&self, limits: &VehicleLimits) -> f64 {
        let mut worst: f64 = 0.0;
        for w in self.samples.windows(2) {
            let switching = w[0].control != w[1].control && w[0].tag != SegmentTag::Nominal;
            if switching || w[0].tag != w[1].tag {
                continue;
            }
            let x = step(&w[0].state, &w[0].control, self.dt, limits);
            worst = worst.max(x.position().distance(w[1].state.position()));
        }
        worst
    }

    /// First index carrying `tag`.
    pub fn first_index_of(&self, tag: SegmentTag) -> Option<usize> {
        self.samples.iter().position(|s| s.tag == tag)
    }
}

pub fn interpolate_state(a: &AirplaneState, b: &AirplaneState, w: f64) -> AirplaneState {
    let p = a.position().lerp(b.position(), w);
    let psi = a.psi + w * wrap_angle(b.psi - a.psi);
    AirplaneState::from_position(p, psi)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> PiecewiseTrajectory {
        let samples = (0..n)
            .map(|i| Sample {
                state: AirplaneState::new(i as f64 * 0.01, 0.0, 0.0, 0.0),
                control: ControlInput::default(),
                tag: SegmentTag::Nominal,
            })
            .collect();
        PiecewiseTrajectory::new(1.0, 0.01, 1.0, samples)
    }

    #[test]
    fn interpolates_between_samples() {
        let t = line(11);
        let p = t.position_at(1.005).unwrap();
        assert!((p.x - 0.005).abs() < 1e-12);
        assert_eq!(t.position_at(1.1).unwrap().x, 0.1);
        assert!(t.position_at(0.99).is_err());
        assert!(t.position_at(1.2).is_err());
    }

    #[test]
    fn arc_length_basics() {
        let t = line(401);
        assert_eq!(t.arc_length(2.0, 2.0).unwrap(), 0.0);
        assert!((t.arc_length(1.5, 4.5).unwrap() - 3.0).abs() < 1e-12);
        assert!(t.arc_length(0.5, 2.0).is_err());
    }

    #[test]
    fn heading_interpolates_across_wrap() {
        let a = AirplaneState::new(0.0, 0.0, 0.0, 3.1);
        let b = AirplaneState::new(0.0, 0.0, 0.0, -3.1);
        let m = interpolate_state(&a, &b, 0.5);
        assert!((m.psi.abs() - std::f64::consts::PI).abs() < 1e-9);
    }

    #[test]
    fn tag_order() {
        let mut t = line(3);
        t.samples[1].tag = SegmentTag::Join;
        t.samples[2].tag = SegmentTag::LeaderPath;
        assert!(t.tags_ordered());
        t.samples[2].tag = SegmentTag::Nominal;
        assert!(!t.tags_ordered());
    }
}
