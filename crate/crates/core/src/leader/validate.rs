//! Certification of a sampled leader path as a shared backup set.

use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dubins::wrap_angle;
use crate::geometry::{Environment, Vec3};
use crate::trajectory::PiecewiseTrajectory;
use crate::vehicle::VehicleLimits;

/// Relative slack on curvature and speed comparisons.
const REL_TOL: f64 = 1e-6;
/// Absolute slack on pitch comparisons, radians.
const PITCH_TOL: f64 = 1e-6;
/// Random pairs drawn by the margin spot check.
const SPOT_CHECK_PAIRS: usize = 2000;
const SPOT_CHECK_SEED: u64 = 0x5eed_ca11;

/// The first failed condition, with where it failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LeaderDefect {
    Empty,
    /// Sample too close to an obstacle or the workspace boundary.
    Static {
        index: usize,
        clearance: f64,
    },
    /// Horizontal curvature above `1 / r_min` or turn-rate input out of range.
    Curvature {
        index: usize,
        curvature: f64,
    },
    /// Climb angle or pitch input out of range.
    Pitch {
        index: usize,
        pitch: f64,
    },
    /// Step length does not match the vehicle speed.
    Speed {
        index: usize,
        step: f64,
    },
    /// Two points at arc separation `delta + epsilon` or more came closer
    /// than `delta`.
    Margin {
        t1: f64,
        t2: f64,
        distance: f64,
    },
}

impl fmt::Display for LeaderDefect {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LeaderDefect::Empty => write!(f, "empty path"),
            LeaderDefect::Static { index, clearance } => {
                write!(f, "sample {index} has clearance {clearance:.4} m")
            }
            LeaderDefect::Curvature { index, curvature } => {
                write!(f, "sample {index} has curvature {curvature:.5} 1/m")
            }
            LeaderDefect::Pitch { index, pitch } => {
                write!(f, "sample {index} has pitch {:.3} deg", pitch.to_degrees())
            }
            LeaderDefect::Speed { index, step } => write!(f, "step {index} has length {step:.6} m"),
            LeaderDefect::Margin { t1, t2, distance } => {
                write!(
                    f,
                    "parameters {t1:.2} and {t2:.2} are {distance:.4} m apart"
                )
            }
        }
    }
}

fn direction(psi: f64, gamma: f64) -> Vec3 {
    Vec3::new(
        psi.cos() * gamma.cos(),
        psi.sin() * gamma.cos(),
        gamma.sin(),
    )
}

/// Outcome of [`validate_leader`]: every failed condition, first failure per
/// kind.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LeaderCheck {
    pub defects: Vec<LeaderDefect>,
}

impl LeaderCheck {
    pub fn is_valid(&self) -> bool {
        self.defects.is_empty()
    }

    pub fn has_static_defect(&self) -> bool {
        self.defects
            .iter()
            .any(|d| matches!(d, LeaderDefect::Static { .. }))
    }

    pub fn has_curvature_defect(&self) -> bool {
        self.defects
            .iter()
            .any(|d| matches!(d, LeaderDefect::Curvature { .. }))
    }

    pub fn has_pitch_defect(&self) -> bool {
        self.defects
            .iter()
            .any(|d| matches!(d, LeaderDefect::Pitch { .. }))
    }

    pub fn has_margin_defect(&self) -> bool {
        self.defects
            .iter()
            .any(|d| matches!(d, LeaderDefect::Margin { .. }))
    }
}

/// Checks static safety, curvature and pitch feasibility and the separation
/// margin of a sampled leader path.
///
/// Samples must clear obstacles by half a sample spacing so the segments
/// between them are safe too. The margin is spot-checked on random pairs
/// with a common time shift, both points interpolated between samples.
pub fn validate_leader(
    leader: &PiecewiseTrajectory,
    env: &Environment,
    limits: &VehicleLimits,
    delta: f64,
    epsilon: f64,
) -> LeaderCheck {
    let mut check = LeaderCheck::default();
    if leader.len() < 2 {
        check.defects.push(LeaderDefect::Empty);
        return check;
    }
    let spacing = leader.speed * leader.dt;
    let r_min = limits.r_min();

    if let Some((index, clearance)) = leader
        .samples
        .iter()
        .map(|s| env.min_clearance(s.state.position()))
        .enumerate()
        .find(|&(_, c)| !(c > spacing / 2.0))
    {
        check
            .defects
            .push(LeaderDefect::Static { index, clearance });
    }

    let mut curvature = None;
    let mut pitch = None;
    let mut speed = None;
    for (i, w) in leader.samples.windows(2).enumerate() {
        let a = w[0].state.position();
        let b = w[1].state.position();
        let h = a.distance_xy(b);
        let dpsi = wrap_angle(w[1].state.psi - w[0].state.psi).abs();
        let kappa = if h > 0.0 {
            2.0 * (dpsi / 2.0).sin() / h
        } else if dpsi > 0.0 {
            f64::INFINITY
        } else {
            0.0
        };
        let u = w[0].control;
        if curvature.is_none()
            && (kappa > (1.0 + REL_TOL) / r_min
                || u.omega.abs() > limits.omega_max * (1.0 + REL_TOL))
        {
            curvature = Some(LeaderDefect::Curvature {
                index: i,
                curvature: kappa.max(u.omega.abs() / limits.v_max),
            });
        }
        let climb = (b.z - a.z).atan2(h);
        let out = |g: f64| g < limits.gamma_min - PITCH_TOL || g > limits.gamma_max + PITCH_TOL;
        if pitch.is_none() && (out(climb) || out(u.gamma)) {
            pitch = Some(LeaderDefect::Pitch {
                index: i,
                pitch: if out(climb) { climb } else { u.gamma },
            });
        }
        // A step that bends through angle `bend` has a chord of at least
        // cos(bend / 2) times its arc.
        let bend = direction(w[0].state.psi, u.gamma)
            .dot(direction(w[1].state.psi, w[1].control.gamma))
            .clamp(-1.0, 1.0)
            .acos();
        let shortest = spacing * (bend / 2.0).cos() * (1.0 - REL_TOL);
        let step = a.distance(b);
        if speed.is_none() && (step > spacing * (1.0 + REL_TOL) || step < shortest) {
            speed = Some(LeaderDefect::Speed { index: i, step });
        }
    }
    check
        .defects
        .extend([curvature, pitch, speed].into_iter().flatten());

    if !(epsilon >= 0.0 && epsilon.is_finite()) {
        check.defects.push(LeaderDefect::Margin {
            t1: f64::NAN,
            t2: f64::NAN,
            distance: f64::NAN,
        });
    } else if let Some(d) = spot_check_margin(leader, delta, epsilon) {
        check.defects.push(d);
    }
    check
}

fn spot_check_margin(
    leader: &PiecewiseTrajectory,
    delta: f64,
    epsilon: f64,
) -> Option<LeaderDefect> {
    let t0 = leader.t_start;
    let tf = leader.t_end();
    let min_sep = (delta + epsilon) / leader.speed;
    if tf - t0 <= min_sep {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(SPOT_CHECK_SEED);
    for _ in 0..SPOT_CHECK_PAIRS {
        let t1 = rng.gen_range(t0..tf - min_sep);
        let t2 = rng.gen_range(t1 + min_sep..=tf);
        let tau = rng.gen_range(0.0..=tf - t2);
        let p1 = leader.position_at(t1 + tau).ok()?;
        let p2 = leader.position_at(t2 + tau).ok()?;
        let distance = p1.distance(p2);
        if distance < delta {
            return Some(LeaderDefect::Margin {
                t1: t1 + tau,
                t2: t2 + tau,
                distance,
            });
        }
    }
    None
}
