//! Constant-speed 3D Dubins airplane: dynamics, integration and the nominal
//! formation-tracking controller.

use serde::{Deserialize, Serialize};

use crate::dubins::wrap_angle;
use crate::geometry::Vec3;
use crate::trajectory::{PiecewiseTrajectory, Sample, SegmentTag};

/// Airplane state: position and heading (radians, `[-π, π)`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AirplaneState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub psi: f64,
}

impl AirplaneState {
    pub fn new(x: f64, y: f64, z: f64, psi: f64) -> Self {
        AirplaneState {
            x,
            y,
            z,
            psi: wrap_angle(psi),
        }
    }

    pub fn from_position(p: Vec3, psi: f64) -> Self {
        Self::new(p.x, p.y, p.z, psi)
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }
}

/// Turn rate and flight-path angle.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlInput {
    pub omega: f64,
    pub gamma: f64,
}

impl ControlInput {
    /// Builds an input clipped to the vehicle limits.
    pub fn saturated(omega: f64, gamma: f64, limits: &VehicleLimits) -> Self {
        ControlInput {
            omega: omega.clamp(-limits.omega_max, limits.omega_max),
            gamma: gamma.clamp(limits.gamma_min, limits.gamma_max),
        }
    }

    pub fn within(&self, limits: &VehicleLimits) -> bool {
        self.omega.abs() <= limits.omega_max
            && self.gamma >= limits.gamma_min
            && self.gamma <= limits.gamma_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VehicleLimits {
    pub v_max: f64,
    pub omega_max: f64,
    pub gamma_min: f64,
    pub gamma_max: f64,
}

impl VehicleLimits {
    /// Limits from a horizontal turn radius instead of a turn rate.
    pub fn from_turn_radius(v_max: f64, r_min: f64, gamma_min: f64, gamma_max: f64) -> Self {
        VehicleLimits {
            v_max,
            omega_max: v_max / r_min,
            gamma_min,
            gamma_max,
        }
    }

    /// 1 m/s, 10 m turn radius, pitch in (-15°, 20°).
    pub fn paper_default() -> Self {
        Self::from_turn_radius(1.0, 10.0, (-15f64).to_radians(), 20f64.to_radians())
    }

    pub fn r_min(&self) -> f64 {
        self.v_max / self.omega_max
    }

    pub fn is_valid(&self) -> bool {
        self.v_max > 0.0 && self.omega_max > 0.0 && self.gamma_min < 0.0 && self.gamma_max > 0.0
    }
}

fn derivative(s: &[f64; 4], u: &ControlInput, v: f64) -> [f64; 4] {
    let (sg, cg) = u.gamma.sin_cos();
    let (sp, cp) = s[3].sin_cos();
    [v * cp * cg, v * sp * cg, v * sg, u.omega]
}

/// One fourth-order Runge-Kutta step of length `dt`.
pub fn step(x: &AirplaneState, u: &ControlInput, dt: f64, limits: &VehicleLimits) -> AirplaneState {
    let v = limits.v_max;
    let s0 = [x.x, x.y, x.z, x.psi];
    let add = |a: &[f64; 4], k: &[f64; 4], h: f64| -> [f64; 4] {
        [
            a[0] + h * k[0],
            a[1] + h * k[1],
            a[2] + h * k[2],
            a[3] + h * k[3],
        ]
    };
    let k1 = derivative(&s0, u, v);
    let k2 = derivative(&add(&s0, &k1, dt / 2.0), u, v);
    let k3 = derivative(&add(&s0, &k2, dt / 2.0), u, v);
    let k4 = derivative(&add(&s0, &k3, dt), u, v);
    let mut out = [0.0; 4];
    for i in 0..4 {
        out[i] = s0[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    AirplaneState::new(out[0], out[1], out[2], out[3])
}

/// Point the nominal controller tracks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub position: Vec3,
    pub heading: f64,
    pub pitch: f64,
}

/// Gains of the pursuit law.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NominalGains {
    /// Heading gain, 1/s.
    pub k_psi: f64,
    /// Inside this distance the controller follows the reference heading.
    pub capture_radius: f64,
    /// Carrot distance ahead of the reference used inside the capture radius.
    pub lookahead: f64,
}

impl Default for NominalGains {
    fn default() -> Self {
        NominalGains {
            k_psi: 2.0,
            capture_radius: 1.0,
            lookahead: 5.0,
        }
    }
}

/// Pure-pursuit formation controller.
///
/// Far from the reference the vehicle steers and pitches toward it. Within
/// the capture radius it aims at a carrot placed `lookahead` meters ahead of
/// the reference along the reference heading and pitch, which reduces to
/// holding the reference heading once on station.
pub fn nominal_control(
    x: &AirplaneState,
    reference: &Reference,
    limits: &VehicleLimits,
    gains: &NominalGains,
) -> ControlInput {
    let here = x.position();
    let to_ref = reference.position - here;
    let target = if to_ref.norm() <= gains.capture_radius {
        let (sp, cp) = reference.heading.sin_cos();
        let (sg, cg) = reference.pitch.sin_cos();
        reference.position + Vec3::new(cp * cg, sp * cg, sg) * gains.lookahead
    } else {
        reference.position
    };
    let d = target - here;
    let horizontal = d.x.hypot(d.y);
    let bearing = if horizontal > 0.0 {
        d.y.atan2(d.x)
    } else {
        x.psi
    };
    let omega = gains.k_psi * wrap_angle(bearing - x.psi);
    let gamma = d.z.atan2(horizontal);
    ControlInput::saturated(omega, gamma, limits)
}

/// Closed-loop rollout of [`nominal_control`] against a moving reference over
/// `[t0, t0 + horizon]`. Produces `round(horizon / dt) + 1` samples tagged
/// nominal; the final sample repeats the last applied control.
pub fn propagate_nominal<F>(
    x0: AirplaneState,
    reference: F,
    t0: f64,
    horizon: f64,
    dt: f64,
    limits: &VehicleLimits,
    gains: &NominalGains,
) -> PiecewiseTrajectory
where
    F: Fn(f64) -> Reference,
{
    let steps = (horizon / dt).round() as usize;
    let mut samples = Vec::with_capacity(steps + 1);
    let mut x = x0;
    let mut u = ControlInput::default();
    for n in 0..steps {
        let t = t0 + n as f64 * dt;
        u = nominal_control(&x, &reference(t), limits, gains);
        samples.push(Sample {
            state: x,
            control: u,
            tag: SegmentTag::Nominal,
        });
        x = step(&x, &u, dt, limits);
    }
    samples.push(Sample {
        state: x,
        control: u,
        tag: SegmentTag::Nominal,
    });
    PiecewiseTrajectory::new(t0, dt, limits.v_max, samples)
}
