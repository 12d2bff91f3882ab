//! Shortest planar Dubins paths and a pitch-limited 3D extension.
//!
//! The planar solver uses the closed-form expressions for the six word
//! families. The 3D path keeps the planar geometry, flies it at a constant
//! flight-path angle and, when the climb would be too steep, prepends whole
//! helical turns until the angle fits the pitch limits.

use std::f64::consts::{PI, TAU};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::Vec3;

/// Wraps an angle into `[-π, π)`.
pub fn wrap_angle(a: f64) -> f64 {
    if (-PI..PI).contains(&a) {
        return a;
    }
    let w = (a + PI).rem_euclid(TAU) - PI;
    // rem_euclid can return TAU for tiny negative inputs
    if w >= PI {
        w - TAU
    } else {
        w
    }
}

/// Wraps an angle into `[0, 2π)`, snapping values within 1e-10 of 2π to 0.
fn mod2pi(a: f64) -> f64 {
    let m = a.rem_euclid(TAU);
    if m >= TAU - 1e-10 {
        0.0
    } else {
        m
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum DubinsError {
    #[error("turn radius must be positive, got {0}")]
    BadRadius(f64),
    #[error("pitch limits must satisfy gamma_min <= 0 <= gamma_max")]
    BadPitchLimits,
    #[error("altitude change {0} m requested without climb authority")]
    Infeasible(f64),
    #[error("arc length {s} outside [0, {len}]")]
    OutOfRange { s: f64, len: f64 },
}

/// Planar pose with heading in `[-π, π)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose2 {
    pub x: f64,
    pub y: f64,
    pub heading: f64,
}

impl Pose2 {
    pub fn new(x: f64, y: f64, heading: f64) -> Self {
        Pose2 {
            x,
            y,
            heading: wrap_angle(heading),
        }
    }
}

/// Planar pose plus altitude.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Pose3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    pub heading: f64,
}

impl Pose3 {
    pub fn new(x: f64, y: f64, z: f64, heading: f64) -> Self {
        Pose3 {
            x,
            y,
            z,
            heading: wrap_angle(heading),
        }
    }

    pub fn position(&self) -> Vec3 {
        Vec3::new(self.x, self.y, self.z)
    }

    pub fn planar(&self) -> Pose2 {
        Pose2::new(self.x, self.y, self.heading)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SegmentKind {
    Left,
    Straight,
    Right,
}

impl SegmentKind {
    /// +1 for a left (counter-clockwise) turn, -1 for right, 0 for straight.
    pub fn turn_sign(self) -> f64 {
        match self {
            SegmentKind::Left => 1.0,
            SegmentKind::Straight => 0.0,
            SegmentKind::Right => -1.0,
        }
    }
}

/// The six Dubins words, in tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DubinsFamily {
    LSL,
    RSR,
    LSR,
    RSL,
    RLR,
    LRL,
}

impl DubinsFamily {
    pub const ALL: [DubinsFamily; 6] = [
        DubinsFamily::LSL,
        DubinsFamily::RSR,
        DubinsFamily::LSR,
        DubinsFamily::RSL,
        DubinsFamily::RLR,
        DubinsFamily::LRL,
    ];

    pub fn segments(self) -> [SegmentKind; 3] {
        use SegmentKind::*;
        match self {
            DubinsFamily::LSL => [Left, Straight, Left],
            DubinsFamily::RSR => [Right, Straight, Right],
            DubinsFamily::LSR => [Left, Straight, Right],
            DubinsFamily::RSL => [Right, Straight, Left],
            DubinsFamily::RLR => [Right, Left, Right],
            DubinsFamily::LRL => [Left, Right, Left],
        }
    }
}

impl fmt::Display for DubinsFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

/// Advances a planar pose along one segment of length `len`.
pub fn advance(p: Pose2, kind: SegmentKind, len: f64, radius: f64) -> Pose2 {
    match kind {
        SegmentKind::Straight => Pose2 {
            x: p.x + len * p.heading.cos(),
            y: p.y + len * p.heading.sin(),
            heading: p.heading,
        },
        _ => {
            let k = kind.turn_sign();
            let phi = len / radius;
            let h1 = p.heading + k * phi;
            Pose2 {
                x: p.x + k * radius * (h1.sin() - p.heading.sin()),
                y: p.y - k * radius * (h1.cos() - p.heading.cos()),
                heading: wrap_angle(h1),
            }
        }
    }
}

/// Slack on the feasibility tests of the closed-form solutions.
const ROUNDOFF: f64 = 1e-10;

/// Normalized segment parameters (turn angles / straight length over radius).
fn family_params(family: DubinsFamily, alpha: f64, beta: f64, d: f64) -> Option<[f64; 3]> {
    let (sa, ca) = alpha.sin_cos();
    let (sb, cb) = beta.sin_cos();
    let c_ab = (alpha - beta).cos();
    match family {
        DubinsFamily::LSL => {
            let tmp0 = d + sa - sb;
            let p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sa - sb);
            if p_sq < -ROUNDOFF {
                return None;
            }
            let p = p_sq.max(0.0).sqrt();
            // coincident circles leave the straight's direction undefined
            let tmp1 = if p < 1e-9 {
                alpha
            } else {
                (cb - ca).atan2(tmp0)
            };
            Some([mod2pi(tmp1 - alpha), p, mod2pi(beta - tmp1)])
        }
        DubinsFamily::RSR => {
            let tmp0 = d - sa + sb;
            let p_sq = 2.0 + d * d - 2.0 * c_ab + 2.0 * d * (sb - sa);
            if p_sq < -ROUNDOFF {
                return None;
            }
            let p = p_sq.max(0.0).sqrt();
            let tmp1 = if p < 1e-9 {
                alpha
            } else {
                (ca - cb).atan2(tmp0)
            };
            Some([mod2pi(alpha - tmp1), p, mod2pi(tmp1 - beta)])
        }
        DubinsFamily::LSR => {
            let p_sq = -2.0 + d * d + 2.0 * c_ab + 2.0 * d * (sa + sb);
            if p_sq < -ROUNDOFF {
                return None;
            }
            let p = p_sq.max(0.0).sqrt();
            let tmp0 = (-ca - cb).atan2(d + sa + sb) - (-2.0f64).atan2(p);
            Some([mod2pi(tmp0 - alpha), p, mod2pi(tmp0 - mod2pi(beta))])
        }
        DubinsFamily::RSL => {
            let p_sq = -2.0 + d * d + 2.0 * c_ab - 2.0 * d * (sa + sb);
            if p_sq < -ROUNDOFF {
                return None;
            }
            let p = p_sq.max(0.0).sqrt();
            let tmp0 = (ca + cb).atan2(d - sa - sb) - 2.0f64.atan2(p);
            Some([mod2pi(alpha - tmp0), p, mod2pi(beta - tmp0)])
        }
        DubinsFamily::RLR => {
            let tmp0 = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sa - sb)) / 8.0;
            if tmp0.abs() > 1.0 + ROUNDOFF {
                return None;
            }
            let tmp0 = tmp0.clamp(-1.0, 1.0);
            let phi = (ca - cb).atan2(d - sa + sb);
            let p = mod2pi(TAU - tmp0.acos());
            let t = mod2pi(alpha - phi + mod2pi(p / 2.0));
            Some([t, p, mod2pi(alpha - beta - t + mod2pi(p))])
        }
        DubinsFamily::LRL => {
            let tmp0 = (6.0 - d * d + 2.0 * c_ab + 2.0 * d * (sb - sa)) / 8.0;
            if tmp0.abs() > 1.0 + ROUNDOFF {
                return None;
            }
            let tmp0 = tmp0.clamp(-1.0, 1.0);
            let phi = (ca - cb).atan2(d + sa - sb);
            let p = mod2pi(TAU - tmp0.acos());
            let t = mod2pi(-alpha - phi + p / 2.0);
            Some([t, p, mod2pi(mod2pi(beta) - alpha - t + mod2pi(p))])
        }
    }
}

/// A planar Dubins path. Segment lengths are in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DubinsPath2 {
    pub family: DubinsFamily,
    pub segment_params: [f64; 3],
    pub turn_radius: f64,
    pub start: Pose2,
    pub goal: Pose2,
}

impl DubinsPath2 {
    /// Path of a given family, if that family connects the poses.
    pub fn of_family(
        family: DubinsFamily,
        q0: Pose2,
        q1: Pose2,
        turn_radius: f64,
    ) -> Result<Option<Self>, DubinsError> {
        if !(turn_radius > 0.0) || !turn_radius.is_finite() {
            return Err(DubinsError::BadRadius(turn_radius));
        }
        let dx = q1.x - q0.x;
        let dy = q1.y - q0.y;
        let d = dx.hypot(dy) / turn_radius;
        let theta = if d > 0.0 { mod2pi(dy.atan2(dx)) } else { 0.0 };
        let alpha = mod2pi(q0.heading - theta);
        let beta = mod2pi(q1.heading - theta);
        Ok(family_params(family, alpha, beta, d).map(|p| DubinsPath2 {
            family,
            segment_params: [p[0] * turn_radius, p[1] * turn_radius, p[2] * turn_radius],
            turn_radius,
            start: q0,
            goal: q1,
        }))
    }

    pub fn length(&self) -> f64 {
        self.segment_params.iter().sum()
    }

    /// Pose after travelling `s` meters, clamped to the path.
    pub fn sample(&self, s: f64) -> Pose2 {
        let mut remaining = s.clamp(0.0, self.length());
        let mut pose = self.start;
        for (kind, &len) in self.family.segments().iter().zip(&self.segment_params) {
            let step = remaining.min(len);
            pose = advance(pose, *kind, step, self.turn_radius);
            remaining -= step;
            if remaining <= 0.0 {
                break;
            }
        }
        pose
    }

    /// Segment kind active at arc length `s` (the later segment at a boundary).
    pub fn segment_at(&self, s: f64) -> SegmentKind {
        let mut acc = 0.0;
        let segs = self.family.segments();
        for (i, &len) in self.segment_params.iter().enumerate() {
            acc += len;
            if s < acc {
                return segs[i];
            }
        }
        segs[2]
    }

    /// Endpoint rebuilt from start, family and segment lengths.
    pub fn end_pose(&self) -> Pose2 {
        let mut pose = self.start;
        for (kind, &len) in self.family.segments().iter().zip(&self.segment_params) {
            pose = advance(pose, *kind, len, self.turn_radius);
        }
        pose
    }
}

/// Shortest planar path between two poses with the given turn radius.
///
/// Equal lengths are resolved by [`DubinsFamily::ALL`] order.
pub fn dubins2_shortest(
    q0: Pose2,
    q1: Pose2,
    turn_radius: f64,
) -> Result<DubinsPath2, DubinsError> {
    if !(turn_radius > 0.0) || !turn_radius.is_finite() {
        return Err(DubinsError::BadRadius(turn_radius));
    }
    let same_heading = wrap_angle(q1.heading - q0.heading).abs() < 1e-12;
    if q0.x == q1.x && q0.y == q1.y && same_heading {
        return Ok(DubinsPath2 {
            family: DubinsFamily::LSL,
            segment_params: [0.0; 3],
            turn_radius,
            start: q0,
            goal: q1,
        });
    }
    let mut best: Option<DubinsPath2> = None;
    for family in DubinsFamily::ALL {
        if let Some(path) = DubinsPath2::of_family(family, q0, q1, turn_radius)? {
            // 1e-12 relative slack keeps the family order for numerical ties
            let better = best.map_or(true, |b| path.length() < b.length() * (1.0 - 1e-12));
            if better {
                best = Some(path);
            }
        }
    }
    // Walker's case analysis guarantees at least one CSC word exists.
    Ok(best.expect("at least one Dubins family is always feasible"))
}

/// Pose on a 3D path: position, heading and flight-path angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathPoint {
    pub position: Vec3,
    pub heading: f64,
    pub pitch: f64,
    /// Turn direction of the horizontal segment at this point.
    pub segment: SegmentKind,
}

/// Planar Dubins geometry flown at a constant flight-path angle, optionally
/// preceded by whole helical turns that absorb excess climb.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DubinsPath3 {
    pub horizontal: DubinsPath2,
    /// Number of full turns flown before the planar path.
    pub spirals: u32,
    /// Direction of the prepended turns.
    pub spiral_dir: SegmentKind,
    pub z_start: f64,
    pub z_goal: f64,
    pub pitch: f64,
    pub total_length: f64,
}

impl DubinsPath3 {
    pub fn horizontal_length(&self) -> f64 {
        self.spiral_length() + self.horizontal.length()
    }

    fn spiral_length(&self) -> f64 {
        self.spirals as f64 * TAU * self.horizontal.turn_radius
    }

    pub fn start_pose(&self) -> Pose3 {
        let s = self.horizontal.start;
        Pose3::new(s.x, s.y, self.z_start, s.heading)
    }

    pub fn goal_pose(&self) -> Pose3 {
        let g = self.horizontal.goal;
        Pose3::new(g.x, g.y, self.z_goal, g.heading)
    }

    /// Pose at 3D arc length `s`.
    pub fn sample(&self, s: f64) -> Result<PathPoint, DubinsError> {
        let tol = 1e-9 * self.total_length.max(1.0);
        if !(s >= -tol && s <= self.total_length + tol) {
            return Err(DubinsError::OutOfRange {
                s,
                len: self.total_length,
            });
        }
        Ok(self.sample_clamped(s))
    }

    /// Like [`sample`](Self::sample) but clamps `s` into range.
    pub fn sample_clamped(&self, s: f64) -> PathPoint {
        let s = s.clamp(0.0, self.total_length);
        let (sin_g, cos_g) = self.pitch.sin_cos();
        let sh = s * cos_g;
        let z = if s >= self.total_length {
            self.z_goal
        } else {
            self.z_start + s * sin_g
        };
        let spiral = self.spiral_length();
        let (pose, segment) = if sh < spiral {
            let p = advance(
                self.horizontal.start,
                self.spiral_dir,
                sh,
                self.horizontal.turn_radius,
            );
            (p, self.spiral_dir)
        } else {
            let rest = sh - spiral;
            (
                self.horizontal.sample(rest),
                self.horizontal.segment_at(rest),
            )
        };
        PathPoint {
            position: Vec3::new(pose.x, pose.y, z),
            heading: pose.heading,
            pitch: self.pitch,
            segment,
        }
    }

    pub fn length(&self) -> f64 {
        self.total_length
    }
}

/// Connects two poses with a curvature- and pitch-limited 3D path.
pub fn dubins3_connect(
    start: Pose3,
    goal: Pose3,
    turn_radius: f64,
    gamma_min: f64,
    gamma_max: f64,
) -> Result<DubinsPath3, DubinsError> {
    check_pitch_limits(gamma_min, gamma_max)?;
    let horizontal = dubins2_shortest(start.planar(), goal.planar(), turn_radius)?;
    lift(horizontal, start.z, goal.z, gamma_min, gamma_max)
}

/// Every planar family lifted to 3D, shortest first. Families that cannot
/// connect the poses are left out.
pub fn dubins3_all(
    start: Pose3,
    goal: Pose3,
    turn_radius: f64,
    gamma_min: f64,
    gamma_max: f64,
) -> Result<Vec<DubinsPath3>, DubinsError> {
    check_pitch_limits(gamma_min, gamma_max)?;
    let mut out = Vec::with_capacity(6);
    for family in DubinsFamily::ALL {
        if let Some(h) = DubinsPath2::of_family(family, start.planar(), goal.planar(), turn_radius)?
        {
            out.push(lift(h, start.z, goal.z, gamma_min, gamma_max)?);
        }
    }
    // stable sort keeps family order among equal lengths
    out.sort_by(|a, b| a.total_length.total_cmp(&b.total_length));
    Ok(out)
}

fn check_pitch_limits(gamma_min: f64, gamma_max: f64) -> Result<(), DubinsError> {
    if !(gamma_min <= 0.0 && gamma_max >= 0.0 && gamma_min < gamma_max) {
        return Err(DubinsError::BadPitchLimits);
    }
    Ok(())
}

/// Flies a planar path at the constant pitch that meets the altitude change,
/// adding whole turns first when the climb would exceed the pitch limit.
fn lift(
    horizontal: DubinsPath2,
    z_start: f64,
    z_goal: f64,
    gamma_min: f64,
    gamma_max: f64,
) -> Result<DubinsPath3, DubinsError> {
    let turn_radius = horizontal.turn_radius;
    let dz = z_goal - z_start;
    let l2 = horizontal.length();
    let limit = if dz >= 0.0 { gamma_max } else { -gamma_min };
    let spirals = if dz == 0.0 {
        0
    } else {
        if limit <= 0.0 {
            return Err(DubinsError::Infeasible(dz));
        }
        // smallest k with |dz| <= tan(limit) * (l2 + 2πrk)
        let needed = dz.abs() / limit.tan();
        if needed <= l2 * (1.0 + 1e-12) {
            0
        } else {
            let k = ((needed - l2) / (TAU * turn_radius) - 1e-12)
                .ceil()
                .max(1.0);
            k as u32
        }
    };
    let spiral_dir = match horizontal.family.segments()[0] {
        k if horizontal.segment_params[0] > 0.0 => k,
        _ => SegmentKind::Left,
    };
    let lh = l2 + spirals as f64 * TAU * turn_radius;
    let pitch = if lh > 0.0 { dz.atan2(lh) } else { 0.0 };
    let pitch = pitch.clamp(gamma_min, gamma_max);
    let total_length = if lh > 0.0 { lh / pitch.cos() } else { 0.0 };
    Ok(DubinsPath3 {
        horizontal,
        spirals,
        spiral_dir,
        z_start,
        z_goal,
        pitch,
        total_length,
    })
}
