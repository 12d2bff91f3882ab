//! A fixed narrow-gate scenario: a fence of cylinders with one channel as
//! wide as the minimum turn radius, straight on the leader's line.

use serde::{Deserialize, Serialize};

use crate::dubins::{dubins3_connect, DubinsPath3, Pose3};
use crate::geometry::{Cylinder, Environment, Vec3};
use crate::leader::{estimate_epsilon, sample_pieces, validate_leader, LeaderPath};
use crate::trajectory::SegmentTag;

use super::{FormationSpec, Scenario, ScenarioConfig, ScenarioError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateLayout {
    /// x of the fence and channel entrance.
    pub fence_x: f64,
    /// Length of the channel along x.
    pub channel_length: f64,
    /// Fence reach sideways from the channel axis.
    pub fence_half_width: f64,
    pub post_radius: f64,
    /// Center spacing of the posts; below twice the radius they overlap.
    pub post_spacing: f64,
    /// Level flight past the channel exit before the first turn.
    pub exit_straight: f64,
    /// After the exit: turns (radians, positive left) each followed by a
    /// straight of the given length.
    pub legs: Vec<[f64; 2]>,
    /// Radius of the leader's turns, in minimum turn radii.
    pub turn_radii: f64,
}

impl Default for GateLayout {
    fn default() -> Self {
        GateLayout {
            fence_x: 50.0,
            channel_length: 6.0,
            fence_half_width: 30.0,
            post_radius: 2.0,
            post_spacing: 3.0,
            exit_straight: 10.0,
            legs: vec![[-0.02, 60.0]],
            turn_radii: 1.0,
        }
    }
}

impl GateLayout {
    /// Posts lining both sides of the channel and the fence across the
    /// approach on either side of it. The innermost post axes sit
    /// `half_gap` off the channel axis.
    pub fn posts(&self, half_gap: f64, z: (f64, f64)) -> Result<Vec<Cylinder>, ScenarioError> {
        let r = self.post_radius;
        let wall_y = half_gap;
        let mut out = Vec::new();
        for side in [1.0, -1.0] {
            let along = (self.channel_length / self.post_spacing).ceil() as usize;
            for i in 0..=along {
                let x = self.fence_x + (i as f64 * self.post_spacing).min(self.channel_length);
                out.push(Cylinder::new(x, side * wall_y, r, z.0, z.1)?);
            }
            let across = ((self.fence_half_width - wall_y) / self.post_spacing).ceil() as usize;
            for j in 1..=across {
                let y = wall_y + j as f64 * self.post_spacing;
                out.push(Cylinder::new(self.fence_x, side * y, r, z.0, z.1)?);
            }
        }
        Ok(out)
    }

    /// Leader waypoints: start, channel exit plus the exit straight, then
    /// the end of every leg.
    fn waypoints(&self, r: f64) -> Vec<Pose3> {
        let mut p = Pose3::new(
            self.fence_x + self.channel_length + self.exit_straight,
            0.0,
            0.0,
            0.0,
        );
        let mut out = vec![Pose3::new(0.0, 0.0, 0.0, 0.0), p];
        for &[angle, straight] in &self.legs {
            if angle != 0.0 {
                let side = angle.signum();
                let (cx, cy) = (
                    p.x - side * r * p.heading.sin(),
                    p.y + side * r * p.heading.cos(),
                );
                let h = p.heading + angle;
                p = Pose3::new(cx + side * r * h.sin(), cy - side * r * h.cos(), p.z, h);
                out.push(p);
            }
            p = Pose3::new(
                p.x + straight * p.heading.cos(),
                p.y + straight * p.heading.sin(),
                p.z,
                p.heading,
            );
            out.push(p);
        }
        out
    }

    /// Leader time at which the channel is entered and left.
    pub fn transit(&self) -> (f64, f64) {
        (self.fence_x, self.fence_x + self.channel_length)
    }
}

/// Builds the gate scenario around `base` (limits, offsets, gains and
/// gatekeeper settings are taken from it).
pub fn gate_scenario(
    layout: &GateLayout,
    base: &ScenarioConfig,
) -> Result<Scenario, ScenarioError> {
    let limits = base.limits;
    let half_gap = limits.r_min() / 2.0;
    let turn = layout.turn_radii * limits.r_min();
    let points = layout.waypoints(turn);
    let pieces: Vec<DubinsPath3> = points
        .windows(2)
        .map(|w| dubins3_connect(w[0], w[1], turn, limits.gamma_min, limits.gamma_max))
        .collect::<Result<_, _>>()
        .map_err(|e| ScenarioError::Config(format!("gate leader path: {e}")))?;

    let (lo, hi) = points.iter().fold(
        (Vec3::new(0.0, 0.0, 0.0), Vec3::new(0.0, 0.0, 0.0)),
        |(lo, hi), p| {
            (
                Vec3::new(lo.x.min(p.x), lo.y.min(p.y), lo.z.min(p.z)),
                Vec3::new(hi.x.max(p.x), hi.y.max(p.y), hi.z.max(p.z)),
            )
        },
    );
    let pad = Vec3::new(30.0, layout.fence_half_width.max(30.0), 30.0);
    let (bmin, bmax) = (lo - pad, hi + pad);
    let posts = layout.posts(half_gap, (bmin.z, bmax.z))?;
    let env = Environment::new(bmin, bmax, posts, 0.0)?;

    let traj = sample_pieces(&pieces, 0.0, base.dt, &limits, SegmentTag::LeaderPath);
    let spacing = limits.v_max * base.dt;
    let duration = traj.t_end() - traj.t_start;
    let eps = estimate_epsilon(&traj, base.delta, duration, spacing)
        .map_err(|e| ScenarioError::Config(format!("gate leader margin: {e}")))?;
    let check = validate_leader(&traj, &env, &limits, base.delta, eps);
    if let Some(d) = check.defects.first() {
        return Err(ScenarioError::Config(format!(
            "gate leader path rejected: {d}"
        )));
    }
    let leader = LeaderPath::new(traj, base.delta, eps);

    let config = ScenarioConfig {
        workspace_min: bmin,
        workspace_max: bmax,
        boundary_margin: 0.0,
        n_obstacles: env.obstacles.len(),
        start: points[0],
        goal: *points.last().expect("waypoints"),
        ..base.clone()
    };
    let formation = FormationSpec {
        offsets: config.offsets.clone(),
        initial: config.follower_starts(),
    };
    Ok(Scenario {
        config,
        env,
        leader,
        formation,
        attempts: 1,
    })
}
