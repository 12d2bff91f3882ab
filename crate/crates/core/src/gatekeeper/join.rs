//! Join maneuvers from a switch state onto the leader path.

use crate::dubins::{dubins3_all, dubins3_connect, wrap_angle, DubinsPath3, PathPoint, Pose3};
use crate::geometry::Environment;
use crate::leader::{arc_turn_rate, LeaderPath};
use crate::trajectory::{MergeInfo, PiecewiseTrajectory, Sample, SegmentTag};
use crate::vehicle::{AirplaneState, ControlInput, VehicleLimits};

use super::GatekeeperParams;

/// A statically safe way onto the leader path.
#[derive(Debug, Clone, PartialEq)]
pub struct JoinOption {
    /// Leader path parameter of the merge point.
    pub t_leader: f64,
    /// Pieces flown in order. Empty when the switch state already sits on
    /// the path.
    pub pieces: Vec<DubinsPath3>,
}

impl JoinOption {
    pub fn length(&self) -> f64 {
        self.pieces.iter().map(|p| p.length()).sum()
    }

    /// Point at arc length `s`, clamped to the join.
    pub fn point_at(&self, s: f64) -> Option<PathPoint> {
        let mut rest = s.max(0.0);
        for (i, p) in self.pieces.iter().enumerate() {
            if rest < p.length() || i + 1 == self.pieces.len() {
                return Some(p.sample_clamped(rest));
            }
            rest -= p.length();
        }
        None
    }
}

/// Candidate merge parameters: the closest sample plus a forward lead, then
/// evenly spaced further along, all snapped to the sample grid.
fn merge_targets(
    x: &AirplaneState,
    leader: &LeaderPath,
    limits: &VehicleLimits,
    params: &GatekeeperParams,
) -> Vec<f64> {
    let closest = leader.closest_param(x.position());
    let r = limits.r_min() / leader.speed();
    (0..params.join_targets)
        .map(|j| closest + (params.join_lead_radii + j as f64 * params.join_spacing_radii) * r)
        .take_while(|&t| t <= leader.t_final())
        .map(|t| leader.param_of(leader.index_of(t)))
        .collect()
}

fn on_path(x: &AirplaneState, leader: &LeaderPath) -> Option<f64> {
    let t = leader.closest_param(x.position());
    let s = leader.state_at(t).0;
    let close =
        s.position().distance(x.position()) < 1e-6 && wrap_angle(s.psi - x.psi).abs() < 1e-6;
    close.then_some(t)
}

/// True when every point of `path` clears the obstacles, checked every
/// `step` meters with half a step of margin plus `extra`.
pub(crate) fn path_clear(env: &Environment, path: &DubinsPath3, step: f64, extra: f64) -> bool {
    let len = path.length();
    let n = (len / step).ceil() as usize;
    let margin = step / 2.0 + extra;
    (0..=n).all(|j| {
        env.clear_by(
            path.sample_clamped((j as f64 * step).min(len)).position,
            margin,
        )
    })
}

/// The join rerouted through its own midpoint shifted by `lateral` meters
/// to the left and `vertical` meters up. None if either half needs a
/// spiral to meet the pitch limits.
fn detour(
    path: &DubinsPath3,
    lateral: f64,
    vertical: f64,
    limits: &VehicleLimits,
) -> Option<Vec<DubinsPath3>> {
    if path.spirals > 0 || path.length() <= 0.0 {
        return None;
    }
    let mid = path.sample_clamped(path.length() / 2.0);
    let (s, c) = mid.heading.sin_cos();
    let w = Pose3::new(
        mid.position.x - lateral * s,
        mid.position.y + lateral * c,
        mid.position.z + vertical,
        mid.heading,
    );
    let r = limits.r_min();
    let a = dubins3_connect(path.start_pose(), w, r, limits.gamma_min, limits.gamma_max).ok()?;
    let b = dubins3_connect(w, path.goal_pose(), r, limits.gamma_min, limits.gamma_max).ok()?;
    (a.spirals == 0 && b.spirals == 0).then(|| vec![a, b])
}

/// Every detour of `path` on the offset grid, shortest first.
fn detours(
    path: &DubinsPath3,
    limits: &VehicleLimits,
    params: &GatekeeperParams,
) -> Vec<Vec<DubinsPath3>> {
    let nl = params.detour_lateral_count as i64;
    let nv = params.detour_vertical_count as i64;
    let mut out: Vec<(f64, Vec<DubinsPath3>)> = Vec::new();
    for i in -nl..=nl {
        for j in -nv..=nv {
            if i == 0 && j == 0 {
                continue;
            }
            let lateral = i as f64 * params.detour_lateral_step;
            let vertical = j as f64 * params.detour_vertical_step;
            if let Some(d) = detour(path, lateral, vertical, limits) {
                out.push((d.iter().map(|p| p.length()).sum(), d));
            }
        }
    }
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    out.into_iter().map(|(_, d)| d).collect()
}

/// Joins from `x_s` in the order they are tried. Merge points come in
/// sequence. For each one the shortest Dubins word is tried first, then
/// detours of it through a shifted midpoint, then the remaining words, each
/// group by length.
///
/// Detours let agents that would otherwise arrive in the same slot on the
/// leader path fall back by a few meters instead of a full loop. Joins that
/// hit an obstacle are skipped. The iterator is lazy, so callers that stop
/// at the first acceptable join pay only for what they inspect.
pub fn join_options<'a>(
    x_s: &AirplaneState,
    leader: &'a LeaderPath,
    env: &'a Environment,
    limits: &'a VehicleLimits,
    params: &'a GatekeeperParams,
) -> impl Iterator<Item = JoinOption> + 'a {
    let start = Pose3::new(x_s.x, x_s.y, x_s.z, x_s.psi);
    let here = on_path(x_s, leader).map(|t| JoinOption {
        t_leader: t,
        pieces: Vec::new(),
    });
    let fine = limits.v_max * leader.trajectory.dt / 2.0;
    let step = params.join_check_step;
    let targets = merge_targets(x_s, leader, limits, params);
    let joins = targets.into_iter().flat_map(move |t| {
        let g = leader.state_at(t).0;
        let goal = Pose3::new(g.x, g.y, g.z, g.psi);
        let words = dubins3_all(
            start,
            goal,
            limits.r_min(),
            limits.gamma_min,
            limits.gamma_max,
        )
        .unwrap_or_default();
        let shortest = words.first().copied();
        let direct = shortest
            .filter(|p| path_clear(env, p, step, fine))
            .map(|p| vec![p]);
        let rerouted = shortest
            .into_iter()
            .flat_map(move |p| detours(&p, limits, params))
            .filter(move |d| d.iter().all(|p| path_clear(env, p, step, fine)));
        let longer = words
            .into_iter()
            .skip(1)
            .filter(move |p| path_clear(env, p, step, fine))
            .map(|p| vec![p]);
        direct
            .into_iter()
            .chain(rerouted)
            .chain(longer)
            .map(move |pieces| JoinOption {
                t_leader: t,
                pieces,
            })
    });
    here.into_iter().chain(joins)
}

/// First statically safe join from `x_s`, sampled from `t_s` on.
///
/// Returns the join samples (tagged [`SegmentTag::Join`]) and the merge
/// parameter on the leader path.
pub fn plan_join_to_backup(
    x_s: &AirplaneState,
    t_s: f64,
    leader: &LeaderPath,
    env: &Environment,
    limits: &VehicleLimits,
    params: &GatekeeperParams,
) -> Option<(PiecewiseTrajectory, f64)> {
    let option = join_options(x_s, leader, env, limits, params).next()?;
    let (samples, merge) = sample_join(x_s, t_s, &option, leader, limits);
    let mut traj = PiecewiseTrajectory::new(t_s, leader.trajectory.dt, limits.v_max, samples);
    traj.merge = Some(merge);
    Some((traj, option.t_leader))
}

/// Samples a join on the time grid starting at `t_s`. The merge is moved to
/// the first grid time at or after the true arrival, with the leader
/// parameter advanced by the same amount.
pub(crate) fn sample_join(
    x_s: &AirplaneState,
    t_s: f64,
    option: &JoinOption,
    leader: &LeaderPath,
    limits: &VehicleLimits,
) -> (Vec<Sample>, MergeInfo) {
    let dt = leader.trajectory.dt;
    let v = limits.v_max;
    let len = option.length();
    let steps = if len > 0.0 {
        (len / (v * dt) - 1e-9).ceil().max(1.0) as usize
    } else {
        0
    };
    let mut samples = Vec::with_capacity(steps);
    if !option.pieces.is_empty() {
        for n in 0..steps {
            let pt = option.point_at(n as f64 * v * dt).expect("join has pieces");
            let state = if n == 0 {
                *x_s
            } else {
                AirplaneState::from_position(pt.position, pt.heading)
            };
            samples.push(Sample {
                state,
                control: ControlInput {
                    omega: arc_turn_rate(pt.segment, v, pt.pitch, limits.r_min()),
                    gamma: pt.pitch,
                },
                tag: SegmentTag::Join,
            });
        }
    }
    let t_merge = t_s + steps as f64 * dt;
    let t_leader = option.t_leader + (steps as f64 * dt - len / v);
    (samples, MergeInfo { t_merge, t_leader })
}
