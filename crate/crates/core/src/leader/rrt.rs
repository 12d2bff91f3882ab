//! RRT* over 3D Dubins edges.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dubins::{dubins3_connect, DubinsPath3, Pose3};
use crate::geometry::{Environment, Vec3};
use crate::trajectory::{PiecewiseTrajectory, SegmentTag};
use crate::vehicle::VehicleLimits;

use super::sample_pieces;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RrtParams {
    pub max_iterations: usize,
    /// Probability of sampling the goal instead of a random point.
    pub goal_bias: f64,
    /// Turn radius of the steering paths, at least the vehicle's.
    pub steer_radius: f64,
    /// Neighborhood searched when choosing parents and rewiring.
    pub rewire_radius: f64,
    /// Largest allowed distance from the last sample to the goal.
    pub goal_tolerance: f64,
    pub seed: u64,
    /// Longest extension toward a random sample.
    pub step_length: f64,
    /// Arc step of edge collision checks.
    pub collision_step: f64,
    /// At most this many neighbors are considered per new node.
    pub max_neighbors: usize,
    /// Length of the level straight flown into the goal.
    pub goal_approach: f64,
    /// Sampling time step of the returned trajectory.
    pub dt: f64,
    /// Sampling region. Defaults to the environment bounds.
    pub sample_min: Option<Vec3>,
    pub sample_max: Option<Vec3>,
}

impl Default for RrtParams {
    fn default() -> Self {
        RrtParams {
            max_iterations: 1500,
            goal_bias: 0.1,
            steer_radius: 10.0,
            rewire_radius: 35.0,
            goal_tolerance: 0.05,
            seed: 0,
            step_length: 25.0,
            collision_step: 0.5,
            max_neighbors: 30,
            goal_approach: 5.0,
            dt: 0.01,
            sample_min: None,
            sample_max: None,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum PlanError {
    #[error("start pose is not in the safe set with collision margin")]
    StartUnsafe,
    #[error("goal pose is not in the safe set with collision margin")]
    GoalUnsafe,
    #[error("invalid planner parameters: {0}")]
    BadParams(&'static str),
    #[error("no path found after {0} iterations")]
    NoPath(usize),
}

/// Planner bookkeeping.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PlanStats {
    pub iterations: usize,
    pub nodes: usize,
    /// Best start-to-goal length after each iteration, infinite until found.
    pub cost_history: Vec<f64>,
    pub best_cost: f64,
}

struct Node {
    pose: Pose3,
    parent: Option<usize>,
    cost: f64,
    edge: Option<DubinsPath3>,
    children: Vec<usize>,
}

struct Planner<'a> {
    env: &'a Environment,
    params: &'a RrtParams,
    radius: f64,
    gamma_min: f64,
    gamma_max: f64,
    margin: f64,
    nodes: Vec<Node>,
}

impl Planner<'_> {
    fn connect(&self, a: Pose3, b: Pose3) -> Option<DubinsPath3> {
        dubins3_connect(a, b, self.radius, self.gamma_min, self.gamma_max).ok()
    }

    fn edge_free(&self, path: &DubinsPath3) -> bool {
        let len = path.length();
        let steps = (len / self.params.collision_step).ceil() as usize;
        (1..=steps).all(|j| {
            let s = (j as f64 * self.params.collision_step).min(len);
            self.env
                .clear_by(path.sample_clamped(s).position, self.margin)
        })
    }

    fn nearest(&self, p: Vec3) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, n) in self.nodes.iter().enumerate() {
            let d = n.pose.position().distance(p);
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Up to `max_neighbors` nodes within the rewire radius, nearest first.
    fn near(&self, p: Vec3) -> Vec<(usize, f64)> {
        let mut out: Vec<(usize, f64)> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| (i, n.pose.position().distance(p)))
            .filter(|&(_, d)| d <= self.params.rewire_radius)
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out.truncate(self.params.max_neighbors);
        out
    }

    fn reparent(&mut self, child: usize, parent: usize, edge: DubinsPath3) {
        if let Some(old) = self.nodes[child].parent {
            self.nodes[old].children.retain(|&c| c != child);
        }
        let new_cost = self.nodes[parent].cost + edge.length();
        let delta = self.nodes[child].cost - new_cost;
        self.nodes[child].parent = Some(parent);
        self.nodes[child].edge = Some(edge);
        self.nodes[parent].children.push(child);
        let mut stack = vec![child];
        while let Some(i) = stack.pop() {
            self.nodes[i].cost -= delta;
            stack.extend(self.nodes[i].children.iter().copied());
        }
    }

    fn chain(&self, mut i: usize) -> Vec<DubinsPath3> {
        let mut edges = Vec::new();
        while let Some(p) = self.nodes[i].parent {
            edges.push(self.nodes[i].edge.expect("non-root nodes carry an edge"));
            i = p;
        }
        edges.reverse();
        edges
    }
}

/// Plans a leader trajectory from `start` to `goal`.
pub fn plan_leader(
    env: &Environment,
    start: Pose3,
    goal: Pose3,
    limits: &VehicleLimits,
    params: &RrtParams,
) -> Result<PiecewiseTrajectory, PlanError> {
    plan_leader_with_stats(env, start, goal, limits, params).map(|(t, _)| t)
}

/// [`plan_leader`] that also reports the cost history.
pub fn plan_leader_with_stats(
    env: &Environment,
    start: Pose3,
    goal: Pose3,
    limits: &VehicleLimits,
    params: &RrtParams,
) -> Result<(PiecewiseTrajectory, PlanStats), PlanError> {
    if !(0.0..=1.0).contains(&params.goal_bias) {
        return Err(PlanError::BadParams("goal_bias must lie in [0, 1]"));
    }
    if !(params.rewire_radius > 0.0 && params.step_length > 0.0 && params.collision_step > 0.0) {
        return Err(PlanError::BadParams("radii and steps must be positive"));
    }
    if params.steer_radius < limits.r_min() * (1.0 - 1e-12) {
        return Err(PlanError::BadParams(
            "steer_radius below the vehicle turn radius",
        ));
    }
    if !(params.dt > 0.0) || params.goal_tolerance < limits.v_max * params.dt {
        return Err(PlanError::BadParams(
            "goal_tolerance must cover one sample step",
        ));
    }
    let spacing = limits.v_max * params.dt;
    let margin = params.collision_step / 2.0 + spacing / 2.0;
    if !env.clear_by(start.position(), margin) {
        return Err(PlanError::StartUnsafe);
    }
    if !env.clear_by(goal.position(), margin) {
        return Err(PlanError::GoalUnsafe);
    }

    let mut planner = Planner {
        env,
        params,
        radius: params.steer_radius,
        gamma_min: limits.gamma_min,
        gamma_max: limits.gamma_max,
        margin,
        nodes: vec![Node {
            pose: start,
            parent: None,
            cost: 0.0,
            edge: None,
            children: Vec::new(),
        }],
    };

    // The tree connects to a pre-goal pose, followed by a level approach.
    let (approach, target) = if params.goal_approach > 0.0 {
        let back = Vec3::new(goal.heading.cos(), goal.heading.sin(), 0.0) * params.goal_approach;
        let pre = goal.position() - back;
        let pre = Pose3::new(pre.x, pre.y, pre.z, goal.heading);
        let edge = planner.connect(pre, goal).ok_or(PlanError::GoalUnsafe)?;
        if !planner.env.clear_by(pre.position(), margin) || !planner.edge_free(&edge) {
            return Err(PlanError::GoalUnsafe);
        }
        (Some(edge), pre)
    } else {
        (None, goal)
    };

    let lo = params.sample_min.unwrap_or(env.bounds_min);
    let hi = params.sample_max.unwrap_or(env.bounds_max);
    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut goal_links: Vec<(usize, DubinsPath3)> = Vec::new();
    let mut best_cost = f64::INFINITY;
    let mut stats = PlanStats::default();

    let best_of = |nodes: &[Node], links: &[(usize, DubinsPath3)]| {
        links
            .iter()
            .enumerate()
            .map(|(k, (n, e))| (k, nodes[*n].cost + e.length()))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    };

    // the start itself may see the goal
    if let Some(e) = planner.connect(start, target) {
        if planner.edge_free(&e) {
            goal_links.push((0, e));
        }
    }

    for _ in 0..params.max_iterations {
        stats.iterations += 1;
        let sample = if rng.gen::<f64>() < params.goal_bias {
            target.position()
        } else {
            Vec3::new(
                rng.gen_range(lo.x..hi.x),
                rng.gen_range(lo.y..hi.y),
                rng.gen_range(lo.z..hi.z),
            )
        };
        let near_idx = planner.nearest(sample);
        let from = planner.nodes[near_idx].pose.position();
        let d = from.distance(sample);
        let p = if d > params.step_length {
            from + (sample - from) * (params.step_length / d)
        } else {
            sample
        };
        let dir = p - from;
        let heading = if dir.x.hypot(dir.y) > 1e-9 {
            dir.y.atan2(dir.x)
        } else {
            planner.nodes[near_idx].pose.heading
        };
        if d < 1e-6 || !env.clear_by(p, margin) {
            stats.cost_history.push(best_cost);
            continue;
        }
        let pose = Pose3::new(p.x, p.y, p.z, heading);

        let mut near = planner.near(p);
        if !near.iter().any(|&(i, _)| i == near_idx) {
            near.push((near_idx, d));
        }
        let mut choice: Option<(usize, DubinsPath3, f64)> = None;
        let mut order: Vec<(usize, f64)> = near
            .iter()
            .map(|&(i, dist)| (i, planner.nodes[i].cost + dist))
            .collect();
        order.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        for (i, lower) in order {
            if choice.as_ref().is_some_and(|c| lower >= c.2) {
                break;
            }
            let Some(edge) = planner.connect(planner.nodes[i].pose, pose) else {
                continue;
            };
            let cost = planner.nodes[i].cost + edge.length();
            if choice.as_ref().is_some_and(|c| cost >= c.2) {
                continue;
            }
            if planner.edge_free(&edge) {
                choice = Some((i, edge, cost));
            }
        }
        let Some((parent, edge, cost)) = choice else {
            stats.cost_history.push(best_cost);
            continue;
        };
        let new = planner.nodes.len();
        planner.nodes.push(Node {
            pose,
            parent: Some(parent),
            cost,
            edge: Some(edge),
            children: Vec::new(),
        });
        planner.nodes[parent].children.push(new);

        for &(i, dist) in &near {
            if i == parent || planner.nodes[new].cost + dist >= planner.nodes[i].cost {
                continue;
            }
            let Some(edge) = planner.connect(pose, planner.nodes[i].pose) else {
                continue;
            };
            if planner.nodes[new].cost + edge.length() < planner.nodes[i].cost - 1e-9
                && !is_ancestor(&planner.nodes, i, new)
                && planner.edge_free(&edge)
            {
                planner.reparent(i, new, edge);
            }
        }

        let to_goal = planner.nodes[new].cost + p.distance(target.position());
        if to_goal < best_cost {
            if let Some(e) = planner.connect(pose, target) {
                if planner.nodes[new].cost + e.length() < best_cost && planner.edge_free(&e) {
                    goal_links.push((new, e));
                }
            }
        }
        if let Some((_, c)) = best_of(&planner.nodes, &goal_links) {
            best_cost = c;
        }
        stats.cost_history.push(best_cost);
    }

    let (k, _) = best_of(&planner.nodes, &goal_links).ok_or(PlanError::NoPath(stats.iterations))?;
    let (node, last) = goal_links[k];
    let mut pieces = planner.chain(node);
    pieces.push(last);
    pieces.extend(approach);
    stats.nodes = planner.nodes.len();
    stats.best_cost = pieces.iter().map(|p| p.length()).sum();

    let traj = sample_pieces(&pieces, 0.0, params.dt, limits, SegmentTag::LeaderPath);
    let end = traj
        .samples
        .last()
        .expect("sampled path is never empty")
        .state
        .position();
    if end.distance(goal.position()) > params.goal_tolerance {
        return Err(PlanError::NoPath(stats.iterations));
    }
    Ok((traj, stats))
}

fn is_ancestor(nodes: &[Node], candidate: usize, mut of: usize) -> bool {
    loop {
        if of == candidate {
            return true;
        }
        match nodes[of].parent {
            Some(p) => of = p,
            None => return false,
        }
    }
}
