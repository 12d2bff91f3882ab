//! Scenarios, the closed-loop multi-agent simulation and batch studies.

mod audit;
mod batch;
mod gate;
mod trial;

pub use audit::{audit_committed_set, AuditKind, AuditViolation};
pub use batch::{run_batch, trial_file, BatchSummary, TrialRow};
pub use gate::{gate_scenario, GateLayout};
pub use trial::{mean_deviation_of, run_trial, LogRow, TrialArtifacts, TrialOutcome, TrialResult};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dubins::Pose3;
use crate::gatekeeper::GatekeeperParams;
use crate::geometry::{Cylinder, Environment, GeometryError, Vec3};
use crate::leader::{estimate_epsilon, plan_leader, validate_leader, LeaderPath, RrtParams};
use crate::vehicle::{AirplaneState, NominalGains, Reference, VehicleLimits};

/// Everything that defines a trial.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub seed: u64,
    /// Region obstacles and planner samples are drawn from.
    pub workspace_min: Vec3,
    pub workspace_max: Vec3,
    /// The flyable box is the workspace grown by this much on every side.
    pub boundary_margin: f64,
    pub n_obstacles: usize,
    pub radius_range: [f64; 2],
    pub start: Pose3,
    pub goal: Pose3,
    /// Formation slots in the leader's yaw frame.
    pub offsets: Vec<Vec3>,
    pub limits: VehicleLimits,
    pub delta: f64,
    pub dt: f64,
    /// Length of one TDMA slot.
    pub slot_period: f64,
    /// Scenario redraws before giving up.
    pub max_attempts: u32,
    pub gatekeeper: GatekeeperParams,
    pub rrt: RrtParams,
    pub gains: NominalGains,
    /// Keep every n-th step in the state log.
    pub log_stride: usize,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::paper()
    }
}

impl ScenarioConfig {
    /// 100 m cube, 25 cylinders, two followers.
    pub fn paper() -> Self {
        ScenarioConfig {
            seed: 0,
            workspace_min: Vec3::ZERO,
            workspace_max: Vec3::new(100.0, 100.0, 100.0),
            boundary_margin: 30.0,
            n_obstacles: 25,
            radius_range: [2.0, 5.0],
            start: Pose3::new(0.0, 0.0, 0.0, 0.0),
            goal: Pose3::new(100.0, 100.0, 70.0, 0.0),
            offsets: vec![Vec3::new(-3.0, 5.0, 0.0), Vec3::new(-3.0, -5.0, 0.0)],
            limits: VehicleLimits::paper_default(),
            delta: 1.0,
            dt: 0.01,
            slot_period: 0.25,
            max_attempts: 10,
            gatekeeper: GatekeeperParams::default(),
            rrt: RrtParams::default(),
            gains: NominalGains::default(),
            log_stride: 1,
        }
    }

    /// 60 m cube with 10 cylinders.
    pub fn small() -> Self {
        ScenarioConfig {
            workspace_max: Vec3::new(60.0, 60.0, 60.0),
            n_obstacles: 10,
            goal: Pose3::new(60.0, 60.0, 40.0, 0.0),
            ..Self::paper()
        }
    }

    pub fn bounds(&self) -> (Vec3, Vec3) {
        let m = Vec3::new(
            self.boundary_margin,
            self.boundary_margin,
            self.boundary_margin,
        );
        (self.workspace_min - m, self.workspace_max + m)
    }

    /// Initial follower states: the formation slots around the leader start.
    pub fn follower_starts(&self) -> Vec<AirplaneState> {
        let s = self.start;
        self.offsets
            .iter()
            .map(|d| {
                AirplaneState::from_position(s.position() + d.rotate_yaw(s.heading), s.heading)
            })
            .collect()
    }

    pub fn check(&self) -> Result<(), ScenarioError> {
        for (i, a) in self.offsets.iter().enumerate() {
            if self.offsets[..i].iter().any(|b| b == a) {
                return Err(ScenarioError::Config(
                    "formation offsets must be distinct".into(),
                ));
            }
        }
        if !(self.radius_range[0] > 0.0 && self.radius_range[0] <= self.radius_range[1]) {
            return Err(ScenarioError::Config(
                "radius_range must be positive and ordered".into(),
            ));
        }
        if !self.limits.is_valid()
            || !(self.delta > 0.0)
            || !(self.dt > 0.0)
            || self.log_stride == 0
        {
            return Err(ScenarioError::Config(
                "limits, delta, dt and log_stride must be positive".into(),
            ));
        }
        let params = GatekeeperParams {
            delta: self.delta,
            ..self.gatekeeper
        };
        params
            .check()
            .map_err(|e| ScenarioError::Config(e.to_string()))
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ScenarioError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("scenario infeasible after {attempts} attempts: {last}")]
    Infeasible { attempts: u32, last: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// Followers' formation slots and initial states. Follower `i` has agent id
/// `i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FormationSpec {
    pub offsets: Vec<Vec3>,
    pub initial: Vec<AirplaneState>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub env: Environment,
    pub leader: LeaderPath,
    pub formation: FormationSpec,
    /// Draws needed to find a plannable environment.
    pub attempts: u32,
}

impl Scenario {
    /// Gatekeeper parameters with the scenario's separation data filled in.
    pub fn gatekeeper_params(&self) -> GatekeeperParams {
        GatekeeperParams {
            delta: self.leader.delta,
            epsilon: self.leader.epsilon,
            ..self.config.gatekeeper
        }
    }
}

/// Draws `n_obstacles` full-height cylinders uniformly over the workspace,
/// keeping `r_min` of horizontal clearance around the given keep-out points.
pub fn place_obstacles(
    config: &ScenarioConfig,
    keep_out: &[Vec3],
    rng: &mut ChaCha8Rng,
) -> Result<Environment, ScenarioError> {
    let (lo, hi) = config.bounds();
    let clearance = config.limits.r_min();
    let mut cylinders = Vec::with_capacity(config.n_obstacles);
    let w0 = config.workspace_min;
    let w1 = config.workspace_max;
    for _ in 0..config.n_obstacles {
        let mut placed = false;
        for _ in 0..10_000 {
            let cx = rng.gen_range(w0.x..w1.x);
            let cy = rng.gen_range(w0.y..w1.y);
            let r = rng.gen_range(config.radius_range[0]..=config.radius_range[1]);
            let c = Vec3::new(cx, cy, 0.0);
            if keep_out.iter().all(|p| p.distance_xy(c) >= r + clearance) {
                cylinders.push(Cylinder::new(cx, cy, r, lo.z, hi.z)?);
                placed = true;
                break;
            }
        }
        if !placed {
            return Err(ScenarioError::Config(
                "could not place obstacles away from start and goal".into(),
            ));
        }
    }
    Ok(Environment::new(lo, hi, cylinders, 0.0)?)
}

/// Plans and certifies a leader path through `env`.
pub fn certify_leader(
    env: &Environment,
    config: &ScenarioConfig,
    rrt: &RrtParams,
) -> Result<LeaderPath, String> {
    let traj = plan_leader(env, config.start, config.goal, &config.limits, rrt)
        .map_err(|e| e.to_string())?;
    let spacing = config.limits.v_max * rrt.dt;
    let duration = traj.t_end() - traj.t_start;
    let eps =
        estimate_epsilon(&traj, config.delta, duration, spacing).map_err(|e| e.to_string())?;
    let check = validate_leader(&traj, env, &config.limits, config.delta, eps);
    if let Some(d) = check.defects.first() {
        return Err(format!("leader path rejected: {d}"));
    }
    Ok(LeaderPath::new(traj, config.delta, eps))
}

fn keep_out_points(config: &ScenarioConfig) -> Vec<Vec3> {
    let mut out = vec![config.start.position(), config.goal.position()];
    out.extend(config.follower_starts().iter().map(|s| s.position()));
    out
}

/// The first environment [`generate_scenario`] draws for `config.seed`.
pub fn generate_environment(config: &ScenarioConfig) -> Result<Environment, ScenarioError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    place_obstacles(config, &keep_out_points(config), &mut rng)
}

/// Random environment and certified leader path for `config.seed`.
///
/// A failed draw (unplaceable obstacles, no path, no finite margin) is
/// redrawn from the same seeded stream up to `max_attempts` times.
pub fn generate_scenario(config: &ScenarioConfig) -> Result<Scenario, ScenarioError> {
    config.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let formation = FormationSpec {
        offsets: config.offsets.clone(),
        initial: config.follower_starts(),
    };
    let keep_out = keep_out_points(config);
    let sample_box = (Some(config.workspace_min), Some(config.workspace_max));
    let mut last = String::new();
    for attempt in 1..=config.max_attempts {
        let env = match place_obstacles(config, &keep_out, &mut rng) {
            Ok(env) => env,
            Err(e) => {
                last = e.to_string();
                continue;
            }
        };
        let rrt = RrtParams {
            seed: rng.gen(),
            dt: config.dt,
            sample_min: sample_box.0,
            sample_max: sample_box.1,
            ..config.rrt
        };
        match certify_leader(&env, config, &rrt) {
            Ok(leader) => {
                return Ok(Scenario {
                    config: config.clone(),
                    env,
                    leader,
                    formation,
                    attempts: attempt,
                });
            }
            Err(e) => {
                log::debug!("seed {} attempt {attempt}: {e}", config.seed);
                last = e;
            }
        }
    }
    Err(ScenarioError::Infeasible {
        attempts: config.max_attempts,
        last,
    })
}

/// Formation slot of offset `d` at leader time `t`: the leader position plus
/// `d` rotated by the leader's heading. Pitch and roll are ignored.
pub fn nominal_reference(leader: &LeaderPath, d: Vec3, t: f64) -> Reference {
    let (s, u) = leader.state_at(t);
    Reference {
        position: s.position() + d.rotate_yaw(s.psi),
        heading: s.psi,
        pitch: u.gamma,
    }
}

/// Squared formation error and per-follower distances from their slots.
pub fn formation_error(
    leader_pos: Vec3,
    leader_heading: f64,
    followers: &[Vec3],
    offsets: &[Vec3],
) -> (f64, Vec<f64>) {
    let devs: Vec<f64> = followers
        .iter()
        .zip(offsets)
        .map(|(&r, &d)| (r - leader_pos - d.rotate_yaw(leader_heading)).norm())
        .collect();
    (devs.iter().map(|e| e * e).sum(), devs)
}
