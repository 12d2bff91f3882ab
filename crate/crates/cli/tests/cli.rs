use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use formation_gatekeeper::geometry::Environment;
use formation_gatekeeper::leader::{validate_leader, LeaderPath};
use formation_gatekeeper::sim::{BatchSummary, TrialResult};
use formation_gatekeeper::vehicle::VehicleLimits;

fn gatekeeper(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gatekeeper"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn path(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

const EMPTY: &str = "n_obstacles = 0\n";

const PACKED: &str = r#"
workspace_max = [40.0, 40.0, 40.0]
n_obstacles = 0
goal = { x = 40.0, y = 0.0, z = 0.0, heading = 0.0 }
delta = 5.0
offsets = [
  [-6.0, 6.0, 0.0], [-6.0, -6.0, 0.0], [-12.0, 6.0, 0.0], [-12.0, -6.0, 0.0],
  [-18.0, 6.0, 0.0], [-18.0, -6.0, 0.0], [-24.0, 6.0, 0.0], [-24.0, -6.0, 0.0],
  [-30.0, 6.0, 0.0], [-30.0, -6.0, 0.0],
]
"#;

#[test]
fn gen_env_same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = gatekeeper(&["gen-env", "--seed", "11", "--out", path(out)]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    let fa = fs::read(a.join("env_11.json")).unwrap();
    assert_eq!(fa, fs::read(b.join("env_11.json")).unwrap());

    let env: Environment = serde_json::from_slice(&fa).unwrap();
    assert_eq!(env.obstacles.len(), 25);
    assert!(env
        .obstacles
        .iter()
        .all(|c| (2.0..=5.0).contains(&c.radius)));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["files"][0], "env_11.json");
}

#[test]
fn missing_config_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = gatekeeper(&[
        "gen-env",
        "--config",
        "/nonexistent/scenario.toml",
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&o), 1);
    assert!(String::from_utf8_lossy(&o.stderr).contains("scenario.toml"));
}

#[test]
fn zero_trials_is_a_usage_error() {
    let o = gatekeeper(&["batch", "--trials", "0"]);
    assert_eq!(code(&o), 1);
}

#[test]
fn plan_leader_in_empty_space_is_nearly_straight() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, EMPTY).unwrap();
    let d = path(dir.path());
    let c = path(&cfg);
    assert_eq!(
        code(&gatekeeper(&["gen-env", "--config", c, "--out", d])),
        0
    );
    let env_file = dir.path().join("env_0.json");
    let o = gatekeeper(&[
        "plan-leader",
        "--config",
        c,
        "--env",
        path(&env_file),
        "--out",
        d,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));

    let leader =
        LeaderPath::from_json(&fs::read_to_string(dir.path().join("leader_0.json")).unwrap())
            .unwrap();
    let env: Environment = serde_json::from_str(&fs::read_to_string(&env_file).unwrap()).unwrap();
    let length = (leader.t_final() - leader.t0()) * leader.speed();
    let crow = (100f64 * 100.0 * 2.0 + 70.0 * 70.0).sqrt();
    assert!(length < 1.5 * crow, "length {length} vs straight {crow}");
    let check = validate_leader(
        &leader.trajectory,
        &env,
        &VehicleLimits::paper_default(),
        leader.delta,
        leader.epsilon,
    );
    assert!(check.defects.is_empty(), "{:?}", check.defects);
}

#[test]
fn default_leader_validates_on_reload() {
    let dir = tempfile::tempdir().unwrap();
    let d = path(dir.path());
    assert_eq!(
        code(&gatekeeper(&["gen-env", "--seed", "4", "--out", d])),
        0
    );
    let env_file = dir.path().join("env_4.json");
    let o = gatekeeper(&[
        "plan-leader",
        "--seed",
        "4",
        "--env",
        path(&env_file),
        "--out",
        d,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let leader =
        LeaderPath::from_json(&fs::read_to_string(dir.path().join("leader_4.json")).unwrap())
            .unwrap();
    let env: Environment = serde_json::from_str(&fs::read_to_string(&env_file).unwrap()).unwrap();
    let check = validate_leader(
        &leader.trajectory,
        &env,
        &VehicleLimits::paper_default(),
        leader.delta,
        leader.epsilon,
    );
    assert!(check.defects.is_empty(), "{:?}", check.defects);
}

#[test]
fn goal_inside_obstacle_is_a_planner_failure() {
    let dir = tempfile::tempdir().unwrap();
    let env_file = dir.path().join("blocked.json");
    fs::write(
        &env_file,
        r#"{"bounds":[[-30,-30,-30],[130,130,130]],
            "cylinders":[{"cx":100,"cy":100,"r":4,"z0":-30,"z1":130}],
            "inflation":0}"#,
    )
    .unwrap();
    let o = gatekeeper(&[
        "plan-leader",
        "--env",
        path(&env_file),
        "--out",
        path(dir.path()),
    ]);
    assert_eq!(code(&o), 4, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn over_packed_formation_is_bootstrap_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("packed.toml");
    fs::write(&cfg, PACKED).unwrap();
    let o = gatekeeper(&["run", "--config", path(&cfg), "--out", path(dir.path())]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn run_is_safe_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for out in [&a, &b] {
        let o = gatekeeper(&[
            "run",
            "--profile",
            "small",
            "--seed",
            "2",
            "--out",
            path(out),
        ]);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in ["trial_2.json", "state_log_2.csv", "metrics_2.json"] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs"
        );
    }
    let r: TrialResult =
        serde_json::from_slice(&fs::read(a.join("metrics_2.json")).unwrap()).unwrap();
    assert!(r.success);
    assert!(r.min_interagent_distance.unwrap() >= 1.0);
    assert!(r.min_static_clearance.unwrap() > 0.0);
}

#[test]
fn run_from_files_matches_inputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("empty.toml");
    fs::write(&cfg, format!("{EMPTY}workspace_max = [60.0, 60.0, 60.0]\ngoal = {{ x = 60.0, y = 60.0, z = 40.0, heading = 0.0 }}\n")).unwrap();
    let (c, d) = (path(&cfg), path(dir.path()));
    assert_eq!(
        code(&gatekeeper(&["gen-env", "--config", c, "--out", d])),
        0
    );
    let env_file = dir.path().join("env_0.json");
    let leader_file = dir.path().join("leader_0.json");
    let o = gatekeeper(&[
        "plan-leader",
        "--config",
        c,
        "--env",
        path(&env_file),
        "--out",
        d,
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let run_dir = dir.path().join("run");
    let o = gatekeeper(&[
        "run",
        "--config",
        c,
        "--leader",
        path(&leader_file),
        "--env",
        path(&env_file),
        "--out",
        path(&run_dir),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r: TrialResult =
        serde_json::from_slice(&fs::read(run_dir.join("metrics_0.json")).unwrap()).unwrap();
    let leader = LeaderPath::from_json(&fs::read_to_string(&leader_file).unwrap()).unwrap();
    assert!((r.mission_time - (leader.t_final() - leader.t0())).abs() < 1e-9);
    assert_eq!(r.epsilon, leader.epsilon);
}

#[test]
fn small_batch_writes_every_listed_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("batch");
    let o = gatekeeper(&[
        "batch",
        "--profile",
        "small",
        "--trials",
        "2",
        "--seed",
        "5",
        "--out",
        path(&out),
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(String::from_utf8_lossy(&o.stdout).contains("success rate 100.0%"));
    let manifest: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("manifest.json")).unwrap()).unwrap();
    let files: Vec<&str> = manifest["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f.as_str().unwrap())
        .collect();
    assert_eq!(
        files,
        [
            "trial_5.json",
            "trial_6.json",
            "summary.csv",
            "summary.json"
        ]
    );
    for f in files {
        assert!(out.join(f).is_file(), "{f} missing");
    }
    let summary: BatchSummary =
        serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary.n_trials, 2);
    let csv = fs::read_to_string(out.join("summary.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
