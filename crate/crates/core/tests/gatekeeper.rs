use formation_gatekeeper::dubins::{dubins2_shortest, dubins3_connect, Pose2, Pose3};
use formation_gatekeeper::gatekeeper::{
    bootstrap, construct_candidate, evaluate_committed, gatekeeper_iteration, join_options,
    leader_commitment, plan_join_to_backup, validate_candidate, Commitment, CommittedSet,
    GatekeeperParams, JoinOption, Violation,
};
use formation_gatekeeper::geometry::{Cylinder, Environment, Vec3};
use formation_gatekeeper::leader::{arc_turn_rate, estimate_epsilon, sample_pieces, LeaderPath};
use formation_gatekeeper::sim::nominal_reference;
use formation_gatekeeper::trajectory::{MergeInfo, PiecewiseTrajectory, Sample, SegmentTag};
use formation_gatekeeper::vehicle::{
    propagate_nominal, AirplaneState, ControlInput, NominalGains, Reference, VehicleLimits,
};
use proptest::prelude::*;

const DT: f64 = 0.01;

fn limits() -> VehicleLimits {
    VehicleLimits::paper_default()
}

fn leader_through(points: &[Pose3]) -> LeaderPath {
    let l = limits();
    let pieces: Vec<_> = points
        .windows(2)
        .map(|w| dubins3_connect(w[0], w[1], l.r_min(), l.gamma_min, l.gamma_max).unwrap())
        .collect();
    let traj = sample_pieces(&pieces, 0.0, DT, &l, SegmentTag::LeaderPath);
    let span = traj.t_end() - traj.t_start;
    let eps = estimate_epsilon(&traj, 1.0, span, 0.05).unwrap();
    LeaderPath::new(traj, 1.0, eps)
}

/// Level straight line along +x from the origin.
fn straight_leader(length: f64) -> LeaderPath {
    leader_through(&[
        Pose3::new(0.0, 0.0, 0.0, 0.0),
        Pose3::new(length, 0.0, 0.0, 0.0),
    ])
}

/// Straight, a left bend, then straight again.
fn curved_leader() -> LeaderPath {
    leader_through(&[
        Pose3::new(0.0, 0.0, 0.0, 0.0),
        Pose3::new(40.0, 0.0, 0.0, 0.0),
        Pose3::new(70.0, 30.0, 0.0, std::f64::consts::FRAC_PI_2),
        Pose3::new(70.0, 90.0, 0.0, std::f64::consts::FRAC_PI_2),
    ])
}

fn open_space() -> Environment {
    Environment::empty(
        Vec3::new(-60.0, -60.0, -40.0),
        Vec3::new(260.0, 160.0, 40.0),
    )
    .unwrap()
}

fn params(leader: &LeaderPath) -> GatekeeperParams {
    GatekeeperParams {
        epsilon: leader.epsilon,
        ..GatekeeperParams::default()
    }
}

/// A trajectory sitting on the leader path at `param` from time `t`.
fn merged_at(leader: &LeaderPath, t: f64, param: f64) -> PiecewiseTrajectory {
    let (state, control) = leader.state_at(param);
    let mut traj = PiecewiseTrajectory::new(
        t,
        DT,
        leader.speed(),
        vec![Sample {
            state,
            control,
            tag: SegmentTag::LeaderPath,
        }],
    );
    traj.merge = Some(MergeInfo {
        t_merge: t,
        t_leader: param,
    });
    traj
}

/// Reference running along y = `y` at unit speed, `lead` meters ahead.
fn along(y: f64, x0: f64, t0: f64, lead: f64) -> impl Fn(f64) -> Reference {
    move |t| Reference {
        position: Vec3::new(x0 + lead + (t - t0), y, 0.0),
        heading: 0.0,
        pitch: 0.0,
    }
}

/// Nominal prefix up to `i_s`, then `option` sampled on the time grid.
fn assemble_by_hand(
    nominal: &PiecewiseTrajectory,
    i_s: usize,
    option: &JoinOption,
    l: &VehicleLimits,
) -> PiecewiseTrajectory {
    let x_s = nominal.samples[i_s].state;
    let v = l.v_max;
    let len = option.length();
    let steps = if len > 0.0 {
        (len / (v * DT) - 1e-9).ceil().max(1.0) as usize
    } else {
        0
    };
    let mut samples = nominal.samples[..i_s].to_vec();
    if !option.pieces.is_empty() {
        for n in 0..steps {
            let pt = option.point_at(n as f64 * v * DT).unwrap();
            samples.push(Sample {
                state: if n == 0 {
                    x_s
                } else {
                    AirplaneState::from_position(pt.position, pt.heading)
                },
                control: ControlInput {
                    omega: arc_turn_rate(pt.segment, v, pt.pitch, l.r_min()),
                    gamma: pt.pitch,
                },
                tag: SegmentTag::Join,
            });
        }
    }
    let t_s = nominal.time_of(i_s);
    let mut traj = PiecewiseTrajectory::new(nominal.t_start, DT, v, samples);
    traj.merge = Some(MergeInfo {
        t_merge: t_s + steps as f64 * DT,
        t_leader: option.t_leader + steps as f64 * DT - len / v,
    });
    traj
}

/// Every join from the next switch time after `t_s` fails validation.
fn assert_next_switch_invalid(
    agent: usize,
    nominal: &PiecewiseTrajectory,
    t_s: f64,
    committed: &CommittedSet,
    leader: &LeaderPath,
    env: &Environment,
    p: &GatekeeperParams,
) {
    let next = t_s + p.switch_time_step;
    if next > nominal.t_start + p.horizon + 1e-9 {
        return;
    }
    let i = ((next - nominal.t_start) / DT).round() as usize;
    if i >= nominal.len() {
        return;
    }
    let l = limits();
    for option in join_options(&nominal.samples[i].state, leader, env, &l, p) {
        let traj = assemble_by_hand(nominal, i, &option, &l);
        assert!(
            validate_candidate(&traj, agent, committed, env, leader, p).is_err(),
            "switch at {next} is valid but {t_s} was returned"
        );
    }
}

#[test]
fn on_path_join_is_empty() {
    let leader = straight_leader(200.0);
    let x = leader.state_at(40.0).0;
    let (join, t_l) = plan_join_to_backup(
        &x,
        40.0,
        &leader,
        &open_space(),
        &limits(),
        &params(&leader),
    )
    .unwrap();
    assert!(join.is_empty());
    assert!((t_l - 40.0).abs() < 1e-9);
}

#[test]
fn lateral_offset_join_respects_the_planar_bound() {
    let leader = straight_leader(200.0);
    let l = limits();
    let x = AirplaneState::new(30.0, 5.0, 0.0, 0.0);
    let (join, t_l) =
        plan_join_to_backup(&x, 30.0, &leader, &open_space(), &l, &params(&leader)).unwrap();
    assert!(join.samples.iter().all(|s| s.tag == SegmentTag::Join));
    let merge = join.merge.unwrap();
    let length = (merge.t_merge - join.t_start) * l.v_max;
    let g = leader.state_at(t_l).0;
    let planar = dubins2_shortest(
        Pose2::new(30.0, 5.0, 0.0),
        Pose2::new(g.x, g.y, g.psi),
        10.0,
    )
    .unwrap()
    .length();
    assert!(length >= 5.0);
    assert!(length >= planar - 1e-9, "{length} < {planar}");
    // The last sample lies within one step of the merge point.
    let last = join.samples.last().unwrap().state.position();
    assert!(last.distance(leader.position_at(merge.t_leader)) <= l.v_max * DT + 1e-9);
}

/// A dense row of posts along y = 10 from x = 0 to 200.
fn wall() -> Environment {
    let posts = (0..=67)
        .map(|k| Cylinder::new(3.0 * k as f64, 10.0, 2.0, -40.0, 40.0).unwrap())
        .collect();
    Environment::new(
        Vec3::new(-60.0, -60.0, -20.0),
        Vec3::new(260.0, 60.0, 20.0),
        posts,
        0.0,
    )
    .unwrap()
}

#[test]
fn walled_off_agent_has_no_join() {
    let leader = straight_leader(200.0);
    let env = wall();
    assert!(leader
        .trajectory
        .samples
        .iter()
        .all(|s| env.min_clearance(s.state.position()) > 0.0));
    let x = AirplaneState::new(50.0, 20.0, 0.0, 0.0);
    assert!(plan_join_to_backup(&x, 50.0, &leader, &env, &limits(), &params(&leader)).is_none());
}

#[test]
fn free_agent_keeps_the_whole_nominal() {
    let leader = straight_leader(200.0);
    let l = limits();
    let p = params(&leader);
    let x = leader.state_at(20.0).0;
    let nominal = propagate_nominal(
        x,
        |t| nominal_reference(&leader, Vec3::ZERO, t),
        20.0,
        p.horizon,
        DT,
        &l,
        &NominalGains::default(),
    );
    let c = construct_candidate(
        1,
        &nominal,
        &CommittedSet::new(),
        &leader,
        &open_space(),
        &l,
        &p,
    )
    .unwrap();
    assert!((c.t_s - 30.0).abs() < 1e-9);
    assert_eq!(
        &c.trajectory.samples[..nominal.len() - 1],
        &nominal.samples[..nominal.len() - 1]
    );
}

/// Leader along y = 0 and a post grazing the agent's straight nominal at
/// y = 15 from the far side.
fn post_ahead() -> (LeaderPath, Environment, PiecewiseTrajectory) {
    let leader = straight_leader(200.0);
    let env = Environment::new(
        Vec3::new(-60.0, -60.0, -20.0),
        Vec3::new(260.0, 60.0, 20.0),
        vec![Cylinder::new(36.5, 17.5, 3.0, -40.0, 40.0).unwrap()],
        0.0,
    )
    .unwrap();
    let nominal = propagate_nominal(
        AirplaneState::new(30.0, 15.0, 0.0, 0.0),
        along(15.0, 30.0, 30.0, 5.0),
        30.0,
        10.0,
        DT,
        &limits(),
        &NominalGains::default(),
    );
    (leader, env, nominal)
}

#[test]
fn switch_precedes_a_post_on_the_nominal() {
    let (leader, env, nominal) = post_ahead();
    let i_hit = nominal
        .samples
        .iter()
        .position(|s| env.min_clearance(s.state.position()) <= 0.0)
        .unwrap();
    let hit = nominal.time_of(i_hit);
    assert!((hit - 35.0).abs() < 0.5, "nominal hits at {hit}");
    let l = limits();
    let p = params(&leader);
    let c = construct_candidate(1, &nominal, &CommittedSet::new(), &leader, &env, &l, &p).unwrap();
    assert!(c.t_s < hit);
    let join_start = c.trajectory.first_index_of(SegmentTag::Join).unwrap();
    assert!(c.trajectory.samples[join_start].state.x < nominal.samples[i_hit].state.x);
    for (i, s) in c.trajectory.samples.iter().enumerate() {
        if c.trajectory.time_of(i) < c.t_merge {
            assert!(env.min_clearance(s.state.position()) > 0.0);
        }
    }
    assert!(c.trajectory.tags_ordered());
    assert_next_switch_invalid(1, &nominal, c.t_s, &CommittedSet::new(), &leader, &env, &p);
}

#[test]
fn agent_in_the_way_blocks_every_candidate() {
    let leader = straight_leader(200.0);
    let l = limits();
    let p = params(&leader);
    let mut committed = CommittedSet::new();
    committed.commit(
        2,
        Commitment {
            k: 0,
            t_s: 50.0,
            trajectory: merged_at(&leader, 50.0, 50.0),
        },
    );
    let x = AirplaneState::new(50.0, 0.5, 0.0, 0.0);
    let nominal = propagate_nominal(
        x,
        |t| nominal_reference(&leader, Vec3::ZERO, t),
        50.0,
        p.horizon,
        DT,
        &l,
        &NominalGains::default(),
    );
    assert!(construct_candidate(1, &nominal, &committed, &leader, &open_space(), &l, &p).is_none());

    let before = merged_at(&leader, 40.0, 38.0);
    committed.commit(
        1,
        Commitment {
            k: 3,
            t_s: 40.0,
            trajectory: before.clone(),
        },
    );
    let snapshot = committed.clone();
    let out = gatekeeper_iteration(
        1,
        x,
        50.0,
        |t| nominal_reference(&leader, Vec3::ZERO, t),
        &mut committed,
        &leader,
        &open_space(),
        &l,
        &NominalGains::default(),
        &p,
    );
    assert!(!out.committed && out.record.is_none());
    assert_eq!(committed, snapshot);
}

#[test]
fn lone_candidate_is_valid() {
    let leader = straight_leader(200.0);
    let traj = merged_at(&leader, 20.0, 20.0);
    let p = params(&leader);
    assert_eq!(
        validate_candidate(&traj, 1, &CommittedSet::new(), &open_space(), &leader, &p),
        Ok(())
    );
}

#[test]
fn shared_slot_is_rejected() {
    let leader = curved_leader();
    let p = params(&leader);
    let mut committed = CommittedSet::new();
    committed.commit(
        2,
        Commitment {
            k: 0,
            t_s: 60.0,
            trajectory: merged_at(&leader, 60.0, 45.0),
        },
    );
    let mine = merged_at(&leader, 60.0, 45.0);
    let got = validate_candidate(&mine, 1, &committed, &open_space(), &leader, &p);
    assert!(
        matches!(got, Err(Violation::Slot { other: 2, distance, .. }) if distance == 0.0),
        "{got:?}"
    );
}

#[test]
fn separated_slots_stay_apart_on_a_bend() {
    let leader = curved_leader();
    let p = params(&leader);
    assert!(leader.epsilon > 0.0);
    let want = p.delta + p.epsilon + 2.0 * leader.speed() * p.check_dt;
    for start in [30.0, 40.0, 50.0, 60.0, 75.0] {
        let a = leader.position_at(start);
        // Smallest later parameter at the required straight-line distance.
        let (mut lo, mut hi) = (start, start + 10.0);
        assert!(a.distance(leader.position_at(hi)) > want);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            if a.distance(leader.position_at(mid)) >= want {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        let t_k = 100.0;
        let mut committed = CommittedSet::new();
        committed.commit(
            2,
            Commitment {
                k: 0,
                t_s: t_k,
                trajectory: merged_at(&leader, t_k, start),
            },
        );
        let mine = merged_at(&leader, t_k, hi);
        assert_eq!(
            validate_candidate(&mine, 1, &committed, &open_space(), &leader, &p),
            Ok(())
        );
        let mut tau = 0.0;
        while hi + tau <= leader.t_final() {
            let d = leader
                .position_at(start + tau)
                .distance(leader.position_at(hi + tau));
            assert!(d >= p.delta, "{d} at {tau} from {start}");
            tau += DT;
        }
    }
}

#[test]
fn free_iteration_flies_the_full_horizon_then_merges() {
    let leader = straight_leader(200.0);
    let l = limits();
    let p = params(&leader);
    let d = Vec3::new(-3.0, 5.0, 0.0);
    let reference = |t| nominal_reference(&leader, d, t);
    let x = AirplaneState::from_position(leader.position_at(20.0) + d, 0.0);
    let mut committed = CommittedSet::new();
    let out = gatekeeper_iteration(
        1,
        x,
        20.0,
        reference,
        &mut committed,
        &leader,
        &open_space(),
        &l,
        &NominalGains::default(),
        &p,
    );
    let record = out.record.unwrap();
    assert!(out.committed);
    assert!((record.t_s - 30.0).abs() < 1e-9);
    let c = committed.get(1).unwrap();
    let nominal = propagate_nominal(
        x,
        reference,
        20.0,
        p.horizon,
        DT,
        &l,
        &NominalGains::default(),
    );
    let n = nominal.len() - 1;
    assert_eq!(&c.trajectory.samples[..n], &nominal.samples[..n]);
    assert!(c.trajectory.samples[n..]
        .iter()
        .all(|s| s.tag != SegmentTag::Nominal));
    let merge = c.trajectory.merge.unwrap();
    assert!(merge.t_leader <= merge.t_merge + 1e-9);
}

#[test]
fn bootstrapped_commitments_validate_against_each_other() {
    let leader = curved_leader();
    let l = limits();
    let p = params(&leader);
    let env = open_space();
    let offsets = [
        Vec3::new(-3.0, 5.0, 0.0),
        Vec3::new(-3.0, -5.0, 0.0),
        Vec3::new(-6.0, 0.0, 0.0),
    ];
    let followers: Vec<_> = offsets
        .iter()
        .enumerate()
        .map(|(i, &d)| {
            (
                i + 1,
                AirplaneState::from_position(leader.position_at(0.0) + d, 0.0),
            )
        })
        .collect();
    let (committed, records) = bootstrap(
        &followers,
        0.0,
        |agent, t| nominal_reference(&leader, offsets[agent - 1], t),
        &leader,
        &env,
        &l,
        &NominalGains::default(),
        &p,
    )
    .unwrap();
    assert_eq!(records.len(), 3);
    assert_eq!(committed.len(), 4);
    assert_eq!(committed.get(0).unwrap(), &leader_commitment(&leader));
    for &(agent, _) in &followers {
        let c = committed.get(agent).unwrap();
        assert_eq!(
            validate_candidate(&c.trajectory, agent, &committed, &env, &leader, &p),
            Ok(()),
            "agent {agent}"
        );
    }
}

#[test]
fn committed_state_follows_the_leader_after_merging() {
    let leader = curved_leader();
    let traj = {
        let mut t = merged_at(&leader, 50.0, 42.0);
        let first = t.samples[0];
        t.samples.insert(
            0,
            Sample {
                state: AirplaneState::new(1.0, 2.0, 3.0, 0.4),
                tag: SegmentTag::Nominal,
                ..first
            },
        );
        t.t_start = 50.0 - DT;
        t
    };
    let first = evaluate_committed(&traj, &leader, traj.t_start).unwrap();
    assert_eq!(first.state, AirplaneState::new(1.0, 2.0, 3.0, 0.4));

    let later = evaluate_committed(&traj, &leader, 55.0).unwrap();
    assert_eq!(later.state, leader.state_at(47.0).0);
    assert_eq!(later.tag, SegmentTag::LeaderPath);
    assert!(!later.mission_complete);

    let t_f = leader.t_final();
    let end = evaluate_committed(&traj, &leader, 50.0 + (t_f - 42.0) + 3.0).unwrap();
    assert!(end.mission_complete);
    assert_eq!(end.state, leader.state_at(t_f).0);
    assert!(evaluate_committed(&traj, &leader, 40.0).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn returned_switch_time_is_maximal(y in 8.0..25.0f64, post_x in 34.0..44.0f64) {
        let leader = straight_leader(200.0);
        let env = Environment::new(
            Vec3::new(-60.0, -60.0, -20.0),
            Vec3::new(260.0, 60.0, 20.0),
            vec![Cylinder::new(post_x, y + 2.5, 3.0, -40.0, 40.0).unwrap()],
            0.0,
        )
        .unwrap();
        let l = limits();
        let p = params(&leader);
        let nominal = propagate_nominal(
            AirplaneState::new(30.0, y, 0.0, 0.0),
            along(y, 30.0, 30.0, 5.0),
            30.0,
            p.horizon,
            DT,
            &l,
            &NominalGains::default(),
        );
        let mut committed = CommittedSet::new();
        committed.commit(0, leader_commitment(&leader));
        if let Some(c) = construct_candidate(1, &nominal, &committed, &leader, &env, &l, &p) {
            prop_assert!(validate_candidate(&c.trajectory, 1, &committed, &env, &leader, &p).is_ok());
            assert_next_switch_invalid(1, &nominal, c.t_s, &committed, &leader, &env, &p);
        }
    }
}
