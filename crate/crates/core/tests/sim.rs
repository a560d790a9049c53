use hocbf::qp::QpStatus;
use hocbf::sim::{
    detect_equilibrium, run_scenario, scenarios, CsvTable, EquilibriumCase, EquilibriumThresholds, Hold, NominalController, Reference, ScenarioConfig,
    StepRecord, TrajectoryLog, VelocityLimits,
};
use nalgebra::DVector;

fn builtin(name: &str) -> ScenarioConfig {
    scenarios::builtin(name).unwrap()
}

#[test]
fn free_space_filter_is_identity() {
    let mut cfg = builtin("example1_circ");
    cfg.obstacles.clear();
    cfg.horizon = 15.0;
    let (log, s) = run_scenario(&cfg).unwrap();
    assert!(!s.halted && s.all_optimal);
    assert_eq!(s.goal_reached, Some(true));
    for r in &log.records {
        assert_eq!(r.u_filtered, r.u_nominal, "t = {}", r.t);
    }
    // Rest at the goal is not spurious.
    assert!(!s.equilibrium.detected);
    assert_eq!(s.rest.case, Some(EquilibriumCase::Nominal));
}

#[test]
fn example1_without_circulation_stalls_on_boundary() {
    let (_, s) = run_scenario(&builtin("example1_no_circ")).unwrap();
    let eq = &s.equilibrium;
    assert!(eq.detected);
    assert_eq!(eq.case, Some(EquilibriumCase::Boundary));
    assert!(eq.barrier_active);
    assert!(eq.mean_q[0].abs() < 0.05 && (eq.mean_q[1] + 2.8).abs() < 0.05, "{:?}", eq.mean_q);
    assert!(eq.max_speed <= 1e-3);
    assert!(eq.h_min <= 0.05 && eq.h_min >= -1e-3);
    assert_eq!(s.goal_reached, Some(false));
}

#[test]
fn example1_with_circulation_reaches_goal() {
    let (log, s) = run_scenario(&builtin("example1_circ")).unwrap();
    assert!(!s.halted && s.all_optimal);
    assert_eq!(s.goal_reached, Some(true));
    assert!(!s.equilibrium.detected);
    assert!(s.min_h >= -1e-3);
    // The robot leaves the symmetry axis to get around.
    assert!(log.records.iter().any(|r| r.q[0].abs() > 1.0));
}

/// No state with `‖v‖ ≤ 1e-4` and `h ≤ 0.05` persists for 0.5 s under the
/// circulation filter unless the nominal control is itself at rest there.
fn assert_no_lingering(log: &TrajectoryLog) {
    let mut since: Option<f64> = None;
    for r in &log.records {
        let held = r.v.norm() <= 1e-4 && r.h_min() <= 0.05 && (&r.u_nominal - &r.u_filtered).norm() > 1e-3;
        match (held, since) {
            (true, None) => since = Some(r.t),
            (true, Some(t0)) => assert!(r.t - t0 <= 0.5, "lingering from t = {t0}"),
            (false, _) => since = None,
        }
    }
}

#[test]
fn circulation_excludes_boundary_rest() {
    for name in ["example1_circ", "whiteboard2d"] {
        let (log, _) = run_scenario(&builtin(name)).unwrap();
        assert_no_lingering(&log);
    }
}

#[test]
fn whiteboard_topology() {
    let (log, s) = run_scenario(&builtin("whiteboard2d")).unwrap();
    assert!(!s.halted && s.all_optimal, "{:?}", s.halt_reason);
    assert_eq!(s.goal_reached, Some(true));
    assert!(s.min_h >= -1e-3);
    // Crossing x = 0 means passing above or below the keep-out (|y| ≤ 0.9).
    let crossing = log.records.windows(2).find(|w| w[0].q[0] < 0.0 && w[1].q[0] >= 0.0).expect("crosses the board");
    assert!(crossing[0].q[1].abs() > 0.9);

    let (log, s) = run_scenario(&builtin("whiteboard2d_no_circ")).unwrap();
    assert!(!s.halted && s.all_optimal);
    assert_eq!(s.equilibrium.case, Some(EquilibriumCase::Boundary));
    assert!(log.records.iter().all(|r| r.q[0] < -0.6));
}

#[test]
fn fig1_tracking_is_collision_free_with_bounded_jumps() {
    let (log, s) = run_scenario(&builtin("fig1_tracking")).unwrap();
    assert!(!s.halted && s.all_optimal);
    assert!(s.min_h >= -1e-3);
    // The reference enters the padded square, so the filter must intervene.
    assert!(log.records.iter().any(|r| r.u_filtered != r.u_nominal));
    let c = s.max_control_jump / log.dt;
    println!("fig1 jump constant C = {c:.3}");
    assert!(c.is_finite() && c < 1e3);
}

#[test]
fn rollouts_are_deterministic() {
    for name in ["example1_circ", "whiteboard2d"] {
        let mut cfg = builtin(name);
        cfg.horizon = 5.0;
        let (a, _) = run_scenario(&cfg).unwrap();
        let (b, _) = run_scenario(&cfg).unwrap();
        assert!(a.same_trajectory(&b));
    }
    let cfg = scenarios::random_scenario(9);
    assert_eq!(cfg, scenarios::random_scenario(9));
}

#[test]
fn random_scenarios_stay_safe() {
    for seed in 100..104 {
        let cfg = scenarios::random_scenario(seed);
        let (_, s) = run_scenario(&cfg).unwrap();
        if s.all_optimal {
            assert!(s.min_h >= -1e-3, "seed {seed}: {}", s.min_h);
        }
    }
}

#[test]
fn velocity_limits_hold_in_closed_loop() {
    let mut cfg = builtin("example1_circ");
    // A hard circulation row can conflict with a saturated velocity box.
    cfg.circulation.as_mut().unwrap().soft = Some(100.0);
    cfg.velocity_limits = Some(VelocityLimits { lower: vec![-0.8, -0.8], upper: vec![0.8, 0.8], gamma: 20.0 });
    let (log, s) = run_scenario(&cfg).unwrap();
    assert!(!s.halted && s.all_optimal, "{:?}", s.halt_reason);
    let vmax = log.records.iter().map(|r| r.v.amax()).fold(0.0, f64::max);
    assert!(vmax <= 0.8 + 1e-6, "max |v| = {vmax}");
    assert!(s.min_h >= -1e-3);
}

/// Final-state error of a smooth, contact-free rollout falls at fourth order.
#[test]
fn rk4_order_on_smooth_scenario() {
    let mut cfg = builtin("example1_circ");
    cfg.obstacles.clear();
    cfg.circulation = None;
    cfg.hold = Hold::PerStage;
    cfg.controller =
        NominalController::TrajectoryPd { kp: 4.0, kd: 3.0, reference: Reference::Circle { center: [0.0, 0.0], radius: 2.0, period: 3.0, phase: 0.3 } };
    cfg.horizon = 2.0;
    let final_state = |dt: f64| {
        let mut c = cfg.clone();
        c.dt = dt;
        let (log, _) = run_scenario(&c).unwrap();
        let r = log.records.last().unwrap();
        assert!((r.t - 2.0).abs() < 1e-12);
        DVector::from_iterator(4, r.q.iter().chain(r.v.iter()).copied())
    };
    let reference = final_state(1.0 / 1280.0);
    let errs: Vec<f64> = [0.1, 0.05, 0.025].iter().map(|&dt| (final_state(dt) - &reference).norm()).collect();
    for w in errs.windows(2) {
        let slope = (w[0] / w[1]).log2();
        assert!((3.5..=4.5).contains(&slope), "errors {errs:?}, slope {slope}");
    }
}

fn resting_record(t: f64, u_nominal: f64) -> StepRecord {
    StepRecord {
        t,
        q: DVector::from_vec(vec![1.0, 2.0]),
        v: DVector::zeros(2),
        u_nominal: DVector::from_vec(vec![u_nominal, 0.0]),
        u_filtered: DVector::zeros(2),
        h: vec![0.01],
        psi1: vec![0.05],
        phi: 0.01,
        equilibrium_distance: 0.0,
        active: vec![],
        qp_status: QpStatus::Optimal,
        qp_iterations: 0,
        violation: false,
        qp_time_us: 0.0,
        sensitivity_time_us: 0.0,
    }
}

#[test]
fn equilibrium_detector_cases() {
    let th = EquilibriumThresholds::default();
    let log = |u_n: f64, moving: bool| TrajectoryLog {
        scenario: "synthetic".into(),
        dt: 0.01,
        records: (0..200)
            .map(|k| {
                let mut r = resting_record(k as f64 * 0.01, u_n);
                if moving {
                    r.v[0] = 0.5;
                }
                r
            })
            .collect(),
        halted: false,
        halt_reason: None,
    };
    let at_goal = detect_equilibrium(&log(0.0, false), &th);
    assert!(at_goal.detected);
    assert_eq!(at_goal.case, Some(EquilibriumCase::Nominal));
    assert_eq!(at_goal.mean_q, vec![1.0, 2.0]);
    let held = detect_equilibrium(&log(0.7, false), &th);
    assert_eq!(held.case, Some(EquilibriumCase::Boundary));
    assert!(!detect_equilibrium(&log(0.0, true), &th).detected);
    // Shorter than the dwell time.
    let mut short = log(0.0, false);
    short.records.truncate(50);
    assert!(!detect_equilibrium(&short, &th).detected);
}

#[test]
fn csv_round_trip() {
    let mut cfg = builtin("example1_circ");
    cfg.horizon = 0.05;
    let (log, _) = run_scenario(&cfg).unwrap();
    let mut buf = Vec::new();
    log.write_csv(2, 2, 2, 1, &mut buf).unwrap();
    let table = CsvTable::read(buf.as_slice()).unwrap();
    assert_eq!(table.header, TrajectoryLog::header(2, 2, 2, 1));
    assert_eq!(table.rows.len(), log.records.len());
    let y = table.column("q_2").unwrap();
    for (a, r) in y.iter().zip(&log.records) {
        assert_eq!(*a, r.q[1]);
    }
    assert_eq!(table.indexed("h_"), vec!["h_1".to_string()]);
}

#[test]
fn config_json_round_trip_and_schema_errors() {
    let cfg = builtin("whiteboard2d");
    let text = serde_json::to_string(&cfg).unwrap();
    assert_eq!(ScenarioConfig::from_json(&text).unwrap(), cfg);
    assert!(ScenarioConfig::from_json("{").is_err());
    let mut bad: serde_json::Value = serde_json::from_str(&text).unwrap();
    bad["schema"] = serde_json::json!(99);
    assert!(ScenarioConfig::from_json(&bad.to_string()).is_err());
    let mut bad: serde_json::Value = serde_json::from_str(&text).unwrap();
    bad["dt"] = serde_json::json!(-1.0);
    assert!(ScenarioConfig::from_json(&bad.to_string()).is_err());
}
