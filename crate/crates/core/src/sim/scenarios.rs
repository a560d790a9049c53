//! Built-in scenarios and randomized obstacle fields.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::{Aggregation, EquilibriumThresholds, Hold, InfeasiblePolicy, NominalController, Reference, Robot, ScenarioConfig, SCHEMA_VERSION};
use crate::geometry::{Ellipsoid, FrameParams, Halfspace, ScalingPrimitive, SmoothPolytope};
use crate::safety::{CirculationSpec, DFunction, EquilibriumBox, HocbfGains, SkewRule, TaskMap};
use crate::sensitivity::sample::random_polytope;
use crate::sensitivity::{solve_min_scaling, Body, PrimitivePair};

pub const BUILTIN: [&str; 5] = ["example1_no_circ", "example1_circ", "fig1_tracking", "whiteboard2d", "whiteboard2d_no_circ"];

fn base(name: &str, robot: Robot, obstacles: Vec<Body>, controller: NominalController, horizon: f64) -> ScenarioConfig {
    ScenarioConfig {
        schema: SCHEMA_VERSION,
        name: name.to_string(),
        robot,
        obstacles,
        controller,
        gains: HocbfGains::default(),
        aggregation: Aggregation::Separate,
        circulation: None,
        velocity_limits: None,
        input_box: None,
        dt: 1e-3,
        horizon,
        seed: 0,
        hold: Hold::ZeroOrder,
        infeasible: InfeasiblePolicy::Halt,
        equilibrium: EquilibriumThresholds::default(),
        goal_tolerance: 0.1,
    }
}

fn ball(radius: f64) -> ScalingPrimitive {
    ScalingPrimitive::Ellipsoid(Ellipsoid::ball(radius, &[0.0, 0.0]).expect("positive radius"))
}

fn point_robot(shape: ScalingPrimitive, q0: [f64; 2], v0: [f64; 2]) -> Robot {
    Robot { shape, task_map: TaskMap::PlanarPoint { angle: 0.0 }, q0: q0.to_vec(), v0: v0.to_vec() }
}

/// Tangential push `1 − h − ‖v‖`, hard.
pub fn linear_circulation() -> CirculationSpec {
    CirculationSpec { skew: SkewRule::BlockRotation, d: DFunction::Linear { d1: 1.0, d2: 1.0 }, equilibrium: EquilibriumBox::unbounded(), soft: None }
}

/// Ball of radius 0.5 starting below an ellipse with semi-axes (2.0, 1.5),
/// heading for a goal straight behind it.
fn example1(circulation: bool) -> ScenarioConfig {
    let obstacle =
        Body::new(ScalingPrimitive::Ellipsoid(Ellipsoid::axis_aligned(&[2.0, 1.5], &[0.0, 0.0]).expect("positive axes")), FrameParams::planar(0.0, -0.8, 0.0));
    let name = if circulation { "example1_circ" } else { "example1_no_circ" };
    let mut cfg =
        base(name, point_robot(ball(0.5), [0.0, -5.0], [0.0, 0.0]), vec![obstacle], NominalController::GoalPd { kp: 1.0, kd: 2.0, goal: vec![0.0, 5.0] }, 30.0);
    if circulation {
        cfg.circulation = Some(linear_circulation());
    }
    cfg
}

/// Unit-radius ball tracking a circle that cuts through a smoothed square of
/// edge 2 at the origin.
fn fig1_tracking() -> ScenarioConfig {
    let square = Body::new(
        ScalingPrimitive::Polytope(SmoothPolytope::axis_box(&[1.0, 1.0], &[0.0, 0.0], 10.0).expect("valid box")),
        FrameParams::identity(2).expect("planar"),
    );
    let reference = Reference::Circle { center: [2.0, 0.0], radius: 2.5, period: 20.0, phase: 0.0 };
    let (p0, v0, _) = reference.sample(0.0);
    base(
        "fig1_tracking",
        point_robot(ball(1.0), [p0[0], p0[1]], [v0[0], v0[1]]),
        vec![square],
        NominalController::TrajectoryPd { kp: 4.0, kd: 4.0, reference },
        20.0,
    )
}

/// Board `[−4, 4] × [−3, 3]`: its four edges are halfspace obstacles and a
/// rectangular keep-out sits between start and goal. Five barriers are merged
/// by the smooth minimum.
fn whiteboard2d(circulation: bool) -> ScenarioConfig {
    let id = FrameParams::identity(2).expect("planar");
    let wall =
        |a: [f64; 2], b: f64| Body::new(ScalingPrimitive::Halfspace(Halfspace::new(DVector::from_vec(a.to_vec()), b).expect("nonzero normal")), id.clone());
    let obstacles = vec![
        Body::new(ScalingPrimitive::Polytope(SmoothPolytope::axis_box(&[0.6, 0.9], &[0.0, 0.0], 20.0).expect("valid box")), id.clone()),
        wall([-1.0, 0.0], 5.0),
        wall([1.0, 0.0], 5.0),
        wall([0.0, -1.0], 4.0),
        wall([0.0, 1.0], 4.0),
    ];
    let robot = point_robot(ScalingPrimitive::Ellipsoid(Ellipsoid::axis_aligned(&[0.4, 0.25], &[0.0, 0.0]).expect("positive axes")), [-2.5, 0.0], [0.0, 0.0]);
    let name = if circulation { "whiteboard2d" } else { "whiteboard2d_no_circ" };
    let mut cfg = base(name, robot, obstacles, NominalController::GoalPd { kp: 0.5, kd: 1.5, goal: vec![2.5, 0.0] }, 30.0);
    // `φ̈` carries `−η Σ wᵢ(ḣᵢ − φ̇)²`; with `h` quadratic in distance a large
    // `η` makes two crossing barriers demand runaway acceleration.
    cfg.aggregation = Aggregation::SmoothMin { eta: 1.0, phi0: 0.3 };
    if circulation {
        cfg.circulation = Some(CirculationSpec {
            skew: SkewRule::BlockRotation,
            d: DFunction::Exponential { d1: 1.0, d2: 1.0, d3: 0.1, d4: 1.0, d5: 0.5 },
            equilibrium: EquilibriumBox::unbounded(),
            soft: Some(100.0),
        });
    }
    cfg
}

pub fn builtin(name: &str) -> Option<ScenarioConfig> {
    match name {
        "example1_no_circ" => Some(example1(false)),
        "example1_circ" => Some(example1(true)),
        "fig1_tracking" => Some(fig1_tracking()),
        "whiteboard2d" => Some(whiteboard2d(true)),
        "whiteboard2d_no_circ" => Some(whiteboard2d(false)),
        _ => None,
    }
}

/// Ball or ellipse robot crossing a field of one to three disjoint ellipse or
/// polytope obstacles toward a random goal, starting at rest and clear of
/// every obstacle (so `ψ₀, ψ₁ ≥ 0`).
pub fn random_scenario(seed: u64) -> ScenarioConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let shape = if rng.gen_bool(0.5) {
            ball(rng.gen_range(0.3..0.6))
        } else {
            ScalingPrimitive::Ellipsoid(Ellipsoid::axis_aligned(&[rng.gen_range(0.3..0.6), rng.gen_range(0.2..0.4)], &[0.0, 0.0]).expect("positive axes"))
        };
        let angle = rng.gen_range(-1.0..1.0);
        let start = [-5.0, rng.gen_range(-1.0..1.0)];
        let goal = vec![5.0, rng.gen_range(-1.0..1.0)];
        let count = rng.gen_range(1..=3);
        let mut obstacles: Vec<Body> = Vec::new();
        let mut centers: Vec<DVector<f64>> = Vec::new();
        for k in 0..count {
            let x = -2.5 + 2.5 * k as f64 + rng.gen_range(-0.4..0.4);
            let c = DVector::from_vec(vec![x, rng.gen_range(-0.8..0.8)]);
            let prim = if rng.gen_bool(0.5) {
                ScalingPrimitive::Ellipsoid(Ellipsoid::axis_aligned(&[rng.gen_range(0.4..1.0), rng.gen_range(0.4..1.0)], &[0.0, 0.0]).expect("positive axes"))
            } else {
                ScalingPrimitive::Polytope(random_polytope(&mut rng, 2))
            };
            obstacles.push(Body::new(prim, FrameParams::planar(c[0], c[1], rng.gen_range(-3.0..3.0))));
            centers.push(c);
        }
        let mut cfg = base(
            &format!("random_{seed}"),
            Robot { shape, task_map: TaskMap::PlanarPoint { angle }, q0: start.to_vec(), v0: vec![0.0, 0.0] },
            obstacles,
            NominalController::GoalPd { kp: 1.0, kd: 2.0, goal },
            12.0,
        );
        cfg.seed = seed;
        if clear_start(&cfg, 1.5) && separated(&cfg) {
            return cfg;
        }
    }
}

/// Every obstacle starts with `α* ≥ margin`.
fn clear_start(cfg: &ScenarioConfig, margin: f64) -> bool {
    let frame = FrameParams::planar(cfg.robot.q0[0], cfg.robot.q0[1], robot_angle(cfg));
    let robot = Body::new(cfg.robot.shape.clone(), frame);
    cfg.obstacles.iter().all(|o| PrimitivePair::new(robot.clone(), o.clone()).and_then(|p| solve_min_scaling(&p)).is_ok_and(|s| s.alpha >= margin))
}

fn robot_angle(cfg: &ScenarioConfig) -> f64 {
    match cfg.robot.task_map {
        TaskMap::PlanarPoint { angle } => angle,
        _ => 0.0,
    }
}

/// Obstacles leave a corridor wide enough for the robot between each other,
/// measured by a ball of the robot's circumradius placed anywhere on the
/// segment between their interior points.
fn separated(cfg: &ScenarioConfig) -> bool {
    let r = match &cfg.robot.shape {
        ScalingPrimitive::Ellipsoid(e) => 1.0 / e.shape().symmetric_eigenvalues().min().sqrt(),
        _ => return false,
    };
    let obs = &cfg.obstacles;
    for i in 0..obs.len() {
        for j in i + 1..obs.len() {
            // Two obstacles are far enough apart when a ball of radius 1.5·r
            // fits between them: scaled by the ball, each has α* > 1.
            let (ci, cj) = (obs[i].world_interior_point().unwrap_or_default(), obs[j].world_interior_point().unwrap_or_default());
            let fits = (1..10).any(|k| {
                let s = k as f64 / 10.0;
                let c = &ci * (1.0 - s) + &cj * s;
                let probe = Body::new(ball(1.5 * r), FrameParams::planar(c[0], c[1], 0.0));
                [i, j].iter().all(|&m| PrimitivePair::new(probe.clone(), obs[m].clone()).and_then(|p| solve_min_scaling(&p)).is_ok_and(|s| s.alpha > 1.0))
            });
            if !fits {
                return false;
            }
        }
    }
    true
}
