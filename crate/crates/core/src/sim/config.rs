use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::ScalingPrimitive;
use crate::safety::{CirculationSpec, HocbfGains, TaskMap};
use crate::sensitivity::Body;

pub const SCHEMA_VERSION: u32 = 1;

/// Reference path for trajectory tracking, with analytic derivatives.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Reference {
    /// Counter-clockwise circle starting at angle `phase`.
    Circle {
        center: [f64; 2],
        radius: f64,
        period: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Piecewise-linear interpolation, held at the ends.
    Waypoints { points: Vec<Vec<f64>>, times: Vec<f64> },
}

impl Reference {
    /// Position, velocity and acceleration at time `t`.
    pub fn sample(&self, t: f64) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        match self {
            Reference::Circle { center, radius, period, phase } => {
                let w = std::f64::consts::TAU / period;
                let a = phase + w * t;
                let (s, c) = a.sin_cos();
                (
                    DVector::from_vec(vec![center[0] + radius * c, center[1] + radius * s]),
                    DVector::from_vec(vec![-radius * w * s, radius * w * c]),
                    DVector::from_vec(vec![-radius * w * w * c, -radius * w * w * s]),
                )
            }
            Reference::Waypoints { points, times } => {
                let n = points[0].len();
                let zero = DVector::zeros(n);
                let at = |i: usize| DVector::from_column_slice(&points[i]);
                if t <= times[0] {
                    return (at(0), zero.clone(), zero);
                }
                let last = times.len() - 1;
                if t >= times[last] {
                    return (at(last), zero.clone(), zero);
                }
                let k = times.windows(2).position(|w| t >= w[0] && t < w[1]).unwrap_or(last - 1);
                let span = times[k + 1] - times[k];
                let s = (t - times[k]) / span;
                let vel = (at(k + 1) - at(k)) / span;
                (at(k) * (1.0 - s) + at(k + 1) * s, vel, zero)
            }
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Reference::Circle { .. } => 2,
            Reference::Waypoints { points, .. } => points.first().map_or(0, |p| p.len()),
        }
    }

    fn validate(&self) -> Result<()> {
        match self {
            Reference::Circle { radius, period, .. } => {
                if !(*radius >= 0.0 && *period > 0.0) {
                    return Err(Error::Config("circle reference needs radius ≥ 0 and period > 0".into()));
                }
            }
            Reference::Waypoints { points, times } => {
                if points.len() < 2 || points.len() != times.len() {
                    return Err(Error::Config("waypoints need at least two points with one time each".into()));
                }
                if points.iter().any(|p| p.len() != points[0].len()) || times.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::Config("waypoints must share a dimension and have increasing times".into()));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum NominalController {
    /// `u = −K_p(q − q_g) − K_d v`
    GoalPd { kp: f64, kd: f64, goal: Vec<f64> },
    /// `u = a_r − K_p(q − p_r) − K_d(v − v_r)`
    TrajectoryPd { kp: f64, kd: f64, reference: Reference },
}

impl NominalController {
    pub fn control(&self, t: f64, q: &DVector<f64>, v: &DVector<f64>) -> DVector<f64> {
        match self {
            NominalController::GoalPd { kp, kd, goal } => -(q - DVector::from_column_slice(goal)) * *kp - v * *kd,
            NominalController::TrajectoryPd { kp, kd, reference } => {
                let (p, pv, pa) = reference.sample(t);
                pa - (q - p) * *kp - (v - pv) * *kd
            }
        }
    }

    pub fn goal(&self) -> Option<DVector<f64>> {
        match self {
            NominalController::GoalPd { goal, .. } => Some(DVector::from_column_slice(goal)),
            NominalController::TrajectoryPd { .. } => None,
        }
    }

    fn validate(&self, n_q: usize) -> Result<()> {
        let (kp, kd, dim) = match self {
            NominalController::GoalPd { kp, kd, goal } => (*kp, *kd, goal.len()),
            NominalController::TrajectoryPd { kp, kd, reference } => {
                reference.validate()?;
                (*kp, *kd, reference.dim())
            }
        };
        if !(kp > 0.0 && kd > 0.0) {
            return Err(Error::Config("controller gains must be positive".into()));
        }
        if dim != n_q {
            return Err(Error::Config(format!("controller dimension {dim} does not match configuration dimension {n_q}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum Aggregation {
    /// One HOCBF row per obstacle.
    #[default]
    Separate,
    /// One HOCBF row for the smooth minimum `φ` of all barriers.
    SmoothMin { eta: f64, phi0: f64 },
}

/// How the control is held across a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Hold {
    /// Evaluate the filter once per step and integrate with constant input.
    #[default]
    ZeroOrder,
    /// Re-evaluate the filter at every Runge–Kutta stage, integrating the
    /// continuous closed loop.
    PerStage,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InfeasiblePolicy {
    #[default]
    Halt,
    /// Apply the zero input clamped to the box and flag the step.
    ZeroInput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Robot {
    pub shape: ScalingPrimitive,
    pub task_map: TaskMap,
    pub q0: Vec<f64>,
    pub v0: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VelocityLimits {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InputBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumThresholds {
    pub v_eps: f64,
    pub u_eps: f64,
    pub dwell: f64,
}

impl Default for EquilibriumThresholds {
    fn default() -> Self {
        EquilibriumThresholds { v_eps: 1e-3, u_eps: 1e-3, dwell: 1.0 }
    }
}

fn default_schema() -> u32 {
    SCHEMA_VERSION
}
fn default_dt() -> f64 {
    1e-3
}
fn default_goal_tolerance() -> f64 {
    0.1
}

/// Declarative closed-loop scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default = "default_schema")]
    pub schema: u32,
    pub name: String,
    pub robot: Robot,
    #[serde(default)]
    pub obstacles: Vec<Body>,
    pub controller: NominalController,
    #[serde(default)]
    pub gains: HocbfGains,
    #[serde(default)]
    pub aggregation: Aggregation,
    #[serde(default)]
    pub circulation: Option<CirculationSpec>,
    #[serde(default)]
    pub velocity_limits: Option<VelocityLimits>,
    #[serde(default)]
    pub input_box: Option<InputBox>,
    #[serde(default = "default_dt")]
    pub dt: f64,
    pub horizon: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub hold: Hold,
    #[serde(default)]
    pub infeasible: InfeasiblePolicy,
    #[serde(default)]
    pub equilibrium: EquilibriumThresholds,
    #[serde(default = "default_goal_tolerance")]
    pub goal_tolerance: f64,
}

impl ScenarioConfig {
    pub fn n_q(&self) -> usize {
        self.robot.task_map.n_q()
    }

    pub fn n_u(&self) -> usize {
        self.robot.task_map.n_v()
    }

    pub fn steps(&self) -> usize {
        (self.horizon / self.dt).round() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if self.schema != SCHEMA_VERSION {
            return Err(Error::Schema(format!("unsupported schema version {} (expected {SCHEMA_VERSION})", self.schema)));
        }
        if matches!(self.robot.task_map, TaskMap::Static { .. }) {
            return Err(Error::Config("the robot needs a moving task map".into()));
        }
        let (n_q, n_v) = (self.n_q(), self.n_u());
        if self.robot.q0.len() != n_q || self.robot.v0.len() != n_v {
            return Err(Error::Config(format!("initial state must have {n_q} + {n_v} entries")));
        }
        if self.robot.q0.iter().chain(&self.robot.v0).any(|v| !v.is_finite()) {
            return Err(Error::Config("initial state must be finite".into()));
        }
        if self.robot.shape.as_ellipsoid().is_none() && self.obstacles.iter().any(|o| o.shape.as_ellipsoid().is_none()) {
            return Err(Error::Config("a non-ellipsoidal robot needs ellipsoidal obstacles".into()));
        }
        let dim = self.robot.shape.dim();
        let theta = self.robot.task_map.jet(&DVector::from_column_slice(&self.robot.q0), &DVector::from_column_slice(&self.robot.v0))?;
        if theta.frame()?.dim() != dim {
            return Err(Error::Config("robot shape and task map disagree on dimension".into()));
        }
        for o in &self.obstacles {
            o.validate()?;
            if o.shape.dim() != dim {
                return Err(Error::Config("obstacle dimension differs from the robot".into()));
            }
        }
        self.controller.validate(n_q)?;
        self.gains.validate()?;
        if let Aggregation::SmoothMin { eta, phi0 } = self.aggregation {
            if !(eta > 0.0 && phi0.is_finite()) {
                return Err(Error::Config("smooth minimum needs eta > 0 and finite phi0".into()));
            }
        }
        if let Some(c) = &self.circulation {
            c.validate(n_v)?;
            if !c.equilibrium.is_unbounded() && c.equilibrium.lower.len() != n_q {
                return Err(Error::Config("equilibrium box must match the configuration dimension".into()));
            }
        }
        if let Some(l) = &self.velocity_limits {
            if l.lower.len() != n_v || l.upper.len() != n_v || !(l.gamma > 0.0) {
                return Err(Error::Config("velocity limits need one bound per velocity and gamma > 0".into()));
            }
        }
        if let Some(b) = &self.input_box {
            if b.lower.len() != n_v || b.upper.len() != n_v || b.lower.iter().zip(&b.upper).any(|(l, u)| !(l <= u)) {
                return Err(Error::Config("input box must be nonempty with one bound per input".into()));
            }
        }
        if !(self.dt > 0.0 && self.dt.is_finite() && self.horizon >= 0.0 && self.horizon.is_finite()) {
            return Err(Error::Config("dt must be positive and the horizon non-negative".into()));
        }
        let e = &self.equilibrium;
        if !(e.v_eps > 0.0 && e.u_eps > 0.0 && e.dwell > 0.0) {
            return Err(Error::Config("equilibrium thresholds must be positive".into()));
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| Error::Schema(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }
}
