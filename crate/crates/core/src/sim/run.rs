use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::{Hold, InfeasiblePolicy, ScenarioConfig};
use super::equilibrium::{detect_equilibrium, detect_spurious_equilibrium, EquilibriumReport};
use super::law::{ControlLaw, LawOutput};
use super::log::{StepRecord, TrajectoryLog};
use crate::error::Result;
use crate::qp::QpStatus;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub t: f64,
    pub q: DVector<f64>,
    pub v: DVector<f64>,
}

impl PlantState {
    pub fn initial(cfg: &ScenarioConfig) -> Self {
        PlantState { t: 0.0, q: DVector::from_column_slice(&cfg.robot.q0), v: DVector::from_column_slice(&cfg.robot.v0) }
    }
}

/// Control actually applied at one evaluation, with the fallback policy.
fn applied(law: &ControlLaw, out: &LawOutput) -> Option<(DVector<f64>, bool)> {
    if out.status == QpStatus::Optimal {
        return Some((out.u.clone(), false));
    }
    match law.config().infeasible {
        InfeasiblePolicy::Halt => None,
        InfeasiblePolicy::ZeroInput => Some((law.fallback_input(), true)),
    }
}

fn record(t: f64, q: &DVector<f64>, v: &DVector<f64>, out: LawOutput, u: DVector<f64>, violation: bool) -> StepRecord {
    StepRecord {
        t,
        q: q.clone(),
        v: v.clone(),
        u_nominal: out.u_nominal,
        u_filtered: u,
        h: out.h,
        psi1: out.psi1,
        phi: out.phi,
        equilibrium_distance: out.equilibrium_distance,
        active: out.active,
        qp_status: out.status,
        qp_iterations: out.qp_iterations,
        violation,
        qp_time_us: out.qp_time_us,
        sensitivity_time_us: out.sensitivity_time_us,
    }
}

pub enum StepOutcome {
    Advanced(PlantState, StepRecord),
    /// The filter failed under the halting policy; the record is at `state`.
    Halted(StepRecord),
}

/// One classical RK4 step of `q̇ = q̇(q, v)`, `v̇ = u`.
pub fn step(state: &PlantState, law: &ControlLaw, dt: f64) -> Result<StepOutcome> {
    let map = &law.config().robot.task_map;
    let (t, q, v) = (state.t, &state.q, &state.v);
    let first = law.evaluate(t, q, v)?;
    let Some((u0, violation)) = applied(law, &first) else {
        let u = first.u.clone();
        return Ok(StepOutcome::Halted(record(t, q, v, first, u, false)));
    };
    let hold = law.config().hold;
    let input = |ts: f64, qs: &DVector<f64>, vs: &DVector<f64>| -> Result<DVector<f64>> {
        match hold {
            Hold::ZeroOrder => Ok(u0.clone()),
            Hold::PerStage => {
                let out = law.evaluate(ts, qs, vs)?;
                Ok(applied(law, &out).map_or_else(|| law.fallback_input(), |(u, _)| u))
            }
        }
    };
    let deriv = |ts: f64, qs: &DVector<f64>, vs: &DVector<f64>, first_stage: bool| -> Result<(DVector<f64>, DVector<f64>)> {
        let u = if first_stage { u0.clone() } else { input(ts, qs, vs)? };
        Ok((map.q_dot(qs, vs)?, u))
    };
    let (k1q, k1v) = deriv(t, q, v, true)?;
    let (k2q, k2v) = deriv(t + dt / 2.0, &(q + &k1q * (dt / 2.0)), &(v + &k1v * (dt / 2.0)), false)?;
    let (k3q, k3v) = deriv(t + dt / 2.0, &(q + &k2q * (dt / 2.0)), &(v + &k2v * (dt / 2.0)), false)?;
    let (k4q, k4v) = deriv(t + dt, &(q + &k3q * dt), &(v + &k3v * dt), false)?;
    let next = PlantState { t: t + dt, q: q + (k1q + k2q * 2.0 + k3q * 2.0 + k4q) * (dt / 6.0), v: v + (k1v + k2v * 2.0 + k3v * 2.0 + k4v) * (dt / 6.0) };
    Ok(StepOutcome::Advanced(next, record(t, q, v, first, u0, violation)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Percentile {
    pub q: f64,
    pub value: f64,
}

/// Nearest-rank percentiles, ascending in `q`.
pub fn percentiles(samples: &[f64], qs: &[f64]) -> Vec<Percentile> {
    let mut s: Vec<f64> = samples.iter().copied().filter(|x| x.is_finite()).collect();
    s.sort_by(f64::total_cmp);
    let mut out: Vec<Percentile> = qs
        .iter()
        .map(|&q| {
            let value = if s.is_empty() {
                f64::NAN
            } else {
                let rank = ((q / 100.0) * s.len() as f64).ceil().max(1.0) as usize;
                s[rank.min(s.len()) - 1]
            };
            Percentile { q, value }
        })
        .collect();
    out.sort_by(|a, b| a.q.total_cmp(&b.q));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub steps: usize,
    pub halted: bool,
    pub halt_reason: Option<String>,
    pub all_optimal: bool,
    /// `None` for tracking scenarios without a goal.
    pub goal_reached: Option<bool>,
    pub final_goal_distance: Option<f64>,
    pub min_h: f64,
    /// Resting window held by the filter rather than the nominal control.
    pub equilibrium: EquilibriumReport,
    /// First resting window of any kind, including rest at the goal.
    pub rest: EquilibriumReport,
    pub qp_time_us: Vec<Percentile>,
    pub sensitivity_time_us: Vec<Percentile>,
    pub max_control_jump: f64,
}

impl RunSummary {
    pub fn from_log(cfg: &ScenarioConfig, log: &TrajectoryLog) -> Self {
        let last = log.records.last();
        let final_goal_distance = match (cfg.controller.goal(), last) {
            (Some(g), Some(r)) => Some((&r.q - g).norm()),
            _ => None,
        };
        let times: Vec<f64> = log.records.iter().map(|r| r.qp_time_us).collect();
        let sens: Vec<f64> = log.records.iter().map(|r| r.sensitivity_time_us).collect();
        RunSummary {
            scenario: cfg.name.clone(),
            steps: log.records.len().saturating_sub(1),
            halted: log.halted,
            halt_reason: log.halt_reason.clone(),
            all_optimal: log.all_optimal(),
            goal_reached: final_goal_distance.map(|d| d <= cfg.goal_tolerance),
            final_goal_distance,
            min_h: log.min_h(),
            equilibrium: detect_spurious_equilibrium(log, &cfg.equilibrium),
            rest: detect_equilibrium(log, &cfg.equilibrium),
            qp_time_us: percentiles(&times, &[50.0, 90.0]),
            sensitivity_time_us: percentiles(&sens, &[50.0, 90.0]),
            max_control_jump: log.max_control_jump(),
        }
    }
}

/// Full deterministic rollout. A filter failure under the halting policy ends
/// the log early with `halted` set; configuration errors are returned.
pub fn run_scenario(cfg: &ScenarioConfig) -> Result<(TrajectoryLog, RunSummary)> {
    let law = ControlLaw::new(cfg)?;
    let mut log = TrajectoryLog { scenario: cfg.name.clone(), dt: cfg.dt, ..Default::default() };
    let mut state = PlantState::initial(cfg);
    let n = cfg.steps();
    for k in 0..n {
        match step(&state, &law, cfg.dt) {
            Ok(StepOutcome::Advanced(next, rec)) => {
                log.records.push(rec);
                state = next;
                // Keep the grid exact rather than accumulating dt.
                state.t = (k + 1) as f64 * cfg.dt;
            }
            Ok(StepOutcome::Halted(rec)) => {
                log.halt_reason = Some(format!("safety filter returned {:?} at t = {:.4}", rec.qp_status, rec.t));
                log.records.push(rec);
                log.halted = true;
                break;
            }
            Err(e) => {
                log.halt_reason = Some(format!("t = {:.4}: {e}", state.t));
                log.halted = true;
                break;
            }
        }
    }
    if !log.halted {
        match law.evaluate(state.t, &state.q, &state.v) {
            Ok(out) => {
                let (u, violation) = applied(&law, &out).unwrap_or_else(|| (out.u.clone(), false));
                log.records.push(record(state.t, &state.q, &state.v, out, u, violation));
            }
            Err(e) => {
                log.halt_reason = Some(format!("t = {:.4}: {e}", state.t));
                log.halted = true;
            }
        }
    }
    let summary = RunSummary::from_log(cfg, &log);
    Ok((log, summary))
}
