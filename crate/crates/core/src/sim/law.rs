use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::{Aggregation, ScenarioConfig};
use crate::error::Result;
use crate::qp::QpStatus;
use crate::safety::{
    assemble_filter, circulation_row, equilibrium_projector, smooth_min_terms, velocity_limit_rows, BarrierTerms, ConstraintRow, RowKind, TaskMap,
};
use crate::sensitivity::{alpha_sensitivity, Body, PrimitivePair};

/// Filtered control at one state with everything worth logging.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawOutput {
    pub u: DVector<f64>,
    pub u_nominal: DVector<f64>,
    pub h: Vec<f64>,
    pub psi1: Vec<f64>,
    /// Smooth minimum when aggregating, otherwise `min h`.
    pub phi: f64,
    pub equilibrium_distance: f64,
    pub active: Vec<RowKind>,
    pub status: QpStatus,
    pub qp_iterations: usize,
    pub max_slack: f64,
    pub qp_time_us: f64,
    pub sensitivity_time_us: f64,
}

/// The (C)HOCBF-QP feedback law of a scenario.
#[derive(Debug, Clone)]
pub struct ControlLaw {
    cfg: ScenarioConfig,
}

impl ControlLaw {
    pub fn new(cfg: &ScenarioConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(ControlLaw { cfg: cfg.clone() })
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    /// Barrier terms for every obstacle at `(q, v)`.
    pub fn barrier_terms(&self, q: &DVector<f64>, v: &DVector<f64>) -> Result<Vec<BarrierTerms>> {
        let cfg = &self.cfg;
        let robot = cfg.robot.task_map.jet(q, v)?;
        let body = Body::new(cfg.robot.shape.clone(), robot.frame()?);
        let n_u = cfg.n_u();
        let mut out = Vec::with_capacity(cfg.obstacles.len());
        for obstacle in &cfg.obstacles {
            let pair = PrimitivePair::new(body.clone(), obstacle.clone())?;
            let sens = alpha_sensitivity(&pair, 2)?;
            let fixed = TaskMap::Static { frame: obstacle.frame.clone(), n_u }.jet(&DVector::zeros(0), &DVector::zeros(0))?;
            out.push(BarrierTerms::new(&sens, &robot.stack(&fixed)?, &cfg.gains)?);
        }
        Ok(out)
    }

    pub fn evaluate(&self, t: f64, q: &DVector<f64>, v: &DVector<f64>) -> Result<LawOutput> {
        let cfg = &self.cfg;
        let gains = &cfg.gains;
        let u_nominal = cfg.controller.control(t, q, v);

        let clock = Instant::now();
        let terms = self.barrier_terms(q, v)?;
        let sensitivity_time_us = clock.elapsed().as_secs_f64() * 1e6;

        let h: Vec<f64> = terms.iter().map(|b| b.h).collect();
        let psi1: Vec<f64> = terms.iter().map(|b| b.psi1(gains)).collect();
        let mut rows: Vec<ConstraintRow> = Vec::new();
        // The barrier the circulation row is built on.
        let lead: Option<BarrierTerms> = match cfg.aggregation {
            Aggregation::Separate => {
                rows.extend(terms.iter().map(|b| b.row(gains)));
                terms.iter().min_by(|a, b| a.h.total_cmp(&b.h)).cloned()
            }
            Aggregation::SmoothMin { eta, phi0 } if !terms.is_empty() => {
                let agg = smooth_min_terms(&terms, eta, phi0)?;
                rows.push(agg.row(gains));
                Some(agg)
            }
            Aggregation::SmoothMin { .. } => None,
        };
        let phi = lead.as_ref().map_or(f64::INFINITY, |b| b.h);

        let n_u = cfg.n_u();
        let mut equilibrium_distance = v.norm();
        if let (Some(spec), Some(lead)) = (&cfg.circulation, &lead) {
            let proj = equilibrium_projector(&spec.equilibrium, q, v, n_u)?;
            equilibrium_distance = proj.distance;
            rows.push(circulation_row(spec, &lead.a, lead.h, &proj)?);
        }
        if let Some(l) = &cfg.velocity_limits {
            rows.extend(velocity_limit_rows(v, &l.lower, &l.upper, l.gamma)?);
        }
        let input_box = cfg.input_box.as_ref().map(|b| (DVector::from_column_slice(&b.lower), DVector::from_column_slice(&b.upper)));

        let clock = Instant::now();
        let problem = assemble_filter(&u_nominal, rows, input_box)?;
        let sol = problem.solve()?;
        let qp_time_us = clock.elapsed().as_secs_f64() * 1e6;

        let active = sol.active_rows.iter().map(|&i| problem.rows[i].kind).collect();
        let max_slack = sol.slacks.iter().copied().fold(0.0, f64::max);
        Ok(LawOutput {
            u: sol.u,
            u_nominal,
            h,
            psi1,
            phi,
            equilibrium_distance,
            active,
            status: sol.qp.status,
            qp_iterations: sol.qp.iterations,
            max_slack,
            qp_time_us,
            sensitivity_time_us,
        })
    }

    /// Zero input clamped to the box.
    pub fn fallback_input(&self) -> DVector<f64> {
        let n = self.cfg.n_u();
        match &self.cfg.input_box {
            Some(b) => DVector::from_fn(n, |i, _| 0.0_f64.clamp(b.lower[i], b.upper[i])),
            None => DVector::zeros(n),
        }
    }
}
