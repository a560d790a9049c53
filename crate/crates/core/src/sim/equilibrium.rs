use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::config::EquilibriumThresholds;
use super::log::TrajectoryLog;
use crate::safety::RowKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EquilibriumCase {
    /// The nominal control itself is at rest (`u_n = u_e`).
    Nominal,
    /// The filter holds the state on the safe-set boundary.
    Boundary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EquilibriumReport {
    pub detected: bool,
    pub case: Option<EquilibriumCase>,
    pub t0: f64,
    pub t1: f64,
    pub mean_q: Vec<f64>,
    pub mean_v: Vec<f64>,
    pub max_speed: f64,
    pub h_min: f64,
    /// Whether a barrier row was active throughout the window.
    pub barrier_active: bool,
}

impl EquilibriumReport {
    pub fn none() -> Self {
        EquilibriumReport {
            detected: false,
            case: None,
            t0: f64::NAN,
            t1: f64::NAN,
            mean_q: Vec::new(),
            mean_v: Vec::new(),
            max_speed: f64::NAN,
            h_min: f64::NAN,
            barrier_active: false,
        }
    }
}

/// First window of length `dwell` with `‖v‖ ≤ v_eps` and `‖u − ζ‖ ≤ u_eps`
/// (`ζ = 0` for acceleration control). With `spurious_only`, windows where
/// the nominal control also vanishes are skipped.
fn scan(log: &TrajectoryLog, th: &EquilibriumThresholds, spurious_only: bool) -> EquilibriumReport {
    let recs = &log.records;
    let resting = |i: usize| {
        let r = &recs[i];
        let gap = (&r.u_nominal - &r.u_filtered).norm();
        r.v.norm() <= th.v_eps && r.u_filtered.norm() <= th.u_eps && (!spurious_only || gap > th.u_eps)
    };
    let mut start = 0;
    let mut run = false;
    for i in 0..recs.len() {
        if !resting(i) {
            run = false;
            continue;
        }
        if !run {
            run = true;
            start = i;
        }
        if recs[i].t - recs[start].t + 1e-12 >= th.dwell {
            return report(log, start, i, th);
        }
    }
    EquilibriumReport::none()
}

fn report(log: &TrajectoryLog, i0: usize, i1: usize, th: &EquilibriumThresholds) -> EquilibriumReport {
    let w = &log.records[i0..=i1];
    let n = w.len() as f64;
    let mean =
        |f: &dyn Fn(usize) -> DVector<f64>| -> Vec<f64> { (0..w.len()).map(f).fold(DVector::zeros(f(0).len()), |a, b| a + b).iter().map(|x| x / n).collect() };
    let gap = w.iter().map(|r| (&r.u_nominal - &r.u_filtered).norm()).sum::<f64>() / n;
    let last = &w[w.len() - 1];
    let barrier_active = w.iter().all(|r| r.active.contains(&RowKind::Hocbf));
    let case = if gap <= th.u_eps { EquilibriumCase::Nominal } else { EquilibriumCase::Boundary };
    let rep = EquilibriumReport {
        detected: true,
        case: Some(case),
        t0: w[0].t,
        t1: last.t,
        mean_q: mean(&|k| w[k].q.clone()),
        mean_v: mean(&|k| w[k].v.clone()),
        max_speed: w.iter().map(|r| r.v.norm()).fold(0.0, f64::max),
        h_min: last.h_min(),
        barrier_active,
    };
    if case == EquilibriumCase::Boundary && barrier_active && rep.h_min > 0.05 {
        log::warn!("boundary equilibrium at t = {:.3} has h_min = {:.3e} > 0.05", rep.t0, rep.h_min);
    }
    rep
}

/// First resting window of any kind.
pub fn detect_equilibrium(log: &TrajectoryLog, th: &EquilibriumThresholds) -> EquilibriumReport {
    scan(log, th, false)
}

/// First resting window that the filter, not the nominal control, holds.
pub fn detect_spurious_equilibrium(log: &TrajectoryLog, th: &EquilibriumThresholds) -> EquilibriumReport {
    scan(log, th, true)
}
