//! Minimal scaling factor `α*` of a primitive pair and its derivatives.
//!
//! For sets `A`, `B` with scaling functions `F_A`, `F_B`,
//! `α* = min_p F_A(p, θ_A) s.t. F_B(p, θ_B) ≤ 1`. The sets are disjoint iff
//! `α* > 1`. At a disjoint optimum the multiplier is strictly positive and the
//! constraint is active, so `(p*, λ*)` solves the square system
//! `∇_p F_A + λ ∇_p F_B = 0`, `F_B = 1`, whose Jacobian `N` is nonsingular
//! whenever one of the two functions has a positive definite Hessian.

mod closed_form;
mod derivatives;
mod newton;
mod pair;
pub mod sample;

pub use closed_form::{ellipsoid_halfspace_closed_form, rimon_closed_form};
pub use derivatives::{alpha_gradient, alpha_hessian, alpha_hessian_unsymmetrized, alpha_sensitivity, AlphaSensitivity};
pub use newton::{newton_kkt, NewtonInit};
pub use pair::{Body, PairKind, PrimitivePair};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::Result;

/// Stationarity and feasibility tolerance for accepted solutions.
pub const TOL_KKT: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolverTag {
    ClosedForm,
    NewtonKkt,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MinScalingSolution {
    pub alpha: f64,
    pub p: DVector<f64>,
    pub lambda: f64,
    /// `max(‖∇F_A + λ∇F_B‖∞, |F_B − 1|)`; for overlapping pairs only the
    /// stationarity of `F_A` is measured.
    pub kkt_residual: f64,
    pub solver: SolverTag,
    pub iterations: usize,
    /// The unconstrained minimiser of `F_A` already lies in `B`.
    pub overlap: bool,
}

impl MinScalingSolution {
    pub fn is_separated(&self) -> bool {
        self.alpha > 1.0 && !self.overlap
    }
}

/// Dispatches to the closed forms for ellipsoid–ellipsoid and
/// ellipsoid–halfspace pairs and to [`newton_kkt`] otherwise.
pub fn solve_min_scaling(pair: &PrimitivePair) -> Result<MinScalingSolution> {
    match pair.kind() {
        PairKind::EllipsoidEllipsoid => rimon_closed_form(pair),
        PairKind::EllipsoidHalfspace | PairKind::HalfspaceEllipsoid => ellipsoid_halfspace_closed_form(pair),
        PairKind::EllipsoidPolytope | PairKind::PolytopeEllipsoid => newton_kkt(pair, None),
    }
}

/// KKT residual of a candidate `(p, λ)`.
pub(crate) fn kkt_residual(pair: &PrimitivePair, p: &DVector<f64>, lambda: f64) -> Result<f64> {
    let ja = pair.eval_a(p, 1)?;
    let jb = pair.eval_b(p, 1)?;
    let stat = ja.grad_p() + jb.grad_p() * lambda;
    Ok(crate::linalg::inf_norm(&stat).max((jb.value - 1.0).abs()))
}

/// Least-squares multiplier from `∇F_A + λ∇F_B = 0`.
pub(crate) fn multiplier_from_stationarity(ga: &DVector<f64>, gb: &DVector<f64>) -> f64 {
    let den = gb.norm_squared();
    if den == 0.0 {
        0.0
    } else {
        -ga.dot(gb) / den
    }
}
