use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::row::{ConstraintRow, HocbfGains, RowKind, TOL_ROW};
use super::taskmap::TaskJet;
use crate::error::{check_dim, Error, Result};
use crate::sensitivity::AlphaSensitivity;

/// `h = α* − α₀`.
pub fn barrier_value(sens: &AlphaSensitivity, gains: &HocbfGains) -> f64 {
    sens.alpha() - gains.alpha0
}

/// Time derivatives of one barrier along the plant, `ḧ = curvature + aᵀu`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BarrierTerms {
    pub h: f64,
    pub h_dot: f64,
    /// `θ̇ᵀ∇²α θ̇ + ∇α·b_θ`, the control-free part of `ḧ`.
    pub curvature: f64,
    /// `A_θᵀ∇α`, the coefficient of `u` in `ḧ`.
    pub a: DVector<f64>,
}

impl BarrierTerms {
    pub fn new(sens: &AlphaSensitivity, jet: &TaskJet, gains: &HocbfGains) -> Result<Self> {
        let hess = sens.hess.as_ref().ok_or_else(|| Error::Precondition("barrier rows need the Hessian of α*".into()))?;
        check_dim(sens.grad.len(), jet.n_theta())?;
        let g = &sens.grad;
        let td = &jet.theta_dot;
        Ok(BarrierTerms { h: barrier_value(sens, gains), h_dot: g.dot(td), curvature: td.dot(&(hess * td)) + g.dot(&jet.drift), a: jet.input.transpose() * g })
    }

    /// `ψ₁ = ḣ + γ₁h`.
    pub fn psi1(&self, gains: &HocbfGains) -> f64 {
        self.h_dot + gains.gamma1 * self.h
    }

    /// `ψ̇₁ + γ₂ψ₁ ≥ 0` written as `aᵀu ≥ b`.
    pub fn row(&self, gains: &HocbfGains) -> ConstraintRow {
        let b = -self.curvature - (gains.gamma1 + gains.gamma2) * self.h_dot - gains.gamma1 * gains.gamma2 * self.h;
        if self.a.norm() < TOL_ROW && self.h >= 0.0 {
            log::warn!("HOCBF row has a vanishing input coefficient at h = {:.3e}", self.h);
        }
        ConstraintRow::hard(self.a.clone(), b, RowKind::Hocbf)
    }
}

/// Relative-degree-two HOCBF row for one barrier.
pub fn hocbf_row(sens: &AlphaSensitivity, jet: &TaskJet, gains: &HocbfGains) -> Result<ConstraintRow> {
    Ok(BarrierTerms::new(sens, jet, gains)?.row(gains))
}
