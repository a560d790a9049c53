use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::barrier::BarrierTerms;
use super::row::{ConstraintRow, HocbfGains, RowKind};
use crate::error::{check_dim, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothMin {
    /// `φ = −(1/η) ln(Σ e^{−η h_i}) − φ₀`
    pub phi: f64,
    /// Softmin weights, summing to one.
    pub weights: Vec<f64>,
}

/// Log-sum-exp soft minimum shifted by `h_min` so no exponent is positive.
///
/// `h_min − ln(K)/η ≤ φ + φ₀ ≤ h_min`.
pub fn smooth_min(values: &[f64], eta: f64, phi0: f64) -> Result<SmoothMin> {
    if values.is_empty() {
        return Err(Error::Precondition("smooth minimum of an empty set".into()));
    }
    if !(eta > 0.0 && eta.is_finite()) {
        return Err(Error::Config(format!("eta must be positive, got {eta}")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("non-finite barrier value".into()));
    }
    let h_min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let e: Vec<f64> = values.iter().map(|h| (-eta * (h - h_min)).exp()).collect();
    let sum: f64 = e.iter().sum();
    let k = values.len() as f64;
    // sum ∈ [1, K] so the log term lies in [0, ln K].
    let phi = h_min - sum.ln() / eta;
    let phi = phi.min(h_min).max(h_min - k.ln() / eta);
    debug_assert!(phi <= h_min && phi >= h_min - k.ln() / eta);
    Ok(SmoothMin { phi: phi - phi0, weights: e.iter().map(|v| v / sum).collect() })
}

/// Value, gradient and Hessian of `φ` when every `h_i` is a function of one
/// shared parameter vector.
pub fn smooth_min_jet(values: &[f64], grads: &[DVector<f64>], hessians: &[DMatrix<f64>], eta: f64, phi0: f64) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    check_dim(values.len(), grads.len())?;
    check_dim(values.len(), hessians.len())?;
    let sm = smooth_min(values, eta, phi0)?;
    let n = grads[0].len();
    let mut g = DVector::zeros(n);
    let mut h = DMatrix::zeros(n, n);
    let mut outer = DMatrix::zeros(n, n);
    for ((w, gi), hi) in sm.weights.iter().zip(grads).zip(hessians) {
        check_dim(n, gi.len())?;
        g += gi * *w;
        h += hi * *w;
        outer += gi * gi.transpose() * *w;
    }
    h -= (outer - &g * g.transpose()) * eta;
    Ok((sm.phi, g, h))
}

/// Aggregated terms of `φ` along the plant.
///
/// `φ̇ = Σ w_i ḣ_i` and `φ̈ = Σ w_i ḧ_i − η(Σ w_i ḣ_i² − φ̇²)`, the second term
/// coming from the time derivative of the weights.
pub fn smooth_min_terms(terms: &[BarrierTerms], eta: f64, phi0: f64) -> Result<BarrierTerms> {
    let values: Vec<f64> = terms.iter().map(|t| t.h).collect();
    let sm = smooth_min(&values, eta, phi0)?;
    let n_u = terms[0].a.len();
    let mut phi_dot = 0.0;
    let mut second = 0.0;
    let mut curvature = 0.0;
    let mut a = DVector::zeros(n_u);
    for (w, t) in sm.weights.iter().zip(terms) {
        check_dim(n_u, t.a.len())?;
        phi_dot += w * t.h_dot;
        second += w * t.h_dot * t.h_dot;
        curvature += w * t.curvature;
        a += &t.a * *w;
    }
    curvature -= eta * (second - phi_dot * phi_dot);
    Ok(BarrierTerms { h: sm.phi, h_dot: phi_dot, curvature, a })
}

/// One HOCBF row for the smooth minimum of several barriers.
pub fn smooth_min_hocbf_row(terms: &[BarrierTerms], eta: f64, phi0: f64, gains: &HocbfGains) -> Result<ConstraintRow> {
    let mut row = smooth_min_terms(terms, eta, phi0)?.row(gains);
    row.kind = RowKind::Hocbf;
    Ok(row)
}
