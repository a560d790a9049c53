use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows with `‖a‖` below this are dropped from filters.
pub const TOL_ROW: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowKind {
    Hocbf,
    Circulation,
    FirstOrderLimit,
    Box,
}

/// `aᵀu ≥ b`, optionally relaxed by a slack penalised with weight `soft`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstraintRow {
    pub a: DVector<f64>,
    pub b: f64,
    pub kind: RowKind,
    pub soft: Option<f64>,
}

impl ConstraintRow {
    pub fn hard(a: DVector<f64>, b: f64, kind: RowKind) -> Self {
        ConstraintRow { a, b, kind, soft: None }
    }

    pub fn softened(mut self, weight: f64) -> Result<Self> {
        if !(weight > 0.0 && weight.is_finite()) {
            return Err(Error::Config(format!("slack weight must be positive, got {weight}")));
        }
        self.soft = Some(weight);
        Ok(self)
    }

    /// `aᵀu − b`; non-negative when satisfied.
    pub fn margin(&self, u: &DVector<f64>) -> f64 {
        self.a.dot(u) - self.b
    }

    pub fn is_degenerate(&self) -> bool {
        self.a.norm() < TOL_ROW
    }

    pub fn is_finite(&self) -> bool {
        self.b.is_finite() && self.a.iter().all(|v| v.is_finite())
    }
}

/// Offset `α₀ > 1` of the barrier `h = α* − α₀` and linear class-K gains.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HocbfGains {
    pub alpha0: f64,
    pub gamma1: f64,
    pub gamma2: f64,
}

impl Default for HocbfGains {
    fn default() -> Self {
        HocbfGains { alpha0: 1.03, gamma1: 5.0, gamma2: 5.0 }
    }
}

impl HocbfGains {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha0 > 1.0 && self.alpha0.is_finite()) {
            return Err(Error::Config(format!("alpha0 must exceed 1, got {}", self.alpha0)));
        }
        if !(self.gamma1 > 0.0 && self.gamma2 > 0.0 && self.gamma1.is_finite() && self.gamma2.is_finite()) {
            return Err(Error::Config("gamma1 and gamma2 must be positive".into()));
        }
        Ok(())
    }
}
