use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::row::{ConstraintRow, RowKind};
use crate::error::{Error, Result};

/// How the tangential direction `c ⟂ a` is built from `a`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "snake_case", deny_unknown_fields)]
#[derive(Default)]
pub enum SkewRule {
    /// `c = Φa` with `Φ` block-diagonal `[[0, 1], [−1, 0]]`; even `n_u` only.
    #[default]
    BlockRotation,
    /// Odd `n_u`: the first component is a zero virtual slot and the rest are
    /// rotated in pairs, `c = (0, −a₃, a₂, −a₅, a₄, …)` (1-based).
    Permutation,
    /// Explicit skew-symmetric `Φ`, rows listed.
    Matrix { phi: Vec<Vec<f64>> },
}

impl SkewRule {
    pub fn matrix(&self, n_u: usize) -> Result<DMatrix<f64>> {
        match self {
            SkewRule::BlockRotation => {
                if !n_u.is_multiple_of(2) {
                    return Err(Error::Config(format!("block rotation needs an even input dimension, got {n_u}; use the permutation rule")));
                }
                let mut m = DMatrix::zeros(n_u, n_u);
                for k in (0..n_u).step_by(2) {
                    m[(k, k + 1)] = 1.0;
                    m[(k + 1, k)] = -1.0;
                }
                Ok(m)
            }
            SkewRule::Permutation => {
                if n_u % 2 != 1 {
                    return Err(Error::Config(format!("the permutation rule needs an odd input dimension, got {n_u}")));
                }
                let mut m = DMatrix::zeros(n_u, n_u);
                for k in (1..n_u).step_by(2) {
                    m[(k, k + 1)] = -1.0;
                    m[(k + 1, k)] = 1.0;
                }
                Ok(m)
            }
            SkewRule::Matrix { phi } => {
                if phi.len() != n_u || phi.iter().any(|r| r.len() != n_u) {
                    return Err(Error::Config(format!("skew matrix must be {n_u}×{n_u}")));
                }
                let m = DMatrix::from_fn(n_u, n_u, |i, j| phi[i][j]);
                if (&m + m.transpose()).amax() != 0.0 {
                    return Err(Error::Config("circulation matrix is not skew-symmetric".into()));
                }
                Ok(m)
            }
        }
    }
}

/// Right-hand side `d(h, ‖x − P(x)‖)` of the circulation inequality.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "form", rename_all = "snake_case", deny_unknown_fields)]
pub enum DFunction {
    /// `1 − d₁h − d₂ dist`
    Linear { d1: f64, d2: f64 },
    /// `d₁(1 − e^{d₂(h − d₃)}) + d₄(e^{−(dist/d₅)²} − 1)`
    Exponential { d1: f64, d2: f64, d3: f64, d4: f64, d5: f64 },
}

impl Default for DFunction {
    fn default() -> Self {
        DFunction::Linear { d1: 1.0, d2: 1.0 }
    }
}

impl DFunction {
    pub fn eval(&self, h: f64, dist: f64) -> f64 {
        match *self {
            DFunction::Linear { d1, d2 } => 1.0 - d1 * h - d2 * dist,
            DFunction::Exponential { d1, d2, d3, d4, d5 } => d1 * (1.0 - (d2 * (h - d3)).exp()) + d4 * ((-(dist / d5).powi(2)).exp() - 1.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let DFunction::Exponential { d5, .. } = self {
            if *d5 == 0.0 {
                return Err(Error::Config("d5 must be nonzero".into()));
            }
        }
        let params: Vec<f64> = match *self {
            DFunction::Linear { d1, d2 } => vec![d1, d2],
            DFunction::Exponential { d1, d2, d3, d4, d5 } => vec![d1, d2, d3, d4, d5],
        };
        if params.iter().any(|v| !v.is_finite()) {
            return Err(Error::Config("non-finite circulation parameter".into()));
        }
        if self.eval(0.0, 0.0) <= 0.0 {
            return Err(Error::Config(format!("circulation needs d(0, 0) > 0, got {}", self.eval(0.0, 0.0))));
        }
        Ok(())
    }
}

/// Zero-velocity equilibrium candidates `{(q, 0) : lo ≤ q ≤ hi}`. Empty
/// bounds mean the whole configuration space.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquilibriumBox {
    #[serde(default)]
    pub lower: Vec<f64>,
    #[serde(default)]
    pub upper: Vec<f64>,
}

impl EquilibriumBox {
    pub fn unbounded() -> Self {
        EquilibriumBox::default()
    }

    pub fn is_unbounded(&self) -> bool {
        self.lower.is_empty() && self.upper.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.len() != self.upper.len() || self.lower.iter().zip(&self.upper).any(|(l, u)| !(l <= u)) {
            return Err(Error::Config("equilibrium box must be nonempty".into()));
        }
        Ok(())
    }
}

/// Projection onto the equilibrium set with the feed-forward input there.
#[derive(Debug, Clone, PartialEq)]
pub struct EquilibriumProjection {
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    /// Input holding the projected state at rest; zero for acceleration control.
    pub zeta: DVector<f64>,
    pub distance: f64,
}

/// Clamps `q` to the box and zeroes the velocity.
pub fn equilibrium_projector(set: &EquilibriumBox, q: &DVector<f64>, v: &DVector<f64>, n_u: usize) -> Result<EquilibriumProjection> {
    set.validate()?;
    let pq = if set.is_unbounded() {
        q.clone()
    } else {
        crate::error::check_dim(set.lower.len(), q.len())?;
        DVector::from_fn(q.len(), |i, _| q[i].clamp(set.lower[i], set.upper[i]))
    };
    let distance = ((q - &pq).norm_squared() + v.norm_squared()).sqrt();
    Ok(EquilibriumProjection { q: pq, v: DVector::zeros(v.len()), zeta: DVector::zeros(n_u), distance })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CirculationSpec {
    #[serde(default)]
    pub skew: SkewRule,
    #[serde(default)]
    pub d: DFunction,
    #[serde(default)]
    pub equilibrium: EquilibriumBox,
    /// Slack weight; `None` keeps the row hard.
    #[serde(default)]
    pub soft: Option<f64>,
}

impl CirculationSpec {
    pub fn validate(&self, n_u: usize) -> Result<()> {
        self.skew.matrix(n_u)?;
        self.d.validate()?;
        self.equilibrium.validate()
    }
}

/// `cᵀu ≥ d(φ, dist) + cᵀζ` with `c = Φa`, so `cᵀa = 0` exactly.
pub fn circulation_row(spec: &CirculationSpec, a: &DVector<f64>, phi: f64, projection: &EquilibriumProjection) -> Result<ConstraintRow> {
    let n_u = a.len();
    crate::error::check_dim(n_u, projection.zeta.len())?;
    let c = spec.skew.matrix(n_u)? * a;
    let b = spec.d.eval(phi, projection.distance) + c.dot(&projection.zeta);
    let row = ConstraintRow::hard(c, b, RowKind::Circulation);
    match spec.soft {
        Some(w) => row.softened(w),
        None => Ok(row),
    }
}
