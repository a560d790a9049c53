//! HOCBF rows from `α*` sensitivities, smooth-minimum aggregation, the
//! circulation inequality and safety-filter assembly.
//!
//! Every row is affine in the control and written `aᵀu ≥ b`. For a barrier
//! `h = α* − α₀` of relative degree two with linear gains,
//! `ψ₁ = ḣ + γ₁h` and the row encodes `ψ̇₁ + γ₂ψ₁ ≥ 0`.

mod barrier;
mod circulation;
mod filter;
mod limits;
mod row;
mod smooth_min;
mod taskmap;

pub use barrier::{barrier_value, hocbf_row, BarrierTerms};
pub use circulation::{circulation_row, equilibrium_projector, CirculationSpec, DFunction, EquilibriumBox, EquilibriumProjection, SkewRule};
pub use filter::{assemble_filter, FilterSolution, SafetyFilterProblem};
pub use limits::{first_order_row, position_limit_rows, velocity_limit_rows};
pub use row::{ConstraintRow, HocbfGains, RowKind, TOL_ROW};
pub use smooth_min::{smooth_min, smooth_min_hocbf_row, smooth_min_jet, smooth_min_terms, SmoothMin};
pub use taskmap::{TaskJet, TaskMap};

use serde::{Deserialize, Serialize};

/// Per-step barrier state for logs.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BarrierDiagnostics {
    pub h: Vec<f64>,
    pub psi1: Vec<f64>,
    pub phi: f64,
    pub active: Vec<bool>,
    pub equilibrium_distance: f64,
}
