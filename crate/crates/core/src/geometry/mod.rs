//! Scaling-function geometry.
//!
//! A primitive `A` is described in its body frame by a convex function `ᵇF`
//! with `A = {q : ᵇF(q) ≤ 1}`. Placing the body at frame parameters `θ` gives
//! the world-frame function `F(p, θ) = ᵇF(Rᵀ(p − o))`.
//!
//! Frame parameters are flattened as `θ = [o; β]` in the plane and
//! `θ = [o; x, y, z, w]` in space. Derivatives with respect to the quaternion
//! are taken in the ambient four-dimensional space; no unit-norm projection is
//! applied.

mod frame;
mod jet;
mod mvee;
mod outline;
mod primitive;

pub use frame::{quaternion_rate_matrix, theta_rates, FrameParams, RotationJet, QUATERNION_NORM_TOL};
pub use jet::{eval_scaling, gradient_nonzero_outside, ScalingJet, TOL_GRAD};
pub use mvee::{mvee, MveeResult};
pub use outline::level_set_outline;
pub use primitive::{BodyJet, Ellipsoid, Halfspace, ScalingPrimitive, SmoothPolytope, MAX_KAPPA};

/// Flattened frame parameters.
pub fn flatten_theta(frame: &FrameParams) -> nalgebra::DVector<f64> {
    frame.theta()
}
