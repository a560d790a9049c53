//! Collision avoidance among convex primitives with high-order control
//! barrier functions.
//!
//! The crate is organised bottom-up:
//!
//! - [`geometry`]: body-frame scaling functions (halfspace, smooth polytope,
//!   ellipsoid), rigid-frame parameterisation and world-frame jets up to third
//!   order, plus minimum-volume enclosing ellipsoids.
//! - [`sensitivity`]: the minimal scaling factor `α*` of a primitive pair and
//!   its first and second derivatives with respect to the frame parameters.
//! - [`safety`]: HOCBF constraint rows, smooth-minimum aggregation, the
//!   circulation inequality and safety-filter assembly.
//! - [`qp`]: a small dense active-set QP solver.
//! - [`sim`]: closed-loop double-integrator rollouts and built-in scenarios.
//! - [`cli`]: the `run`, `check` and `plotdata` commands.
//!
//! Quaternions are stored in `(x, y, z, w)` order everywhere.

// `!(x > 0.0)` style guards intentionally reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Dense numeric kernels index matrices by row and column.
#![allow(clippy::needless_range_loop)]

pub mod cli;
pub mod error;
pub mod geometry;
pub mod linalg;
pub mod qp;
pub mod safety;
pub mod sensitivity;
pub mod sim;

pub use error::{Error, Result};
