//! Random separated primitive pairs for verification sweeps.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{solve_min_scaling, Body, PrimitivePair};
use crate::error::{Error, Result};
use crate::geometry::{Ellipsoid, FrameParams, Halfspace, ScalingPrimitive, SmoothPolytope};

/// Shape of the constraint set `B`; `A` is always an ellipsoid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleKind {
    EllipsoidEllipsoid,
    EllipsoidHalfspace,
    EllipsoidPolytope,
}

impl SampleKind {
    pub const ALL: [SampleKind; 3] = [SampleKind::EllipsoidEllipsoid, SampleKind::EllipsoidHalfspace, SampleKind::EllipsoidPolytope];
}

/// Range of `α*` accepted for a sample; keeps the sweeps away from contact
/// and from numerically flat far-field configurations.
pub const ALPHA_RANGE: (f64, f64) = (1.2, 40.0);

pub fn random_unit(rng: &mut impl Rng, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let n = v.norm();
        if n > 0.1 && n <= 1.0 {
            return v / n;
        }
    }
}

pub fn random_frame(rng: &mut impl Rng, dim: usize, origin: &DVector<f64>) -> FrameParams {
    if dim == 2 {
        FrameParams::planar(origin[0], origin[1], rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI))
    } else {
        let q = random_unit(rng, 4);
        FrameParams::spatial([origin[0], origin[1], origin[2]], [q[0], q[1], q[2], q[3]])
    }
}

pub fn random_ellipsoid(rng: &mut impl Rng, dim: usize) -> Ellipsoid {
    let axes: Vec<f64> = (0..dim).map(|_| rng.gen_range(0.3..1.5)).collect();
    let center: Vec<f64> = (0..dim).map(|_| rng.gen_range(-0.2..0.2)).collect();
    Ellipsoid::axis_aligned(&axes, &center).expect("positive axes")
}

pub fn random_polytope(rng: &mut impl Rng, dim: usize) -> SmoothPolytope {
    loop {
        let faces = rng.gen_range(dim + 2..=8);
        let normals = DMatrix::from_fn(faces, dim, |_, _| 0.0);
        let mut normals = normals;
        for i in 0..faces {
            let a = random_unit(rng, dim);
            normals.row_mut(i).copy_from(&a.transpose());
        }
        let offsets = DVector::from_fn(faces, |_, _| -rng.gen_range(0.5..1.2));
        let kappa = rng.gen_range(5.0..30.0);
        if let Ok(p) = SmoothPolytope::new(normals, offsets, kappa) {
            return p;
        }
    }
}

/// A random pair of the given kind with `α*` inside [`ALPHA_RANGE`].
pub fn random_pair(rng: &mut impl Rng, kind: SampleKind, dim: usize) -> Result<PrimitivePair> {
    if dim != 2 && dim != 3 {
        return Err(Error::Config(format!("dimension must be 2 or 3, got {dim}")));
    }
    for _ in 0..1000 {
        let oa = DVector::from_fn(dim, |_, _| rng.gen_range(-1.0..1.0));
        let a = Body::new(ScalingPrimitive::Ellipsoid(random_ellipsoid(rng, dim)), random_frame(rng, dim, &oa));
        let dir = random_unit(rng, dim);
        let b = match kind {
            SampleKind::EllipsoidEllipsoid => {
                let ob = &oa + &dir * rng.gen_range(2.0..5.0);
                Body::new(ScalingPrimitive::Ellipsoid(random_ellipsoid(rng, dim)), random_frame(rng, dim, &ob))
            }
            SampleKind::EllipsoidPolytope => {
                let ob = &oa + &dir * rng.gen_range(2.2..5.0);
                Body::new(ScalingPrimitive::Polytope(random_polytope(rng, dim)), random_frame(rng, dim, &ob))
            }
            SampleKind::EllipsoidHalfspace => {
                let normal = random_unit(rng, dim);
                let offset = rng.gen_range(-0.5..0.5);
                let frame = random_frame(rng, dim, &DVector::zeros(dim));
                // Shift the frame so that A's centre sits at F_B = 1 + gap.
                let world_a = frame.rotation() * &normal;
                let ca = a.world_interior_point().expect("ellipsoid");
                let gap = rng.gen_range(0.8..4.0);
                let shift = (world_a.dot(&ca) + offset - 1.0 - gap) / world_a.norm_squared();
                let origin = &world_a * shift;
                let frame = match frame {
                    FrameParams::Planar { angle, .. } => FrameParams::planar(origin[0], origin[1], angle),
                    FrameParams::Spatial { quaternion, .. } => FrameParams::spatial([origin[0], origin[1], origin[2]], quaternion),
                };
                Body::new(ScalingPrimitive::Halfspace(Halfspace::new(normal, offset).expect("unit normal")), frame)
            }
        };
        let pair = PrimitivePair::new(a, b)?;
        match solve_min_scaling(&pair) {
            Ok(s) if s.alpha >= ALPHA_RANGE.0 && s.alpha <= ALPHA_RANGE.1 && !s.overlap => return Ok(pair),
            _ => continue,
        }
    }
    Err(Error::Degenerate("could not sample a separated pair".into()))
}
