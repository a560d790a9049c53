use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{eval_scaling, FrameParams, ScalingJet, ScalingPrimitive};

/// A primitive placed in the world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Body {
    pub shape: ScalingPrimitive,
    pub frame: FrameParams,
}

impl Body {
    pub fn new(shape: ScalingPrimitive, frame: FrameParams) -> Self {
        Self { shape, frame }
    }

    pub fn validate(&self) -> Result<()> {
        self.frame.validate()?;
        if self.shape.dim() != self.frame.dim() {
            return Err(Error::DimensionMismatch { expected: self.frame.dim(), got: self.shape.dim() });
        }
        Ok(())
    }

    pub fn eval(&self, p: &DVector<f64>, order: usize) -> Result<ScalingJet> {
        eval_scaling(&self.shape, &self.frame, p, order)
    }

    /// World-frame minimiser of the scaling function, if it exists.
    pub fn world_interior_point(&self) -> Option<DVector<f64>> {
        self.shape.interior_point().map(|q| self.frame.to_world(&q))
    }

    /// World-frame `(P, μ)` for an ellipsoid.
    pub fn world_ellipsoid(&self) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let e = self.shape.as_ellipsoid()?;
        let r = self.frame.rotation();
        let p = crate::linalg::symmetrize(&(&r * e.shape() * r.transpose()));
        Some((p, self.frame.to_world(e.center())))
    }

    /// World-frame `(a, b)` with `F = aᵀp + b` for a halfspace.
    pub fn world_halfspace(&self) -> Option<(DVector<f64>, f64)> {
        match &self.shape {
            ScalingPrimitive::Halfspace(h) => {
                let a = self.frame.rotation() * h.normal();
                let b = h.offset() - a.dot(&self.frame.origin());
                Some((a, b))
            }
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    EllipsoidEllipsoid,
    EllipsoidHalfspace,
    HalfspaceEllipsoid,
    EllipsoidPolytope,
    PolytopeEllipsoid,
}

/// `A` is the set whose scaling is minimised, `B` the constraint set.
/// Parameters are stacked as `θ = [θ_A; θ_B]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPair", into = "RawPair")]
pub struct PrimitivePair {
    a: Body,
    b: Body,
    kind: PairKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    a: Body,
    b: Body,
}

impl TryFrom<RawPair> for PrimitivePair {
    type Error = Error;
    fn try_from(raw: RawPair) -> Result<Self> {
        PrimitivePair::new(raw.a, raw.b)
    }
}

impl From<PrimitivePair> for RawPair {
    fn from(p: PrimitivePair) -> Self {
        RawPair { a: p.a, b: p.b }
    }
}

impl PrimitivePair {
    pub fn new(a: Body, b: Body) -> Result<Self> {
        a.validate()?;
        b.validate()?;
        if a.frame.dim() != b.frame.dim() {
            return Err(Error::DimensionMismatch { expected: a.frame.dim(), got: b.frame.dim() });
        }
        use ScalingPrimitive as S;
        let kind = match (&a.shape, &b.shape) {
            (S::Ellipsoid(_), S::Ellipsoid(_)) => PairKind::EllipsoidEllipsoid,
            (S::Ellipsoid(_), S::Halfspace(_)) => PairKind::EllipsoidHalfspace,
            (S::Halfspace(_), S::Ellipsoid(_)) => PairKind::HalfspaceEllipsoid,
            (S::Ellipsoid(_), S::Polytope(_)) => PairKind::EllipsoidPolytope,
            (S::Polytope(_), S::Ellipsoid(_)) => PairKind::PolytopeEllipsoid,
            (x, y) => return Err(Error::UnsupportedPair(format!("{}-{}: at least one primitive must be an ellipsoid", x.kind_name(), y.kind_name()))),
        };
        Ok(Self { a, b, kind })
    }

    pub fn a(&self) -> &Body {
        &self.a
    }

    pub fn b(&self) -> &Body {
        &self.b
    }

    pub fn kind(&self) -> PairKind {
        self.kind
    }

    pub fn dim(&self) -> usize {
        self.a.frame.dim()
    }

    pub fn theta_len_a(&self) -> usize {
        self.a.frame.theta_len()
    }

    pub fn theta_len(&self) -> usize {
        self.a.frame.theta_len() + self.b.frame.theta_len()
    }

    pub fn theta(&self) -> DVector<f64> {
        let ta = self.a.frame.theta();
        let tb = self.b.frame.theta();
        DVector::from_iterator(ta.len() + tb.len(), ta.iter().chain(tb.iter()).copied())
    }

    /// Same shapes placed at the stacked parameters `θ`.
    pub fn with_theta(&self, theta: &[f64]) -> Result<Self> {
        crate::error::check_dim(self.theta_len(), theta.len())?;
        let na = self.theta_len_a();
        let mut out = self.clone();
        out.a.frame = FrameParams::from_theta(&theta[..na])?;
        out.b.frame = FrameParams::from_theta(&theta[na..])?;
        Ok(out)
    }

    pub fn with_frames(&self, a: FrameParams, b: FrameParams) -> Result<Self> {
        Self::new(Body::new(self.a.shape.clone(), a), Body::new(self.b.shape.clone(), b))
    }

    pub fn eval_a(&self, p: &DVector<f64>, order: usize) -> Result<ScalingJet> {
        self.a.eval(p, order)
    }

    pub fn eval_b(&self, p: &DVector<f64>, order: usize) -> Result<ScalingJet> {
        self.b.eval(p, order)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ellipsoid, Halfspace, SmoothPolytope};

    #[test]
    fn polytope_pairs_without_ellipsoid_rejected() {
        let poly = ScalingPrimitive::Polytope(SmoothPolytope::axis_box(&[1.0, 1.0], &[0.0, 0.0], 10.0).unwrap());
        let half = ScalingPrimitive::Halfspace(Halfspace::new(DVector::from_vec(vec![1.0, 0.0]), 0.0).unwrap());
        let f = FrameParams::identity(2).unwrap();
        let b = |s: &ScalingPrimitive| Body::new(s.clone(), f.clone());
        assert!(matches!(PrimitivePair::new(b(&poly), b(&poly)), Err(Error::UnsupportedPair(_))));
        assert!(matches!(PrimitivePair::new(b(&poly), b(&half)), Err(Error::UnsupportedPair(_))));
        assert!(matches!(PrimitivePair::new(b(&half), b(&half)), Err(Error::UnsupportedPair(_))));
    }

    #[test]
    fn mixed_dimensions_rejected() {
        let e2 = Body::new(ScalingPrimitive::Ellipsoid(Ellipsoid::ball(1.0, &[0.0, 0.0]).unwrap()), FrameParams::identity(2).unwrap());
        let e3 = Body::new(ScalingPrimitive::Ellipsoid(Ellipsoid::ball(1.0, &[0.0; 3]).unwrap()), FrameParams::identity(3).unwrap());
        assert!(PrimitivePair::new(e2.clone(), e3.clone()).is_err());
        // shape and frame of one body disagree
        let bad = Body::new(e2.shape.clone(), FrameParams::identity(3).unwrap());
        assert!(PrimitivePair::new(bad, e3).is_err());
    }

    #[test]
    fn theta_round_trip_and_json() {
        let a = Body::new(ScalingPrimitive::Ellipsoid(Ellipsoid::ball(1.0, &[0.0; 3]).unwrap()), FrameParams::spatial([1.0, 2.0, 3.0], [0.0, 0.0, 0.0, 1.0]));
        let b = Body::new(ScalingPrimitive::Ellipsoid(Ellipsoid::ball(2.0, &[0.0; 3]).unwrap()), FrameParams::spatial([5.0, 2.0, 3.0], [0.0, 0.6, 0.0, 0.8]));
        let pair = PrimitivePair::new(a, b).unwrap();
        assert_eq!(pair.theta_len(), 14);
        let again = pair.with_theta(pair.theta().as_slice()).unwrap();
        assert_eq!(again, pair);
        let s = serde_json::to_string(&pair).unwrap();
        let back: PrimitivePair = serde_json::from_str(&s).unwrap();
        assert_eq!(back, pair);
    }
}
