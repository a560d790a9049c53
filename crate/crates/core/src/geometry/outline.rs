use nalgebra::DVector;

use super::frame::FrameParams;
use super::jet::eval_scaling;
use super::primitive::ScalingPrimitive;
use crate::error::{Error, Result};

/// Points of the planar level set `F(p, θ) = 1`.
///
/// Bounded primitives are sampled along `n` equally spaced rays from their
/// interior point; each crossing is bracketed, bisected and polished by a
/// Newton step along the ray, so `|F − 1|` is at round-off level. A halfspace
/// boundary is a line; it is sampled at `n` points over `half_length` either
/// side of the foot of `centre` on it.
pub fn level_set_outline(prim: &ScalingPrimitive, frame: &FrameParams, n: usize, centre: &[f64; 2], half_length: f64) -> Result<Vec<[f64; 2]>> {
    if frame.dim() != 2 || prim.dim() != 2 {
        return Err(Error::Config("outlines are planar only".into()));
    }
    if n < 2 {
        return Err(Error::Config(format!("need at least 2 outline points, got {n}")));
    }
    let f = |p: &DVector<f64>| eval_scaling(prim, frame, p, 0).map(|j| j.value);
    let Some(local) = prim.interior_point() else {
        // F is affine: step from the centre to F = 1 along the gradient.
        let c = DVector::from_column_slice(centre);
        let jet = eval_scaling(prim, frame, &c, 1)?;
        let g = jet.grad_p();
        let foot = &c + g * ((1.0 - jet.value) / g.norm_squared());
        let t = DVector::from_vec(vec![-g[1], g[0]]) / g.norm();
        return Ok((0..n)
            .map(|k| {
                let s = -half_length + 2.0 * half_length * k as f64 / (n - 1) as f64;
                let p = &foot + &t * s;
                [p[0], p[1]]
            })
            .collect());
    };
    let c = frame.to_world(&local);
    let mut out = Vec::with_capacity(n);
    for k in 0..n {
        let ang = std::f64::consts::TAU * k as f64 / n as f64;
        let dir = DVector::from_vec(vec![ang.cos(), ang.sin()]);
        let at = |s: f64| &c + &dir * s;
        let (mut lo, mut hi) = (0.0, 1.0);
        while f(&at(hi))? < 1.0 {
            lo = hi;
            hi *= 2.0;
            if hi > 1e12 {
                return Err(Error::Degenerate("level set is unbounded along a ray".into()));
            }
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(&at(mid))? < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
            if hi - lo <= 1e-15 * hi {
                break;
            }
        }
        let mut s = 0.5 * (lo + hi);
        for _ in 0..3 {
            let jet = eval_scaling(prim, frame, &at(s), 1)?;
            let slope = jet.grad_p().dot(&dir);
            if slope <= 0.0 {
                break;
            }
            let next = s - (jet.value - 1.0) / slope;
            if !(lo..=hi).contains(&next) {
                break;
            }
            s = next;
        }
        let p = at(s);
        out.push([p[0], p[1]]);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{Ellipsoid, Halfspace, SmoothPolytope};

    #[test]
    fn ellipse_outline_lies_on_the_ellipse() {
        let prim = ScalingPrimitive::Ellipsoid(Ellipsoid::axis_aligned(&[2.0, 1.5], &[0.0, 0.0]).unwrap());
        let frame = FrameParams::planar(0.0, -0.8, 0.0);
        let pts = level_set_outline(&prim, &frame, 256, &[0.0, 0.0], 5.0).unwrap();
        assert_eq!(pts.len(), 256);
        for [x, y] in pts {
            assert!(((x / 2.0).powi(2) + ((y + 0.8) / 1.5).powi(2) - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rounded_square_outline_is_on_level_set() {
        let prim = ScalingPrimitive::Polytope(SmoothPolytope::axis_box(&[1.0, 1.0], &[0.0, 0.0], 10.0).unwrap());
        let frame = FrameParams::planar(0.5, 0.2, 0.3);
        for [x, y] in level_set_outline(&prim, &frame, 256, &[0.0, 0.0], 5.0).unwrap() {
            let v = eval_scaling(&prim, &frame, &DVector::from_vec(vec![x, y]), 0).unwrap().value;
            assert!((v - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn halfspace_outline_is_a_segment_on_the_line() {
        let prim = ScalingPrimitive::Halfspace(Halfspace::new(DVector::from_vec(vec![-1.0, 0.0]), 5.0).unwrap());
        let frame = FrameParams::identity(2).unwrap();
        let pts = level_set_outline(&prim, &frame, 16, &[1.0, 2.0], 3.0).unwrap();
        for [x, _] in &pts {
            assert!((x - 4.0).abs() < 1e-12);
        }
        assert!((pts[0][1] - pts[15][1]).abs() > 5.9);
    }
}
