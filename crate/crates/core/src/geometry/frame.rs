use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Allowed deviation of `‖ξ‖` from one before a warning is logged.
pub const QUATERNION_NORM_TOL: f64 = 1e-6;

/// Pose of a body frame in the world.
///
/// Quaternions are `(x, y, z, w)`; the identity is `[0, 0, 0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FrameParams {
    Planar { origin: [f64; 2], angle: f64 },
    Spatial { origin: [f64; 3], quaternion: [f64; 4] },
}

/// Rotation matrix and its derivatives with respect to the orientation
/// parameters (one angle in the plane, four quaternion components in space).
#[derive(Debug, Clone)]
pub struct RotationJet {
    pub r: DMatrix<f64>,
    /// `d1[k] = ∂R/∂r_k`.
    pub d1: Vec<DMatrix<f64>>,
    /// `d2[k][l] = ∂²R/∂r_k∂r_l`.
    pub d2: Vec<Vec<DMatrix<f64>>>,
    /// `d3[k][l][m]`; identically zero for quaternions.
    pub d3: Vec<Vec<Vec<DMatrix<f64>>>>,
}

impl FrameParams {
    pub fn planar(x: f64, y: f64, angle: f64) -> Self {
        FrameParams::Planar { origin: [x, y], angle }
    }

    pub fn spatial(origin: [f64; 3], quaternion: [f64; 4]) -> Self {
        FrameParams::Spatial { origin, quaternion }
    }

    pub fn identity(dim: usize) -> Result<Self> {
        match dim {
            2 => Ok(Self::planar(0.0, 0.0, 0.0)),
            3 => Ok(Self::spatial([0.0; 3], [0.0, 0.0, 0.0, 1.0])),
            d => Err(Error::InvalidFrame(format!("dimension must be 2 or 3, got {d}"))),
        }
    }

    /// Pure translation with identity orientation.
    pub fn translation(origin: &[f64]) -> Result<Self> {
        match origin.len() {
            2 => Ok(Self::planar(origin[0], origin[1], 0.0)),
            3 => Ok(Self::spatial([origin[0], origin[1], origin[2]], [0.0, 0.0, 0.0, 1.0])),
            d => Err(Error::InvalidFrame(format!("dimension must be 2 or 3, got {d}"))),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            FrameParams::Planar { .. } => 2,
            FrameParams::Spatial { .. } => 3,
        }
    }

    /// Length of the flattened parameter vector: 3 or 7.
    pub fn theta_len(&self) -> usize {
        match self {
            FrameParams::Planar { .. } => 3,
            FrameParams::Spatial { .. } => 7,
        }
    }

    /// Number of orientation parameters: 1 or 4.
    pub fn orientation_len(&self) -> usize {
        self.theta_len() - self.dim()
    }

    pub fn origin(&self) -> DVector<f64> {
        match self {
            FrameParams::Planar { origin, .. } => DVector::from_column_slice(origin),
            FrameParams::Spatial { origin, .. } => DVector::from_column_slice(origin),
        }
    }

    pub fn theta(&self) -> DVector<f64> {
        match self {
            FrameParams::Planar { origin, angle } => DVector::from_vec(vec![origin[0], origin[1], *angle]),
            FrameParams::Spatial { origin, quaternion: q } => DVector::from_vec(vec![origin[0], origin[1], origin[2], q[0], q[1], q[2], q[3]]),
        }
    }

    /// Inverse of [`FrameParams::theta`]; the dimension follows from the length.
    pub fn from_theta(theta: &[f64]) -> Result<Self> {
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidFrame("non-finite parameter".into()));
        }
        match theta.len() {
            3 => Ok(Self::planar(theta[0], theta[1], theta[2])),
            7 => Ok(Self::spatial([theta[0], theta[1], theta[2]], [theta[3], theta[4], theta[5], theta[6]])),
            n => Err(Error::InvalidFrame(format!("flattened length must be 3 or 7, got {n}"))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let theta = self.theta();
        if !theta.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidFrame("non-finite parameter".into()));
        }
        if let FrameParams::Spatial { quaternion, .. } = self {
            let n = quaternion.iter().map(|v| v * v).sum::<f64>().sqrt();
            if n < 1e-9 {
                return Err(Error::InvalidFrame("zero quaternion".into()));
            }
        }
        Ok(())
    }

    /// `|‖ξ‖ − 1|` for spatial frames, zero in the plane.
    pub fn quaternion_norm_error(&self) -> f64 {
        match self {
            FrameParams::Planar { .. } => 0.0,
            FrameParams::Spatial { quaternion, .. } => (quaternion.iter().map(|v| v * v).sum::<f64>().sqrt() - 1.0).abs(),
        }
    }

    pub(crate) fn warn_on_quaternion_drift(&self) {
        let err = self.quaternion_norm_error();
        if err > QUATERNION_NORM_TOL {
            log::warn!("quaternion norm deviates from one by {err:.3e}; derivatives stay ambient");
        }
    }

    pub fn rotation(&self) -> DMatrix<f64> {
        match self {
            FrameParams::Planar { angle, .. } => {
                let (s, c) = angle.sin_cos();
                DMatrix::from_row_slice(2, 2, &[c, -s, s, c])
            }
            FrameParams::Spatial { quaternion, .. } => {
                let mut r = quat_bilinear(quaternion, quaternion);
                for i in 0..3 {
                    r[(i, i)] += 1.0;
                }
                r
            }
        }
    }

    pub fn rotation_jet(&self) -> RotationJet {
        match self {
            FrameParams::Planar { angle, .. } => {
                let (s, c) = angle.sin_cos();
                let r = DMatrix::from_row_slice(2, 2, &[c, -s, s, c]);
                let dr = DMatrix::from_row_slice(2, 2, &[-s, -c, c, -s]);
                RotationJet { d1: vec![dr.clone()], d2: vec![vec![-&r]], d3: vec![vec![vec![-&dr]]], r }
            }
            FrameParams::Spatial { quaternion, .. } => {
                // R(ξ) = I + B(ξ, ξ) with B symmetric bilinear, so
                // ∂R/∂ξ_k = 2B(e_k, ξ), ∂²R/∂ξ_k∂ξ_l = 2B(e_k, e_l), ∂³R = 0.
                let e = |k: usize| {
                    let mut v = [0.0; 4];
                    v[k] = 1.0;
                    v
                };
                let r = self.rotation();
                let d1 = (0..4).map(|k| quat_bilinear(&e(k), quaternion) * 2.0).collect();
                let d2 = (0..4).map(|k| (0..4).map(|l| quat_bilinear(&e(k), &e(l)) * 2.0).collect()).collect();
                let zero = DMatrix::zeros(3, 3);
                let d3 = vec![vec![vec![zero; 4]; 4]; 4];
                RotationJet { r, d1, d2, d3 }
            }
        }
    }

    /// Body coordinates `Rᵀ(p − o)` of a world point.
    pub fn to_body(&self, p: &DVector<f64>) -> DVector<f64> {
        self.rotation().transpose() * (p - self.origin())
    }

    /// World coordinates `o + R q` of a body point.
    pub fn to_world(&self, q: &DVector<f64>) -> DVector<f64> {
        self.origin() + self.rotation() * q
    }

    /// The frame obtained by applying the rigid motion `outer` after `self`:
    /// `o' = R_outer o + o_outer`, `R' = R_outer R`.
    pub fn composed_with(&self, outer: &FrameParams) -> Result<FrameParams> {
        match (self, outer) {
            (FrameParams::Planar { origin, angle }, FrameParams::Planar { origin: oo, angle: ao }) => {
                let (s, c) = ao.sin_cos();
                Ok(Self::planar(c * origin[0] - s * origin[1] + oo[0], s * origin[0] + c * origin[1] + oo[1], angle + ao))
            }
            (FrameParams::Spatial { origin, quaternion }, FrameParams::Spatial { origin: oo, quaternion: qo }) => {
                let ro = outer.rotation();
                let o = &ro * DVector::from_column_slice(origin) + DVector::from_column_slice(oo);
                Ok(Self::spatial([o[0], o[1], o[2]], quat_mul(qo, quaternion)))
            }
            _ => Err(Error::InvalidFrame("cannot compose planar and spatial frames".into())),
        }
    }
}

/// Hamilton product in `(x, y, z, w)` storage.
pub(crate) fn quat_mul(a: &[f64; 4], b: &[f64; 4]) -> [f64; 4] {
    let [ax, ay, az, aw] = *a;
    let [bx, by, bz, bw] = *b;
    [aw * bx + ax * bw + ay * bz - az * by, aw * by - ax * bz + ay * bw + az * bx, aw * bz + ax * by - ay * bx + az * bw, aw * bw - ax * bx - ay * by - az * bz]
}

/// Symmetric bilinear form with `R(ξ) = I + B(ξ, ξ)`.
fn quat_bilinear(u: &[f64; 4], v: &[f64; 4]) -> DMatrix<f64> {
    const X: usize = 0;
    const Y: usize = 1;
    const Z: usize = 2;
    const W: usize = 3;
    let s = |a: usize, b: usize| u[a] * v[b] + u[b] * v[a];
    DMatrix::from_row_slice(
        3,
        3,
        &[
            -s(Y, Y) - s(Z, Z),
            s(X, Y) - s(Z, W),
            s(X, Z) + s(Y, W),
            s(X, Y) + s(Z, W),
            -s(X, X) - s(Z, Z),
            s(Y, Z) - s(X, W),
            s(X, Z) - s(Y, W),
            s(Y, Z) + s(X, W),
            -s(X, X) - s(Y, Y),
        ],
    )
}

/// The 4×3 matrix with `ξ̇ = ½ Q(ξ) ω` for a world-frame angular velocity.
pub fn quaternion_rate_matrix(q: &[f64; 4]) -> DMatrix<f64> {
    let [x, y, z, w] = *q;
    DMatrix::from_row_slice(4, 3, &[w, z, -y, -z, w, x, y, -x, w, -x, -y, -z])
}

/// `θ̇` for a body moving with linear velocity `v` and angular velocity `ω`
/// (a scalar in the plane, a world-frame 3-vector in space).
pub fn theta_rates(frame: &FrameParams, v: &[f64], omega: &[f64]) -> Result<DVector<f64>> {
    crate::error::check_dim(frame.dim(), v.len())?;
    match frame {
        FrameParams::Planar { .. } => {
            crate::error::check_dim(1, omega.len())?;
            Ok(DVector::from_vec(vec![v[0], v[1], omega[0]]))
        }
        FrameParams::Spatial { quaternion, .. } => {
            crate::error::check_dim(3, omega.len())?;
            frame.warn_on_quaternion_drift();
            let xi_dot = quaternion_rate_matrix(quaternion) * DVector::from_column_slice(omega) * 0.5;
            let mut out = DVector::zeros(7);
            out.rows_mut(0, 3).copy_from_slice(v);
            out.rows_mut(3, 4).copy_from(&xi_dot);
            Ok(out)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_unit_quat(rng: &mut impl Rng) -> [f64; 4] {
        let v: [f64; 4] = std::array::from_fn(|_| rng.gen_range(-1.0..1.0));
        let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        v.map(|x| x / n)
    }

    #[test]
    fn flattened_lengths() {
        assert_eq!(FrameParams::identity(2).unwrap().theta().len(), 3);
        assert_eq!(FrameParams::identity(3).unwrap().theta().len(), 7);
        assert!(FrameParams::identity(4).is_err());
        let f = FrameParams::spatial([1.0, 2.0, 3.0], [0.1, 0.2, 0.3, 0.9]);
        assert_eq!(FrameParams::from_theta(f.theta().as_slice()).unwrap(), f);
    }

    #[test]
    fn planar_rates() {
        let f = FrameParams::planar(0.0, 0.0, 0.3);
        let r = theta_rates(&f, &[1.0, 2.0], &[0.5]).unwrap();
        assert_eq!(r.as_slice(), &[1.0, 2.0, 0.5]);
    }

    #[test]
    fn identity_quaternion_rate() {
        let f = FrameParams::identity(3).unwrap();
        let r = theta_rates(&f, &[0.0; 3], &[0.0, 0.0, 1.0]).unwrap();
        assert_eq!(r.rows(3, 4).as_slice(), &[0.0, 0.0, 0.5, 0.0]);
    }

    #[test]
    fn unit_quaternion_rate_is_tangent() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let q = random_unit_quat(&mut rng);
            let w: [f64; 3] = std::array::from_fn(|_| rng.gen_range(-3.0..3.0));
            let f = FrameParams::spatial([0.0; 3], q);
            let r = theta_rates(&f, &[0.0; 3], &w).unwrap();
            let dot: f64 = (0..4).map(|i| q[i] * r[3 + i]).sum();
            assert!((2.0 * dot).abs() < 1e-12);
        }
    }

    #[test]
    fn rotation_is_proper_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..100 {
            let f = FrameParams::spatial([0.0; 3], random_unit_quat(&mut rng));
            let r = f.rotation();
            assert!((r.transpose() * &r - DMatrix::identity(3, 3)).amax() < 1e-14);
            assert!((r.determinant() - 1.0).abs() < 1e-14);
            let p = FrameParams::planar(0.0, 0.0, rng.gen_range(-4.0..4.0)).rotation();
            assert!((p.determinant() - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn quaternion_matches_axis_angle() {
        let a = 0.7_f64;
        let f = FrameParams::spatial([0.0; 3], [0.0, 0.0, (a / 2.0).sin(), (a / 2.0).cos()]);
        let r = f.rotation();
        let want = FrameParams::planar(0.0, 0.0, a).rotation();
        assert!((r.view((0, 0), (2, 2)) - want).amax() < 1e-14);
        assert!((r[(2, 2)] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rotation_derivatives_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-6;
        for _ in 0..20 {
            let frames = [
                FrameParams::planar(0.0, 0.0, rng.gen_range(-3.0..3.0)),
                // off the unit sphere on purpose: derivatives are ambient
                FrameParams::spatial([0.0; 3], std::array::from_fn(|_| rng.gen_range(-1.0..1.0))),
            ];
            for f in frames {
                let jet = f.rotation_jet();
                let theta = f.theta();
                let n = f.dim();
                for k in 0..f.orientation_len() {
                    let mut tp = theta.clone();
                    let mut tm = theta.clone();
                    tp[n + k] += h;
                    tm[n + k] -= h;
                    let fp = FrameParams::from_theta(tp.as_slice()).unwrap().rotation_jet();
                    let fm = FrameParams::from_theta(tm.as_slice()).unwrap().rotation_jet();
                    let fd1 = (&fp.r - &fm.r) / (2.0 * h);
                    assert!((fd1 - &jet.d1[k]).amax() < 1e-8);
                    for l in 0..f.orientation_len() {
                        let fd2 = (&fp.d1[l] - &fm.d1[l]) / (2.0 * h);
                        assert!((fd2 - &jet.d2[k][l]).amax() < 1e-8);
                        for m in 0..f.orientation_len() {
                            let fd3 = (&fp.d2[l][m] - &fm.d2[l][m]) / (2.0 * h);
                            assert!((fd3 - &jet.d3[k][l][m]).amax() < 1e-8);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn composition_matches_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for _ in 0..50 {
            let a = FrameParams::spatial([1.0, -2.0, 0.5], random_unit_quat(&mut rng));
            let b = FrameParams::spatial([0.3, 0.1, -1.0], random_unit_quat(&mut rng));
            let c = a.composed_with(&b).unwrap();
            assert!((c.rotation() - b.rotation() * a.rotation()).amax() < 1e-13);
            let q = DVector::from_vec(vec![0.2, -0.4, 1.1]);
            assert!((c.to_world(&q) - b.to_world(&a.to_world(&q))).amax() < 1e-13);
        }
    }

    #[test]
    fn json_round_trip() {
        let f = FrameParams::spatial([1.0, 2.0, 3.0], [0.0, 0.0, 0.0, 1.0]);
        let s = serde_json::to_string(&f).unwrap();
        assert!(s.contains("\"kind\":\"spatial\""));
        let back: FrameParams = serde_json::from_str(&s).unwrap();
        assert_eq!(back, f);
    }
}
