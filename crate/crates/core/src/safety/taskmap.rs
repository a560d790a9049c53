use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::geometry::{quaternion_rate_matrix, FrameParams};

/// Frame parameters of one body and their first two time derivatives along a
/// double-integrator plant, `θ̈ = b_θ + A_θ u`.
#[derive(Debug, Clone, PartialEq)]
pub struct TaskJet {
    pub theta: DVector<f64>,
    pub theta_dot: DVector<f64>,
    pub drift: DVector<f64>,
    pub input: DMatrix<f64>,
}

impl TaskJet {
    pub fn n_theta(&self) -> usize {
        self.theta.len()
    }

    pub fn n_u(&self) -> usize {
        self.input.ncols()
    }

    /// `[θ_A; θ_B]` for a pair driven by the same control.
    pub fn stack(&self, other: &TaskJet) -> Result<TaskJet> {
        check_dim(self.n_u(), other.n_u())?;
        let cat = |a: &DVector<f64>, b: &DVector<f64>| DVector::from_iterator(a.len() + b.len(), a.iter().chain(b.iter()).copied());
        let mut input = DMatrix::zeros(self.n_theta() + other.n_theta(), self.n_u());
        input.view_mut((0, 0), (self.n_theta(), self.n_u())).copy_from(&self.input);
        input.view_mut((self.n_theta(), 0), (other.n_theta(), self.n_u())).copy_from(&other.input);
        Ok(TaskJet { theta: cat(&self.theta, &other.theta), theta_dot: cat(&self.theta_dot, &other.theta_dot), drift: cat(&self.drift, &other.drift), input })
    }

    pub fn frame(&self) -> Result<FrameParams> {
        FrameParams::from_theta(self.theta.as_slice())
    }
}

/// How a body's frame depends on the plant state `(q, v)` with `q̈ = u`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskMap {
    /// Fixed frame; `θ̇ = 0` and the control does not enter.
    Static { frame: FrameParams, n_u: usize },
    /// Planar translation at a fixed angle: `q = (x, y)`, `θ = (x, y, angle)`.
    PlanarPoint { angle: f64 },
    /// Planar rigid body: `q = θ = (x, y, β)`.
    PlanarRigid,
    /// Spatial rigid body: `q = θ = (o, ξ)`, `v = (ȯ, ω)` with world `ω`,
    /// `u = (ö, ω̇)` and `ξ̇ = ½Q(ξ)ω`.
    SpatialRigid,
}

impl TaskMap {
    pub fn n_q(&self) -> usize {
        match self {
            TaskMap::Static { .. } => 0,
            TaskMap::PlanarPoint { .. } => 2,
            TaskMap::PlanarRigid => 3,
            TaskMap::SpatialRigid => 7,
        }
    }

    pub fn n_v(&self) -> usize {
        match self {
            TaskMap::SpatialRigid => 6,
            other => other.n_q(),
        }
    }

    /// Control dimension, or `None` for static maps that accept any.
    pub fn n_u(&self) -> Option<usize> {
        match self {
            TaskMap::Static { n_u, .. } => Some(*n_u),
            other => Some(other.n_v()),
        }
    }

    pub fn jet(&self, q: &DVector<f64>, v: &DVector<f64>) -> Result<TaskJet> {
        match self {
            TaskMap::Static { frame, n_u } => {
                frame.validate()?;
                let nt = frame.theta_len();
                Ok(TaskJet { theta: frame.theta(), theta_dot: DVector::zeros(nt), drift: DVector::zeros(nt), input: DMatrix::zeros(nt, *n_u) })
            }
            TaskMap::PlanarPoint { angle } => {
                check_dim(2, q.len())?;
                check_dim(2, v.len())?;
                let mut j = DMatrix::zeros(3, 2);
                j[(0, 0)] = 1.0;
                j[(1, 1)] = 1.0;
                Ok(TaskJet {
                    theta: DVector::from_vec(vec![q[0], q[1], *angle]),
                    theta_dot: DVector::from_vec(vec![v[0], v[1], 0.0]),
                    drift: DVector::zeros(3),
                    input: j,
                })
            }
            TaskMap::PlanarRigid => {
                check_dim(3, q.len())?;
                check_dim(3, v.len())?;
                Ok(TaskJet { theta: q.clone(), theta_dot: v.clone(), drift: DVector::zeros(3), input: DMatrix::identity(3, 3) })
            }
            TaskMap::SpatialRigid => {
                check_dim(7, q.len())?;
                check_dim(6, v.len())?;
                let xi = [q[3], q[4], q[5], q[6]];
                let omega = v.rows(3, 3).into_owned();
                let qm = quaternion_rate_matrix(&xi) * 0.5;
                let xi_dot = &qm * &omega;
                // Q is linear in ξ, so d/dt(½Q(ξ)ω) = ½Q(ξ̇)ω + ½Q(ξ)ω̇.
                let qdot = quaternion_rate_matrix(&[xi_dot[0], xi_dot[1], xi_dot[2], xi_dot[3]]) * 0.5;
                let mut theta_dot = DVector::zeros(7);
                theta_dot.rows_mut(0, 3).copy_from(&v.rows(0, 3));
                theta_dot.rows_mut(3, 4).copy_from(&xi_dot);
                let mut drift = DVector::zeros(7);
                drift.rows_mut(3, 4).copy_from(&(qdot * &omega));
                let mut input = DMatrix::zeros(7, 6);
                input.view_mut((0, 0), (3, 3)).fill_with_identity();
                input.view_mut((3, 3), (4, 3)).copy_from(&qm);
                Ok(TaskJet { theta: q.clone(), theta_dot, drift, input })
            }
        }
    }

    /// Configuration velocity to `q̇`; the identity except for quaternions.
    pub fn q_dot(&self, q: &DVector<f64>, v: &DVector<f64>) -> Result<DVector<f64>> {
        match self {
            TaskMap::SpatialRigid => Ok(self.jet(q, v)?.theta_dot),
            TaskMap::Static { .. } => Err(Error::Config("static task maps carry no state".into())),
            _ => Ok(v.clone()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_map_pads_identity() {
        let m = TaskMap::PlanarPoint { angle: 0.3 };
        let j = m.jet(&DVector::from_vec(vec![1.0, 2.0]), &DVector::from_vec(vec![0.5, -1.0])).unwrap();
        assert_eq!(j.theta.as_slice(), &[1.0, 2.0, 0.3]);
        assert_eq!(j.theta_dot.as_slice(), &[0.5, -1.0, 0.0]);
        assert_eq!(j.drift, DVector::zeros(3));
        assert_eq!(j.input.rows(0, 2), DMatrix::identity(2, 2));
        assert_eq!(j.input.row(2).amax(), 0.0);
    }

    #[test]
    fn spatial_drift_matches_differentiated_rates() {
        let q = DVector::from_vec(vec![0.1, 0.2, 0.3, 0.2, -0.4, 0.1, (1.0_f64 - 0.21).sqrt()]);
        let v = DVector::from_vec(vec![0.3, -0.1, 0.2, 0.7, -0.5, 0.9]);
        let u = DVector::from_vec(vec![0.1, 0.0, -0.2, 0.4, 0.3, -0.6]);
        let m = TaskMap::SpatialRigid;
        let j = m.jet(&q, &v).unwrap();
        let acc = &j.drift + &j.input * &u;
        let h = 1e-6;
        let step = |s: f64| {
            let qs = &q + &j.theta_dot * s;
            let vs = &v + &u * s;
            m.jet(&qs, &vs).unwrap().theta_dot
        };
        let fd = (step(h) - step(-h)) / (2.0 * h);
        assert!((fd - acc).amax() < 1e-8);
    }

    #[test]
    fn stacking_keeps_blocks() {
        let robot = TaskMap::PlanarPoint { angle: 0.0 }.jet(&DVector::from_vec(vec![0.0, 1.0]), &DVector::from_vec(vec![1.0, 0.0])).unwrap();
        let obstacle = TaskMap::Static { frame: FrameParams::planar(3.0, 0.0, 0.5), n_u: 2 }.jet(&DVector::zeros(0), &DVector::zeros(0)).unwrap();
        let s = robot.stack(&obstacle).unwrap();
        assert_eq!(s.n_theta(), 6);
        assert_eq!(s.theta.as_slice(), &[0.0, 1.0, 0.0, 3.0, 0.0, 0.5]);
        assert_eq!(s.input.rows(3, 3).amax(), 0.0);
    }
}
