use nalgebra::{DMatrix, DVector};

use super::primitive::Ellipsoid;
use crate::error::{Error, Result};

/// Minimum-volume enclosing ellipsoid `{p : ‖D p + d‖₂ ≤ 1}`.
#[derive(Debug, Clone)]
pub struct MveeResult {
    /// `D`, symmetric positive definite.
    pub root: DMatrix<f64>,
    /// `d`.
    pub offset: DVector<f64>,
    /// `P′ = D²`.
    pub shape: DMatrix<f64>,
    /// `μ′ = −D⁻¹d`.
    pub center: DVector<f64>,
    /// `max_i ‖D p_i + d‖₂ − 1`.
    pub max_residual: f64,
    /// Final dual gap `max_i M_i / (n + 1) − 1` of the weighting iteration.
    pub gap: f64,
    pub iterations: usize,
}

impl MveeResult {
    pub fn to_ellipsoid(&self) -> Result<Ellipsoid> {
        Ellipsoid::new(self.shape.clone(), self.center.clone())
    }

    /// `ln det P′`; the volume is proportional to `det(P′)^{-1/2}`.
    pub fn log_det_shape(&self) -> f64 {
        self.shape.clone().cholesky().map(|c| 2.0 * c.l().diagonal().map(f64::ln).sum()).unwrap_or(f64::NEG_INFINITY)
    }
}

/// Khachiyan weighting with away steps on the lifted points `(p_i, 1)`.
/// Stops once the dual gap is below `tol`, then rescales so that every input
/// point lies inside the returned ellipsoid.
pub fn mvee(points: &[DVector<f64>], tol: f64) -> Result<MveeResult> {
    let m = points.len();
    let n = points.first().map(|p| p.len()).ok_or_else(|| Error::Degenerate("empty point set".into()))?;
    if points.iter().any(|p| p.len() != n) {
        return Err(Error::DimensionMismatch { expected: n, got: points.iter().map(|p| p.len()).find(|l| *l != n).unwrap_or(n) });
    }
    if points.iter().any(|p| !p.iter().all(|v| v.is_finite())) {
        return Err(Error::Degenerate("non-finite point".into()));
    }
    if !(tol > 0.0) {
        return Err(Error::Precondition("tolerance must be positive".into()));
    }
    if m < n + 1 {
        return Err(Error::Degenerate(format!("need at least {} points, got {m}", n + 1)));
    }
    let mean = points.iter().fold(DVector::zeros(n), |acc, p| acc + p) / m as f64;
    let centered = DMatrix::from_fn(n, m, |i, j| points[j][i] - mean[i]);
    let sv = centered.clone().singular_values();
    let smax = sv.max();
    if smax == 0.0 || sv.min() <= 1e-10 * smax {
        return Err(Error::Degenerate("points are affinely dependent".into()));
    }

    // Work in centred, scaled coordinates for conditioning.
    let scale = smax / (m as f64).sqrt();
    let lifted = DMatrix::from_fn(n + 1, m, |i, j| if i < n { centered[(i, j)] / scale } else { 1.0 });
    let dim = (n + 1) as f64;
    let mut u = DVector::from_element(m, 1.0 / m as f64);
    let max_iter = 200_000;
    let mut iterations = 0;
    let mut gap = f64::INFINITY;
    while iterations < max_iter {
        let x = &lifted * DMatrix::from_diagonal(&u) * lifted.transpose();
        let chol = x.cholesky().ok_or_else(|| Error::Degenerate("weighted scatter lost rank".into()))?;
        let mvals: Vec<f64> = (0..m)
            .map(|j| {
                let q = lifted.column(j).into_owned();
                q.dot(&chol.solve(&q))
            })
            .collect();
        let (jmax, kplus) = mvals.iter().copied().enumerate().max_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        let (jmin, kminus) = mvals.iter().copied().enumerate().filter(|(j, _)| u[*j] > 0.0).min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
        let eps_plus = kplus / dim - 1.0;
        let eps_minus = 1.0 - kminus / dim;
        gap = eps_plus.max(eps_minus);
        if gap <= tol {
            break;
        }
        iterations += 1;
        if eps_plus >= eps_minus {
            let beta = (kplus - dim) / (dim * (kplus - 1.0));
            u *= 1.0 - beta;
            u[jmax] += beta;
        } else {
            let uk = u[jmin];
            let beta = ((dim - kminus) / (dim * (kminus - 1.0))).min(uk / (1.0 - uk));
            u *= 1.0 + beta;
            u[jmin] -= beta;
            if u[jmin] < 1e-300 {
                u[jmin] = 0.0;
            }
        }
    }
    if gap > tol {
        log::warn!("mvee stopped at gap {gap:.3e} after {iterations} iterations");
    }

    let pts = lifted.rows(0, n).into_owned();
    let c = &pts * &u;
    let scatter = &pts * DMatrix::from_diagonal(&u) * pts.transpose() - &c * c.transpose();
    let a = (scatter * n as f64).try_inverse().ok_or_else(|| Error::Degenerate("singular scatter".into()))?;
    let a = crate::linalg::symmetrize(&a);
    let worst = (0..m)
        .map(|j| {
            let d = pts.column(j) - &c;
            d.dot(&(&a * &d))
        })
        .fold(0.0_f64, f64::max);
    let a = a / worst;

    // Back to original coordinates: p = mean + scale * y.
    let shape = crate::linalg::symmetrize(&(a / (scale * scale)));
    let center = &mean + c * scale;
    let eig = shape.clone().symmetric_eigen();
    let root = &eig.eigenvectors * DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt())) * eig.eigenvectors.transpose();
    let root = crate::linalg::symmetrize(&root);
    let offset = -(&root * &center);
    let max_residual = points.iter().map(|p| (&root * p + &offset).norm() - 1.0).fold(f64::NEG_INFINITY, f64::max);
    Ok(MveeResult { root, offset, shape, center, max_residual, gap, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: f64, y: f64) -> DVector<f64> {
        DVector::from_vec(vec![x, y])
    }

    #[test]
    fn square_gives_circumscribed_circle() {
        let pts = [v(1.0, 1.0), v(-1.0, 1.0), v(-1.0, -1.0), v(1.0, -1.0)];
        let r = mvee(&pts, 1e-12).unwrap();
        assert!((&r.shape - DMatrix::identity(2, 2) * 0.5).amax() < 1e-12);
        assert!(r.center.amax() < 1e-12);
        assert!(r.max_residual <= 1e-12);
    }

    #[test]
    fn cube_gives_sphere() {
        let mut pts = Vec::new();
        for s in 0..8 {
            let c = |b: usize| if s & (1 << b) != 0 { 1.0 } else { -1.0 };
            pts.push(DVector::from_vec(vec![c(0), c(1), c(2)]));
        }
        let r = mvee(&pts, 1e-12).unwrap();
        assert!((&r.shape - DMatrix::identity(3, 3) / 3.0).amax() < 1e-12);
    }

    #[test]
    fn interior_points_do_not_matter() {
        let pts = [v(1.0, 1.0), v(-1.0, 1.0), v(-1.0, -1.0), v(1.0, -1.0), v(0.2, 0.1), v(-0.5, 0.3)];
        let r = mvee(&pts, 1e-12).unwrap();
        assert!((&r.shape - DMatrix::identity(2, 2) * 0.5).amax() < 1e-9);
    }

    #[test]
    fn degenerate_sets_rejected() {
        assert!(matches!(mvee(&[v(1.0, 1.0), v(1.0, 1.0), v(1.0, 1.0)], 1e-9), Err(Error::Degenerate(_))));
        assert!(matches!(mvee(&[v(0.0, 0.0), v(1.0, 1.0), v(2.0, 2.0), v(3.0, 3.0)], 1e-9), Err(Error::Degenerate(_))));
        assert!(mvee(&[v(0.0, 0.0), v(1.0, 0.0)], 1e-9).is_err());
        assert!(mvee(&[], 1e-9).is_err());
    }

    #[test]
    fn root_and_offset_are_consistent() {
        let pts = [v(0.0, 0.0), v(3.0, 0.2), v(0.5, 2.0), v(2.0, 2.5), v(1.0, -1.0)];
        let r = mvee(&pts, 1e-10).unwrap();
        assert!((&r.root * &r.root - &r.shape).amax() < 1e-12);
        assert!((&r.root * &r.center + &r.offset).amax() < 1e-12);
        assert!(r.max_residual.abs() < 1e-12);
    }
}
