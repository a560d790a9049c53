//! Small dense strictly convex QPs
//!
//! ```text
//! min ½ uᵀHu + fᵀu   s.t.  Gu ≥ g,  lo ≤ u ≤ hi
//! ```
//!
//! solved by the dual active-set method of Goldfarb and Idnani: start from the
//! unconstrained minimiser and add the most violated constraint until none is
//! violated, dropping constraints whose multiplier would turn negative. Every
//! iterate is dual feasible, so no phase-one problem is needed and an
//! infeasible problem is detected with a Farkas certificate.
//!
//! Constraint indices in [`QpSolution`] run over the general rows first, then
//! the lower bounds, then the upper bounds (`m + i`, `m + n + i`). Infinite
//! bounds are never active.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};

/// Certification threshold on primal, stationarity and complementarity residuals.
pub const TOL_CERT: f64 = 1e-8;
pub const MAX_VARS: usize = 32;
pub const MAX_ROWS: usize = 64;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QpProblem {
    pub h: DMatrix<f64>,
    pub f: DVector<f64>,
    /// One constraint per row, `G[i]·u ≥ g[i]`.
    pub g_rows: DMatrix<f64>,
    pub g: DVector<f64>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QpStatus {
    Optimal,
    Infeasible,
    IterationLimit,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct QpSolution {
    pub u: DVector<f64>,
    pub status: QpStatus,
    /// Active constraint indices in ascending order.
    pub active: Vec<usize>,
    /// Multipliers for rows, lower bounds and upper bounds (length `m + 2n`).
    pub duals: DVector<f64>,
    pub primal_residual: f64,
    pub stationarity: f64,
    pub complementarity: f64,
    /// `‖Σ y_j n_j‖∞ / ‖y‖∞` of the infeasibility certificate `y ≥ 0`.
    pub farkas_residual: Option<f64>,
    pub iterations: usize,
    pub objective: f64,
}

impl QpSolution {
    pub fn is_optimal(&self) -> bool {
        self.status == QpStatus::Optimal
    }

    pub fn max_residual(&self) -> f64 {
        self.primal_residual.max(self.stationarity).max(self.complementarity)
    }
}

impl QpProblem {
    /// `min ½‖u‖² − u_nᵀu`, i.e. the projection of `u_n`.
    pub fn projection(nominal: &DVector<f64>) -> Self {
        let n = nominal.len();
        QpProblem {
            h: DMatrix::identity(n, n),
            f: -nominal,
            g_rows: DMatrix::zeros(0, n),
            g: DVector::zeros(0),
            lower: DVector::from_element(n, f64::NEG_INFINITY),
            upper: DVector::from_element(n, f64::INFINITY),
        }
    }

    pub fn dim(&self) -> usize {
        self.f.len()
    }

    pub fn rows(&self) -> usize {
        self.g.len()
    }

    pub fn with_row(mut self, a: &DVector<f64>, b: f64) -> Self {
        let m = self.rows();
        self.g_rows = self.g_rows.insert_row(m, 0.0);
        self.g_rows.row_mut(m).copy_from(&a.transpose());
        self.g = self.g.push(b);
        self
    }

    pub fn with_box(mut self, lower: DVector<f64>, upper: DVector<f64>) -> Self {
        self.lower = lower;
        self.upper = upper;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.dim();
        check_dim(n, self.h.nrows())?;
        check_dim(n, self.h.ncols())?;
        check_dim(n, self.g_rows.ncols())?;
        check_dim(self.g_rows.nrows(), self.g.len())?;
        check_dim(n, self.lower.len())?;
        check_dim(n, self.upper.len())?;
        if n == 0 || n > MAX_VARS {
            return Err(Error::Precondition(format!("QP dimension {n} outside 1..={MAX_VARS}")));
        }
        if self.rows() > MAX_ROWS {
            return Err(Error::Precondition(format!("{} rows exceed {MAX_ROWS}", self.rows())));
        }
        if crate::linalg::asymmetry(&self.h) > 1e-12 * crate::linalg::max_abs(&self.h).max(1.0) {
            return Err(Error::Precondition("H is not symmetric".into()));
        }
        let finite = self.h.iter().chain(self.f.iter()).chain(self.g_rows.iter()).chain(self.g.iter()).all(|v| v.is_finite());
        if !finite || self.lower.iter().chain(self.upper.iter()).any(|v| v.is_nan()) {
            return Err(Error::Precondition("non-finite QP data".into()));
        }
        if self.lower.iter().zip(self.upper.iter()).any(|(l, u)| l > u) {
            return Err(Error::Precondition("empty box".into()));
        }
        Ok(())
    }

    pub fn objective(&self, u: &DVector<f64>) -> f64 {
        0.5 * u.dot(&(&self.h * u)) + self.f.dot(u)
    }

    /// Normal and offset of constraint `j` in the combined numbering.
    fn constraint(&self, j: usize) -> (DVector<f64>, f64) {
        let (m, n) = (self.rows(), self.dim());
        if j < m {
            (self.g_rows.row(j).transpose(), self.g[j])
        } else if j < m + n {
            let i = j - m;
            (unit(n, i, 1.0), self.lower[i])
        } else {
            let i = j - m - n;
            (unit(n, i, -1.0), -self.upper[i])
        }
    }

    fn is_finite_constraint(&self, j: usize) -> bool {
        let (m, n) = (self.rows(), self.dim());
        if j < m {
            true
        } else if j < m + n {
            self.lower[j - m].is_finite()
        } else {
            self.upper[j - m - n].is_finite()
        }
    }
}

fn unit(n: usize, i: usize, s: f64) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    v[i] = s;
    v
}

struct Workspace<'a> {
    p: &'a QpProblem,
    chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    normals: Vec<DVector<f64>>,
    offsets: Vec<f64>,
}

impl Workspace<'_> {
    /// Primal step `z` (with `Nᵀz = 0`) and dual step `r` for adding
    /// constraint `k` to the active set.
    fn directions(&self, active: &[usize], k: usize) -> (DVector<f64>, DVector<f64>) {
        let nk = &self.normals[k];
        let hinv_nk = self.chol.solve(nk);
        if active.is_empty() {
            return (hinv_nk, DVector::zeros(0));
        }
        let q = active.len();
        let n = nk.len();
        let mut nmat = DMatrix::zeros(n, q);
        for (c, &j) in active.iter().enumerate() {
            nmat.set_column(c, &self.normals[j]);
        }
        let hinv_n = self.chol.solve(&nmat);
        let gram = nmat.transpose() * &hinv_n;
        let rhs = nmat.transpose() * &hinv_nk;
        let r = match gram.clone().cholesky() {
            Some(c) => c.solve(&rhs),
            None => gram.lu().solve(&rhs).unwrap_or_else(|| DVector::zeros(q)),
        };
        let z = hinv_nk - hinv_n * &r;
        (z, r)
    }

    fn slack(&self, j: usize, u: &DVector<f64>) -> f64 {
        self.normals[j].dot(u) - self.offsets[j]
    }

    fn violation_tol(&self, j: usize, u: &DVector<f64>) -> f64 {
        1e-12 * (1.0 + self.offsets[j].abs() + self.normals[j].norm() * u.norm())
    }
}

/// Solves `p` by the dual active-set method.
///
/// Deterministic: equal violations are resolved by the lowest constraint
/// index. At most `10·(n + constraints)` active-set changes are made.
pub fn solve_qp(p: &QpProblem) -> Result<QpSolution> {
    p.validate()?;
    let (m, n) = (p.rows(), p.dim());
    let total = m + 2 * n;
    let chol = p.h.clone().cholesky().ok_or_else(|| Error::Precondition("H is not positive definite".into()))?;
    let (normals, offsets): (Vec<_>, Vec<_>) = (0..total).map(|j| p.constraint(j)).unzip();
    let ws = Workspace { p, chol, normals, offsets };
    let candidates: Vec<usize> = (0..total).filter(|&j| p.is_finite_constraint(j)).collect();
    let max_changes = 10 * (n + candidates.len());

    let mut u = -ws.chol.solve(&p.f);
    let mut active: Vec<usize> = Vec::new();
    let mut mult: Vec<f64> = Vec::new();
    let mut changes = 0;

    loop {
        // Most violated inactive constraint, lowest index on ties.
        let mut pick: Option<(usize, f64)> = None;
        for &j in &candidates {
            if active.contains(&j) {
                continue;
            }
            let s = ws.slack(j, &u);
            if s < -ws.violation_tol(j, &u) && pick.is_none_or(|(_, best)| s < best) {
                pick = Some((j, s));
            }
        }
        let Some((k, _)) = pick else {
            return Ok(finish(&ws, u, active, QpStatus::Optimal, changes, None));
        };
        let mut mk = 0.0;
        loop {
            if changes >= max_changes {
                return Ok(finish_with(&ws, u, &active, &mult, QpStatus::IterationLimit, changes, None));
            }
            let (z, r) = ws.directions(&active, k);
            let nk = &ws.normals[k];
            let curvature = z.dot(nk);
            let full = if z.amax() > 1e-12 * (1.0 + nk.amax()) && curvature > 0.0 { -ws.slack(k, &u) / curvature } else { f64::INFINITY };
            let mut partial = f64::INFINITY;
            let mut drop = None;
            for (c, &rc) in r.iter().enumerate() {
                if rc > 0.0 {
                    let t = mult[c] / rc;
                    if t < partial {
                        partial = t;
                        drop = Some(c);
                    }
                }
            }
            let t = full.min(partial);
            if !t.is_finite() {
                // nk = N r with r ≤ 0: y = (−r, 1) ≥ 0 is a Farkas certificate.
                let mut y = vec![0.0; total];
                for (c, &j) in active.iter().enumerate() {
                    y[j] = -r[c];
                }
                y[k] = 1.0;
                let mut comb = DVector::zeros(n);
                for (j, &yj) in y.iter().enumerate() {
                    comb += &ws.normals[j] * yj;
                }
                let ymax = y.iter().fold(0.0_f64, |a, b| a.max(b.abs()));
                let farkas = comb.amax() / ymax;
                return Ok(finish_with(&ws, u, &active, &mult, QpStatus::Infeasible, changes, Some(farkas)));
            }
            if full.is_finite() {
                u += &z * t;
            }
            for (c, rc) in r.iter().enumerate() {
                mult[c] -= t * rc;
            }
            mk += t;
            changes += 1;
            if full <= partial {
                active.push(k);
                mult.push(mk);
                break;
            }
            let c = drop.expect("partial step has a blocking constraint");
            active.remove(c);
            mult.remove(c);
        }
    }
}

fn finish(ws: &Workspace, u: DVector<f64>, active: Vec<usize>, status: QpStatus, iterations: usize, farkas: Option<f64>) -> QpSolution {
    let (u, duals_active) = polish(ws, &u, &active);
    finish_with(ws, u, &active, &duals_active, status, iterations, farkas)
}

/// Re-solves the equality-constrained problem on the final active set so the
/// residuals reflect a single consistent linear solve.
fn polish(ws: &Workspace, u: &DVector<f64>, active: &[usize]) -> (DVector<f64>, Vec<f64>) {
    let n = u.len();
    let q = active.len();
    if q == 0 {
        return (u.clone(), Vec::new());
    }
    let mut k = DMatrix::zeros(n + q, n + q);
    let mut rhs = DVector::zeros(n + q);
    k.view_mut((0, 0), (n, n)).copy_from(&ws.p.h);
    rhs.rows_mut(0, n).copy_from(&(-&ws.p.f));
    for (c, &j) in active.iter().enumerate() {
        let nj = &ws.normals[j];
        k.view_mut((0, n + c), (n, 1)).copy_from(&(-nj));
        k.view_mut((n + c, 0), (1, n)).copy_from(&(-nj.transpose()));
        rhs[n + c] = -ws.offsets[j];
    }
    match k.lu().solve(&rhs) {
        Some(sol) if sol.iter().all(|v| v.is_finite()) => {
            let x = sol.rows(0, n).into_owned();
            let mu: Vec<f64> = (0..q).map(|c| sol[n + c]).collect();
            if mu.iter().all(|&v| v >= -1e-10) {
                (x, mu.into_iter().map(|v| v.max(0.0)).collect())
            } else {
                (u.clone(), dual_estimate(ws, u, active))
            }
        }
        _ => (u.clone(), dual_estimate(ws, u, active)),
    }
}

fn dual_estimate(ws: &Workspace, u: &DVector<f64>, active: &[usize]) -> Vec<f64> {
    let n = u.len();
    let mut nmat = DMatrix::zeros(n, active.len());
    for (c, &j) in active.iter().enumerate() {
        nmat.set_column(c, &ws.normals[j]);
    }
    let grad = &ws.p.h * u + &ws.p.f;
    let svd = nmat.svd(true, true);
    svd.solve(&grad, 1e-14).map(|v| v.iter().map(|x| x.max(0.0)).collect()).unwrap_or_else(|_| vec![0.0; active.len()])
}

fn finish_with(ws: &Workspace, u: DVector<f64>, active: &[usize], mult: &[f64], status: QpStatus, iterations: usize, farkas: Option<f64>) -> QpSolution {
    let p = ws.p;
    let total = ws.normals.len();
    let mut duals = DVector::zeros(total);
    for (&j, &mu) in active.iter().zip(mult) {
        duals[j] = mu;
    }
    let mut stat = &p.h * &u + &p.f;
    let mut primal: f64 = 0.0;
    let mut comp: f64 = 0.0;
    for j in 0..total {
        if !p.is_finite_constraint(j) {
            continue;
        }
        stat -= &ws.normals[j] * duals[j];
        let s = ws.slack(j, &u);
        primal = primal.max(-s);
        comp = comp.max((duals[j] * s).abs());
    }
    let mut order: Vec<usize> = active.to_vec();
    order.sort_unstable();
    QpSolution {
        objective: p.objective(&u),
        u,
        status,
        active: order,
        duals,
        primal_residual: primal.max(0.0),
        stationarity: stat.amax(),
        complementarity: comp,
        farkas_residual: farkas,
        iterations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn unconstrained_identity() {
        let p = QpProblem::projection(&v(&[0.0, 0.0, 0.0]));
        let s = solve_qp(&p).unwrap();
        assert!(s.is_optimal());
        assert_eq!(s.u, v(&[0.0, 0.0, 0.0]));
        assert!(s.active.is_empty());
    }

    #[test]
    fn violated_row_projects() {
        let p = QpProblem::projection(&v(&[0.0, -1.0])).with_row(&v(&[0.0, 1.0]), 0.0);
        let s = solve_qp(&p).unwrap();
        assert!(s.is_optimal());
        assert!(s.u.amax() < 1e-15);
        assert_eq!(s.active, vec![0]);
        assert!((s.duals[0] - 1.0).abs() < 1e-12);
        assert!(s.max_residual() <= TOL_CERT);
    }

    #[test]
    fn box_clamps() {
        let p = QpProblem::projection(&v(&[3.0, -3.0, 0.5])).with_box(v(&[-1.0, -1.0, -1.0]), v(&[1.0, 1.0, 1.0]));
        let s = solve_qp(&p).unwrap();
        assert_eq!(s.u, v(&[1.0, -1.0, 0.5]));
        assert_eq!(s.active, vec![1, 3]);
    }

    #[test]
    fn infeasible_rows_give_certificate() {
        let p = QpProblem::projection(&v(&[0.0, 0.0])).with_row(&v(&[1.0, 0.0]), 1.0).with_row(&v(&[-1.0, 0.0]), 0.0);
        let s = solve_qp(&p).unwrap();
        assert_eq!(s.status, QpStatus::Infeasible);
        assert!(s.farkas_residual.unwrap() < 1e-12);
    }

    #[test]
    fn dependent_rows_are_handled() {
        // Two identical rows and a third in the same direction.
        let p = QpProblem::projection(&v(&[0.0, 0.0])).with_row(&v(&[1.0, 1.0]), 1.0).with_row(&v(&[1.0, 1.0]), 1.0).with_row(&v(&[2.0, 2.0]), 2.0);
        let s = solve_qp(&p).unwrap();
        assert!(s.is_optimal());
        assert!((&s.u - v(&[0.5, 0.5])).amax() < 1e-12);
        assert!(s.max_residual() <= TOL_CERT);
    }

    #[test]
    fn rejects_indefinite_hessian() {
        let mut p = QpProblem::projection(&v(&[0.0, 0.0]));
        p.h[(1, 1)] = -1.0;
        assert!(solve_qp(&p).is_err());
    }

    #[test]
    fn identical_inputs_identical_outputs() {
        let p = QpProblem::projection(&v(&[2.0, 2.0])).with_row(&v(&[-1.0, 0.0]), -1.0).with_row(&v(&[0.0, -1.0]), -1.0);
        let a = solve_qp(&p).unwrap();
        let b = solve_qp(&p).unwrap();
        assert_eq!(a.u, b.u);
        assert_eq!(a.active, b.active);
        assert_eq!(a.duals, b.duals);
    }
}
