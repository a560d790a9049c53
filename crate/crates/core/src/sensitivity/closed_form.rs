use nalgebra::{DMatrix, DVector};

use super::{kkt_residual, multiplier_from_stationarity, newton_kkt, MinScalingSolution, NewtonInit, PairKind, PrimitivePair, SolverTag, TOL_KKT};
use crate::error::{Error, Result};
use crate::linalg::{smallest_real_eigenvalue, solve_lower, solve_lower_transpose, symmetrize};

/// Eigenvalues with an imaginary part above this fraction of the spectral
/// radius are treated as complex.
const IMAG_TOL: f64 = 1e-9;

fn chol_l(m: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    m.clone().cholesky().map(|c| c.l()).ok_or_else(|| Error::Precondition(format!("{what} is not positive definite")))
}

fn overlap_solution(pair: &PrimitivePair, p: DVector<f64>, solver: SolverTag) -> Result<MinScalingSolution> {
    let ja = pair.eval_a(&p, 1)?;
    Ok(MinScalingSolution { alpha: ja.value, kkt_residual: crate::linalg::inf_norm(ja.grad_p()), p, lambda: 0.0, solver, iterations: 0, overlap: true })
}

/// Finishes a closed-form candidate: multiplier by least squares, residual
/// check, and a Newton polish if the residual misses the tolerance.
fn finish(pair: &PrimitivePair, p: DVector<f64>) -> Result<MinScalingSolution> {
    let ja = pair.eval_a(&p, 1)?;
    let jb = pair.eval_b(&p, 1)?;
    let lambda = multiplier_from_stationarity(ja.grad_p(), jb.grad_p());
    let residual = kkt_residual(pair, &p, lambda)?;
    if residual <= TOL_KKT {
        return Ok(MinScalingSolution { alpha: ja.value, p, lambda, kkt_residual: residual, solver: SolverTag::ClosedForm, iterations: 0, overlap: false });
    }
    log::debug!("closed-form residual {residual:.3e} above tolerance; polishing with Newton");
    newton_kkt(pair, Some(NewtonInit { p, lambda: lambda.max(1e-8) }))
}

/// Ellipsoid–ellipsoid minimal scaling from the smallest real eigenvalue of
/// a `2n × 2n` matrix built from Cholesky factors of the two shapes.
pub fn rimon_closed_form(pair: &PrimitivePair) -> Result<MinScalingSolution> {
    if pair.kind() != PairKind::EllipsoidEllipsoid {
        return Err(Error::UnsupportedPair(format!("{:?} has no eigenvalue closed form", pair.kind())));
    }
    let (pa, mua) = pair.a().world_ellipsoid().expect("ellipsoid");
    let (pb, mub) = pair.b().world_ellipsoid().expect("ellipsoid");
    if pair.eval_b(&mua, 0)?.value <= 1.0 {
        return overlap_solution(pair, mua, SolverTag::ClosedForm);
    }
    let n = mua.len();

    // y = L_Aᵀ(p − μ_A) turns A into the unit ball.
    let la = chol_l(&pa, "shape of A")?;
    let x = la.solve_lower_triangular(&pb).expect("nonzero diagonal");
    let pbar = symmetrize(&la.solve_lower_triangular(&x.transpose()).expect("nonzero diagonal"));
    let mubar = la.transpose() * (&mub - &mua);

    let lb = chol_l(&pbar, "transformed shape of B")?;
    let lb_inv = lb.solve_lower_triangular(&DMatrix::identity(n, n)).expect("nonzero diagonal");
    let ptilde = symmetrize(&(&lb_inv * lb_inv.transpose()));
    let mutilde = solve_lower(&lb, &mubar);

    let mut m = DMatrix::zeros(2 * n, 2 * n);
    m.view_mut((0, 0), (n, n)).copy_from(&ptilde);
    m.view_mut((n, n), (n, n)).copy_from(&ptilde);
    m.view_mut((0, n), (n, n)).copy_from(&(-DMatrix::identity(n, n)));
    m.view_mut((n, 0), (n, n)).copy_from(&(-(&mutilde * mutilde.transpose())));
    let nu = match smallest_real_eigenvalue(&m, IMAG_TOL) {
        Ok(v) => v,
        Err(e) => {
            log::warn!("eigenvalue step failed ({e}); falling back to Newton");
            return newton_kkt(pair, None);
        }
    };
    if nu >= -1e-12 * ptilde.amax().max(1.0) {
        log::warn!("near-singular shifted matrix (ν = {nu:.3e}); falling back to Newton");
        return newton_kkt(pair, None);
    }
    // w = (νI − P̃)⁻¹ μ̃, with P̃ − νI positive definite.
    let shifted = &ptilde - DMatrix::identity(n, n) * nu;
    let w = -shifted.cholesky().ok_or_else(|| Error::Singular("shifted matrix lost definiteness".into()))?.solve(&mutilde);
    let y = &mubar + solve_lower_transpose(&lb, &w);
    let p = &mua + solve_lower_transpose(&la, &y);
    finish(pair, p)
}

/// Closed forms when one set is an ellipsoid and the other a halfspace.
pub fn ellipsoid_halfspace_closed_form(pair: &PrimitivePair) -> Result<MinScalingSolution> {
    match pair.kind() {
        PairKind::EllipsoidHalfspace => {
            let (pm, mu) = pair.a().world_ellipsoid().expect("ellipsoid");
            let (a, b) = pair.b().world_halfspace().expect("halfspace");
            let delta = a.dot(&mu) + b - 1.0;
            if delta <= 0.0 {
                return overlap_solution(pair, mu, SolverTag::ClosedForm);
            }
            let pinv_a = pm.cholesky().ok_or_else(|| Error::Precondition("ellipsoid shape not positive definite".into()))?.solve(&a);
            let s = a.dot(&pinv_a);
            finish(pair, &mu - pinv_a * (delta / s))
        }
        PairKind::HalfspaceEllipsoid => {
            let (a, _) = pair.a().world_halfspace().expect("halfspace");
            let (pm, mu) = pair.b().world_ellipsoid().expect("ellipsoid");
            let pinv_a = pm.cholesky().ok_or_else(|| Error::Precondition("ellipsoid shape not positive definite".into()))?.solve(&a);
            let s = a.dot(&pinv_a);
            finish(pair, &mu - pinv_a / s.sqrt())
        }
        k => Err(Error::UnsupportedPair(format!("{k:?} is not an ellipsoid-halfspace pair"))),
    }
}
