use nalgebra::{DMatrix, DVector};

use super::{kkt_residual, multiplier_from_stationarity, MinScalingSolution, PrimitivePair, SolverTag, TOL_KKT};
use crate::error::{Error, Result};
use crate::linalg::inf_norm;

const MAX_ITER: usize = 100;
const MAX_BACKTRACKS: usize = 30;
const ARMIJO: f64 = 1e-4;
/// Extra Newton steps taken after convergence while they keep reducing the
/// residual; finite differences of `α*` need the optimum to full precision.
const POLISH_STEPS: usize = 3;
/// Relative residual below which the iteration is treated as local.
const LOCAL_RESIDUAL: f64 = 1e-3;

/// Starting point for [`newton_kkt`].
#[derive(Debug, Clone)]
pub struct NewtonInit {
    pub p: DVector<f64>,
    pub lambda: f64,
}

fn residual_vector(pair: &PrimitivePair, p: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    let ja = pair.eval_a(p, 1)?;
    let jb = pair.eval_b(p, 1)?;
    let n = p.len();
    let mut r = DVector::zeros(n + 1);
    r.rows_mut(0, n).copy_from(&(ja.grad_p() + jb.grad_p() * lambda));
    r[n] = jb.value - 1.0;
    Ok(r)
}

fn jacobian(pair: &PrimitivePair, p: &DVector<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let ja = pair.eval_a(p, 2)?;
    let jb = pair.eval_b(p, 2)?;
    let n = p.len();
    let mut m = DMatrix::zeros(n + 1, n + 1);
    m.view_mut((0, 0), (n, n)).copy_from(&(ja.hess_pp() + jb.hess_pp() * lambda));
    for i in 0..n {
        m[(i, n)] = jb.grad_p()[i];
        m[(n, i)] = jb.grad_p()[i];
    }
    Ok(m)
}

/// Point where the segment from `inside` (with `F_B < 1`) to `outside`
/// (with `F_B > 1`) crosses the boundary of `B`.
fn boundary_on_segment(pair: &PrimitivePair, inside: &DVector<f64>, outside: &DVector<f64>) -> Result<DVector<f64>> {
    let (mut lo, mut hi) = (0.0_f64, 1.0_f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        let q = inside + (outside - inside) * mid;
        if pair.eval_b(&q, 0)?.value <= 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(inside + (outside - inside) * (0.5 * (lo + hi)))
}

enum Start {
    Overlap(DVector<f64>),
    Point(DVector<f64>),
}

/// Default start: the boundary point of `B` on the segment between the
/// minimisers of `F_B` and `F_A`.
fn default_start(pair: &PrimitivePair) -> Result<Start> {
    let ca = pair.a().world_interior_point();
    let cb = pair.b().world_interior_point();
    match (ca, cb) {
        (Some(ca), Some(cb)) => {
            if pair.eval_b(&ca, 0)?.value <= 1.0 {
                return Ok(Start::Overlap(ca));
            }
            Ok(Start::Point(boundary_on_segment(pair, &cb, &ca)?))
        }
        (Some(ca), None) => {
            // B is a halfspace: project the centre of A onto its boundary.
            let (a, b) = pair.b().world_halfspace().expect("halfspace");
            let excess = a.dot(&ca) + b - 1.0;
            if excess <= 0.0 {
                return Ok(Start::Overlap(ca));
            }
            Ok(Start::Point(&ca - &a * (excess / a.norm_squared())))
        }
        (None, Some(cb)) => {
            // A is a halfspace: walk from the centre of B against its normal.
            let (a, _) = pair.a().world_halfspace().expect("halfspace");
            let dir = -&a / a.norm();
            let mut reach = 1.0;
            let mut far = &cb + &dir * reach;
            let mut guard = 0;
            while pair.eval_b(&far, 0)?.value <= 1.0 {
                reach *= 2.0;
                far = &cb + &dir * reach;
                guard += 1;
                if guard > 200 {
                    return Err(Error::Degenerate("constraint set appears unbounded".into()));
                }
            }
            Ok(Start::Point(boundary_on_segment(pair, &cb, &far)?))
        }
        (None, None) => Err(Error::UnsupportedPair("two halfspaces".into())),
    }
}

/// Damped Newton on `[∇F_A + λ∇F_B; F_B − 1] = 0` with an Armijo backtracking
/// search on the residual norm and `λ` kept positive (a step that would make it
/// nonpositive halves it instead).
pub fn newton_kkt(pair: &PrimitivePair, init: Option<NewtonInit>) -> Result<MinScalingSolution> {
    let n = pair.dim();
    let (mut p, mut lambda) = match init {
        Some(NewtonInit { p, lambda }) => {
            crate::error::check_dim(n, p.len())?;
            if !(lambda > 0.0) {
                return Err(Error::Precondition("initial multiplier must be positive".into()));
            }
            (p, lambda)
        }
        None => match default_start(pair)? {
            Start::Overlap(ca) => {
                let ja = pair.eval_a(&ca, 1)?;
                return Ok(MinScalingSolution {
                    alpha: ja.value,
                    kkt_residual: inf_norm(ja.grad_p()),
                    p: ca,
                    lambda: 0.0,
                    solver: SolverTag::NewtonKkt,
                    iterations: 0,
                    overlap: true,
                });
            }
            Start::Point(p0) => {
                let ga = pair.eval_a(&p0, 1)?;
                let gb = pair.eval_b(&p0, 1)?;
                let l0 = multiplier_from_stationarity(ga.grad_p(), gb.grad_p());
                (p0, if l0 > 1e-6 { l0 } else { 1.0 })
            }
        },
    };

    let mut r = residual_vector(pair, &p, lambda)?;
    let mut norm = r.norm();
    let mut penalty = 0.0_f64;
    let mut iterations = 0;
    let mut polish = 0;
    loop {
        let converged = inf_norm(&r) <= TOL_KKT;
        if converged && (polish >= POLISH_STEPS || norm == 0.0) {
            break;
        }
        if iterations >= MAX_ITER {
            if converged {
                break;
            }
            return Err(Error::SolverFailure { reason: "maximum iterations reached".into(), iterations, residual: inf_norm(&r) });
        }
        let jac = jacobian(pair, &p, lambda)?;
        let step = jac.lu().solve(&(-&r)).ok_or_else(|| Error::Singular("KKT Jacobian".into()))?;
        if !step.iter().all(|v| v.is_finite()) {
            return Err(Error::Singular("KKT Jacobian".into()));
        }
        let dp = step.rows(0, n).into_owned();
        let dl = step[n];

        // Far from the solution steps must decrease the exact penalty
        // F_A + μ|F_B − 1|, for which the Newton direction is a descent
        // direction once μ exceeds the new multiplier. Close to it, where the
        // penalty can reject good full steps, the residual test alone decides.
        penalty = penalty.max(2.0 * (lambda + dl).abs() + 1.0);
        let ja = pair.eval_a(&p, 1)?;
        let violation = r[n].abs();
        let merit = ja.value + penalty * violation;
        let slope = ja.grad_p().dot(&dp) - penalty * violation;
        let local = inf_norm(&r) <= LOCAL_RESIDUAL * (1.0 + inf_norm(ja.grad_p()));

        let mut t: f64 = 1.0;
        let mut accepted = None;
        for _ in 0..=MAX_BACKTRACKS {
            let cp = &p + &dp * t;
            let mut cl = lambda + t * dl;
            if cl <= 0.0 {
                cl = 0.5 * lambda;
            }
            let cr = residual_vector(pair, &cp, cl)?;
            let cn = cr.norm();
            let residual_ok = (local || slope >= 0.0) && cn <= (1.0 - ARMIJO * t) * norm;
            let merit_ok = slope < 0.0 && {
                let cm = pair.eval_a(&cp, 0)?.value + penalty * cr[n].abs();
                cm <= merit + ARMIJO * t * slope
            };
            if residual_ok || merit_ok {
                accepted = Some((cp, cl, cr, cn));
                break;
            }
            t *= 0.5;
        }
        iterations += 1;
        match accepted {
            Some((cp, cl, cr, cn)) => {
                p = cp;
                lambda = cl;
                r = cr;
                norm = cn;
                if converged {
                    polish += 1;
                }
            }
            None if converged => break,
            None => {
                return Err(Error::SolverFailure { reason: "line search failed".into(), iterations, residual: inf_norm(&r) });
            }
        }
    }

    let alpha = pair.eval_a(&p, 0)?.value;
    Ok(MinScalingSolution { alpha, kkt_residual: kkt_residual(pair, &p, lambda)?, p, lambda, solver: SolverTag::NewtonKkt, iterations, overlap: false })
}
