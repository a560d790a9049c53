use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{solve_min_scaling, MinScalingSolution, PrimitivePair};
use crate::error::{Error, Result};
use crate::geometry::ScalingJet;
use crate::linalg::{asymmetry, symmetrize, Tensor3};

/// Residual accepted at the optimum before differentiating.
const TOL_DIFF: f64 = 1e-8;

/// `α*` with its first and, optionally, second derivatives in `θ = [θ_A; θ_B]`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AlphaSensitivity {
    pub solution: MinScalingSolution,
    pub grad: DVector<f64>,
    pub hess: Option<DMatrix<f64>>,
    /// `max|H − Hᵀ| / max(1, max|H|)` before symmetrisation.
    pub hess_asymmetry: Option<f64>,
}

impl AlphaSensitivity {
    pub fn alpha(&self) -> f64 {
        self.solution.alpha
    }
}

/// Jet of one scaling function with its `θ`-blocks embedded into the stacked
/// parameter vector.
struct Embedded {
    grad_p: DVector<f64>,
    grad_t: DVector<f64>,
    h_pp: DMatrix<f64>,
    /// `d[(i, a)] = ∂²F/∂p_i∂θ_a`
    d: DMatrix<f64>,
    h_tt: DMatrix<f64>,
    t_ppp: Option<Tensor3>,
    t_ppt: Option<Tensor3>,
    t_ptt: Option<Tensor3>,
}

fn embed(jet: &ScalingJet, offset: usize, nt: usize) -> Embedded {
    let np = jet.grad_p().len();
    let local = jet.grad_theta().len();
    let mut grad_t = DVector::zeros(nt);
    grad_t.rows_mut(offset, local).copy_from(jet.grad_theta());
    let mut d = DMatrix::zeros(np, nt);
    d.view_mut((0, offset), (np, local)).copy_from(&jet.hess_theta_p().transpose());
    let mut h_tt = DMatrix::zeros(nt, nt);
    h_tt.view_mut((offset, offset), (local, local)).copy_from(jet.hess_theta_theta());
    let t_ppp = jet.d3f_dp3.clone();
    let t_ppt = jet.d3f_dp2_dtheta.as_ref().map(|t| {
        let mut out = Tensor3::zeros(np, np, nt);
        for i in 0..np {
            for j in 0..np {
                for a in 0..local {
                    out.set(i, j, offset + a, t.get(i, j, a));
                }
            }
        }
        out
    });
    let t_ptt = jet.d3f_dp_dtheta2.as_ref().map(|t| {
        let mut out = Tensor3::zeros(np, nt, nt);
        for i in 0..np {
            for a in 0..local {
                for b in 0..local {
                    out.set(i, offset + a, offset + b, t.get(i, a, b));
                }
            }
        }
        out
    });
    Embedded { grad_p: jet.grad_p().clone(), grad_t, h_pp: jet.hess_pp().clone(), d, h_tt, t_ppp, t_ppt, t_ptt }
}

struct Implicit {
    a: Embedded,
    b: Embedded,
    lambda: f64,
    n_lu: nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>,
    /// `jp[(i, a)] = ∂p*_i/∂θ_a`
    jp: DMatrix<f64>,
    /// `∂λ*/∂θ`
    jl: DVector<f64>,
}

fn check_solution(sol: &MinScalingSolution) -> Result<()> {
    if sol.overlap || !(sol.alpha > 1.0) {
        return Err(Error::Precondition(format!("sets are not separated (α* = {})", sol.alpha)));
    }
    if !(sol.lambda > 0.0) {
        return Err(Error::Precondition(format!("multiplier must be positive, got {}", sol.lambda)));
    }
    if !(sol.kkt_residual <= TOL_DIFF) {
        return Err(Error::Precondition(format!("KKT residual {:.3e} too large to differentiate", sol.kkt_residual)));
    }
    Ok(())
}

fn implicit(pair: &PrimitivePair, sol: &MinScalingSolution, order: usize) -> Result<Implicit> {
    check_solution(sol)?;
    let np = pair.dim();
    let nt = pair.theta_len();
    let ja = pair.eval_a(&sol.p, order)?;
    let jb = pair.eval_b(&sol.p, order)?;
    let a = embed(&ja, 0, nt);
    let b = embed(&jb, pair.theta_len_a(), nt);
    let lambda = sol.lambda;

    let mut n = DMatrix::zeros(np + 1, np + 1);
    n.view_mut((0, 0), (np, np)).copy_from(&(&a.h_pp + &b.h_pp * lambda));
    for i in 0..np {
        n[(i, np)] = b.grad_p[i];
        n[(np, i)] = b.grad_p[i];
    }
    let mut omega = DMatrix::zeros(np + 1, nt);
    omega.view_mut((0, 0), (np, nt)).copy_from(&(-(&a.d + &b.d * lambda)));
    for k in 0..nt {
        omega[(np, k)] = -b.grad_t[k];
    }
    let n_lu = n.lu();
    let x = n_lu.solve(&omega).ok_or_else(|| Error::Singular("KKT matrix N".into()))?;
    if !x.iter().all(|v| v.is_finite()) {
        return Err(Error::Singular("KKT matrix N".into()));
    }
    let jp = x.rows(0, np).into_owned();
    let jl = x.row(np).transpose();
    Ok(Implicit { a, b, lambda, n_lu, jp, jl })
}

fn gradient_from(imp: &Implicit) -> DVector<f64> {
    imp.jp.tr_mul(&imp.a.grad_p) + &imp.a.grad_t
}

/// `∂α*/∂θ` by implicit differentiation of the KKT system.
pub fn alpha_gradient(pair: &PrimitivePair, sol: &MinScalingSolution) -> Result<DVector<f64>> {
    Ok(gradient_from(&implicit(pair, sol, 2)?))
}

fn hessian_from(imp: &Implicit) -> Result<DMatrix<f64>> {
    let np = imp.jp.nrows();
    let nt = imp.jp.ncols();
    let (a, b, lambda) = (&imp.a, &imp.b, imp.lambda);
    let (jp, jl) = (&imp.jp, &imp.jl);
    let (ta_ppp, tb_ppp) = (a.t_ppp.as_ref().unwrap(), b.t_ppp.as_ref().unwrap());
    let (ta_ppt, tb_ppt) = (a.t_ppt.as_ref().unwrap(), b.t_ppt.as_ref().unwrap());
    let (ta_ptt, tb_ptt) = (a.t_ptt.as_ref().unwrap(), b.t_ptt.as_ref().unwrap());

    // X = [jp; jlᵀ] solves N X = Ω; differentiate along each θ_j.
    let mut x = DMatrix::zeros(np + 1, nt);
    x.view_mut((0, 0), (np, nt)).copy_from(jp);
    for k in 0..nt {
        x[(np, k)] = jl[k];
    }
    // d2p[j] = ∂(∂p*/∂θ)/∂θ_j, an np × nt matrix
    let mut d2p: Vec<DMatrix<f64>> = Vec::with_capacity(nt);
    for j in 0..nt {
        let mut dn = DMatrix::zeros(np + 1, np + 1);
        let mut domega = DMatrix::zeros(np + 1, nt);
        // total derivative of M = H_A + λ H_B
        for r in 0..np {
            for c in 0..np {
                let mut v = 0.0;
                for k in 0..np {
                    v += (ta_ppp.get(r, c, k) + lambda * tb_ppp.get(r, c, k)) * jp[(k, j)];
                }
                v += b.h_pp[(r, c)] * jl[j];
                v += ta_ppt.get(r, c, j) + lambda * tb_ppt.get(r, c, j);
                dn[(r, c)] = v;
            }
        }
        // total derivative of c = ∇_p F_B
        for r in 0..np {
            let mut v = b.d[(r, j)];
            for k in 0..np {
                v += b.h_pp[(r, k)] * jp[(k, j)];
            }
            dn[(r, np)] = v;
            dn[(np, r)] = v;
        }
        // total derivative of Ω
        for r in 0..np {
            for c in 0..nt {
                let mut v = 0.0;
                for k in 0..np {
                    v += (ta_ppt.get(r, k, c) + lambda * tb_ppt.get(r, k, c)) * jp[(k, j)];
                }
                v += b.d[(r, c)] * jl[j];
                v += ta_ptt.get(r, c, j) + lambda * tb_ptt.get(r, c, j);
                domega[(r, c)] = -v;
            }
        }
        for c in 0..nt {
            let mut v = b.h_tt[(c, j)];
            for k in 0..np {
                v += b.d[(k, c)] * jp[(k, j)];
            }
            domega[(np, c)] = -v;
        }
        let rhs = domega - &dn * &x;
        let dx = imp.n_lu.solve(&rhs).ok_or_else(|| Error::Singular("KKT matrix N".into()))?;
        d2p.push(dx.rows(0, np).into_owned());
    }

    let mut h = &a.h_tt + jp.transpose() * &a.h_pp * jp + a.d.transpose() * jp + jp.transpose() * &a.d;
    for j in 0..nt {
        let curv = d2p[j].tr_mul(&a.grad_p);
        for c in 0..nt {
            h[(c, j)] += curv[c];
        }
    }
    Ok(h)
}

/// `∂²α*/∂θ²` before symmetrisation.
pub fn alpha_hessian_unsymmetrized(pair: &PrimitivePair, sol: &MinScalingSolution) -> Result<DMatrix<f64>> {
    hessian_from(&implicit(pair, sol, 3)?)
}

fn relative_asymmetry(h: &DMatrix<f64>) -> f64 {
    asymmetry(h) / h.amax().max(1.0)
}

/// `∂²α*/∂θ²`, symmetrised. Asymmetry above `1e-9` (relative) is logged.
pub fn alpha_hessian(pair: &PrimitivePair, sol: &MinScalingSolution) -> Result<DMatrix<f64>> {
    let h = alpha_hessian_unsymmetrized(pair, sol)?;
    let asym = relative_asymmetry(&h);
    if asym > 1e-9 {
        log::warn!("Hessian of α* asymmetric by {asym:.3e} before symmetrisation");
    }
    Ok(symmetrize(&h))
}

/// Solves the pair and differentiates `α*` to `order` (1 or 2).
pub fn alpha_sensitivity(pair: &PrimitivePair, order: usize) -> Result<AlphaSensitivity> {
    if !(1..=2).contains(&order) {
        return Err(Error::InvalidOrder(order));
    }
    let solution = solve_min_scaling(pair)?;
    let imp = implicit(pair, &solution, order + 1)?;
    let grad = gradient_from(&imp);
    let (hess, hess_asymmetry) = if order == 2 {
        let h = hessian_from(&imp)?;
        let asym = relative_asymmetry(&h);
        if asym > 1e-9 {
            log::warn!("Hessian of α* asymmetric by {asym:.3e} before symmetrisation");
        }
        (Some(symmetrize(&h)), Some(asym))
    } else {
        (None, None)
    };
    Ok(AlphaSensitivity { solution, grad, hess, hess_asymmetry })
}
