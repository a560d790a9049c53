use nalgebra::{DMatrix, DVector};

use super::frame::FrameParams;
use super::primitive::ScalingPrimitive;
use crate::error::{check_dim, Error, Result};
use crate::linalg::Tensor3;

/// Threshold on `‖∂F/∂p‖` below which a gradient counts as vanishing.
pub const TOL_GRAD: f64 = 1e-12;

/// World-frame scaling function `F(p, θ)` and its partial derivatives.
///
/// Blocks above the requested order are `None`. Mixed blocks follow the
/// index order of their names: `d2f_dtheta_dp[(a, i)] = ∂²F/∂θ_a∂p_i`,
/// `d3f_dp2_dtheta.get(i, j, a) = ∂³F/∂p_i∂p_j∂θ_a`,
/// `d3f_dp_dtheta2.get(i, a, b) = ∂³F/∂p_i∂θ_a∂θ_b`.
#[derive(Debug, Clone)]
pub struct ScalingJet {
    pub order: usize,
    pub value: f64,
    pub df_dp: Option<DVector<f64>>,
    pub df_dtheta: Option<DVector<f64>>,
    pub d2f_dp2: Option<DMatrix<f64>>,
    pub d2f_dtheta_dp: Option<DMatrix<f64>>,
    pub d2f_dtheta2: Option<DMatrix<f64>>,
    pub d3f_dp3: Option<Tensor3>,
    pub d3f_dp2_dtheta: Option<Tensor3>,
    pub d3f_dp_dtheta2: Option<Tensor3>,
}

impl ScalingJet {
    pub fn grad_p(&self) -> &DVector<f64> {
        self.df_dp.as_ref().expect("jet evaluated with order ≥ 1")
    }

    pub fn grad_theta(&self) -> &DVector<f64> {
        self.df_dtheta.as_ref().expect("jet evaluated with order ≥ 1")
    }

    pub fn hess_pp(&self) -> &DMatrix<f64> {
        self.d2f_dp2.as_ref().expect("jet evaluated with order ≥ 2")
    }

    pub fn hess_theta_p(&self) -> &DMatrix<f64> {
        self.d2f_dtheta_dp.as_ref().expect("jet evaluated with order ≥ 2")
    }

    pub fn hess_theta_theta(&self) -> &DMatrix<f64> {
        self.d2f_dtheta2.as_ref().expect("jet evaluated with order ≥ 2")
    }
}

/// Evaluates `F(p, θ) = ᵇF(Rᵀ(p − o))` with derivatives in `(p, θ)` up to
/// `order ≤ 3`.
pub fn eval_scaling(prim: &ScalingPrimitive, frame: &FrameParams, p: &DVector<f64>, order: usize) -> Result<ScalingJet> {
    if order > 3 {
        return Err(Error::InvalidOrder(order));
    }
    let np = frame.dim();
    check_dim(np, prim.dim())?;
    check_dim(np, p.len())?;
    frame.warn_on_quaternion_drift();

    let rj = frame.rotation_jet();
    let o = frame.origin();
    let d = p - &o;
    let q = rj.r.transpose() * &d;
    let body = prim.eval_body(&q, order)?;

    let mut jet = ScalingJet {
        order,
        value: body.value,
        df_dp: None,
        df_dtheta: None,
        d2f_dp2: None,
        d2f_dtheta_dp: None,
        d2f_dtheta2: None,
        d3f_dp3: None,
        d3f_dp2_dtheta: None,
        d3f_dp_dtheta2: None,
    };
    if order == 0 {
        return Ok(jet);
    }

    // Chain rule over z = (p, o, r) with r the orientation parameters.
    let nr = frame.orientation_len();
    let nz = 2 * np + nr;
    let nt = np + nr;
    let zr = 2 * np;

    // jq[(i, a)] = ∂q_i/∂z_a
    let mut jq = DMatrix::zeros(np, nz);
    for i in 0..np {
        for j in 0..np {
            jq[(i, j)] = rj.r[(j, i)];
            jq[(i, np + j)] = -rj.r[(j, i)];
        }
    }
    for k in 0..nr {
        let col = rj.d1[k].transpose() * &d;
        for i in 0..np {
            jq[(i, zr + k)] = col[i];
        }
    }

    // Second and third derivatives of q are nonzero only when at least one
    // index is an orientation parameter.
    let hq = |i: usize, a: usize, b: usize| -> f64 {
        let (a, b) = if a <= b { (a, b) } else { (b, a) };
        if b < zr {
            return 0.0;
        }
        let k = b - zr;
        if a < np {
            rj.d1[k][(a, i)]
        } else if a < zr {
            -rj.d1[k][(a - np, i)]
        } else {
            let l = a - zr;
            (0..np).map(|j| rj.d2[k][l][(j, i)] * d[j]).sum()
        }
    };
    let tq = |i: usize, a: usize, b: usize, c: usize| -> f64 {
        let mut idx = [a, b, c];
        idx.sort_unstable();
        let [a, b, c] = idx;
        if b < zr {
            return 0.0;
        }
        let (k, l) = (b - zr, c - zr);
        if a < np {
            rj.d2[k][l][(a, i)]
        } else if a < zr {
            -rj.d2[k][l][(a - np, i)]
        } else {
            let m = a - zr;
            (0..np).map(|j| rj.d3[k][l][m][(j, i)] * d[j]).sum()
        }
    };

    let g = body.grad.as_ref().expect("order ≥ 1");
    let fz = jq.tr_mul(g);
    jet.df_dp = Some(fz.rows(0, np).into_owned());
    jet.df_dtheta = Some(fz.rows(np, nt).into_owned());
    if order == 1 {
        return Ok(jet);
    }

    let hb = body.hess.as_ref().expect("order ≥ 2");
    let mut fzz = jq.transpose() * hb * &jq;
    for a in 0..nz {
        for b in a..nz {
            let extra: f64 = (0..np).map(|i| g[i] * hq(i, a, b)).sum();
            fzz[(a, b)] += extra;
            if a != b {
                fzz[(b, a)] += extra;
            }
        }
    }
    let fzz = crate::linalg::symmetrize(&fzz);
    jet.d2f_dp2 = Some(fzz.view((0, 0), (np, np)).into_owned());
    jet.d2f_dtheta_dp = Some(fzz.view((np, 0), (nt, np)).into_owned());
    jet.d2f_dtheta2 = Some(fzz.view((np, np), (nt, nt)).into_owned());
    if order == 2 {
        return Ok(jet);
    }

    let tb = body.third.as_ref().expect("order 3");
    // hjq[(i, a)] = Σ_j H_ij jq[(j, a)]
    let hjq = hb * &jq;
    let mut fzzz = Tensor3::zeros(nz, nz, nz);
    // Contract the body third derivative one index at a time.
    let mut t1 = Tensor3::zeros(np, np, nz);
    for i in 0..np {
        for j in 0..np {
            for c in 0..nz {
                let v: f64 = (0..np).map(|k| tb.get(i, j, k) * jq[(k, c)]).sum();
                t1.set(i, j, c, v);
            }
        }
    }
    let mut t2 = Tensor3::zeros(np, nz, nz);
    for i in 0..np {
        for b in 0..nz {
            for c in 0..nz {
                let v: f64 = (0..np).map(|j| t1.get(i, j, c) * jq[(j, b)]).sum();
                t2.set(i, b, c, v);
            }
        }
    }
    for a in 0..nz {
        for b in a..nz {
            for c in b..nz {
                let mut v: f64 = (0..np).map(|i| t2.get(i, b, c) * jq[(i, a)]).sum();
                for i in 0..np {
                    v += hq(i, a, b) * hjq[(i, c)] + hq(i, a, c) * hjq[(i, b)] + hq(i, b, c) * hjq[(i, a)];
                    v += g[i] * tq(i, a, b, c);
                }
                for (x, y, z) in [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)] {
                    fzzz.set(x, y, z, v);
                }
            }
        }
    }
    jet.d3f_dp3 = Some(Tensor3::from_fn(np, np, np, |i, j, k| fzzz.get(i, j, k)));
    jet.d3f_dp2_dtheta = Some(Tensor3::from_fn(np, np, nt, |i, j, a| fzzz.get(i, j, np + a)));
    jet.d3f_dp_dtheta2 = Some(Tensor3::from_fn(np, nt, nt, |i, a, b| fzzz.get(i, np + a, np + b)));
    Ok(jet)
}

/// Whether `‖∂F/∂p‖₂ > TOL_GRAD` at `p`.
pub fn gradient_nonzero_outside(prim: &ScalingPrimitive, frame: &FrameParams, p: &DVector<f64>) -> bool {
    match eval_scaling(prim, frame, p, 1) {
        Ok(jet) => jet.grad_p().norm() > TOL_GRAD,
        Err(_) => false,
    }
}
