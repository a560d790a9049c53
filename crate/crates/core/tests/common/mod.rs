//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use hocbf::qp::QpProblem;
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

pub const FD_STEP: f64 = 1e-6;

/// Central differences of a scalar function.
pub fn fd_gradient(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        (f(&xp) - f(&xm)) / (2.0 * h)
    })
}

/// Central differences of a vector function; column `j` is `∂f/∂x_j`.
pub fn fd_jacobian(f: impl Fn(&DVector<f64>) -> DVector<f64>, x: &DVector<f64>, h: f64) -> DMatrix<f64> {
    let m = f(x).len();
    let mut out = DMatrix::zeros(m, x.len());
    for j in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[j] += h;
        xm[j] -= h;
        out.set_column(j, &((f(&xp) - f(&xm)) / (2.0 * h)));
    }
    out
}

/// `‖a − b‖∞ / max(1, ‖b‖∞)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let scale = b.iter().fold(1.0_f64, |m, v| m.max(v.abs()));
    a.iter().zip(b).fold(0.0_f64, |m, (x, y)| m.max((x - y).abs())) / scale
}

/// Golden-section minimisation of a unimodal function on `[lo, hi]`.
pub fn golden(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> (f64, f64) {
    let g = (5.0_f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - g * (hi - lo);
    let mut x2 = lo + g * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    while hi - lo > tol {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let x = 0.5 * (lo + hi);
    (x, f(x))
}

/// Minimum of `objective` over the closed curve `{F_B = 1}` of a bounded
/// planar set, by a dense angle grid around `center` and golden polish.
/// `constraint` must be below one at `center`.
pub fn boundary_grid_min(
    objective: impl Fn(&DVector<f64>) -> f64,
    constraint: impl Fn(&DVector<f64>) -> f64,
    center: &DVector<f64>,
    samples: usize,
) -> (f64, DVector<f64>) {
    let point = |t: f64| -> DVector<f64> {
        let u = DVector::from_vec(vec![t.cos(), t.sin()]);
        let mut hi = 1.0;
        while constraint(&(center + &u * hi)) <= 1.0 {
            hi *= 2.0;
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if constraint(&(center + &u * mid)) <= 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        center + u * (0.5 * (lo + hi))
    };
    let step = std::f64::consts::TAU / samples as f64;
    let (mut best_t, mut best) = (0.0, f64::INFINITY);
    for k in 0..samples {
        let t = k as f64 * step;
        let v = objective(&point(t));
        if v < best {
            best = v;
            best_t = t;
        }
    }
    let (t, v) = golden(|t| objective(&point(t)), best_t - 2.0 * step, best_t + 2.0 * step, 1e-13);
    (v, point(t))
}

/// Strictly convex QP `min ½xᵀHx + fᵀx s.t. Gx ≥ g, lo ≤ x ≤ hi` by a
/// primal log-barrier method started from a strictly feasible `x0`.
pub fn barrier_qp(
    h: &DMatrix<f64>,
    f: &DVector<f64>,
    g_rows: &DMatrix<f64>,
    g: &DVector<f64>,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    x0: &DVector<f64>,
) -> (DVector<f64>, f64) {
    let n = x0.len();
    // Stack every inequality as c_iᵀx − d_i ≥ 0.
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    for i in 0..g_rows.nrows() {
        rows.push((g_rows.row(i).transpose(), g[i]));
    }
    for j in 0..n {
        if lo[j].is_finite() {
            let mut e = DVector::zeros(n);
            e[j] = 1.0;
            rows.push((e, lo[j]));
        }
        if hi[j].is_finite() {
            let mut e = DVector::zeros(n);
            e[j] = -1.0;
            rows.push((e, -hi[j]));
        }
    }
    let slack = |x: &DVector<f64>| -> Vec<f64> { rows.iter().map(|(c, d)| c.dot(x) - d).collect() };
    assert!(slack(x0).iter().all(|s| *s > 0.0), "oracle start must be strictly feasible");
    let obj = |x: &DVector<f64>| 0.5 * x.dot(&(h * x)) + f.dot(x);
    let mut x = x0.clone();
    let m = rows.len().max(1) as f64;
    let mut t = 1.0;
    while m / t > 1e-13 {
        for _ in 0..200 {
            let s = slack(&x);
            let mut grad = (h * &x + f) * t;
            let mut hess = h * t;
            for ((c, _), si) in rows.iter().zip(&s) {
                grad -= c / *si;
                hess += c * c.transpose() / (si * si);
            }
            let step = -hess.clone().cholesky().expect("barrier Hessian is positive definite").solve(&grad);
            let dec = -grad.dot(&step);
            if dec / 2.0 <= 1e-14 {
                break;
            }
            let phi = |y: &DVector<f64>| -> f64 {
                let sy = slack(y);
                if sy.iter().any(|v| *v <= 0.0) {
                    return f64::INFINITY;
                }
                t * obj(y) - sy.iter().map(|v| v.ln()).sum::<f64>()
            };
            let base = phi(&x);
            let mut a = 1.0;
            while phi(&(&x + &step * a)) > base - 0.25 * a * dec {
                a *= 0.5;
                if a < 1e-20 {
                    break;
                }
            }
            x += step * a;
        }
        t *= 10.0;
    }
    let v = obj(&x);
    (x, v)
}

/// Smallest circle containing planar points, by exhaustive search over
/// circles through two or three of them. Returns `(center, radius)`.
pub fn min_enclosing_circle(pts: &[(f64, f64)]) -> ((f64, f64), f64) {
    let contains = |c: (f64, f64), r: f64| pts.iter().all(|p| ((p.0 - c.0).powi(2) + (p.1 - c.1).powi(2)).sqrt() <= r * (1.0 + 1e-12) + 1e-14);
    let mut best = ((0.0, 0.0), f64::INFINITY);
    let n = pts.len();
    for i in 0..n {
        for j in (i + 1)..n {
            let c = ((pts[i].0 + pts[j].0) / 2.0, (pts[i].1 + pts[j].1) / 2.0);
            let r = ((pts[i].0 - c.0).powi(2) + (pts[i].1 - c.1).powi(2)).sqrt();
            if r < best.1 && contains(c, r) {
                best = (c, r);
            }
            for k in (j + 1)..n {
                let (ax, ay) = pts[i];
                let (bx, by) = pts[j];
                let (cx, cy) = pts[k];
                let d = 2.0 * (ax * (by - cy) + bx * (cy - ay) + cx * (ay - by));
                if d.abs() < 1e-14 {
                    continue;
                }
                let a2 = ax * ax + ay * ay;
                let b2 = bx * bx + by * by;
                let c2 = cx * cx + cy * cy;
                let ux = (a2 * (by - cy) + b2 * (cy - ay) + c2 * (ay - by)) / d;
                let uy = (a2 * (cx - bx) + b2 * (ax - cx) + c2 * (bx - ax)) / d;
                let r = ((ax - ux).powi(2) + (ay - uy).powi(2)).sqrt();
                if r < best.1 && contains((ux, uy), r) {
                    best = ((ux, uy), r);
                }
            }
        }
    }
    best
}

/// Area of the smallest ellipse enclosing planar points whose axes make
/// angle `phi` with the coordinate axes and whose axis ratio is `e^{-s}`.
pub fn enclosing_area(pts: &[(f64, f64)], phi: f64, s: f64) -> f64 {
    let (sn, cs) = phi.sin_cos();
    let rho = s.exp();
    let mapped: Vec<(f64, f64)> = pts.iter().map(|p| (cs * p.0 + sn * p.1, rho * (-sn * p.0 + cs * p.1))).collect();
    let (_, r) = min_enclosing_circle(&mapped);
    std::f64::consts::PI * r * r / rho
}

/// Nelder–Mead on a function of two variables.
pub fn nelder_mead_2d(f: impl Fn(f64, f64) -> f64, start: (f64, f64), scale: f64, tol: f64) -> (f64, f64, f64) {
    let mut simplex = [(start.0, start.1), (start.0 + scale, start.1), (start.0, start.1 + scale)];
    let mut vals = simplex.map(|p| f(p.0, p.1));
    for _ in 0..20000 {
        let mut idx = [0usize, 1, 2];
        idx.sort_by(|a, b| vals[*a].total_cmp(&vals[*b]));
        simplex = idx.map(|i| simplex[i]);
        vals = idx.map(|i| vals[i]);
        let size = ((simplex[1].0 - simplex[0].0).abs() + (simplex[1].1 - simplex[0].1).abs())
            .max((simplex[2].0 - simplex[0].0).abs() + (simplex[2].1 - simplex[0].1).abs());
        if size < tol {
            break;
        }
        let c = ((simplex[0].0 + simplex[1].0) / 2.0, (simplex[0].1 + simplex[1].1) / 2.0);
        let w = simplex[2];
        let refl = (2.0 * c.0 - w.0, 2.0 * c.1 - w.1);
        let fr = f(refl.0, refl.1);
        if fr < vals[0] {
            let exp = (3.0 * c.0 - 2.0 * w.0, 3.0 * c.1 - 2.0 * w.1);
            let fe = f(exp.0, exp.1);
            if fe < fr {
                simplex[2] = exp;
                vals[2] = fe;
            } else {
                simplex[2] = refl;
                vals[2] = fr;
            }
        } else if fr < vals[1] {
            simplex[2] = refl;
            vals[2] = fr;
        } else {
            let con = ((c.0 + w.0) / 2.0, (c.1 + w.1) / 2.0);
            let fc = f(con.0, con.1);
            if fc < vals[2] {
                simplex[2] = con;
                vals[2] = fc;
            } else {
                for i in 1..3 {
                    simplex[i] = ((simplex[i].0 + simplex[0].0) / 2.0, (simplex[i].1 + simplex[0].1) / 2.0);
                    vals[i] = f(simplex[i].0, simplex[i].1);
                }
            }
        }
    }
    let best = (0..3).min_by(|a, b| vals[*a].total_cmp(&vals[*b])).unwrap();
    (simplex[best].0, simplex[best].1, vals[best])
}

/// Area of the minimum enclosing ellipse by a grid over orientation and axis
/// ratio (the best centre and scale for each cell are exact), refined by
/// Nelder–Mead restarts from the best cells.
pub fn grid_mvee_area(pts: &[(f64, f64)]) -> f64 {
    let na = 180;
    let ns = 120;
    let mut cells: Vec<(f64, f64, f64)> = Vec::new();
    for i in 0..na {
        let phi = std::f64::consts::PI * i as f64 / na as f64;
        for j in 0..ns {
            let s = -3.0 + 6.0 * j as f64 / (ns - 1) as f64;
            cells.push((phi, s, enclosing_area(pts, phi, s)));
        }
    }
    cells.sort_by(|a, b| a.2.total_cmp(&b.2));
    let mut best = cells[0].2;
    for c in cells.iter().take(5) {
        let mut start = (c.0, c.1);
        let mut scale = 0.05;
        for _ in 0..4 {
            let (x, y, v) = nelder_mead_2d(|p, s| enclosing_area(pts, p, s), start, scale, 1e-12);
            best = best.min(v);
            start = (x, y);
            scale *= 0.1;
        }
    }
    best
}

/// Random strictly feasible instance together with an interior point.
pub fn random_qp_instance(rng: &mut ChaCha8Rng, n: usize, m: usize) -> (QpProblem, DVector<f64>) {
    let b = DMatrix::from_fn(n, n, |_, _| rng.gen_range(-1.0..1.0));
    let h = b.transpose() * &b + DMatrix::identity(n, n) * 0.5;
    let f = DVector::from_fn(n, |_, _| rng.gen_range(-3.0..3.0));
    let x0 = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
    let mut p = QpProblem { h, f, ..QpProblem::projection(&DVector::zeros(n)) };
    for _ in 0..m {
        let a = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let g = a.dot(&x0) - rng.gen_range(0.05..1.0);
        p = p.with_row(&a, g);
    }
    let lo = DVector::from_fn(n, |i, _| if rng.gen_bool(0.7) { x0[i] - rng.gen_range(0.2..2.0) } else { f64::NEG_INFINITY });
    let hi = DVector::from_fn(n, |i, _| if rng.gen_bool(0.7) { x0[i] + rng.gen_range(0.2..2.0) } else { f64::INFINITY });
    (p.with_box(lo, hi), x0)
}
