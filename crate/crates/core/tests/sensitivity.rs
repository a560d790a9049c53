mod common;

use common::{boundary_grid_min, fd_gradient, fd_jacobian, rel_err, FD_STEP};
use hocbf::geometry::{theta_rates, Ellipsoid, FrameParams, ScalingPrimitive, SmoothPolytope};
use hocbf::sensitivity::sample::{random_frame, random_pair, SampleKind};
use hocbf::sensitivity::{
    alpha_gradient, alpha_hessian_unsymmetrized, alpha_sensitivity, newton_kkt, rimon_closed_form, solve_min_scaling, Body, MinScalingSolution, PrimitivePair,
    SolverTag,
};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn alpha_at(pair: &PrimitivePair, theta: &DVector<f64>) -> f64 {
    solve_min_scaling(&pair.with_theta(theta.as_slice()).unwrap()).unwrap().alpha
}

fn grad_at(pair: &PrimitivePair, theta: &DVector<f64>) -> DVector<f64> {
    let p = pair.with_theta(theta.as_slice()).unwrap();
    let sol = solve_min_scaling(&p).unwrap();
    alpha_gradient(&p, &sol).unwrap()
}

/// Zero-tolerance check of the multiplier and boundary facts at a separated optimum.
fn assert_kkt_facts(pair: &PrimitivePair, sol: &MinScalingSolution) {
    assert!(sol.alpha > 1.0);
    assert!(sol.lambda > 1e-10, "λ = {}", sol.lambda);
    let jb = pair.eval_b(&sol.p, 1).unwrap();
    assert!((jb.value - 1.0).abs() <= 1e-9, "F_B = {}", jb.value);
    assert!(jb.grad_p().norm() > 1e-10);
    let ja = pair.eval_a(&sol.p, 0).unwrap();
    assert!(ja.value > 1.0);
}

fn circles(d: f64) -> PrimitivePair {
    PrimitivePair::new(
        Body::new(ScalingPrimitive::Ellipsoid(Ellipsoid::ball(1.0, &[0.0, 0.0]).unwrap()), FrameParams::identity(2).unwrap()),
        Body::new(ScalingPrimitive::Ellipsoid(Ellipsoid::ball(1.0, &[0.0, 0.0]).unwrap()), FrameParams::planar(d, 0.0, 0.0)),
    )
    .unwrap()
}

#[test]
fn circle_pair_derivatives_are_one_dimensional() {
    let pair = circles(3.0);
    let s = alpha_sensitivity(&pair, 2).unwrap();
    assert!((s.alpha() - 4.0).abs() < 1e-12);
    assert!((s.grad[0] + 4.0).abs() < 1e-9);
    assert!((s.grad[3] - 4.0).abs() < 1e-9);
    let h = s.hess.unwrap();
    assert!((h[(0, 0)] - 2.0).abs() < 1e-8);
    assert!((h[(0, 3)] + 2.0).abs() < 1e-8);
}

#[test]
fn gradient_and_hessian_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(200);
    for kind in SampleKind::ALL {
        for dim in [2usize, 3] {
            let (mut eg, mut eh, mut asym) = (0.0_f64, 0.0_f64, 0.0_f64);
            for _ in 0..25 {
                let pair = random_pair(&mut rng, kind, dim).unwrap();
                let theta = pair.theta();
                let sol = solve_min_scaling(&pair).unwrap();
                assert_kkt_facts(&pair, &sol);
                let g = alpha_gradient(&pair, &sol).unwrap();
                let gfd = fd_gradient(|t| alpha_at(&pair, t), &theta, FD_STEP);
                eg = eg.max(rel_err(g.as_slice(), gfd.as_slice()));

                let h = alpha_hessian_unsymmetrized(&pair, &sol).unwrap();
                asym = asym.max(hocbf::linalg::asymmetry(&h) / h.amax().max(1.0));
                let hfd = fd_jacobian(|t| grad_at(&pair, t), &theta, FD_STEP);
                eh = eh.max(rel_err(h.as_slice(), hfd.as_slice()));
            }
            assert!(eg < 1e-6, "{kind:?} dim {dim}: gradient {eg:.3e}");
            assert!(eh < 1e-4, "{kind:?} dim {dim}: hessian {eh:.3e}");
            assert!(asym < 1e-9, "{kind:?} dim {dim}: asymmetry {asym:.3e}");
        }
    }
}

#[test]
fn closed_form_agrees_with_newton() {
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    for i in 0..100 {
        let dim = 2 + i % 2;
        let pair = random_pair(&mut rng, SampleKind::EllipsoidEllipsoid, dim).unwrap();
        let c = rimon_closed_form(&pair).unwrap();
        let n = newton_kkt(&pair, None).unwrap();
        assert_eq!(n.solver, SolverTag::NewtonKkt);
        assert!((c.alpha - n.alpha).abs() <= 1e-8, "{} vs {}", c.alpha, n.alpha);
        assert!((&c.p - &n.p).norm() <= 1e-7);
        assert!(c.kkt_residual <= 1e-10);
        assert_kkt_facts(&pair, &c);
        assert_kkt_facts(&pair, &n);
    }
}

#[test]
fn ellipse_versus_sharp_square_matches_grid_oracle() {
    let pair = PrimitivePair::new(
        Body::new(ScalingPrimitive::Ellipsoid(Ellipsoid::ball(1.0, &[0.0, -5.0]).unwrap()), FrameParams::identity(2).unwrap()),
        Body::new(ScalingPrimitive::Polytope(SmoothPolytope::axis_box(&[1.0, 1.0], &[0.0, 0.0], 80.0).unwrap()), FrameParams::identity(2).unwrap()),
    )
    .unwrap();
    let sol = solve_min_scaling(&pair).unwrap();
    assert_kkt_facts(&pair, &sol);
    let (oracle, _) = boundary_grid_min(
        |p| pair.eval_a(p, 0).unwrap().value,
        |p| pair.eval_b(p, 0).unwrap().value,
        &DVector::zeros(2),
        (std::f64::consts::TAU / 1e-4) as usize,
    );
    assert!((sol.alpha - oracle).abs() <= 1e-6, "{} vs {}", sol.alpha, oracle);
}

#[test]
fn random_polytope_pairs_match_grid_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    for _ in 0..10 {
        let pair = random_pair(&mut rng, SampleKind::EllipsoidPolytope, 2).unwrap();
        let sol = newton_kkt(&pair, None).unwrap();
        let center = pair.b().world_interior_point().unwrap();
        let (oracle, _) = boundary_grid_min(|p| pair.eval_a(p, 0).unwrap().value, |p| pair.eval_b(p, 0).unwrap().value, &center, 20_000);
        assert!((sol.alpha - oracle).abs() <= 1e-6 * oracle.max(1.0), "{} vs {}", sol.alpha, oracle);
    }
}

#[test]
fn newton_restarts_share_the_optimizer() {
    let mut rng = ChaCha8Rng::seed_from_u64(203);
    let pair = random_pair(&mut rng, SampleKind::EllipsoidPolytope, 2).unwrap();
    let reference = newton_kkt(&pair, None).unwrap();
    for _ in 0..10 {
        let p = &reference.p + DVector::from_fn(2, |_, _| rng.gen_range(-1.0..1.0));
        let init = hocbf::sensitivity::NewtonInit { p, lambda: rng.gen_range(0.2..5.0) };
        let s = newton_kkt(&pair, Some(init)).unwrap();
        assert!((&s.p - &reference.p).norm() <= 1e-8);
    }
}

/// Columns are `θ̇` for unit linear and angular velocities of each body.
fn velocity_basis(pair: &PrimitivePair) -> DMatrix<f64> {
    let dim = pair.dim();
    let nw = if dim == 2 { 1 } else { 3 };
    let per = dim + nw;
    let mut out = DMatrix::zeros(pair.theta_len(), 2 * per);
    for (b, (body, offset)) in [(pair.a(), 0), (pair.b(), pair.theta_len_a())].into_iter().enumerate() {
        for k in 0..per {
            let mut v = vec![0.0; dim];
            let mut w = vec![0.0; nw];
            if k < dim {
                v[k] = 1.0;
            } else {
                w[k - dim] = 1.0;
            }
            let rates = theta_rates(&body.frame, &v, &w).unwrap();
            out.view_mut((offset, b * per + k), (rates.len(), 1)).copy_from(&rates);
        }
    }
    out
}

fn rigid_transform(frame: &FrameParams, motion: &FrameParams) -> FrameParams {
    frame.composed_with(motion).unwrap()
}

#[test]
fn rigid_motion_is_equivariant() {
    let mut rng = ChaCha8Rng::seed_from_u64(204);
    for kind in SampleKind::ALL {
        for dim in [2usize, 3] {
            for _ in 0..5 {
                let pair = random_pair(&mut rng, kind, dim).unwrap();
                let o = DVector::from_fn(dim, |_, _| rng.gen_range(-3.0..3.0));
                let motion = random_frame(&mut rng, dim, &o);
                let moved = pair.with_frames(rigid_transform(&pair.a().frame, &motion), rigid_transform(&pair.b().frame, &motion)).unwrap();
                let s0 = alpha_sensitivity(&pair, 1).unwrap();
                let s1 = alpha_sensitivity(&moved, 1).unwrap();
                assert!((s0.alpha() - s1.alpha()).abs() <= 1e-10 * s0.alpha().max(1.0));

                // θ ↦ θ' is smooth; its Jacobian pulls the moved gradient back.
                let na = pair.theta_len_a();
                let map = |t: &DVector<f64>| -> DVector<f64> {
                    let fa = FrameParams::from_theta(&t.as_slice()[..na]).unwrap();
                    let fb = FrameParams::from_theta(&t.as_slice()[na..]).unwrap();
                    let (a, b) = (rigid_transform(&fa, &motion).theta(), rigid_transform(&fb, &motion).theta());
                    DVector::from_iterator(t.len(), a.iter().chain(b.iter()).copied())
                };
                let j = fd_jacobian(map, &pair.theta(), FD_STEP);
                // Off the unit sphere the quaternion chart is not multiplicative,
                // so compare along physical velocity directions only.
                let t = velocity_basis(&pair);
                let lhs = t.transpose() * &s0.grad;
                let rhs = (&j * &t).transpose() * &s1.grad;
                let e = rel_err(lhs.as_slice(), rhs.as_slice());
                assert!(e < 1e-6, "{kind:?} dim {dim}: {e:.3e}");
            }
        }
    }
}

#[test]
fn moving_apart_never_decreases_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(205);
    for i in 0..50 {
        let kind = SampleKind::ALL[i % 3];
        let dim = 2 + (i / 3) % 2;
        let pair = random_pair(&mut rng, kind, dim).unwrap();
        let ca = pair.a().world_interior_point().unwrap();
        let dir = match pair.b().world_halfspace() {
            Some((a, _)) => a.normalize(),
            None => (&ca - pair.b().world_interior_point().unwrap()).normalize(),
        };
        let mut last = solve_min_scaling(&pair).unwrap().alpha;
        for k in 1..=10 {
            let mut theta = pair.theta();
            for d in 0..dim {
                theta[d] += 0.2 * k as f64 * dir[d];
            }
            let a = alpha_at(&pair, &theta);
            assert!(a >= last - 1e-10, "step {k}: {a} < {last}");
            last = a;
        }
    }
}

#[test]
fn overlap_is_reported_not_raised() {
    let pair = circles(1.0);
    let s = solve_min_scaling(&pair).unwrap();
    assert!(s.alpha <= 1.0);
    assert!(!s.is_separated());
}
