mod common;

use common::{barrier_qp, random_qp_instance as random_instance};
use hocbf::qp::{solve_qp, QpProblem, QpStatus, TOL_CERT};
use nalgebra::DVector;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn matches_log_barrier_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(300);
    for _ in 0..50 {
        let n = rng.gen_range(1..=8);
        let m = rng.gen_range(0..=12);
        let (p, x0) = random_instance(&mut rng, n, m);
        let s = solve_qp(&p).unwrap();
        assert_eq!(s.status, QpStatus::Optimal);
        assert!(s.max_residual() <= TOL_CERT, "residuals {:?}", (s.primal_residual, s.stationarity, s.complementarity));
        assert!(s.duals.iter().all(|&d| d >= 0.0));
        let (_, oracle) = barrier_qp(&p.h, &p.f, &p.g_rows, &p.g, &p.lower, &p.upper, &x0);
        assert!((s.objective - oracle).abs() <= 1e-7, "{} vs {}", s.objective, oracle);
    }
}

#[test]
fn adding_a_row_never_lowers_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    for _ in 0..100 {
        let n = rng.gen_range(1..=6);
        let m = rng.gen_range(0..=8);
        let (p, x0) = random_instance(&mut rng, n, m);
        let base = solve_qp(&p).unwrap();
        let a = DVector::from_fn(n, |_, _| rng.gen_range(-1.0..1.0));
        let tighter = p.clone().with_row(&a, a.dot(&x0) - rng.gen_range(0.01..0.5));
        let s = solve_qp(&tighter).unwrap();
        assert!(s.is_optimal());
        assert!(s.objective >= base.objective - 1e-12);
    }
}

#[test]
fn solution_is_lipschitz_in_data_for_fixed_active_set() {
    let mut rng = ChaCha8Rng::seed_from_u64(302);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.gen_range(2..=6);
        let m = rng.gen_range(1..=8);
        let (p, _) = random_instance(&mut rng, n, m);
        let s0 = solve_qp(&p).unwrap();
        let mut q = p.clone();
        q.f += DVector::from_fn(n, |_, _| rng.gen_range(-1e-6..1e-6));
        q.g += DVector::from_fn(q.rows(), |_, _| rng.gen_range(-1e-6..1e-6));
        let s1 = solve_qp(&q).unwrap();
        if s0.active == s1.active {
            worst = worst.max((&s1.u - &s0.u).amax() / 1e-6);
        }
    }
    println!("empirical Lipschitz constant {worst:.3}");
    assert!(worst.is_finite() && worst < 1e3);
}

#[test]
fn infeasible_box_and_row() {
    let p = QpProblem::projection(&DVector::zeros(2))
        .with_row(&DVector::from_vec(vec![1.0, 1.0]), 3.0)
        .with_box(DVector::from_element(2, -1.0), DVector::from_element(2, 1.0));
    let s = solve_qp(&p).unwrap();
    assert_eq!(s.status, QpStatus::Infeasible);
    assert!(s.farkas_residual.unwrap() <= 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn optimal_returns_are_certified(seed in any::<u64>(), n in 1usize..9, m in 0usize..13) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (p, _) = random_instance(&mut rng, n, m);
        let s = solve_qp(&p).unwrap();
        prop_assert!(s.is_optimal());
        prop_assert!(s.max_residual() <= TOL_CERT);
        let again = solve_qp(&p).unwrap();
        prop_assert_eq!(s.u, again.u);
    }
}
