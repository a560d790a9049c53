//! Verification sweeps behind `hocbf check`.
//!
//! Every suite draws random instances from per-shard seeds derived from the
//! root seed, so a report is reproducible regardless of thread scheduling.
//! A case breaching its threshold is dumped with its full inputs; feeding the
//! dump back through [`replay`] recomputes the same metrics.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FrameParams;
use crate::linalg::asymmetry;
use crate::safety::smooth_min;
use crate::sensitivity::sample::{random_pair, random_unit, SampleKind};
use crate::sensitivity::{alpha_gradient, alpha_hessian_unsymmetrized, newton_kkt, rimon_closed_form, solve_min_scaling, PrimitivePair};

pub const FD_STEP: f64 = 1e-6;
pub const TOL_GRADIENT: f64 = 1e-6;
pub const TOL_HESSIAN: f64 = 1e-4;
pub const TOL_ASYMMETRY: f64 = 1e-9;
pub const TOL_ALPHA: f64 = 1e-8;
pub const TOL_P: f64 = 1e-7;
pub const TOL_RIGID: f64 = 1e-9;
pub const TOL_SANDWICH: f64 = 1e-12;
const WORST: usize = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Gradients,
    Hessians,
    Closedform,
    Invariance,
    All,
}

impl Suite {
    fn expand(self) -> Vec<Suite> {
        match self {
            Suite::All => vec![Suite::Gradients, Suite::Hessians, Suite::Closedform, Suite::Invariance],
            s => vec![s],
        }
    }

    fn name(self) -> &'static str {
        match self {
            Suite::Gradients => "gradients",
            Suite::Hessians => "hessians",
            Suite::Closedform => "closedform",
            Suite::Invariance => "invariance",
            Suite::All => "all",
        }
    }
}

/// One measured quantity of one case; passes iff `value < threshold`, or
/// `value ≤ threshold` when `inclusive`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Measurement {
    pub metric: String,
    pub value: f64,
    pub threshold: f64,
    pub inclusive: bool,
}

impl Measurement {
    fn below(metric: &str, value: f64, threshold: f64) -> Self {
        Measurement { metric: metric.into(), value, threshold, inclusive: false }
    }

    fn at_most(metric: &str, value: f64, threshold: f64) -> Self {
        Measurement { metric: metric.into(), value, threshold, inclusive: true }
    }

    pub fn passed(&self) -> bool {
        // NaN fails either way.
        if self.inclusive {
            self.value <= self.threshold
        } else {
            self.value < self.threshold
        }
    }
}

/// Inputs of one case, enough to recompute it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum CaseInput {
    Pair {
        pair: PrimitivePair,
    },
    /// Rigid motion applied to both bodies of `pair`.
    RigidMotion {
        pair: PrimitivePair,
        motion: FrameParams,
    },
    SmoothMin {
        values: Vec<f64>,
        eta: f64,
        phi0: f64,
    },
}

/// A breached case, serialized for replay.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailureDump {
    pub suite: Suite,
    pub shard: String,
    pub index: usize,
    pub root_seed: u64,
    pub input: CaseInput,
    pub measurements: Vec<Measurement>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Offender {
    pub shard: String,
    pub index: usize,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub suite: Suite,
    pub metric: String,
    pub threshold: f64,
    pub cases: usize,
    pub max: f64,
    pub passed: bool,
    /// Largest values first.
    pub worst: Vec<Offender>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckReport {
    pub seed: u64,
    pub count: usize,
    pub passed: bool,
    pub metrics: Vec<MetricReport>,
    #[serde(skip)]
    pub failures: Vec<FailureDump>,
}

struct Case {
    shard: String,
    index: usize,
    input: CaseInput,
    measurements: Vec<Measurement>,
}

fn shard_name(kind: SampleKind, dim: usize) -> String {
    let k = match kind {
        SampleKind::EllipsoidEllipsoid => "ellipsoid_ellipsoid",
        SampleKind::EllipsoidHalfspace => "ellipsoid_halfspace",
        SampleKind::EllipsoidPolytope => "ellipsoid_polytope",
    };
    format!("{k}/{dim}d")
}

/// SplitMix64 of the root seed and a shard tag.
fn shard_seed(root: u64, suite: Suite, shard: usize) -> u64 {
    let mut z = root ^ ((suite as u64) << 32) ^ (shard as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// `‖a − b‖∞ / max(1, ‖b‖∞)`.
pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max);
    let den = b.iter().map(|y| y.abs()).fold(1.0, f64::max);
    num / den
}

fn alpha_at(pair: &PrimitivePair, theta: &DVector<f64>) -> Result<f64> {
    Ok(solve_min_scaling(&pair.with_theta(theta.as_slice())?)?.alpha)
}

fn grad_at(pair: &PrimitivePair, theta: &DVector<f64>) -> Result<DVector<f64>> {
    let p = pair.with_theta(theta.as_slice())?;
    alpha_gradient(&p, &solve_min_scaling(&p)?)
}

fn central<T>(x: &DVector<f64>, h: f64, f: impl Fn(&DVector<f64>) -> Result<T>, mut put: impl FnMut(usize, T, T)) -> Result<()> {
    for i in 0..x.len() {
        let mut xp = x.clone();
        let mut xm = x.clone();
        xp[i] += h;
        xm[i] -= h;
        put(i, f(&xp)?, f(&xm)?);
    }
    Ok(())
}

/// Central-difference gradient of `α*` in `θ`.
pub fn fd_alpha_gradient(pair: &PrimitivePair, h: f64) -> Result<DVector<f64>> {
    let theta = pair.theta();
    let mut g = DVector::zeros(theta.len());
    central(&theta, h, |t| alpha_at(pair, t), |i, p, m| g[i] = (p - m) / (2.0 * h))?;
    Ok(g)
}

/// Central-difference Jacobian of the analytic gradient; column `i` is the
/// derivative along `θ_i`.
pub fn fd_alpha_hessian(pair: &PrimitivePair, h: f64) -> Result<DMatrix<f64>> {
    let theta = pair.theta();
    let n = theta.len();
    let mut m = DMatrix::zeros(n, n);
    central(&theta, h, |t| grad_at(pair, t), |i, p, q| m.set_column(i, &((p - q) / (2.0 * h))))?;
    Ok(m)
}

fn measure(suite: Suite, input: &CaseInput) -> Result<Vec<Measurement>> {
    match (suite, input) {
        (Suite::Gradients, CaseInput::Pair { pair }) => {
            let sol = solve_min_scaling(pair)?;
            let g = alpha_gradient(pair, &sol)?;
            let fd = fd_alpha_gradient(pair, FD_STEP)?;
            Ok(vec![Measurement::below("gradient_rel_err", rel_err(g.as_slice(), fd.as_slice()), TOL_GRADIENT)])
        }
        (Suite::Hessians, CaseInput::Pair { pair }) => {
            let sol = solve_min_scaling(pair)?;
            let h = alpha_hessian_unsymmetrized(pair, &sol)?;
            let fd = fd_alpha_hessian(pair, FD_STEP)?;
            Ok(vec![
                Measurement::below("hessian_rel_err", rel_err(h.as_slice(), fd.as_slice()), TOL_HESSIAN),
                Measurement::below("hessian_asymmetry", asymmetry(&h) / h.amax().max(1.0), TOL_ASYMMETRY),
            ])
        }
        (Suite::Closedform, CaseInput::Pair { pair }) => {
            let c = rimon_closed_form(pair)?;
            let n = newton_kkt(pair, None)?;
            Ok(vec![Measurement::at_most("alpha_abs_diff", (c.alpha - n.alpha).abs(), TOL_ALPHA), Measurement::at_most("p_diff", (&c.p - &n.p).norm(), TOL_P)])
        }
        (Suite::Invariance, CaseInput::Pair { pair }) => {
            let sol = solve_min_scaling(pair)?;
            let jb = pair.eval_b(&sol.p, 1)?;
            // Normalised so that each fact holds iff its entry is ≤ 1.
            let violation = [(jb.value - 1.0).abs() / 1e-9, 1e-10 / sol.lambda.max(f64::MIN_POSITIVE), 1e-10 / jb.grad_p().norm().max(f64::MIN_POSITIVE)]
                .into_iter()
                .fold(0.0, f64::max);
            let separated = if sol.alpha > 1.0 { 0.0 } else { 1.0 };
            Ok(vec![Measurement::at_most("kkt_facts", violation.max(separated * 2.0), 1.0)])
        }
        (Suite::Invariance, CaseInput::RigidMotion { pair, motion }) => {
            let moved = pair.with_frames(pair.a().frame.composed_with(motion)?, pair.b().frame.composed_with(motion)?)?;
            let (a0, a1) = (solve_min_scaling(pair)?.alpha, solve_min_scaling(&moved)?.alpha);
            Ok(vec![Measurement::below("rigid_invariance", (a0 - a1).abs() / a0.abs().max(1.0), TOL_RIGID)])
        }
        (Suite::Invariance, CaseInput::SmoothMin { values, eta, phi0 }) => {
            let m = smooth_min(values, *eta, *phi0)?;
            let hmin = values.iter().copied().fold(f64::INFINITY, f64::min);
            let lo = hmin - (values.len() as f64).ln() / eta;
            let excess = (m.phi + phi0 - hmin).max(lo - (m.phi + phi0)).max(0.0);
            Ok(vec![Measurement::at_most("smooth_min_sandwich", excess, TOL_SANDWICH)])
        }
        (s, _) => Err(Error::Config(format!("suite {} does not take this case input", s.name()))),
    }
}

fn random_motion(rng: &mut ChaCha8Rng, dim: usize) -> FrameParams {
    if dim == 2 {
        FrameParams::planar(rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0))
    } else {
        let q = random_unit(rng, 4);
        FrameParams::spatial([rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0)], [q[0], q[1], q[2], q[3]])
    }
}

/// Case inputs of one shard.
fn draw(suite: Suite, shard: usize, seed: u64, count: usize) -> Result<(String, Vec<CaseInput>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let kind = SampleKind::ALL[shard / 2];
    let dim = 2 + shard % 2;
    let mut inputs = Vec::with_capacity(count);
    match suite {
        Suite::Gradients | Suite::Hessians => {
            for _ in 0..count {
                inputs.push(CaseInput::Pair { pair: random_pair(&mut rng, kind, dim)? });
            }
            Ok((shard_name(kind, dim), inputs))
        }
        Suite::Closedform => {
            // Shards 0 and 1 only: ellipsoid pairs in 2D and 3D.
            for _ in 0..count {
                inputs.push(CaseInput::Pair { pair: random_pair(&mut rng, SampleKind::EllipsoidEllipsoid, dim)? });
            }
            Ok((shard_name(SampleKind::EllipsoidEllipsoid, dim), inputs))
        }
        Suite::Invariance => {
            for _ in 0..count {
                let pair = random_pair(&mut rng, kind, dim)?;
                inputs.push(CaseInput::Pair { pair: pair.clone() });
                inputs.push(CaseInput::RigidMotion { pair, motion: random_motion(&mut rng, dim) });
                let k = rng.gen_range(1..=8);
                let values = (0..k).map(|_| rng.gen_range(-5.0..20.0)).collect();
                inputs.push(CaseInput::SmoothMin { values, eta: rng.gen_range(0.1..50.0), phi0: rng.gen_range(0.0..1.0) });
            }
            Ok((shard_name(kind, dim), inputs))
        }
        Suite::All => unreachable!("expanded before drawing"),
    }
}

fn shards(suite: Suite) -> usize {
    match suite {
        Suite::Closedform => 2,
        _ => 2 * SampleKind::ALL.len(),
    }
}

fn run_shard(suite: Suite, shard: usize, root: u64, count: usize) -> Vec<Case> {
    let seed = shard_seed(root, suite, shard);
    let (name, inputs) = match draw(suite, shard, seed, count) {
        Ok(x) => x,
        Err(e) => {
            log::error!("{} shard {shard}: sampling failed: {e}", suite.name());
            return vec![Case {
                shard: format!("shard{shard}"),
                index: 0,
                input: CaseInput::SmoothMin { values: vec![], eta: 1.0, phi0: 0.0 },
                measurements: vec![Measurement::below("sampling", f64::NAN, 0.0)],
            }];
        }
    };
    inputs
        .into_iter()
        .enumerate()
        .map(|(index, input)| {
            let measurements = measure(suite, &input).unwrap_or_else(|e| {
                log::warn!("{} {name} case {index}: {e}", suite.name());
                vec![Measurement::below("solver_error", f64::NAN, 0.0)]
            });
            Case { shard: name.clone(), index, input, measurements }
        })
        .collect()
}

/// Runs `suite` with `count` cases per shard, shards in parallel threads.
pub fn run_check(suite: Suite, seed: u64, count: usize) -> CheckReport {
    let mut metrics = Vec::new();
    let mut failures = Vec::new();
    for s in suite.expand() {
        let cases: Vec<Case> = std::thread::scope(|scope| {
            let handles: Vec<_> = (0..shards(s)).map(|k| scope.spawn(move || run_shard(s, k, seed, count))).collect();
            handles.into_iter().flat_map(|h| h.join().expect("check shard panicked")).collect()
        });
        let mut by_metric: Vec<MetricReport> = Vec::new();
        for case in &cases {
            for m in &case.measurements {
                let entry = match by_metric.iter_mut().find(|r| r.metric == m.metric) {
                    Some(e) => e,
                    None => {
                        by_metric.push(MetricReport {
                            suite: s,
                            metric: m.metric.clone(),
                            threshold: m.threshold,
                            cases: 0,
                            max: 0.0,
                            passed: true,
                            worst: Vec::new(),
                        });
                        by_metric.last_mut().expect("just pushed")
                    }
                };
                entry.cases += 1;
                entry.max = if m.value.is_nan() || entry.max.is_nan() { f64::NAN } else { entry.max.max(m.value) };
                entry.passed &= m.passed();
                entry.worst.push(Offender { shard: case.shard.clone(), index: case.index, value: m.value });
            }
            if case.measurements.iter().any(|m| !m.passed()) {
                failures.push(FailureDump {
                    suite: s,
                    shard: case.shard.clone(),
                    index: case.index,
                    root_seed: seed,
                    input: case.input.clone(),
                    measurements: case.measurements.clone(),
                });
            }
        }
        for r in &mut by_metric {
            // NaN sorts first: a failed solve is the worst offender.
            r.worst.sort_by(|a, b| match (a.value.is_nan(), b.value.is_nan()) {
                (true, false) => std::cmp::Ordering::Less,
                (false, true) => std::cmp::Ordering::Greater,
                _ => b.value.total_cmp(&a.value),
            });
            r.worst.truncate(WORST);
        }
        metrics.extend(by_metric);
    }
    let passed = metrics.iter().all(|m| m.passed);
    CheckReport { seed, count, passed, metrics, failures }
}

/// Recomputes a dumped case; returns fresh measurements.
pub fn replay(dump: &FailureDump) -> Result<Vec<Measurement>> {
    measure(dump.suite, &dump.input)
}
