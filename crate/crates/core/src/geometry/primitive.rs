use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::Tensor3;

/// Largest accepted polytope sharpness. Larger values make the Hessian,
/// which scales with `κ`, too ill-conditioned for the sensitivity solves.
pub const MAX_KAPPA: f64 = 200.0;

/// `{q : aᵀq + b ≤ 1}` with scaling function `aᵀq + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Halfspace {
    a: DVector<f64>,
    b: f64,
}

/// Log-sum-exp padding of `{q : a_iᵀq + b_i ≤ 0 ∀i}` with sharpness `κ`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothPolytope {
    /// One row per face.
    normals: DMatrix<f64>,
    offsets: DVector<f64>,
    kappa: f64,
    /// Minimiser of the scaling function, computed once at construction.
    deepest: DVector<f64>,
    min_value: f64,
}

/// `{q : (q − μ)ᵀP(q − μ) ≤ 1}`.
#[derive(Debug, Clone, PartialEq)]
pub struct Ellipsoid {
    shape: DMatrix<f64>,
    center: DVector<f64>,
}

/// A convex body described by its body-frame scaling function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawPrimitive", into = "RawPrimitive")]
pub enum ScalingPrimitive {
    Halfspace(Halfspace),
    Polytope(SmoothPolytope),
    Ellipsoid(Ellipsoid),
}

/// Body-frame value and derivatives up to the requested order.
#[derive(Debug, Clone)]
pub struct BodyJet {
    pub value: f64,
    pub grad: Option<DVector<f64>>,
    pub hess: Option<DMatrix<f64>>,
    pub third: Option<Tensor3>,
}

fn check_finite(values: impl IntoIterator<Item = f64>, what: &str) -> Result<()> {
    if values.into_iter().all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::InvalidPrimitive(format!("{what} has non-finite entries")))
    }
}

fn check_space_dim(n: usize) -> Result<()> {
    if n == 2 || n == 3 {
        Ok(())
    } else {
        Err(Error::InvalidPrimitive(format!("dimension must be 2 or 3, got {n}")))
    }
}

impl Halfspace {
    pub fn new(a: DVector<f64>, b: f64) -> Result<Self> {
        check_space_dim(a.len())?;
        check_finite(a.iter().copied().chain([b]), "halfspace")?;
        if a.norm() == 0.0 {
            return Err(Error::InvalidPrimitive("halfspace normal is zero".into()));
        }
        Ok(Self { a, b })
    }

    pub fn normal(&self) -> &DVector<f64> {
        &self.a
    }

    pub fn offset(&self) -> f64 {
        self.b
    }
}

impl Ellipsoid {
    pub fn new(shape: DMatrix<f64>, center: DVector<f64>) -> Result<Self> {
        let n = center.len();
        check_space_dim(n)?;
        if shape.nrows() != n || shape.ncols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: shape.nrows() });
        }
        check_finite(shape.iter().chain(center.iter()).copied(), "ellipsoid")?;
        let scale = shape.amax().max(f64::MIN_POSITIVE);
        if crate::linalg::asymmetry(&shape) > 1e-12 * scale {
            return Err(Error::InvalidPrimitive("ellipsoid shape matrix is not symmetric".into()));
        }
        let shape = crate::linalg::symmetrize(&shape);
        let min_eig = shape.clone().symmetric_eigenvalues().min();
        if min_eig <= 0.0 || shape.clone().cholesky().is_none() {
            return Err(Error::InvalidPrimitive(format!("ellipsoid shape matrix is not positive definite (min eigenvalue {min_eig:.3e})")));
        }
        Ok(Self { shape, center })
    }

    /// Ellipsoid with the given semi-axis lengths along the body axes.
    pub fn axis_aligned(semi_axes: &[f64], center: &[f64]) -> Result<Self> {
        if semi_axes.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidPrimitive("semi-axes must be positive".into()));
        }
        let shape = DMatrix::from_diagonal(&DVector::from_iterator(semi_axes.len(), semi_axes.iter().map(|r| 1.0 / (r * r))));
        Self::new(shape, DVector::from_column_slice(center))
    }

    pub fn ball(radius: f64, center: &[f64]) -> Result<Self> {
        Self::axis_aligned(&vec![radius; center.len()], center)
    }

    pub fn shape(&self) -> &DMatrix<f64> {
        &self.shape
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.center
    }
}

impl SmoothPolytope {
    /// Rows of `normals` are the face normals `a_iᵀ`.
    pub fn new(normals: DMatrix<f64>, offsets: DVector<f64>, kappa: f64) -> Result<Self> {
        let n = normals.ncols();
        check_space_dim(n)?;
        if normals.nrows() != offsets.len() {
            return Err(Error::DimensionMismatch { expected: normals.nrows(), got: offsets.len() });
        }
        if normals.nrows() < n + 1 {
            return Err(Error::InvalidPrimitive(format!("polytope needs at least {} faces, got {}", n + 1, normals.nrows())));
        }
        check_finite(normals.iter().chain(offsets.iter()).copied(), "polytope")?;
        if !(kappa.is_finite() && kappa > 0.0) {
            return Err(Error::InvalidPrimitive(format!("sharpness must be positive, got {kappa}")));
        }
        if kappa > MAX_KAPPA {
            return Err(Error::InvalidPrimitive(format!("sharpness {kappa} exceeds the supported maximum {MAX_KAPPA}")));
        }
        if normals.row_iter().any(|r| r.norm() == 0.0) {
            return Err(Error::InvalidPrimitive("polytope has a zero normal".into()));
        }
        let mut poly = Self { normals, offsets, kappa, deepest: DVector::zeros(n), min_value: f64::NAN };
        let (q, v) = poly.minimize()?;
        if v >= 1.0 {
            return Err(Error::InvalidPrimitive("polytope scaling function never drops below one".into()));
        }
        poly.deepest = q;
        poly.min_value = v;
        Ok(poly)
    }

    /// Axis-aligned box with the given half-widths, centred at `center`.
    pub fn axis_box(half_widths: &[f64], center: &[f64], kappa: f64) -> Result<Self> {
        let n = half_widths.len();
        if center.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: center.len() });
        }
        let mut normals = DMatrix::zeros(2 * n, n);
        let mut offsets = DVector::zeros(2 * n);
        for i in 0..n {
            normals[(2 * i, i)] = 1.0;
            offsets[2 * i] = -center[i] - half_widths[i];
            normals[(2 * i + 1, i)] = -1.0;
            offsets[2 * i + 1] = center[i] - half_widths[i];
        }
        Self::new(normals, offsets, kappa)
    }

    pub fn normals(&self) -> &DMatrix<f64> {
        &self.normals
    }

    pub fn offsets(&self) -> &DVector<f64> {
        &self.offsets
    }

    pub fn kappa(&self) -> f64 {
        self.kappa
    }

    pub fn deepest_point(&self) -> &DVector<f64> {
        &self.deepest
    }

    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    /// Largest face residual `max_i a_iᵀq + b_i`.
    pub fn max_residual(&self, q: &DVector<f64>) -> f64 {
        (&self.normals * q + &self.offsets).max()
    }

    fn eval(&self, q: &DVector<f64>, order: usize) -> BodyJet {
        let n = q.len();
        let s = &self.normals * q + &self.offsets;
        let c = s.max();
        let k = self.kappa;
        let e = s.map(|si| (k * (si - c)).exp());
        let total = e.sum();
        let value = c + (total / s.len() as f64).ln() / k + 1.0;
        let mut jet = BodyJet { value, grad: None, hess: None, third: None };
        if order == 0 {
            return jet;
        }
        let w = e / total;
        let g = self.normals.tr_mul(&w);
        if order >= 2 {
            // κ Σ w_i (a_i − ḡ)(a_i − ḡ)ᵀ
            let mut h = DMatrix::zeros(n, n);
            let mut t = if order >= 3 { Some(Tensor3::zeros(n, n, n)) } else { None };
            for (i, row) in self.normals.row_iter().enumerate() {
                let d = row.transpose() - &g;
                h.ger(k * w[i], &d, &d, 1.0);
                if let Some(t) = t.as_mut() {
                    let c3 = k * k * w[i];
                    for a in 0..n {
                        for b in 0..n {
                            for cc in 0..n {
                                t.add(a, b, cc, c3 * d[a] * d[b] * d[cc]);
                            }
                        }
                    }
                }
            }
            jet.hess = Some(crate::linalg::symmetrize(&h));
            jet.third = t;
        }
        jet.grad = Some(g);
        jet
    }

    /// Damped Newton on the body-frame scaling function.
    fn minimize(&self) -> Result<(DVector<f64>, f64)> {
        let n = self.normals.ncols();
        let gram = self.normals.tr_mul(&self.normals);
        if gram.clone().symmetric_eigenvalues().min() <= 1e-12 * gram.amax() {
            return Err(Error::InvalidPrimitive("polytope normals do not span the space".into()));
        }
        let scale = 1.0 + self.offsets.amax() / self.normals.row_iter().map(|r| r.norm()).fold(f64::INFINITY, f64::min);
        let mut q = DVector::zeros(n);
        let mut jet = self.eval(&q, 2);
        for iter in 0..500 {
            let g = jet.grad.as_ref().unwrap();
            let gscale = 1.0 + self.normals.amax();
            if g.amax() <= 1e-13 * gscale {
                return Ok((q, jet.value));
            }
            let h = jet.hess.as_ref().unwrap();
            let reg = 1e-14 * (1.0 + h.amax());
            let hr = h + DMatrix::identity(n, n) * reg;
            let step = match hr.cholesky() {
                Some(ch) => -ch.solve(g),
                None => -g.clone(),
            };
            let slope = g.dot(&step);
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let cand = &q + &step * t;
                let cj = self.eval(&cand, 2);
                if cj.value <= jet.value + 1e-4 * t * slope || (cj.value - jet.value).abs() <= 1e-15 * jet.value.abs().max(1.0) {
                    q = cand;
                    jet = cj;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted || q.amax() > 1e6 * scale {
                return Err(Error::InvalidPrimitive(format!("polytope appears unbounded (no minimiser found after {iter} iterations)")));
            }
        }
        Err(Error::InvalidPrimitive("polytope minimiser did not converge; is it bounded?".into()))
    }
}

impl ScalingPrimitive {
    pub fn dim(&self) -> usize {
        match self {
            ScalingPrimitive::Halfspace(h) => h.a.len(),
            ScalingPrimitive::Polytope(p) => p.normals.ncols(),
            ScalingPrimitive::Ellipsoid(e) => e.center.len(),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ScalingPrimitive::Halfspace(_) => "halfspace",
            ScalingPrimitive::Polytope(_) => "polytope",
            ScalingPrimitive::Ellipsoid(_) => "ellipsoid",
        }
    }

    pub fn as_ellipsoid(&self) -> Option<&Ellipsoid> {
        match self {
            ScalingPrimitive::Ellipsoid(e) => Some(e),
            _ => None,
        }
    }

    /// Body-frame minimiser of the scaling function; `None` for halfspaces.
    pub fn interior_point(&self) -> Option<DVector<f64>> {
        match self {
            ScalingPrimitive::Halfspace(_) => None,
            ScalingPrimitive::Polytope(p) => Some(p.deepest.clone()),
            ScalingPrimitive::Ellipsoid(e) => Some(e.center.clone()),
        }
    }

    /// Body-frame value and derivatives, `order ≤ 3`.
    pub fn eval_body(&self, q: &DVector<f64>, order: usize) -> Result<BodyJet> {
        if order > 3 {
            return Err(Error::InvalidOrder(order));
        }
        crate::error::check_dim(self.dim(), q.len())?;
        let n = q.len();
        Ok(match self {
            ScalingPrimitive::Halfspace(h) => BodyJet {
                value: h.a.dot(q) + h.b,
                grad: (order >= 1).then(|| h.a.clone()),
                hess: (order >= 2).then(|| DMatrix::zeros(n, n)),
                third: (order >= 3).then(|| Tensor3::zeros(n, n, n)),
            },
            ScalingPrimitive::Polytope(p) => p.eval(q, order),
            ScalingPrimitive::Ellipsoid(e) => {
                let d = q - &e.center;
                let pd = &e.shape * &d;
                BodyJet {
                    value: d.dot(&pd),
                    grad: (order >= 1).then(|| pd * 2.0),
                    hess: (order >= 2).then(|| &e.shape * 2.0),
                    third: (order >= 3).then(|| Tensor3::zeros(n, n, n)),
                }
            }
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase", deny_unknown_fields)]
enum RawPrimitive {
    Halfspace { a: Vec<f64>, b: f64 },
    Polytope { rows: Vec<RawRow>, kappa: f64 },
    Ellipsoid { shape: Vec<Vec<f64>>, center: Vec<f64> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRow {
    a: Vec<f64>,
    b: f64,
}

impl TryFrom<RawPrimitive> for ScalingPrimitive {
    type Error = Error;

    fn try_from(raw: RawPrimitive) -> Result<Self> {
        match raw {
            RawPrimitive::Halfspace { a, b } => Ok(Self::Halfspace(Halfspace::new(DVector::from_vec(a), b)?)),
            RawPrimitive::Polytope { rows, kappa } => {
                let n = rows.first().map(|r| r.a.len()).unwrap_or(0);
                if rows.iter().any(|r| r.a.len() != n) {
                    return Err(Error::InvalidPrimitive("polytope rows have differing lengths".into()));
                }
                let normals = DMatrix::from_fn(rows.len(), n, |i, j| rows[i].a[j]);
                let offsets = DVector::from_iterator(rows.len(), rows.iter().map(|r| r.b));
                Ok(Self::Polytope(SmoothPolytope::new(normals, offsets, kappa)?))
            }
            RawPrimitive::Ellipsoid { shape, center } => {
                let n = center.len();
                if shape.len() != n || shape.iter().any(|r| r.len() != n) {
                    return Err(Error::InvalidPrimitive("ellipsoid shape must be square and match the center".into()));
                }
                let m = DMatrix::from_fn(n, n, |i, j| shape[i][j]);
                Ok(Self::Ellipsoid(Ellipsoid::new(m, DVector::from_vec(center))?))
            }
        }
    }
}

impl From<ScalingPrimitive> for RawPrimitive {
    fn from(p: ScalingPrimitive) -> Self {
        match p {
            ScalingPrimitive::Halfspace(h) => RawPrimitive::Halfspace { a: h.a.as_slice().to_vec(), b: h.b },
            ScalingPrimitive::Polytope(p) => RawPrimitive::Polytope {
                rows: p.normals.row_iter().zip(p.offsets.iter()).map(|(r, b)| RawRow { a: r.iter().copied().collect(), b: *b }).collect(),
                kappa: p.kappa,
            },
            ScalingPrimitive::Ellipsoid(e) => {
                RawPrimitive::Ellipsoid { shape: e.shape.row_iter().map(|r| r.iter().copied().collect()).collect(), center: e.center.as_slice().to_vec() }
            }
        }
    }
}
