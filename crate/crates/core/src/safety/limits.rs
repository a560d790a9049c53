use nalgebra::DVector;

use super::row::{ConstraintRow, HocbfGains, RowKind};
use crate::error::{check_dim, Result};

/// `ḣ ≥ −γh` for an affine limit `h` whose rate is `ḣ = c + dᵀu`.
pub fn first_order_row(h: f64, c: f64, d: DVector<f64>, gamma: f64) -> ConstraintRow {
    ConstraintRow::hard(d, -gamma * h - c, RowKind::FirstOrderLimit)
}

/// Rows keeping `lo ≤ v ≤ hi` componentwise under `v̇ = u`. Infinite bounds
/// produce no row.
pub fn velocity_limit_rows(v: &DVector<f64>, lower: &[f64], upper: &[f64], gamma: f64) -> Result<Vec<ConstraintRow>> {
    check_dim(v.len(), lower.len())?;
    check_dim(v.len(), upper.len())?;
    let n = v.len();
    let mut rows = Vec::new();
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        if upper[i].is_finite() {
            rows.push(first_order_row(upper[i] - v[i], 0.0, -&e, gamma));
        }
        if lower[i].is_finite() {
            rows.push(first_order_row(v[i] - lower[i], 0.0, e, gamma));
        }
    }
    Ok(rows)
}

/// Second-order rows keeping `lo ≤ q ≤ hi` under `q̈ = u`, by the same
/// cascade as the barrier rows.
pub fn position_limit_rows(q: &DVector<f64>, v: &DVector<f64>, lower: &[f64], upper: &[f64], gains: &HocbfGains) -> Result<Vec<ConstraintRow>> {
    check_dim(q.len(), v.len())?;
    check_dim(q.len(), lower.len())?;
    check_dim(q.len(), upper.len())?;
    let n = q.len();
    let (g1, g2) = (gains.gamma1, gains.gamma2);
    let mut rows = Vec::new();
    for i in 0..n {
        let mut e = DVector::zeros(n);
        e[i] = 1.0;
        for (h, h_dot, sign) in [(upper[i] - q[i], -v[i], -1.0), (q[i] - lower[i], v[i], 1.0)] {
            if h.is_finite() {
                rows.push(ConstraintRow::hard(&e * sign, -(g1 + g2) * h_dot - g1 * g2 * h, RowKind::FirstOrderLimit));
            }
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tight_upper_bound_forbids_acceleration() {
        let rows = velocity_limit_rows(&DVector::from_vec(vec![2.0]), &[f64::NEG_INFINITY], &[2.0], 10.0).unwrap();
        assert_eq!(rows.len(), 1);
        // −u ≥ 0
        assert_eq!(rows[0].a[0], -1.0);
        assert_eq!(rows[0].b, 0.0);
    }

    #[test]
    fn symmetric_bounds_at_rest_are_slack() {
        let rows = velocity_limit_rows(&DVector::zeros(1), &[-2.0], &[2.0], 10.0).unwrap();
        for r in &rows {
            assert_eq!(r.margin(&DVector::zeros(1)), 20.0);
        }
    }
}
