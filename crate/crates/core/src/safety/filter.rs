use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::row::ConstraintRow;
use crate::error::{check_dim, Error, Result};
use crate::qp::{solve_qp, QpProblem, QpSolution};

/// `min ‖u − u_n‖² + Σ w_s δ_s²` subject to hard rows, slack-relaxed soft
/// rows `aᵀu + δ ≥ b` and an input box.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SafetyFilterProblem {
    pub nominal: DVector<f64>,
    pub rows: Vec<ConstraintRow>,
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    /// Rows dropped because `‖a‖` vanished.
    pub dropped: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FilterSolution {
    pub u: DVector<f64>,
    /// One slack per soft row, in row order.
    pub slacks: Vec<f64>,
    /// Indices into `rows` of active constraints.
    pub active_rows: Vec<usize>,
    pub qp: QpSolution,
}

/// Builds the filter; degenerate rows are dropped with a warning.
pub fn assemble_filter(nominal: &DVector<f64>, rows: Vec<ConstraintRow>, input_box: Option<(DVector<f64>, DVector<f64>)>) -> Result<SafetyFilterProblem> {
    let n = nominal.len();
    let (lower, upper) = match input_box {
        Some((lo, hi)) => {
            check_dim(n, lo.len())?;
            check_dim(n, hi.len())?;
            if lo.iter().zip(hi.iter()).any(|(l, h)| !(l <= h)) {
                return Err(Error::Precondition("input box is empty".into()));
            }
            (lo, hi)
        }
        None => (DVector::from_element(n, f64::NEG_INFINITY), DVector::from_element(n, f64::INFINITY)),
    };
    let mut kept = Vec::with_capacity(rows.len());
    let mut dropped = 0;
    for row in rows {
        check_dim(n, row.a.len())?;
        if !row.is_finite() {
            return Err(Error::Precondition(format!("non-finite {:?} row", row.kind)));
        }
        if row.is_degenerate() {
            log::warn!("dropping degenerate {:?} row (b = {:.3e})", row.kind, row.b);
            dropped += 1;
            continue;
        }
        kept.push(row);
    }
    Ok(SafetyFilterProblem { nominal: nominal.clone(), rows: kept, lower, upper, dropped })
}

impl SafetyFilterProblem {
    pub fn n_slack(&self) -> usize {
        self.rows.iter().filter(|r| r.soft.is_some()).count()
    }

    /// Halved objective `½‖u‖² − u_nᵀu + ½Σ w_s δ_s²` over `[u; δ]`.
    pub fn to_qp(&self) -> QpProblem {
        let n = self.nominal.len();
        let ns = self.n_slack();
        let dim = n + ns;
        let mut h = DMatrix::identity(dim, dim);
        let mut f = DVector::zeros(dim);
        f.rows_mut(0, n).copy_from(&(-&self.nominal));
        let mut g_rows = DMatrix::zeros(self.rows.len(), dim);
        let mut g = DVector::zeros(self.rows.len());
        let mut s = 0;
        for (i, row) in self.rows.iter().enumerate() {
            g_rows.view_mut((i, 0), (1, n)).copy_from(&row.a.transpose());
            g[i] = row.b;
            if let Some(w) = row.soft {
                h[(n + s, n + s)] = w;
                g_rows[(i, n + s)] = 1.0;
                s += 1;
            }
        }
        let mut lower = DVector::from_element(dim, f64::NEG_INFINITY);
        let mut upper = DVector::from_element(dim, f64::INFINITY);
        lower.rows_mut(0, n).copy_from(&self.lower);
        upper.rows_mut(0, n).copy_from(&self.upper);
        QpProblem { h, f, g_rows, g, lower, upper }
    }

    pub fn solve(&self) -> Result<FilterSolution> {
        let n = self.nominal.len();
        let qp = solve_qp(&self.to_qp())?;
        let u = qp.u.rows(0, n).into_owned();
        let slacks = qp.u.iter().skip(n).copied().collect();
        let active_rows = qp.active.iter().copied().filter(|&j| j < self.rows.len()).collect();
        Ok(FilterSolution { u, slacks, active_rows, qp })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::safety::RowKind;

    fn v(x: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(x)
    }

    #[test]
    fn no_rows_clamps_nominal() {
        let p = assemble_filter(&v(&[3.0, -0.5]), vec![], Some((v(&[-1.0, -1.0]), v(&[1.0, 1.0])))).unwrap();
        let s = p.solve().unwrap();
        assert_eq!(s.u.as_slice(), &[1.0, -0.5]);
    }

    #[test]
    fn single_violated_row_is_a_projection() {
        let un = v(&[0.3, -1.2]);
        let a = v(&[1.0, 2.0]);
        let b = 0.5;
        let p = assemble_filter(&un, vec![ConstraintRow::hard(a.clone(), b, RowKind::Hocbf)], None).unwrap();
        let s = p.solve().unwrap();
        let expected = &un - &a * ((a.dot(&un) - b).min(0.0) / a.norm_squared());
        assert!((s.u - expected).amax() < 1e-14);
    }

    #[test]
    fn soft_row_yields_to_hard_row() {
        // hard: u₁ ≤ 0 ; soft (w = 100): u₁ ≥ 1 ; nominal 0.
        // KKT: u₁ = 0, δ = 1.
        let rows = vec![
            ConstraintRow::hard(v(&[-1.0, 0.0]), 0.0, RowKind::Hocbf),
            ConstraintRow::hard(v(&[1.0, 0.0]), 1.0, RowKind::Circulation).softened(100.0).unwrap(),
        ];
        let p = assemble_filter(&v(&[0.0, 0.0]), rows, None).unwrap();
        let s = p.solve().unwrap();
        assert!(s.qp.is_optimal());
        assert!(s.u[0].abs() < 1e-14);
        assert!((s.slacks[0] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn soft_row_alone_is_partially_relaxed() {
        // min u² + 100δ² s.t. u + δ ≥ 1 → u = 100/101, δ = 1/101.
        let rows = vec![ConstraintRow::hard(v(&[1.0]), 1.0, RowKind::Circulation).softened(100.0).unwrap()];
        let s = assemble_filter(&v(&[0.0]), rows, None).unwrap().solve().unwrap();
        assert!((s.u[0] - 100.0 / 101.0).abs() < 1e-14);
        assert!((s.slacks[0] - 1.0 / 101.0).abs() < 1e-14);
    }

    #[test]
    fn degenerate_rows_are_dropped() {
        let rows = vec![ConstraintRow::hard(v(&[0.0, 0.0]), 1.0, RowKind::Hocbf)];
        let p = assemble_filter(&v(&[1.0, 1.0]), rows, None).unwrap();
        assert_eq!(p.dropped, 1);
        assert_eq!(p.solve().unwrap().u.as_slice(), &[1.0, 1.0]);
    }
}
