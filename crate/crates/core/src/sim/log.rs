use std::io::{Read, Write};

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::qp::QpStatus;
use crate::safety::RowKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub q: DVector<f64>,
    pub v: DVector<f64>,
    pub u_nominal: DVector<f64>,
    pub u_filtered: DVector<f64>,
    pub h: Vec<f64>,
    pub psi1: Vec<f64>,
    pub phi: f64,
    pub equilibrium_distance: f64,
    pub active: Vec<RowKind>,
    pub qp_status: QpStatus,
    pub qp_iterations: usize,
    /// The fallback input was applied because the filter failed.
    pub violation: bool,
    pub qp_time_us: f64,
    pub sensitivity_time_us: f64,
}

impl StepRecord {
    pub fn h_min(&self) -> f64 {
        self.h.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Equal up to wall-clock timings.
    pub fn same_state(&self, other: &StepRecord) -> bool {
        let strip = |r: &StepRecord| StepRecord { qp_time_us: 0.0, sensitivity_time_us: 0.0, ..r.clone() };
        strip(self) == strip(other)
    }
}

/// Per-step records on a uniform time grid, the last one at the final state.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryLog {
    pub scenario: String,
    pub dt: f64,
    pub records: Vec<StepRecord>,
    pub halted: bool,
    pub halt_reason: Option<String>,
}

impl TrajectoryLog {
    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn min_h(&self) -> f64 {
        self.records.iter().map(StepRecord::h_min).fold(f64::INFINITY, f64::min)
    }

    pub fn all_optimal(&self) -> bool {
        self.records.iter().all(|r| r.qp_status == QpStatus::Optimal && !r.violation)
    }

    /// `max_k ‖u_{k+1} − u_k‖∞` of the filtered control.
    pub fn max_control_jump(&self) -> f64 {
        self.records.windows(2).map(|w| (&w[1].u_filtered - &w[0].u_filtered).amax()).fold(0.0, f64::max)
    }

    pub fn same_trajectory(&self, other: &TrajectoryLog) -> bool {
        self.records.len() == other.records.len() && self.records.iter().zip(&other.records).all(|(a, b)| a.same_state(b))
    }

    pub fn header(n_q: usize, n_v: usize, n_u: usize, k: usize) -> Vec<String> {
        let mut cols = vec!["t".to_string()];
        cols.extend((1..=n_q).map(|i| format!("q_{i}")));
        cols.extend((1..=n_v).map(|i| format!("v_{i}")));
        cols.extend((1..=n_u).map(|i| format!("u_nominal_{i}")));
        cols.extend((1..=n_u).map(|i| format!("u_filtered_{i}")));
        cols.extend((1..=k).map(|i| format!("h_{i}")));
        cols.extend(["phi", "qp_status", "qp_time_us"].map(String::from));
        cols
    }

    /// CSV with `.` decimals; floats use the shortest round-trip form.
    pub fn write_csv<W: Write>(&self, n_q: usize, n_v: usize, n_u: usize, k: usize, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(Self::header(n_q, n_v, n_u, k)).map_err(csv_err)?;
        for r in &self.records {
            let mut row: Vec<String> = vec![r.t.to_string()];
            row.extend(r.q.iter().chain(r.v.iter()).chain(r.u_nominal.iter()).chain(r.u_filtered.iter()).map(|x| x.to_string()));
            row.extend(r.h.iter().map(|x| x.to_string()));
            row.push(r.phi.to_string());
            row.push(status_name(r.qp_status).to_string());
            row.push(format!("{:.3}", r.qp_time_us));
            w.write_record(&row).map_err(csv_err)?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn status_name(s: QpStatus) -> &'static str {
    match s {
        QpStatus::Optimal => "optimal",
        QpStatus::Infeasible => "infeasible",
        QpStatus::IterationLimit => "iteration_limit",
    }
}

fn csv_err(e: csv::Error) -> Error {
    Error::Schema(e.to_string())
}

/// Columns of a trajectory CSV by name.
#[derive(Debug, Clone, Default)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn read<R: Read>(input: R) -> Result<Self> {
        let mut r = csv::ReaderBuilder::new().has_headers(false).flexible(false).from_reader(input);
        let mut it = r.records();
        let header = match it.next() {
            None => return Ok(CsvTable::default()),
            Some(h) => h.map_err(csv_err)?.iter().map(String::from).collect(),
        };
        let rows = it.map(|rec| rec.map(|r| r.iter().map(String::from).collect()).map_err(csv_err)).collect::<Result<_>>()?;
        Ok(CsvTable { header, rows })
    }

    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self.header.iter().position(|h| h == name).ok_or_else(|| Error::Schema(format!("missing column `{name}`")))?;
        self.rows.iter().map(|r| r[idx].parse::<f64>().map_err(|e| Error::Schema(format!("column `{name}`: {e}")))).collect()
    }

    /// Names starting with `prefix` followed by a 1-based index, in order.
    pub fn indexed(&self, prefix: &str) -> Vec<String> {
        (1..).map(|i| format!("{prefix}{i}")).take_while(|n| self.header.contains(n)).collect()
    }
}
