use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::bounds::BoundReport;

pub const CSV_HEADER: &str = "iter,robot_iters,covered_cells,coverage_m3,objective_value,online_bound,oblivious_bound,online_ratio,oblivious_ratio,best_ratio,plan_wall_ms";

/// One row of the run log. Bound fields are NaN when bounds are not computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub iteration: usize,
    pub robot_iterations: usize,
    pub covered_cells: usize,
    pub coverage_m3: f64,
    pub objective_value: f64,
    pub online_bound: f64,
    pub oblivious_bound: f64,
    pub online_ratio: f64,
    pub oblivious_ratio: f64,
    pub best_ratio: f64,
    pub plan_wall_ms: f64,
}

impl MetricsRecord {
    pub fn set_bounds(&mut self, b: &BoundReport<f64>) {
        self.online_bound = b.online_bound;
        self.oblivious_bound = b.oblivious_bound;
        self.online_ratio = b.online_ratio;
        self.oblivious_ratio = b.oblivious_ratio;
        self.best_ratio = b.best_ratio;
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.iteration,
            self.robot_iterations,
            self.covered_cells,
            self.coverage_m3,
            self.objective_value,
            self.online_bound,
            self.oblivious_bound,
            self.online_ratio,
            self.oblivious_ratio,
            self.best_ratio,
            self.plan_wall_ms
        )
    }
}

/// Header plus one line per record, newline terminated.
pub fn write_csv(records: &[MetricsRecord]) -> String {
    let mut out = String::with_capacity(64 * (records.len() + 1));
    out.push_str(CSV_HEADER);
    out.push('\n');
    for r in records {
        writeln!(out, "{}", r.csv_row()).unwrap();
    }
    out
}
