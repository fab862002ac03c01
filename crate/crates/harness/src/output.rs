//! CSV rows and the JSON run summary.

use std::path::Path;

use grpdal_core::algorithms::IterationRow;
use serde::{Deserialize, Serialize};

use crate::HarnessError;

/// Bumped whenever the CSV columns change.
pub const SCHEMA_VERSION: u32 = 1;

/// One CSV line. Column order is the field order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub solver: String,
    pub seed: u64,
    pub k: usize,
    pub objective: Option<f64>,
    pub primal_gap: Option<f64>,
    pub dual_gap: Option<f64>,
    pub gap: Option<f64>,
    pub ergodic_gap: Option<f64>,
    pub tau: f64,
    pub beta: f64,
    pub extra_trials: usize,
    pub dual_evaluations: usize,
    pub primal_inner: usize,
    pub dual_inner: usize,
    pub delta_achieved: f64,
    pub delta_scheduled: f64,
    pub eps_achieved: f64,
    pub eps_scheduled: f64,
    /// Seconds since the solver started; empty under `--no-timing`.
    pub wall_time: Option<f64>,
}

impl ResultRow {
    pub fn from_iteration(solver: &str, seed: u64, row: &IterationRow, wall_time: Option<f64>) -> Self {
        ResultRow {
            solver: solver.to_string(),
            seed,
            k: row.k,
            objective: row.objective,
            primal_gap: row.primal_gap,
            dual_gap: row.dual_gap,
            gap: row.gap,
            ergodic_gap: row.ergodic_gap,
            tau: row.tau,
            beta: row.beta,
            extra_trials: row.extra_trials,
            dual_evaluations: row.dual_evaluations,
            primal_inner: row.primal_inner,
            dual_inner: row.dual_inner,
            delta_achieved: row.delta_achieved,
            delta_scheduled: row.delta_scheduled,
            eps_achieved: row.eps_achieved,
            eps_scheduled: row.eps_scheduled,
            wall_time,
        }
    }
}

pub fn write_rows(path: &Path, rows: &[ResultRow]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    if rows.is_empty() {
        // keep the header even for an empty run
        w.write_record(csv_header())?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>, HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != csv_header() {
        return Err(HarnessError::Schema(format!(
            "unexpected CSV header in {}: {header:?}",
            path.display()
        )));
    }
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

pub fn csv_header() -> Vec<String> {
    [
        "solver",
        "seed",
        "k",
        "objective",
        "primal_gap",
        "dual_gap",
        "gap",
        "ergodic_gap",
        "tau",
        "beta",
        "extra_trials",
        "dual_evaluations",
        "primal_inner",
        "dual_inner",
        "delta_achieved",
        "delta_scheduled",
        "eps_achieved",
        "eps_scheduled",
        "wall_time",
    ]
    .map(String::from)
    .to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub solver: String,
    pub seed: u64,
    /// `converged`, `budget-exhausted` or `inexact-solve-failed`.
    pub status: String,
    pub message: Option<String>,
    pub iterations: usize,
    pub extra_trials: usize,
    pub dual_evaluations: usize,
    pub achieved_delta_sum: f64,
    pub achieved_eps_sum: f64,
    pub final_objective: Option<f64>,
    pub final_gap: Option<f64>,
    pub reference_objective: Option<f64>,
    pub operator_norm: Option<f64>,
    pub floor_violations: usize,
    pub warnings: Vec<String>,
    pub wall_time: Option<f64>,
    pub csv: String,
    pub image: Option<String>,
}

/// Mean and sample standard deviation over seeds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat { mean: f64::NAN, std: f64::NAN };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Stat { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverAggregate {
    pub solver: String,
    pub runs: usize,
    pub converged: usize,
    pub iterations: Stat,
    pub extra_trials: Stat,
    pub dual_evaluations: Stat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub schema_version: u32,
    pub experiment: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellSummary>,
    pub aggregates: Vec<SolverAggregate>,
}

impl Summary {
    pub fn aggregate(experiment: &str, seeds: Vec<u64>, cells: Vec<CellSummary>, solver_order: &[&str]) -> Summary {
        let aggregates = solver_order
            .iter()
            .map(|name| {
                let mine: Vec<&CellSummary> = cells.iter().filter(|c| c.solver == *name).collect();
                let stat = |f: &dyn Fn(&CellSummary) -> usize| {
                    Stat::of(&mine.iter().map(|c| f(c) as f64).collect::<Vec<_>>())
                };
                SolverAggregate {
                    solver: name.to_string(),
                    runs: mine.len(),
                    converged: mine.iter().filter(|c| c.status == "converged").count(),
                    iterations: stat(&|c| c.iterations),
                    extra_trials: stat(&|c| c.extra_trials),
                    dual_evaluations: stat(&|c| c.dual_evaluations),
                }
            })
            .collect();
        Summary {
            schema_version: SCHEMA_VERSION,
            experiment: experiment.to_string(),
            seeds,
            cells,
            aggregates,
        }
    }

    pub fn write(&self, path: &Path) -> Result<(), HarnessError> {
        let text = serde_json::to_string_pretty(self)?;
        std::fs::write(path, text + "\n").map_err(|e| HarnessError::io(path, e))
    }
}
