use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::problem::{ErgodicAverage, GapReport};
use crate::prox::ProxCertificate;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Primal,
    Dual,
}

/// One outer iteration. `k` starts at 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRow {
    pub k: usize,
    pub objective: Option<f64>,
    pub primal_gap: Option<f64>,
    pub dual_gap: Option<f64>,
    pub gap: Option<f64>,
    pub ergodic_gap: Option<f64>,
    pub tau: f64,
    pub beta: f64,
    /// Backtracking steps beyond the first trial.
    pub extra_trials: usize,
    /// Dual prox evaluations, including the first trial.
    pub dual_evaluations: usize,
    pub primal_inner: usize,
    pub dual_inner: usize,
    pub delta_achieved: f64,
    pub delta_scheduled: f64,
    pub eps_achieved: f64,
    pub eps_scheduled: f64,
}

impl IterationRow {
    pub(crate) fn new(k: usize, tau: f64, beta: f64) -> Self {
        IterationRow {
            k,
            objective: None,
            primal_gap: None,
            dual_gap: None,
            gap: None,
            ergodic_gap: None,
            tau,
            beta,
            extra_trials: 0,
            dual_evaluations: 0,
            primal_inner: 0,
            dual_inner: 0,
            delta_achieved: 0.0,
            delta_scheduled: 0.0,
            eps_achieved: 0.0,
            eps_scheduled: 0.0,
        }
    }

    pub(crate) fn set_gap(&mut self, g: GapReport) {
        self.primal_gap = Some(g.primal);
        self.dual_gap = Some(g.dual);
        self.gap = Some(g.total);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    InexactSolveFailed { iteration: usize, message: String },
}

/// An accepted certificate and the point it certifies.
#[derive(Debug, Clone, PartialEq)]
pub struct CertificateRecord {
    pub k: usize,
    pub side: Side,
    pub point: Array1<f64>,
    pub certificate: ProxCertificate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunReport {
    pub solver: String,
    pub rows: Vec<IterationRow>,
    pub status: RunStatus,
    pub x: Array1<f64>,
    pub y: Array1<f64>,
    pub ergodic: ErgodicAverage,
    pub certificates: Vec<CertificateRecord>,
    /// Estimate of `sup ||A* y|| / ||y||_T`, when computed.
    pub operator_norm: Option<f64>,
    /// Accepted stepsizes that fell below the theoretical floor.
    pub floor_violations: usize,
    pub warnings: Vec<String>,
}

impl RunReport {
    pub fn iterations(&self) -> usize {
        self.rows.len()
    }

    pub fn extra_trials(&self) -> usize {
        self.rows.iter().map(|r| r.extra_trials).sum()
    }

    pub fn dual_evaluations(&self) -> usize {
        self.rows.iter().map(|r| r.dual_evaluations).sum()
    }

    pub fn achieved_delta_sum(&self) -> f64 {
        self.rows.iter().map(|r| r.delta_achieved).sum()
    }

    pub fn achieved_eps_sum(&self) -> f64 {
        self.rows.iter().map(|r| r.eps_achieved).sum()
    }

    pub fn converged(&self) -> bool {
        self.status == RunStatus::Converged
    }
}
