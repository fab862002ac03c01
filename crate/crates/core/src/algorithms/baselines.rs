//! Comparison methods: fixed-step primal-dual and primal-dual with
//! linesearch. Both use exact proxes in the Euclidean metric.

use ndarray::{Array1, Zip};

use super::config::{StoppingRule, TraceOptions};
use super::grpdal::{evaluate_row, probe_step, MAX_TRIALS};
use super::report::{IterationRow, RunReport, RunStatus};
use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::norm::{operator_norm_in_metric, DEFAULT_POWER_ITERS};
use crate::problem::{ErgodicAverage, SaddleProblem};
use crate::prox::{prox_exact, ProxRequest};

#[derive(Debug, Clone, PartialEq)]
pub struct PdaConfig {
    pub tau: f64,
    pub sigma: f64,
    pub max_iterations: usize,
    pub stopping: StoppingRule,
    pub trace: TraceOptions,
    pub x0: Option<Array1<f64>>,
    pub y0: Option<Array1<f64>>,
    pub seed: u64,
}

impl PdaConfig {
    /// `tau = 1 / (ratio L)`, `sigma = safety * ratio / L`, so that
    /// `tau sigma L^2 = safety`.
    pub fn balanced(norm: f64, ratio: f64, safety: f64) -> Self {
        PdaConfig {
            tau: 1.0 / (ratio * norm),
            sigma: safety * ratio / norm,
            max_iterations: 1000,
            stopping: StoppingRule::Budget,
            trace: TraceOptions::default(),
            x0: None,
            y0: None,
            seed: 0,
        }
    }
}

/// Fixed-step primal-dual with extrapolation `theta = 1`.
pub fn pda_baseline(problem: &SaddleProblem, config: &PdaConfig) -> Result<RunReport> {
    pda_observed(problem, config, &mut |_| {})
}

/// [`pda_baseline`] calling `observer` with each finished row.
pub fn pda_observed(
    problem: &SaddleProblem,
    config: &PdaConfig,
    observer: &mut dyn FnMut(&IterationRow),
) -> Result<RunReport> {
    let (n, m) = (problem.primal_dim(), problem.dual_dim());
    if !(config.tau > 0.0 && config.sigma > 0.0) {
        return Err(Error::InvalidArgument("PDA steps must be positive".into()));
    }
    let norm = operator_norm_in_metric(&problem.a, &Metric::identity(m), DEFAULT_POWER_ITERS, config.seed)?;
    let product = config.tau * config.sigma * norm * norm;
    if product >= 1.0 {
        return Err(Error::InvalidArgument(format!(
            "PDA needs tau sigma ||A||^2 < 1, got {product}"
        )));
    }
    let id_n = Metric::identity(n);
    let id_m = Metric::identity(m);
    let mut x = config.x0.clone().unwrap_or_else(|| Array1::zeros(n));
    let mut y = config.y0.clone().unwrap_or_else(|| Array1::zeros(m));
    let mut report = new_report("pda", n, m, norm);
    let mut anchor_x = Array1::zeros(n);
    let mut anchor_y = Array1::zeros(m);
    for k in 1..=config.max_iterations {
        let aty = problem.a.adjoint_apply(y.view())?;
        Zip::from(&mut anchor_x)
            .and(&x)
            .and(&aty)
            .for_each(|a, x, g| *a = x - config.tau * g);
        let x_new = prox_exact(&ProxRequest::new(&problem.f, anchor_x.view(), config.tau, &id_n, 0.0)?)?;
        let xbar = 2.0 * &x_new - &x;
        let axbar = problem.a.apply(xbar.view())?;
        Zip::from(&mut anchor_y)
            .and(&y)
            .and(&axbar)
            .for_each(|a, y, g| *a = y + config.sigma * g);
        y = prox_exact(&ProxRequest::new(&problem.g, anchor_y.view(), config.sigma, &id_m, 0.0)?)?;
        x = x_new;
        report.ergodic.update(1.0, x.view(), y.view())?;
        let mut row = IterationRow::new(k, config.tau, config.sigma / config.tau);
        row.dual_evaluations = 1;
        let stop = evaluate_row(problem, config.stopping, config.trace, &mut row, x.view(), y.view(), &report.ergodic)?;
        observer(&row);
        report.rows.push(row);
        if stop {
            report.status = RunStatus::Converged;
            break;
        }
    }
    report.x = x;
    report.y = y;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PdalConfig {
    pub beta: f64,
    pub mu: f64,
    /// Acceptance factor in `sqrt(beta) tau ||A* dy|| <= delta ||dy||`.
    pub delta: f64,
    pub probe_scale: f64,
    pub probe_seed: u64,
    pub max_iterations: usize,
    pub stopping: StoppingRule,
    pub trace: TraceOptions,
    pub x0: Option<Array1<f64>>,
    pub y0: Option<Array1<f64>>,
}

impl Default for PdalConfig {
    fn default() -> Self {
        PdalConfig {
            beta: 1.0,
            mu: 0.7,
            delta: 0.99,
            probe_scale: 1e-2,
            probe_seed: 0,
            max_iterations: 1000,
            stopping: StoppingRule::Budget,
            trace: TraceOptions::default(),
            x0: None,
            y0: None,
        }
    }
}

/// Primal-dual with linesearch on the dual step and `theta_k` extrapolation
/// of the primal iterate.
pub fn pdal_baseline(problem: &SaddleProblem, config: &PdalConfig) -> Result<RunReport> {
    pdal_observed(problem, config, &mut |_| {})
}

/// [`pdal_baseline`] calling `observer` with each finished row.
pub fn pdal_observed(
    problem: &SaddleProblem,
    config: &PdalConfig,
    observer: &mut dyn FnMut(&IterationRow),
) -> Result<RunReport> {
    let (n, m) = (problem.primal_dim(), problem.dual_dim());
    if !(config.beta > 0.0 && config.mu > 0.0 && config.mu < 1.0 && config.delta > 0.0 && config.delta < 1.0) {
        return Err(Error::InvalidArgument(format!("invalid PDAL parameters {config:?}")));
    }
    let id_n = Metric::identity(n);
    let id_m = Metric::identity(m);
    let mut x = config.x0.clone().unwrap_or_else(|| Array1::zeros(n));
    let mut y = config.y0.clone().unwrap_or_else(|| Array1::zeros(m));
    let mut aty = problem.a.adjoint_apply(y.view())?;
    let mut tau = probe_step(problem, y.view(), config.beta, config.probe_scale, config.probe_seed)?;
    let mut theta: f64 = 1.0;
    let mut report = new_report("pdal", n, m, f64::NAN);
    report.operator_norm = None;
    let mut anchor_x = Array1::zeros(n);
    let mut anchor_y = Array1::zeros(m);
    for k in 1..=config.max_iterations {
        Zip::from(&mut anchor_x)
            .and(&x)
            .and(&aty)
            .for_each(|a, x, g| *a = x - tau * g);
        let x_new = prox_exact(&ProxRequest::new(&problem.f, anchor_x.view(), tau, &id_n, 0.0)?)?;
        let mut trial = tau * (1.0 + theta).sqrt();
        let mut row = IterationRow::new(k, 0.0, config.beta);
        let (y_new, aty_new, th) = loop {
            let th = trial / tau;
            let sigma = config.beta * trial;
            let xbar = &x_new + &((&x_new - &x) * th);
            let axbar = problem.a.apply(xbar.view())?;
            Zip::from(&mut anchor_y)
                .and(&y)
                .and(&axbar)
                .for_each(|a, y, g| *a = y + sigma * g);
            let y_new = prox_exact(&ProxRequest::new(&problem.g, anchor_y.view(), sigma, &id_m, 0.0)?)?;
            row.dual_evaluations += 1;
            let aty_new = problem.a.adjoint_apply(y_new.view())?;
            let lhs = config.beta.sqrt() * trial * (&aty_new - &aty).mapv(|v| v * v).sum().sqrt();
            let rhs = config.delta * (&y_new - &y).mapv(|v| v * v).sum().sqrt();
            if lhs <= rhs {
                break (y_new, aty_new, th);
            }
            trial *= config.mu;
            row.extra_trials += 1;
            if row.extra_trials > MAX_TRIALS {
                return Err(Error::Internal(format!("iteration {k}: PDAL linesearch did not terminate")));
            }
        };
        theta = th;
        tau = trial;
        x = x_new;
        y = y_new;
        aty = aty_new;
        report.ergodic.update(tau, x.view(), y.view())?;
        row.tau = tau;
        let stop = evaluate_row(problem, config.stopping, config.trace, &mut row, x.view(), y.view(), &report.ergodic)?;
        observer(&row);
        report.rows.push(row);
        if stop {
            report.status = RunStatus::Converged;
            break;
        }
    }
    report.x = x;
    report.y = y;
    Ok(report)
}

fn new_report(name: &str, n: usize, m: usize, norm: f64) -> RunReport {
    RunReport {
        solver: name.into(),
        rows: Vec::new(),
        status: RunStatus::BudgetExhausted,
        x: Array1::zeros(n),
        y: Array1::zeros(m),
        ergodic: ErgodicAverage::new(n, m),
        certificates: Vec::new(),
        operator_norm: Some(norm),
        floor_violations: 0,
        warnings: Vec::new(),
    }
}
