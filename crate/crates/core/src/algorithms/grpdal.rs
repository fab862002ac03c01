//! The golden-ratio primal-dual family with dual linesearch.

use log::{debug, warn};
use ndarray::{Array1, ArrayView1, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::config::{InitialStep, SolverConfig, StoppingRule, TrialPolicy, Variant};
use super::report::{CertificateRecord, IterationRow, RunReport, RunStatus, Side};
use super::compute_strongly_convex_params;
use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::norm::{operator_norm_in_metric, DEFAULT_POWER_ITERS};
use crate::problem::{ErgodicAverage, SaddleProblem};
use crate::prox::{prox_inexact, ProxCertificate, ProxRequest, WarmStart};

/// Hard cap on backtracking steps in one outer iteration.
pub const MAX_TRIALS: usize = 200;

/// Snapshot handed to observers after every outer iteration `k` (1-based):
/// `x = x^k`, `z = z^k`, `y = y^k`, `tau = tau_k`.
#[derive(Debug)]
pub struct SolverState<'a> {
    pub k: usize,
    pub x: &'a Array1<f64>,
    pub z: &'a Array1<f64>,
    pub y: &'a Array1<f64>,
    pub tau: f64,
    pub tau_prev: f64,
    pub beta: f64,
    pub omega: Option<f64>,
    pub row: &'a IterationRow,
}

/// Convex case with inexact primal and dual steps.
pub fn ip_grpdal(problem: &SaddleProblem, config: &SolverConfig) -> Result<RunReport> {
    run_observed(problem, config, Variant::Basic, &mut |_| {})
}

/// The exact variant: zero error schedules, closed-form proxes.
pub fn grpdal_baseline(problem: &SaddleProblem, config: &SolverConfig) -> Result<RunReport> {
    let exact = SolverConfig {
        primal_errors: super::ErrorSchedule::Zero,
        dual_errors: super::ErrorSchedule::Zero,
        ..config.clone()
    };
    let mut report = ip_grpdal(problem, &exact)?;
    report.solver = "grpdal".into();
    Ok(report)
}

/// `f` strongly convex: `beta_k` grows and the linesearch drops `eta`.
pub fn ip_grpdal_accelerated_partial(problem: &SaddleProblem, config: &SolverConfig) -> Result<RunReport> {
    run_observed(problem, config, Variant::AcceleratedPartial, &mut |_| {})
}

/// `f` and `g` strongly convex: constant `tau` and `beta`, geometric weights.
pub fn ip_grpdal_accelerated_full(problem: &SaddleProblem, config: &SolverConfig) -> Result<RunReport> {
    run_observed(problem, config, Variant::AcceleratedFull, &mut |_| {})
}

/// Runs any member of the family, calling `observer` after each iteration.
pub fn run_observed(
    problem: &SaddleProblem,
    config: &SolverConfig,
    variant: Variant,
    observer: &mut dyn FnMut(&SolverState),
) -> Result<RunReport> {
    let (n, m) = (problem.primal_dim(), problem.dual_dim());
    config.validate(variant, n, m)?;
    let s_metric = config.primal_metric_or_identity(n);
    let t_metric = config.dual_metric_or_identity(m);
    let gamma_f = problem.f.strong_convexity();
    let (phi, psi) = (config.phi, config.psi());
    let eta_ls = config.linesearch_eta(variant);

    let mut log_inv_rho = 0.0;
    match variant {
        Variant::Basic => {}
        Variant::AcceleratedPartial => {
            if gamma_f <= 0.0 {
                return Err(Error::PreconditionViolation(
                    "the accelerated variant needs a strongly convex f; use ip_grpdal".into(),
                ));
            }
        }
        Variant::AcceleratedFull => {
            let gamma_g = problem.g.strong_convexity();
            if gamma_f <= 0.0 || gamma_g <= 0.0 {
                return Err(Error::PreconditionViolation(
                    "linear-rate variant needs strongly convex f and g".into(),
                ));
            }
            let InitialStep::Fixed(tau) = config.initial_step else {
                unreachable!("checked by validate")
            };
            let (beta, rho) = compute_strongly_convex_params(
                gamma_f,
                gamma_g,
                s_metric.max_eig(),
                t_metric.max_eig(),
                tau,
            )?;
            if (config.beta - beta).abs() > 1e-12 * beta {
                return Err(Error::InvalidArgument(format!(
                    "beta must balance the strong convexity moduli: expected {beta}, got {}",
                    config.beta
                )));
            }
            log_inv_rho = -rho.ln();
        }
    }
    if matches!(config.stopping, StoppingRule::Gap { .. }) || config.trace.gap || config.trace.ergodic_gap {
        if problem.reference().is_none() {
            return Err(Error::PreconditionViolation(
                "gap tracing or stopping needs a reference saddle point".into(),
            ));
        }
    }

    let mut x = config.x0.clone().unwrap_or_else(|| Array1::zeros(n));
    let mut z = x.clone();
    let mut y = config.y0.clone().unwrap_or_else(|| Array1::zeros(m));
    let mut aty = problem.a.adjoint_apply(y.view())?;
    let mut beta = config.beta;
    let mut tau = match config.initial_step {
        InitialStep::Fixed(t) => t,
        InitialStep::Probe { scale, seed } => probe_step(problem, y.view(), beta, scale, seed)?,
    };
    let fixed_tau = tau;
    let op_norm = operator_norm_in_metric(&problem.a, &t_metric, DEFAULT_POWER_ITERS, config.seed)?;

    let name = match variant {
        Variant::Basic => "ip-grpdal",
        Variant::AcceleratedPartial => "ip-grpdal-accel",
        Variant::AcceleratedFull => "ip-grpdal-linear",
    };
    let mut report = RunReport {
        solver: name.into(),
        rows: Vec::new(),
        status: RunStatus::BudgetExhausted,
        x: x.clone(),
        y: y.clone(),
        ergodic: ErgodicAverage::new(n, m),
        certificates: Vec::new(),
        operator_norm: Some(op_norm),
        floor_violations: 0,
        warnings: Vec::new(),
    };

    let mut primal_preimage: Option<Array1<f64>> = None;
    let mut dual_preimage: Option<Array1<f64>> = None;
    let mut anchor_x = Array1::zeros(n);
    let mut anchor_y = Array1::zeros(m);
    let mut ax = Array1::zeros(m);

    for iter in 1..=config.max_iterations {
        golden_ratio_combination_inplace(&mut z, x.view(), phi);

        // primal step with tau_k
        let delta = config.primal_errors.at(iter);
        Zip::from(&mut anchor_x)
            .and(&z)
            .and(&aty)
            .and(s_metric.diag())
            .for_each(|a, z, g, d| *a = z - tau * g / d);
        let req = ProxRequest::new(&problem.f, anchor_x.view(), tau, &s_metric, delta)?;
        let warm = WarmStart {
            point: Some(x.view()),
            preimage: primal_preimage.as_ref().map(|p| p.view()),
        };
        let (x_new, pcert) = match prox_inexact(&req, warm, config.max_inner) {
            Ok(v) => v,
            Err(e @ Error::InexactSolveFailed { .. }) => {
                report.status = fail(iter, Side::Primal, &e);
                break;
            }
            Err(e) => return Err(e),
        };
        primal_preimage = pcert.witness.as_ref().and_then(|w| w.preimage.clone());

        let (beta_new, omega) = match variant {
            Variant::AcceleratedPartial => {
                let omega = (phi - psi) / (phi * s_metric.max_eig() + psi * gamma_f * tau);
                (beta * (1.0 + gamma_f * omega * tau), Some(omega))
            }
            _ => (beta, None),
        };

        // dual linesearch
        problem.a.apply_into(x_new.view(), ax.view_mut());
        let eps = config.dual_errors.at(iter);
        let mut trial = match (variant, config.trial) {
            (Variant::AcceleratedFull, _) => fixed_tau,
            (_, TrialPolicy::Aggressive) => psi * tau,
            (_, TrialPolicy::Conservative) => tau,
        };
        let floor = if op_norm > 0.0 {
            eta_ls * phi.sqrt() / (op_norm * (beta_new * psi).sqrt())
        } else {
            0.0
        };
        let mut row = IterationRow::new(iter, 0.0, beta_new);
        let outcome = loop {
            let sigma = beta_new * trial;
            Zip::from(&mut anchor_y)
                .and(&y)
                .and(&ax)
                .and(t_metric.diag())
                .for_each(|a, y, g, d| *a = y + sigma * g / d);
            let req = ProxRequest::new(&problem.g, anchor_y.view(), sigma, &t_metric, eps)?;
            let warm = WarmStart {
                point: Some(y.view()),
                preimage: dual_preimage.as_ref().map(|p| p.view()),
            };
            row.dual_evaluations += 1;
            let (y_new, dcert) = match prox_inexact(&req, warm, config.max_inner) {
                Ok(v) => v,
                Err(e @ Error::InexactSolveFailed { .. }) => break Err(e),
                Err(e) => return Err(e),
            };
            let aty_new = problem.a.adjoint_apply(y_new.view())?;
            let lhs = (beta_new * trial).sqrt() * dist(aty_new.view(), aty.view(), None);
            let rhs = eta_ls * (phi / tau).sqrt() * dist(y_new.view(), y.view(), Some(&t_metric));
            if lhs <= rhs {
                break Ok((y_new, aty_new, dcert));
            }
            if variant == Variant::AcceleratedFull {
                report.warnings.push(format!(
                    "iteration {iter}: fixed tau {trial} fails the linesearch test ({lhs:e} > {rhs:e})"
                ));
                warn!("iteration {iter}: fixed tau fails the linesearch test");
                break Ok((y_new, aty_new, dcert));
            }
            trial *= config.mu;
            row.extra_trials += 1;
            if row.extra_trials > MAX_TRIALS {
                return Err(Error::Internal(format!(
                    "iteration {iter}: linesearch exceeded {MAX_TRIALS} trials"
                )));
            }
            if trial < 1e-3 * floor {
                return Err(Error::Internal(format!(
                    "iteration {iter}: stepsize {trial:e} fell below 1e-3 times the floor {floor:e}"
                )));
            }
        };
        let (y_new, aty_new, dcert) = match outcome {
            Ok(v) => v,
            Err(e) => {
                report.status = fail(iter, Side::Dual, &e);
                break;
            }
        };
        dual_preimage = dcert.witness.as_ref().and_then(|w| w.preimage.clone());
        if variant != Variant::AcceleratedFull && trial < floor {
            report.floor_violations += 1;
            debug!("iteration {iter}: tau {trial:e} below floor {floor:e}");
        }

        let tau_prev = tau;
        tau = trial;
        beta = beta_new;
        x = x_new;
        y = y_new;
        aty = aty_new;

        match variant {
            Variant::Basic => report.ergodic.update(tau, x.view(), y.view())?,
            Variant::AcceleratedPartial => report.ergodic.update(beta * tau, x.view(), y.view())?,
            Variant::AcceleratedFull => {
                report
                    .ergodic
                    .update_log((iter - 1) as f64 * log_inv_rho, x.view(), y.view())?
            }
        }

        row.tau = tau;
        row.primal_inner = pcert.inner_iterations;
        row.dual_inner = dcert.inner_iterations;
        row.delta_achieved = pcert.achieved_gap;
        row.delta_scheduled = delta;
        row.eps_achieved = dcert.achieved_gap;
        row.eps_scheduled = eps;
        let stop = evaluate_row(
            problem,
            config.stopping,
            config.trace,
            &mut row,
            x.view(),
            y.view(),
            &report.ergodic,
        )?;
        if config.trace.certificates {
            report.certificates.push(record(iter, Side::Primal, &x, pcert));
            report.certificates.push(record(iter, Side::Dual, &y, dcert));
        }
        observer(&SolverState {
            k: iter,
            x: &x,
            z: &z,
            y: &y,
            tau,
            tau_prev,
            beta,
            omega,
            row: &row,
        });
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

fn fail(iteration: usize, side: Side, e: &Error) -> RunStatus {
    warn!("iteration {iteration}: {side:?} inexact solve failed: {e}");
    RunStatus::InexactSolveFailed {
        iteration,
        message: format!("{side:?} step: {e}"),
    }
}

fn record(k: usize, side: Side, point: &Array1<f64>, certificate: ProxCertificate) -> CertificateRecord {
    CertificateRecord {
        k,
        side,
        point: point.clone(),
        certificate,
    }
}

/// Fills the optional row columns and reports whether the stopping rule fired.
pub(crate) fn evaluate_row(
    problem: &SaddleProblem,
    stopping: StoppingRule,
    trace: super::TraceOptions,
    row: &mut IterationRow,
    x: ArrayView1<f64>,
    y: ArrayView1<f64>,
    ergodic: &ErgodicAverage,
) -> Result<bool> {
    let needs_objective = trace.objective
        || matches!(
            stopping,
            StoppingRule::ObjectiveResidual { .. } | StoppingRule::RelativeObjectiveResidual { .. }
        );
    if needs_objective {
        row.objective = Some(problem.primal_objective(x)?);
    }
    if trace.gap || matches!(stopping, StoppingRule::Gap { .. }) {
        row.set_gap(problem.gap(x, y)?);
    }
    if trace.ergodic_gap {
        let (ex, ey) = ergodic.point()?;
        row.ergodic_gap = Some(problem.gap(ex.view(), ey.view())?.total);
    }
    Ok(match stopping {
        StoppingRule::ObjectiveResidual { optimum, tol } => row.objective.unwrap() - optimum < tol,
        StoppingRule::RelativeObjectiveResidual { optimum, tol } => {
            (row.objective.unwrap() - optimum) / optimum < tol
        }
        StoppingRule::Gap { tol } => row.gap.unwrap() < tol,
        StoppingRule::Budget => false,
    })
}

fn golden_ratio_combination_inplace(z: &mut Array1<f64>, x: ArrayView1<f64>, phi: f64) {
    let a = (phi - 1.0) / phi;
    let b = 1.0 / phi;
    Zip::from(z).and(x).for_each(|z, x| *z = a * x + b * *z);
}

/// `||u - v||_T`, or Euclidean when `metric` is `None`.
fn dist(u: ArrayView1<f64>, v: ArrayView1<f64>, metric: Option<&Metric>) -> f64 {
    match metric {
        Some(t) => Zip::from(t.diag())
            .and(u)
            .and(v)
            .fold(0.0, |acc, d, a, b| acc + d * (a - b) * (a - b))
            .sqrt(),
        None => Zip::from(u)
            .and(v)
            .fold(0.0, |acc, a, b| acc + (a - b) * (a - b))
            .sqrt(),
    }
}

/// `tau_0 = ||y_{-1} - y_0|| / (sqrt(beta) ||A*(y_{-1} - y_0)||)`.
pub fn probe_step(
    problem: &SaddleProblem,
    y0: ArrayView1<f64>,
    beta: f64,
    scale: f64,
    seed: u64,
) -> Result<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let d: Array1<f64> = Array1::from_shape_fn(y0.len(), |_| {
        let e: f64 = StandardNormal.sample(&mut rng);
        scale * e
    });
    let ad = problem.a.adjoint_apply(d.view())?;
    let nad = ad.dot(&ad).sqrt();
    if nad == 0.0 {
        return Err(Error::InvalidArgument(
            "initial-step probe is degenerate (A* vanishes on the perturbation)".into(),
        ));
    }
    Ok(d.dot(&d).sqrt() / (beta.sqrt() * nad))
}
