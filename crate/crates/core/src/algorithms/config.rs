use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metric::Metric;

pub const GOLDEN_RATIO: f64 = 1.618_033_988_749_895;

/// `psi = (1 + phi) / phi^2`, the largest admissible stepsize growth.
pub fn psi(phi: f64) -> f64 {
    (1.0 + phi) / (phi * phi)
}

/// Real root of `xi^3 - xi - 1 = 0` by bisection on `[1, 2]`.
pub fn plastic_number() -> f64 {
    let (mut lo, mut hi) = (1.0f64, 2.0f64);
    while hi - lo > f64::EPSILON * hi {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if mid * mid * mid - mid - 1.0 > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Per-iteration error budget `e_k`, `k >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ErrorSchedule {
    Zero,
    /// `c / k^alpha`
    Polynomial { c: f64, alpha: f64 },
    /// `c * q^k`
    Geometric { c: f64, q: f64 },
}

impl ErrorSchedule {
    pub fn at(&self, k: usize) -> f64 {
        let k = k.max(1) as f64;
        match *self {
            ErrorSchedule::Zero => 0.0,
            ErrorSchedule::Polynomial { c, alpha } => c / k.powf(alpha),
            ErrorSchedule::Geometric { c, q } => c * q.powf(k),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = match *self {
            ErrorSchedule::Zero => true,
            ErrorSchedule::Polynomial { c, alpha } => c > 0.0 && c.is_finite() && alpha > 0.0,
            ErrorSchedule::Geometric { c, q } => c > 0.0 && c.is_finite() && q > 0.0 && q < 1.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid error schedule {self:?}")))
        }
    }
}

/// Where each backtracking search starts inside `[tau_k, psi tau_k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrialPolicy {
    Aggressive,
    Conservative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum InitialStep {
    Fixed(f64),
    /// `tau_0 = ||y_{-1} - y_0|| / (sqrt(beta) ||A*(y_{-1} - y_0)||)` with
    /// `y_{-1} = y_0 + scale * N(0, 1)` drawn from `seed`.
    Probe { scale: f64, seed: u64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum StoppingRule {
    /// `Phi(x^k) - optimum < tol`.
    ObjectiveResidual { optimum: f64, tol: f64 },
    /// `(Phi(x^k) - optimum) / optimum < tol`.
    RelativeObjectiveResidual { optimum: f64, tol: f64 },
    /// `G(x^k, y^k) < tol` against the installed reference point.
    Gap { tol: f64 },
    Budget,
}

/// What each iteration row records beyond the always-present scalars.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TraceOptions {
    pub objective: bool,
    pub gap: bool,
    pub ergodic_gap: bool,
    /// Keep every accepted certificate together with the point it certifies.
    pub certificates: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub phi: f64,
    pub eta: f64,
    pub mu: f64,
    /// `beta` (or `beta_0` for the partially strongly convex variant).
    pub beta: f64,
    pub initial_step: InitialStep,
    pub primal_errors: ErrorSchedule,
    pub dual_errors: ErrorSchedule,
    pub max_iterations: usize,
    pub stopping: StoppingRule,
    pub trial: TrialPolicy,
    pub primal_metric: Option<Metric>,
    pub dual_metric: Option<Metric>,
    pub x0: Option<Array1<f64>>,
    pub y0: Option<Array1<f64>>,
    pub max_inner: usize,
    pub trace: TraceOptions,
    /// Seed for the operator-norm estimate.
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            phi: 1.5,
            eta: 0.99,
            mu: 0.7,
            beta: 1.0,
            initial_step: InitialStep::Probe {
                scale: 1e-2,
                seed: 0,
            },
            primal_errors: ErrorSchedule::Zero,
            dual_errors: ErrorSchedule::Zero,
            max_iterations: 1000,
            stopping: StoppingRule::Budget,
            trial: TrialPolicy::Aggressive,
            primal_metric: None,
            dual_metric: None,
            x0: None,
            y0: None,
            max_inner: crate::prox::DEFAULT_MAX_INNER,
            trace: TraceOptions::default(),
            seed: 0,
        }
    }
}

/// Which member of the solver family a config is checked against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variant {
    /// Convex case.
    Basic,
    /// `f` strongly convex; growing `beta_k`.
    AcceleratedPartial,
    /// `f` and `g` strongly convex; constant `tau` and `beta`.
    AcceleratedFull,
}

impl SolverConfig {
    pub fn psi(&self) -> f64 {
        psi(self.phi)
    }

    /// Factor multiplying the right side of the linesearch test.
    pub fn linesearch_eta(&self, variant: Variant) -> f64 {
        match variant {
            Variant::Basic => self.eta,
            _ => 1.0,
        }
    }

    pub fn primal_metric_or_identity(&self, n: usize) -> Metric {
        self.primal_metric.clone().unwrap_or_else(|| Metric::identity(n))
    }

    pub fn dual_metric_or_identity(&self, m: usize) -> Metric {
        self.dual_metric.clone().unwrap_or_else(|| Metric::identity(m))
    }

    /// Range checks on scalars and metric eigenvalue gates.
    pub fn validate(&self, variant: Variant, primal_dim: usize, dual_dim: usize) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidArgument(msg));
        let lower = match variant {
            Variant::Basic => 1.0,
            _ => plastic_number(),
        };
        if !(self.phi > lower && self.phi < GOLDEN_RATIO) {
            return invalid(format!(
                "phi must lie in ({lower}, {GOLDEN_RATIO}), got {}",
                self.phi
            ));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return invalid(format!("mu must lie in (0, 1), got {}", self.mu));
        }
        if variant == Variant::Basic && !(self.eta > 0.0 && self.eta < 1.0) {
            return invalid(format!("eta must lie in (0, 1), got {}", self.eta));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return invalid(format!("beta must be positive, got {}", self.beta));
        }
        match self.initial_step {
            InitialStep::Fixed(t) if !(t > 0.0 && t.is_finite()) => {
                return invalid(format!("tau_0 must be positive, got {t}"));
            }
            InitialStep::Probe { scale, .. } if !(scale > 0.0 && scale.is_finite()) => {
                return invalid(format!("probe scale must be positive, got {scale}"));
            }
            _ => {}
        }
        if variant == Variant::AcceleratedFull && !matches!(self.initial_step, InitialStep::Fixed(_)) {
            return invalid("the fully strongly convex variant needs a fixed tau".into());
        }
        self.primal_errors.validate()?;
        self.dual_errors.validate()?;
        if self.max_iterations == 0 {
            return invalid("max_iterations must be positive".into());
        }
        if let Some(x0) = &self.x0 {
            crate::error::check_dim("initial primal point", primal_dim, x0.len())?;
        }
        if let Some(y0) = &self.y0 {
            crate::error::check_dim("initial dual point", dual_dim, y0.len())?;
        }
        let s = self.primal_metric_or_identity(primal_dim);
        let t = self.dual_metric_or_identity(dual_dim);
        crate::error::check_dim("primal metric", primal_dim, s.dim())?;
        crate::error::check_dim("dual metric", dual_dim, t.dim())?;
        let gate = match variant {
            Variant::Basic => self.eta,
            _ => 1.0,
        };
        if !(s.min_eig() > gate && t.min_eig() > gate) {
            return Err(Error::PreconditionViolation(format!(
                "metric eigenvalues must exceed {gate}: lambda_S = {}, lambda_T = {}",
                s.min_eig(),
                t.min_eig()
            )));
        }
        Ok(())
    }
}
