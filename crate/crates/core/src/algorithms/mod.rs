//! Solvers and the small scalar rules they share.

mod baselines;
mod config;
mod grpdal;
mod report;

use ndarray::{Array1, ArrayView1, Zip};

pub use baselines::{pda_baseline, pda_observed, pdal_baseline, pdal_observed, PdaConfig, PdalConfig};
pub use config::{
    plastic_number, psi, ErrorSchedule, InitialStep, SolverConfig, StoppingRule, TraceOptions, TrialPolicy, Variant,
    GOLDEN_RATIO,
};
pub use grpdal::{
    grpdal_baseline, ip_grpdal, ip_grpdal_accelerated_full, ip_grpdal_accelerated_partial, probe_step, run_observed,
    SolverState, MAX_TRIALS,
};
pub use report::{CertificateRecord, IterationRow, RunReport, RunStatus, Side};

use crate::error::{check_dim, Error, Result};
use crate::metric::Metric;
use crate::problem::SaddleProblem;

/// `((phi - 1) / phi) x + z / phi`
pub fn golden_ratio_combination(x: ArrayView1<f64>, z: ArrayView1<f64>, phi: f64) -> Result<Array1<f64>> {
    check_dim("golden-ratio combination", x.len(), z.len())?;
    if !(phi > 1.0) {
        return Err(Error::InvalidArgument(format!("phi must exceed 1, got {phi}")));
    }
    let (a, b) = ((phi - 1.0) / phi, 1.0 / phi);
    Ok(Zip::from(x).and(z).map_collect(|x, z| a * x + b * z))
}

/// Balanced `beta` and contraction `rho` for the fully strongly convex variant.
pub fn compute_strongly_convex_params(
    gamma_f: f64,
    gamma_g: f64,
    lambda_s: f64,
    lambda_t: f64,
    tau: f64,
) -> Result<(f64, f64)> {
    for (name, v) in [
        ("gamma_f", gamma_f),
        ("gamma_g", gamma_g),
        ("Lambda_1", lambda_s),
        ("Lambda_2", lambda_t),
        ("tau", tau),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidArgument(format!("{name} must be positive, got {v}")));
        }
    }
    let beta = gamma_f * lambda_t / (gamma_g * lambda_s);
    let rho = 1.0 / (1.0 + gamma_f * tau / lambda_s);
    Ok((beta, rho))
}

/// `phi/(phi-1) ||z - xbar||_S^2 + ||y - ybar||_T^2 / beta`
pub fn lyapunov_value(
    problem: &SaddleProblem,
    z: ArrayView1<f64>,
    y: ArrayView1<f64>,
    phi: f64,
    beta: f64,
    s: &Metric,
    t: &Metric,
) -> Result<f64> {
    let Some((xbar, ybar)) = problem.reference() else {
        return Err(Error::PreconditionViolation(
            "the Lyapunov value needs a reference saddle point".into(),
        ));
    };
    check_dim("Lyapunov primal point", xbar.len(), z.len())?;
    check_dim("Lyapunov dual point", ybar.len(), y.len())?;
    let dz = &z - xbar;
    let dy = &y - ybar;
    Ok(phi / (phi - 1.0) * s.norm(dz.view())?.powi(2) + t.norm(dy.view())?.powi(2) / beta)
}
