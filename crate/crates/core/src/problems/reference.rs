use log::debug;
use ndarray::{Array1, ArrayView1};

use crate::algorithms::{grpdal_baseline, InitialStep, SolverConfig};
use crate::error::{Error, Result};
use crate::metric::Metric;
use crate::problem::SaddleProblem;
use crate::prox::{prox_exact, ProxRequest};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceOptions {
    pub max_iterations: usize,
    /// Target for [`kkt_residual`].
    pub tol: f64,
    /// Iterations between residual checks.
    pub chunk: usize,
    pub beta: f64,
    pub phi: f64,
}

impl Default for ReferenceOptions {
    fn default() -> Self {
        ReferenceOptions {
            max_iterations: 50_000,
            tol: 1e-13,
            chunk: 2_500,
            beta: 1.0,
            phi: 1.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSolution {
    pub x: Array1<f64>,
    pub y: Array1<f64>,
    /// `f(x) + g*(Ax)` at the returned `x`.
    pub objective: f64,
    pub kkt_residual: f64,
    pub iterations: usize,
}

/// Fixed-point residual of the optimality conditions,
/// `(||x - prox_f(x - A*y)|| + ||y - prox_g(y + Ax)||) / (1 + ||x|| + ||y||)`.
pub fn kkt_residual(problem: &SaddleProblem, x: ArrayView1<f64>, y: ArrayView1<f64>) -> Result<f64> {
    let s = Metric::identity(problem.primal_dim());
    let t = Metric::identity(problem.dual_dim());
    let ax = x.to_owned() - problem.a.adjoint_apply(y)?;
    let px = prox_exact(&ProxRequest::new(&problem.f, ax.view(), 1.0, &s, 0.0)?)?;
    let ay = y.to_owned() + problem.a.apply(x)?;
    let py = prox_exact(&ProxRequest::new(&problem.g, ay.view(), 1.0, &t, 0.0)?)?;
    let rx = (&px - &x).mapv(|v| v * v).sum().sqrt();
    let ry = (&py - &y).mapv(|v| v * v).sum().sqrt();
    let scale = 1.0 + x.dot(&x).sqrt() + y.dot(&y).sqrt();
    Ok((rx + ry) / scale)
}

/// Long exact-prox run producing a high-accuracy saddle point. Stops at the
/// residual target or the iteration budget, whichever comes first.
pub fn solve_reference(problem: &SaddleProblem, opts: &ReferenceOptions) -> Result<ReferenceSolution> {
    if opts.chunk == 0 || opts.max_iterations == 0 {
        return Err(Error::InvalidArgument("reference budget must be positive".into()));
    }
    let mut config = SolverConfig {
        beta: opts.beta,
        phi: opts.phi,
        ..SolverConfig::default()
    };
    let mut x = Array1::zeros(problem.primal_dim());
    let mut y = Array1::zeros(problem.dual_dim());
    let mut done = 0;
    let mut residual = kkt_residual(problem, x.view(), y.view())?;
    while done < opts.max_iterations && residual >= opts.tol {
        config.max_iterations = opts.chunk.min(opts.max_iterations - done);
        config.x0 = Some(x);
        config.y0 = Some(y);
        let report = grpdal_baseline(problem, &config)?;
        done += report.iterations();
        if let Some(last) = report.rows.last() {
            config.initial_step = InitialStep::Fixed(last.tau);
        }
        x = report.x;
        y = report.y;
        residual = kkt_residual(problem, x.view(), y.view())?;
        debug!("reference: {done} iterations, residual {residual:e}");
    }
    let objective = problem.primal_objective(x.view())?;
    Ok(ReferenceSolution {
        x,
        y,
        objective,
        kkt_residual: residual,
        iterations: done,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problems::{gen_sparse_recovery, lasso_saddle};

    #[test]
    fn lasso_reference_is_a_saddle() {
        let inst = gen_sparse_recovery(30, 40, 5, 0.1, 1).unwrap();
        let p = lasso_saddle(&inst).unwrap();
        let r = solve_reference(&p, &ReferenceOptions::default()).unwrap();
        assert!(r.kkt_residual < 1e-13, "{}", r.kkt_residual);
        // y-optimality: y = Ax - b
        let ybar = inst.a.dot(&r.x) - &inst.b;
        assert!((&ybar - &r.y).iter().all(|v| v.abs() < 1e-6));
        let p = p.with_reference(r.x.clone(), r.y.clone()).unwrap();
        assert!(p.gap(r.x.view(), r.y.view()).unwrap().total.abs() <= 1e-8);
    }

    #[test]
    fn zero_data_has_zero_solution() {
        let mut inst = gen_sparse_recovery(10, 10, 2, 0.1, 0).unwrap();
        inst.b.fill(0.0);
        let p = lasso_saddle(&inst).unwrap();
        let r = solve_reference(&p, &ReferenceOptions::default()).unwrap();
        assert_eq!(r.iterations, 0);
        assert_eq!(r.objective, 0.0);
    }
}
