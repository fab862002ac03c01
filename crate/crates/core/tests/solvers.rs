use grpdal_core::algorithms::*;
use grpdal_core::problems::*;
use grpdal_core::prox::fenchel_gap_witness;
use grpdal_core::{operator_norm_in_metric, ConvexFunction, Error, LinearOperator, Metric, SaddleProblem};
use ndarray::{array, Array1};

fn decoupled() -> SaddleProblem {
    SaddleProblem::new(
        ConvexFunction::quadratic(1.0, array![0.0, 0.0]).unwrap(),
        ConvexFunction::quadratic(1.0, array![0.0, 0.0, 0.0]).unwrap(),
        LinearOperator::zeros(3, 2),
    )
    .unwrap()
    .with_reference(Array1::zeros(2), Array1::zeros(3))
    .unwrap()
}

#[test]
fn decoupled_quadratic_follows_scalar_recursion() {
    let p = decoupled();
    let phi = 1.5;
    let beta = 2.0;
    let cfg = SolverConfig {
        phi,
        beta,
        initial_step: InitialStep::Fixed(0.5),
        x0: Some(array![1.0, -2.0]),
        y0: Some(array![3.0, 0.5, -1.0]),
        max_iterations: 200,
        trace: TraceOptions { gap: true, ..TraceOptions::default() },
        ..SolverConfig::default()
    };
    let r = ip_grpdal(&p, &cfg).unwrap();
    // with A = 0 every trial is accepted: tau_{k+1} = psi tau_k
    let psi = psi(phi);
    let (mut x, mut z, mut y, mut tau) = (1.0f64, 1.0f64, 3.0f64, 0.5f64);
    for row in &r.rows {
        z = (phi - 1.0) / phi * x + z / phi;
        x = z / (1.0 + tau);
        tau *= psi;
        y /= 1.0 + beta * tau;
        assert_eq!(row.extra_trials, 0);
        assert!((row.tau - tau).abs() <= 1e-12 * tau);
    }
    assert!((r.x[0] - x).abs() < 1e-12 && (r.y[0] - y).abs() < 1e-12);
    assert!(r.rows.last().unwrap().gap.unwrap() <= 1e-10);
    assert_eq!(r.operator_norm, Some(0.0));
}

#[test]
fn probe_rejects_vanishing_operator() {
    let r = ip_grpdal(&decoupled(), &SolverConfig::default());
    assert!(matches!(r, Err(Error::InvalidArgument(_))));
}

#[test]
fn saddle_point_is_fixed() {
    let inst = gen_strongly_convex_quadratic(12, 9, 1.0, 1.0, 3).unwrap();
    let p = quadratic_saddle(&inst).unwrap();
    let cfg = SolverConfig {
        x0: Some(inst.x_star.clone()),
        y0: Some(inst.y_star.clone()),
        max_iterations: 50,
        ..SolverConfig::default()
    };
    let mut prev = (inst.x_star.clone(), inst.y_star.clone());
    let mut worst = 0.0f64;
    run_observed(&p, &cfg, Variant::Basic, &mut |s| {
        let dx = (s.x - &prev.0).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let dy = (s.y - &prev.1).iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst = worst.max(dx).max(dy);
        prev = (s.x.clone(), s.y.clone());
    })
    .unwrap();
    assert!(worst < 1e-12, "{worst}");
}

fn lasso(seed: u64) -> (SparseRecoveryInstance, SaddleProblem) {
    let inst = gen_sparse_recovery(60, 80, 8, 0.1, seed).unwrap();
    let p = lasso_saddle(&inst).unwrap();
    (inst, p)
}

#[test]
fn exact_variant_matches_zero_schedules() {
    let (_, p) = lasso(1);
    let cfg = SolverConfig {
        beta: 100.0,
        max_iterations: 300,
        ..SolverConfig::default()
    };
    let a = grpdal_baseline(&p, &cfg).unwrap();
    let b = ip_grpdal(&p, &cfg).unwrap();
    assert_eq!(a.solver, "grpdal");
    assert_eq!(a.x, b.x);
    assert_eq!(a.y, b.y);
    assert_eq!(a.rows, b.rows);
}

#[test]
fn runs_are_deterministic() {
    let (_, p) = lasso(2);
    let cfg = SolverConfig {
        primal_errors: ErrorSchedule::Polynomial { c: 1e-3, alpha: 2.0 },
        dual_errors: ErrorSchedule::Polynomial { c: 1e-3, alpha: 2.0 },
        max_iterations: 200,
        trace: TraceOptions {
            objective: true,
            certificates: true,
            ..TraceOptions::default()
        },
        ..SolverConfig::default()
    };
    assert_eq!(ip_grpdal(&p, &cfg).unwrap(), ip_grpdal(&p, &cfg).unwrap());
    let pd = PdalConfig {
        max_iterations: 100,
        ..PdalConfig::default()
    };
    assert_eq!(pdal_baseline(&p, &pd).unwrap(), pdal_baseline(&p, &pd).unwrap());
}

#[test]
fn trial_counts_and_floor() {
    let (_, p) = lasso(3);
    let cfg = SolverConfig {
        phi: 1.618,
        beta: 100.0,
        max_iterations: 2000,
        ..SolverConfig::default()
    };
    let r = ip_grpdal(&p, &cfg).unwrap();
    let bound = 1.0 + cfg.psi().ln() / (1.0 / cfg.mu).ln();
    for row in &r.rows {
        assert!(row.dual_evaluations >= 1);
        assert_eq!(row.dual_evaluations, row.extra_trials + 1);
        assert!(row.extra_trials as f64 <= bound.ceil(), "k = {}: {}", row.k, row.extra_trials);
    }
    assert_eq!(r.floor_violations, 0);
}

#[test]
fn certificates_recompute_exactly_and_respect_schedules() {
    let (_, p) = lasso(4);
    let cfg = SolverConfig {
        primal_errors: ErrorSchedule::Polynomial { c: 1e-2, alpha: 2.0 },
        dual_errors: ErrorSchedule::Geometric { c: 1e-2, q: 0.99 },
        max_iterations: 150,
        trace: TraceOptions {
            certificates: true,
            ..TraceOptions::default()
        },
        ..SolverConfig::default()
    };
    let r = ip_grpdal(&p, &cfg).unwrap();
    assert_eq!(r.certificates.len(), 2 * r.iterations());
    for rec in &r.certificates {
        let h = match rec.side {
            Side::Primal => &p.f,
            Side::Dual => &p.g,
        };
        let w = rec.certificate.witness.as_ref().unwrap();
        let g = fenchel_gap_witness(h, rec.point.view(), w).unwrap().finite().unwrap();
        assert_eq!(g.to_bits(), rec.certificate.achieved_gap.to_bits());
        assert!(rec.certificate.success());
    }
    for row in &r.rows {
        assert!(row.delta_achieved <= row.delta_scheduled);
        assert!(row.eps_achieved <= row.eps_scheduled);
    }
}

#[test]
fn exact_methods_reach_the_reference_objective() {
    let inst = gen_sparse_recovery(100, 100, 10, 0.1, 0).unwrap();
    let p = lasso_saddle(&inst).unwrap();
    let reference = solve_reference(&p, &ReferenceOptions::default()).unwrap();
    let stop = StoppingRule::ObjectiveResidual {
        optimum: reference.objective,
        tol: 1e-10,
    };
    let g = grpdal_baseline(
        &p,
        &SolverConfig {
            phi: 1.618,
            beta: 100.0,
            max_iterations: 100_000,
            stopping: stop,
            ..SolverConfig::default()
        },
    )
    .unwrap();
    assert!(g.converged());
    let l = pdal_baseline(
        &p,
        &PdalConfig {
            beta: 100.0,
            max_iterations: 100_000,
            stopping: stop,
            ..PdalConfig::default()
        },
    )
    .unwrap();
    assert!(l.converged());
    let x_obj = lasso_objective(&inst, g.x.view()).unwrap();
    assert!(x_obj - reference.objective < 1e-10);
}

#[test]
fn pda_guard_and_decoupled_run() {
    let (_, p) = lasso(5);
    let norm = operator_norm_in_metric(&p.a, &Metric::identity(p.dual_dim()), 200, 0).unwrap();
    let ok = PdaConfig::balanced(norm, 10.0, 0.99);
    assert!(pda_baseline(&p, &PdaConfig { max_iterations: 5, ..ok }).is_ok());
    let bad = PdaConfig::balanced(norm, 10.0, 1.01);
    assert!(matches!(pda_baseline(&p, &bad), Err(Error::InvalidArgument(_))));

    let q = decoupled();
    let cfg = PdaConfig {
        tau: 1.0,
        sigma: 1.0,
        x0: Some(array![1.0, 1.0]),
        y0: Some(array![1.0, 1.0, 1.0]),
        max_iterations: 60,
        trace: TraceOptions { gap: true, ..TraceOptions::default() },
        ..PdaConfig::balanced(1.0, 1.0, 0.5)
    };
    // with A = 0 the guard holds trivially for any steps
    let r = pda_baseline(&q, &cfg).unwrap();
    assert!(r.rows.last().unwrap().gap.unwrap() < 1e-30);
}

#[test]
fn accelerated_preconditions() {
    let (inst, p) = lasso(6);
    let good = SolverConfig {
        phi: 1.5,
        primal_metric: Some(Metric::scaled_identity(80, 1.01)),
        dual_metric: Some(Metric::scaled_identity(60, 1.01)),
        max_iterations: 10,
        ..SolverConfig::default()
    };
    assert!(matches!(
        ip_grpdal_accelerated_partial(&p, &good),
        Err(Error::PreconditionViolation(_))
    ));
    let aug = lasso_saddle_augmented(&inst, 1.0).unwrap();
    assert!(ip_grpdal_accelerated_partial(&aug, &good).is_ok());
    // identity metrics sit on the lambda > 1 gate
    let id = SolverConfig {
        primal_metric: None,
        dual_metric: None,
        ..good.clone()
    };
    assert!(ip_grpdal_accelerated_partial(&aug, &id).is_err());
    // the linear-rate variant needs both moduli and a fixed tau
    assert!(matches!(
        ip_grpdal_accelerated_full(
            &p,
            &SolverConfig {
                initial_step: InitialStep::Fixed(0.1),
                ..good.clone()
            }
        ),
        Err(Error::PreconditionViolation(_))
    ));
    assert!(matches!(
        ip_grpdal_accelerated_full(&aug, &good),
        Err(Error::InvalidArgument(_))
    ));
}

#[test]
fn omega_below_one_and_small_gamma_limit() {
    let inst = gen_sparse_recovery(40, 50, 5, 0.1, 7).unwrap();
    let cfg = SolverConfig {
        phi: 1.5,
        beta: 10.0,
        primal_metric: Some(Metric::scaled_identity(50, 1.01)),
        dual_metric: Some(Metric::scaled_identity(40, 1.01)),
        max_iterations: 300,
        ..SolverConfig::default()
    };
    for gamma in [1.0, 1e-3, 1e-9] {
        let p = lasso_saddle_augmented(&inst, gamma).unwrap();
        let mut prev_beta = cfg.beta;
        let mut max_ratio = 1.0f64;
        run_observed(&p, &cfg, Variant::AcceleratedPartial, &mut |s| {
            let omega = s.omega.unwrap();
            assert!(omega > 0.0 && omega < 1.0);
            max_ratio = max_ratio.max(s.beta / prev_beta);
            prev_beta = s.beta;
        })
        .unwrap();
        if gamma == 1e-9 {
            assert!(max_ratio - 1.0 < 1e-6, "{max_ratio}");
        }
    }
}

#[test]
fn accelerated_full_keeps_tau_and_beta() {
    let inst = gen_strongly_convex_quadratic(20, 20, 1.0, 1.0, 9).unwrap();
    let p = quadratic_saddle(&inst).unwrap();
    let (lam_s, lam_t) = (1.01, 1.01);
    let tau = 0.2;
    let (beta, _) = compute_strongly_convex_params(1.0, 1.0, lam_s, lam_t, tau).unwrap();
    let cfg = SolverConfig {
        phi: 1.5,
        beta,
        initial_step: InitialStep::Fixed(tau),
        primal_metric: Some(Metric::scaled_identity(20, lam_s)),
        dual_metric: Some(Metric::scaled_identity(20, lam_t)),
        max_iterations: 100,
        trace: TraceOptions { gap: true, ..TraceOptions::default() },
        ..SolverConfig::default()
    };
    let r = ip_grpdal_accelerated_full(&p, &cfg).unwrap();
    assert!(r.rows.iter().all(|row| row.tau == tau && row.beta == beta && row.extra_trials == 0));
    assert!(r.rows.last().unwrap().gap.unwrap() < r.rows[0].gap.unwrap());
}
