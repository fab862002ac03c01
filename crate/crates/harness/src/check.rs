//! `grpdal-kit check`: a quick invariant suite on small instances.

use std::time::Instant;

use grpdal_core::algorithms::{
    compute_strongly_convex_params, golden_ratio_combination, grpdal_baseline, ip_grpdal, ip_grpdal_accelerated_full, pda_baseline, plastic_number,
    psi, ErrorSchedule, InitialStep, PdaConfig, SolverConfig, StoppingRule, TraceOptions, GOLDEN_RATIO,
};
use grpdal_core::problems::{
    gen_sparse_recovery, gen_strongly_convex_quadratic, gen_tv_deblur, lasso_saddle, make_blur_operator,
    make_gradient_operator, phantom, quadratic_saddle, tv_l1_saddle,
};
use grpdal_core::prox::fenchel_gap_witness;
use grpdal_core::{operator_norm_in_metric, ExtValue, LinearOperator, Metric};
use ndarray::{array, Array1};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::parse_config;
use crate::pgm::{decode_pgm, encode_pgm, PgmFormat};

type Check = fn() -> Result<(), String>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn constants() -> Result<(), String> {
    let xi = plastic_number();
    ensure((xi * xi * xi - xi - 1.0).abs() < 1e-14, || format!("plastic number residual at {xi}"))?;
    ensure((psi(GOLDEN_RATIO) - 1.0).abs() < 1e-14, || "psi(golden ratio) != 1".into())?;
    let z = golden_ratio_combination(array![1.0].view(), array![0.0].view(), GOLDEN_RATIO).map_err(e2s)?;
    ensure((z[0] - (2.0 - GOLDEN_RATIO)).abs() < 1e-15, || format!("combination gave {}", z[0]))
}

fn adjoints() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let ops = [
        make_blur_operator(16, 16, 3).map_err(e2s)?,
        make_gradient_operator(16, 16).map_err(e2s)?,
    ];
    for op in ops {
        let x = Array1::from_shape_fn(op.input_dim(), |_| rng.random::<f64>() - 0.5);
        let y = Array1::from_shape_fn(op.output_dim(), |_| rng.random::<f64>() - 0.5);
        let lhs = op.apply(x.view()).map_err(e2s)?.dot(&y);
        let rhs = x.dot(&op.adjoint_apply(y.view()).map_err(e2s)?);
        ensure((lhs - rhs).abs() < 1e-10, || format!("adjoint mismatch {lhs} vs {rhs}"))?;
    }
    Ok(())
}

fn operator_norm() -> Result<(), String> {
    let op = LinearOperator::dense(array![[3.0, 0.0], [0.0, 1.0]]).map_err(e2s)?;
    let l = operator_norm_in_metric(&op, &Metric::identity(2), 100, 1).map_err(e2s)?;
    ensure((l - 3.0).abs() < 1e-8, || format!("||diag(3, 1)|| estimated as {l}"))
}

fn stepsize_floor() -> Result<(), String> {
    let inst = gen_sparse_recovery(60, 60, 6, 1.0, 1).map_err(e2s)?;
    let problem = lasso_saddle(&inst).map_err(e2s)?;
    let cfg = SolverConfig {
        phi: 1.618,
        beta: 100.0,
        max_iterations: 300,
        ..SolverConfig::default()
    };
    let r = grpdal_baseline(&problem, &cfg).map_err(e2s)?;
    ensure(r.floor_violations == 0, || format!("{} floor violations", r.floor_violations))?;
    ensure(r.rows.iter().all(|row| row.tau > 0.0 && row.tau.is_finite()), || "non-finite step".into())
}

fn certificates() -> Result<(), String> {
    let inst = gen_tv_deblur(phantom(16, 16), 3, 0.1, 0.1, 0.05, 2).map_err(e2s)?;
    let problem = tv_l1_saddle(&inst).map_err(e2s)?;
    let cfg = SolverConfig {
        phi: 1.5,
        primal_errors: ErrorSchedule::Polynomial { c: 1.0, alpha: 2.0 },
        max_iterations: 60,
        trace: TraceOptions {
            certificates: true,
            ..TraceOptions::default()
        },
        ..SolverConfig::default()
    };
    let r = ip_grpdal(&problem, &cfg).map_err(e2s)?;
    ensure(!r.certificates.is_empty(), || "no certificates recorded".into())?;
    for rec in &r.certificates {
        let h = match rec.side {
            grpdal_core::algorithms::Side::Primal => &problem.f,
            grpdal_core::algorithms::Side::Dual => &problem.g,
        };
        let Some(w) = &rec.certificate.witness else { continue };
        let again = match fenchel_gap_witness(h, rec.point.view(), w).map_err(e2s)? {
            ExtValue::Finite(v) => v,
            ExtValue::Infinite => return Err(format!("witness at k = {} left the domain", rec.k)),
        };
        ensure(again.to_bits() == rec.certificate.achieved_gap.to_bits(), || {
            format!("k = {}: recomputed gap {again:e} != logged {:e}", rec.k, rec.certificate.achieved_gap)
        })?;
        ensure(rec.certificate.success(), || format!("k = {}: certificate above budget", rec.k))?;
    }
    Ok(())
}

fn linear_rate() -> Result<(), String> {
    let inst = gen_strongly_convex_quadratic(20, 20, 1.0, 1.0, 3).map_err(e2s)?;
    let problem = quadratic_saddle(&inst).map_err(e2s)?;
    let (lam_s, lam_t, tau) = (1.2, 1.2, 0.3);
    let (beta, _) = compute_strongly_convex_params(1.0, 1.0, lam_s, lam_t, tau).map_err(e2s)?;
    let cfg = SolverConfig {
        phi: 1.5,
        beta,
        initial_step: InitialStep::Fixed(tau),
        primal_metric: Some(Metric::scaled_identity(20, lam_s)),
        dual_metric: Some(Metric::scaled_identity(20, lam_t)),
        max_iterations: 400,
        stopping: StoppingRule::Gap { tol: 1e-10 },
        trace: TraceOptions {
            gap: true,
            ..TraceOptions::default()
        },
        ..SolverConfig::default()
    };
    let r = ip_grpdal_accelerated_full(&problem, &cfg).map_err(e2s)?;
    let gap = r.rows.last().and_then(|row| row.gap).unwrap_or(f64::NAN);
    ensure(gap.abs() < 1e-8, || format!("gap {gap:e} after {} iterations", r.iterations()))
}

fn pda_guard() -> Result<(), String> {
    let inst = gen_sparse_recovery(20, 20, 2, 1.0, 4).map_err(e2s)?;
    let problem = lasso_saddle(&inst).map_err(e2s)?;
    let l = operator_norm_in_metric(&problem.a, &Metric::identity(20), 200, 0).map_err(e2s)?;
    let ok = PdaConfig {
        max_iterations: 5,
        ..PdaConfig::balanced(l, 1.0, 0.99)
    };
    ensure(pda_baseline(&problem, &ok).is_ok(), || "0.99 rejected".into())?;
    let bad = PdaConfig {
        max_iterations: 5,
        ..PdaConfig::balanced(l, 1.0, 1.01)
    };
    ensure(pda_baseline(&problem, &bad).is_err(), || "1.01 accepted".into())
}

fn pgm_round_trip() -> Result<(), String> {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let img = ndarray::Array2::from_shape_fn((32, 32), |_| rng.random_range(0..256u32) as f64 / 255.0);
    for fmt in [PgmFormat::Ascii, PgmFormat::Binary] {
        let back = decode_pgm(&encode_pgm(&img, fmt)).map_err(e2s)?;
        ensure(back == img, || format!("{fmt:?} round trip differs"))?;
    }
    Ok(())
}

fn config_grammar() -> Result<(), String> {
    let cfg = parse_config(
        "experiment = lasso\nsolvers = pda, ip-grpdal\nn = 10\np = 10\ns = 2\nseeds = 1..3\n",
        std::path::Path::new("."),
    )
    .map_err(e2s)?;
    ensure(cfg.seeds == vec![1, 2] && cfg.solvers.len() == 2, || format!("{cfg:?}"))?;
    ensure(parse_config("experiment = lasso\nsolvers =\n", std::path::Path::new(".")).is_err(), || {
        "empty solver list accepted".into()
    })
}

pub const CHECKS: &[(&str, Check)] = &[
    ("constants", constants),
    ("adjoints", adjoints),
    ("operator-norm", operator_norm),
    ("stepsize-floor", stepsize_floor),
    ("certificates", certificates),
    ("linear-rate", linear_rate),
    ("pda-guard", pda_guard),
    ("pgm-round-trip", pgm_round_trip),
    ("config-grammar", config_grammar),
];

/// Runs every check, printing one line each. True when all pass.
pub fn run_checks() -> bool {
    let mut all = true;
    for (name, check) in CHECKS {
        let start = Instant::now();
        let result = check();
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(()) => println!("PASS {name} ({secs:.2}s)"),
            Err(msg) => {
                all = false;
                println!("FAIL {name} ({secs:.2}s): {msg}");
            }
        }
    }
    all
}
