//! Builds instances, resolves reference solutions, runs solver cells and
//! writes their outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use grpdal_core::algorithms::{
    compute_strongly_convex_params, pda_observed, pdal_observed, run_observed, InitialStep, IterationRow, PdaConfig,
    PdalConfig, RunReport, RunStatus, SolverConfig, StoppingRule, TraceOptions, Variant,
};
use grpdal_core::problems::{
    gen_sparse_recovery, gen_strongly_convex_quadratic, gen_tv_deblur, lasso_saddle, phantom,
    quadratic_saddle, solve_reference, tv_l1_saddle, tv_l1_saddle_exact, unflatten_image, QuadraticSaddleInstance,
    ReferenceOptions, SparseRecoveryInstance, TVDeblurInstance,
};
use grpdal_core::{operator_norm_in_metric, Metric, SaddleProblem};
use log::info;
use ndarray::{Array1, Array2};
use rayon::prelude::*;
use serde::Deserialize;
use sha2::{Digest, Sha256};

use crate::cache::{cache_dir, CachedReference, ReferenceCache};
use crate::config::{
    ExperimentConfig, ExperimentKind, ImageSource, ProblemSpec, ReferencePolicy, SolverKind, SolverSpec, StopSpec,
};
use crate::output::{write_rows, CellSummary, ResultRow, Summary};
use crate::pgm::{read_pgm, write_pgm, PgmFormat};
use crate::HarnessError;

#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub output: Option<PathBuf>,
    pub timing: bool,
}

pub enum Instance {
    Lasso(SparseRecoveryInstance),
    Tv(TVDeblurInstance),
    Synthetic(QuadraticSaddleInstance),
}

impl Instance {
    pub fn build(problem: &ProblemSpec, seed: u64) -> Result<Instance, HarnessError> {
        Ok(match problem {
            ProblemSpec::Lasso { n, p, s, zeta } => Instance::Lasso(gen_sparse_recovery(*n, *p, *s, *zeta, seed)?),
            ProblemSpec::TvDeblur {
                image,
                window,
                density,
                nu,
                kappa1,
            } => Instance::Tv(gen_tv_deblur(load_image(image)?, *window, *density, *nu, *kappa1, seed)?),
            ProblemSpec::Synthetic { n, m, gamma_f, gamma_g } => {
                Instance::Synthetic(gen_strongly_convex_quadratic(*n, *m, *gamma_f, *gamma_g, seed)?)
            }
        })
    }

    /// Starting dual point: `y0 = A x0 + b = b` for sparse recovery, zero otherwise.
    pub fn initial_dual(&self) -> Option<Array1<f64>> {
        match self {
            Instance::Lasso(i) => Some(i.b.clone()),
            _ => None,
        }
    }

    /// The saddle problem the solvers run on (no reference installed).
    pub fn saddle(&self) -> Result<SaddleProblem, HarnessError> {
        Ok(match self {
            Instance::Lasso(i) => lasso_saddle(i)?,
            Instance::Tv(i) => tv_l1_saddle(i)?,
            Instance::Synthetic(i) => quadratic_saddle(i)?,
        })
    }
}

pub fn load_image(source: &ImageSource) -> Result<Array2<f64>, HarnessError> {
    match source {
        ImageSource::Phantom { height, width } => Ok(phantom(*height, *width)),
        ImageSource::File(path) => read_pgm(path).map_err(|e| HarnessError::Input(format!("{}: {e}", path.display()))),
    }
}

/// Optimal value and, when meaningful for the solved saddle, the saddle point.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub objective: f64,
    pub point: Option<(Array1<f64>, Array1<f64>)>,
    pub source: String,
}

#[derive(Deserialize)]
struct ReferenceFile {
    objective: f64,
    x: Option<Vec<f64>>,
    y: Option<Vec<f64>>,
}

fn key_material(cfg: &ExperimentConfig, seed: u64, max_iterations: usize, tol: f64) -> Result<String, HarnessError> {
    let image_digest = match &cfg.problem {
        ProblemSpec::TvDeblur {
            image: ImageSource::File(p),
            ..
        } => {
            let bytes = std::fs::read(p).map_err(|e| HarnessError::io(p, e))?;
            format!("|image-sha256={}", hex::encode(Sha256::digest(&bytes)))
        }
        _ => String::new(),
    };
    Ok(format!(
        "v1|{}|{:?}{image_digest}|seed={seed}|reference=grpdal,beta=1,phi=1.5,max_iterations={max_iterations},tol={tol:e}",
        cfg.kind.name(),
        cfg.problem
    ))
}

/// Resolves the reference for one seed according to the configured policy.
pub fn reference_for(
    cfg: &ExperimentConfig,
    instance: &Instance,
    seed: u64,
    cache: &ReferenceCache,
) -> Result<Option<Reference>, HarnessError> {
    match (&cfg.reference, instance) {
        (ReferencePolicy::None, _) => Ok(None),
        (_, Instance::Synthetic(i)) => Ok(Some(Reference {
            objective: quadratic_saddle(i)?.primal_objective(i.x_star.view())?,
            point: Some((i.x_star.clone(), i.y_star.clone())),
            source: "closed form".into(),
        })),
        (ReferencePolicy::Load(path), _) => {
            let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
            let f: ReferenceFile =
                serde_json::from_str(&text).map_err(|e| HarnessError::Input(format!("{}: {e}", path.display())))?;
            let point = match (f.x, f.y, instance) {
                (Some(x), Some(y), Instance::Lasso(_)) => Some((Array1::from(x), Array1::from(y))),
                _ => None,
            };
            Ok(Some(Reference {
                objective: f.objective,
                point,
                source: path.display().to_string(),
            }))
        }
        (ReferencePolicy::Compute { max_iterations, tol }, _) => {
            let material = key_material(cfg, seed, *max_iterations, *tol)?;
            let entry = match cache.load(&material)? {
                Some(e) => e,
                None => {
                    info!("computing reference for seed {seed}");
                    let problem = match instance {
                        Instance::Lasso(i) => lasso_saddle(i)?,
                        Instance::Tv(i) => tv_l1_saddle_exact(i)?,
                        Instance::Synthetic(_) => unreachable!(),
                    };
                    let opts = ReferenceOptions {
                        max_iterations: *max_iterations,
                        tol: *tol,
                        ..ReferenceOptions::default()
                    };
                    let r = solve_reference(&problem, &opts)?;
                    let entry = CachedReference {
                        key_material: material.clone(),
                        objective: r.objective,
                        x: r.x.to_vec(),
                        y: r.y.to_vec(),
                        kkt_residual: r.kkt_residual,
                        iterations: r.iterations,
                    };
                    cache.store(&entry)?;
                    entry
                }
            };
            // the TV reference lives on a different saddle; only its value carries over
            let point = match instance {
                Instance::Lasso(_) => Some((Array1::from(entry.x), Array1::from(entry.y))),
                _ => None,
            };
            Ok(Some(Reference {
                objective: entry.objective,
                point,
                source: cache.path_for(&material).display().to_string(),
            }))
        }
    }
}

fn stopping_rule(stop: StopSpec, reference: Option<&Reference>) -> StoppingRule {
    match (stop, reference) {
        (StopSpec::Objective(tol), Some(r)) => StoppingRule::ObjectiveResidual {
            optimum: r.objective,
            tol,
        },
        (StopSpec::RelativeObjective(tol), Some(r)) => StoppingRule::RelativeObjectiveResidual {
            optimum: r.objective,
            tol,
        },
        (StopSpec::Gap(tol), Some(_)) => StoppingRule::Gap { tol },
        _ => StoppingRule::Budget,
    }
}

/// Runs one solver on one prepared problem. `observer` sees every row.
pub fn run_solver(
    spec: &SolverSpec,
    problem: &SaddleProblem,
    stopping: StoppingRule,
    trace: TraceOptions,
    y0: Option<Array1<f64>>,
    observer: &mut dyn FnMut(&IterationRow),
) -> Result<RunReport, grpdal_core::Error> {
    let p = &spec.params;
    let (n, m) = (problem.primal_dim(), problem.dual_dim());
    match spec.kind {
        SolverKind::Pda => {
            let norm = operator_norm_in_metric(&problem.a, &Metric::identity(m), 200, 0)?;
            let cfg = PdaConfig {
                max_iterations: p.max_iterations,
                stopping,
                trace,
                y0,
                ..PdaConfig::balanced(norm, p.pda_ratio, p.pda_safety)
            };
            pda_observed(problem, &cfg, observer)
        }
        SolverKind::Pdal => {
            let cfg = PdalConfig {
                beta: p.beta.unwrap_or(1.0),
                mu: p.mu,
                delta: p.pdal_delta,
                probe_scale: p.probe_scale,
                probe_seed: p.probe_seed,
                max_iterations: p.max_iterations,
                stopping,
                trace,
                x0: None,
                y0,
            };
            pdal_observed(problem, &cfg, observer)
        }
        kind => {
            let primal_metric = p.primal_metric.map(|c| Metric::scaled_identity(n, c));
            let dual_metric = p.dual_metric.map(|c| Metric::scaled_identity(m, c));
            let beta = match (kind, p.beta) {
                (_, Some(b)) => b,
                (SolverKind::IpGrpdalLinear, None) => {
                    compute_strongly_convex_params(
                        problem.f.strong_convexity(),
                        problem.g.strong_convexity(),
                        p.primal_metric.unwrap_or(1.0),
                        p.dual_metric.unwrap_or(1.0),
                        p.tau0.unwrap_or(0.0),
                    )?
                    .0
                }
                (_, None) => 1.0,
            };
            let cfg = SolverConfig {
                phi: p.phi,
                eta: p.eta,
                mu: p.mu,
                beta,
                initial_step: match p.tau0 {
                    Some(t) => InitialStep::Fixed(t),
                    None => InitialStep::Probe {
                        scale: p.probe_scale,
                        seed: p.probe_seed,
                    },
                },
                primal_errors: p.delta,
                dual_errors: p.eps,
                max_iterations: p.max_iterations,
                stopping,
                trial: p.trial,
                primal_metric,
                dual_metric,
                x0: None,
                y0,
                max_inner: p.max_inner,
                trace,
                seed: 0,
            };
            let variant = match kind {
                SolverKind::IpGrpdalAccel => Variant::AcceleratedPartial,
                SolverKind::IpGrpdalLinear => Variant::AcceleratedFull,
                _ => Variant::Basic,
            };
            let mut report = run_observed(problem, &cfg, variant, &mut |s| observer(s.row))?;
            if kind == SolverKind::Grpdal {
                report.solver = "grpdal".into();
            }
            Ok(report)
        }
    }
}

struct Prepared {
    seed: u64,
    instance: Instance,
    problem: SaddleProblem,
    reference: Option<Reference>,
}

fn prepare(cfg: &ExperimentConfig, seed: u64, cache: &ReferenceCache) -> Result<Prepared, HarnessError> {
    let instance = Instance::build(&cfg.problem, seed)?;
    let reference = reference_for(cfg, &instance, seed, cache)?;
    let mut problem = instance.saddle()?;
    if let Some((x, y)) = reference.as_ref().and_then(|r| r.point.clone()) {
        problem.set_reference(x, y)?;
    }
    Ok(Prepared {
        seed,
        instance,
        problem,
        reference,
    })
}

fn with_overrides(cfg: &ExperimentConfig, opts: &RunOptions) -> ExperimentConfig {
    let mut cfg = cfg.clone();
    if let Some(s) = opts.seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = &opts.output {
        cfg.output = o.clone();
    }
    cfg
}

/// Computes (or finds cached) references for every seed.
pub fn compute_references(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Vec<(u64, Reference)>, HarnessError> {
    let cfg = with_overrides(cfg, opts);
    let cache = ReferenceCache::new(cache_dir(&cfg.output));
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let instance = Instance::build(&cfg.problem, seed)?;
            let r = reference_for(&cfg, &instance, seed, &cache)?;
            r.map(|r| (seed, r))
                .ok_or_else(|| HarnessError::Input("reference policy is `none`; nothing to compute".into()))
        })
        .collect()
}

/// Runs every (solver, seed) cell and writes CSVs, images and `summary.json`.
pub fn run_experiment(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Summary, HarnessError> {
    let cfg = with_overrides(cfg, opts);
    std::fs::create_dir_all(&cfg.output).map_err(|e| HarnessError::io(&cfg.output, e))?;
    let cache = ReferenceCache::new(cache_dir(&cfg.output));
    let prepared: Vec<Prepared> = cfg
        .seeds
        .par_iter()
        .map(|&seed| prepare(&cfg, seed, &cache))
        .collect::<Result<_, _>>()?;
    for p in &prepared {
        if let Instance::Tv(i) = &p.instance {
            write_pgm(&cfg.output.join(format!("observed_seed{}.pgm", p.seed)), &i.observed, PgmFormat::Binary)?;
        }
    }
    let cells: Vec<(&SolverSpec, &Prepared)> = cfg
        .solvers
        .iter()
        .flat_map(|s| prepared.iter().map(move |p| (s, p)))
        .collect();
    let summaries: Vec<CellSummary> = cells
        .par_iter()
        .map(|(spec, prep)| run_cell(&cfg, spec, prep, opts.timing))
        .collect::<Result<_, _>>()?;
    let order: Vec<&str> = cfg.solvers.iter().map(|s| s.kind.name()).collect();
    let summary = Summary::aggregate(cfg.kind.name(), cfg.seeds.clone(), summaries, &order);
    summary.write(&cfg.output.join("summary.json"))?;
    Ok(summary)
}

fn run_cell(cfg: &ExperimentConfig, spec: &SolverSpec, prep: &Prepared, timing: bool) -> Result<CellSummary, HarnessError> {
    let name = spec.kind.name();
    let stopping = stopping_rule(cfg.stop, prep.reference.as_ref());
    let gaps_available = prep.problem.reference().is_some();
    let trace = TraceOptions {
        objective: cfg.trace.objective,
        gap: cfg.trace.gap && gaps_available,
        ergodic_gap: cfg.trace.ergodic_gap && gaps_available,
        certificates: false,
    };
    let start = Instant::now();
    let mut times = Vec::new();
    let y0 = prep.instance.initial_dual();
    let report = run_solver(spec, &prep.problem, stopping, trace, y0, &mut |_| {
        times.push(start.elapsed().as_secs_f64())
    })
    .map_err(|source| HarnessError::Solver {
        solver: name.to_string(),
        seed: prep.seed,
        source,
    })?;
    let elapsed = start.elapsed().as_secs_f64();
    let rows: Vec<ResultRow> = report
        .rows
        .iter()
        .zip(&times)
        .map(|(r, t)| ResultRow::from_iteration(name, prep.seed, r, timing.then_some(*t)))
        .collect();
    let csv_name = format!("{name}_seed{}.csv", prep.seed);
    write_rows(&cfg.output.join(&csv_name), &rows)?;
    let image = match &prep.instance {
        Instance::Tv(i) => {
            let file = format!("{name}_seed{}.pgm", prep.seed);
            let img = unflatten_image(report.x.view(), i.height(), i.width())?;
            write_pgm(&cfg.output.join(&file), &img, PgmFormat::Binary)?;
            Some(file)
        }
        _ => None,
    };
    let (status, message) = match &report.status {
        RunStatus::Converged => ("converged", None),
        RunStatus::BudgetExhausted => ("budget-exhausted", None),
        RunStatus::InexactSolveFailed { message, .. } => ("inexact-solve-failed", Some(message.clone())),
    };
    let final_objective = prep.problem.primal_objective(report.x.view()).ok();
    let final_gap = if gaps_available {
        prep.problem.gap(report.x.view(), report.y.view()).ok().map(|g| g.total)
    } else {
        None
    };
    info!("{name} seed {}: {status} after {} iterations", prep.seed, report.iterations());
    Ok(CellSummary {
        solver: name.to_string(),
        seed: prep.seed,
        status: status.to_string(),
        message,
        iterations: report.iterations(),
        extra_trials: report.extra_trials(),
        dual_evaluations: report.dual_evaluations(),
        achieved_delta_sum: report.achieved_delta_sum(),
        achieved_eps_sum: report.achieved_eps_sum(),
        final_objective,
        final_gap,
        reference_objective: prep.reference.as_ref().map(|r| r.objective),
        operator_norm: report.operator_norm,
        floor_violations: report.floor_violations,
        warnings: report.warnings.clone(),
        wall_time: timing.then_some(elapsed),
        csv: csv_name,
        image,
    })
}

/// Reads the config file and parses it relative to its directory.
pub fn load_config(path: &Path) -> Result<ExperimentConfig, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        HarnessError::Config(crate::config::ConfigError {
            line: None,
            message: format!("cannot read {}: {e}", path.display()),
        })
    })?;
    let base = path.parent().unwrap_or(Path::new("."));
    Ok(crate::config::parse_config(&text, base)?)
}

pub fn experiment_name(kind: ExperimentKind) -> &'static str {
    kind.name()
}
