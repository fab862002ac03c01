//! Flat `key = value` experiment files.
//!
//! One assignment per line, `#` starts a comment. Solver parameters may be
//! given bare (default for every solver) or scoped as `<solver>.<param>`,
//! which wins over the bare value. See the README for the full grammar.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use grpdal_core::algorithms::{ErrorSchedule, TrialPolicy};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
#[error("{}{message}", line.map(|l| format!("line {l}: ")).unwrap_or_default())]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

fn err<T>(line: Option<usize>, message: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        line,
        message: message.into(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExperimentKind {
    Lasso,
    TvDeblur,
    SyntheticStronglyConvex,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::Lasso => "lasso",
            ExperimentKind::TvDeblur => "tv-deblur",
            ExperimentKind::SyntheticStronglyConvex => "synthetic-strongly-convex",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum SolverKind {
    Pda,
    Pdal,
    Grpdal,
    IpGrpdal,
    IpGrpdalAccel,
    IpGrpdalLinear,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] = [
        SolverKind::Pda,
        SolverKind::Pdal,
        SolverKind::Grpdal,
        SolverKind::IpGrpdal,
        SolverKind::IpGrpdalAccel,
        SolverKind::IpGrpdalLinear,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Pda => "pda",
            SolverKind::Pdal => "pdal",
            SolverKind::Grpdal => "grpdal",
            SolverKind::IpGrpdal => "ip-grpdal",
            SolverKind::IpGrpdalAccel => "ip-grpdal-accel",
            SolverKind::IpGrpdalLinear => "ip-grpdal-linear",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ImageSource {
    Phantom { height: usize, width: usize },
    File(PathBuf),
}

#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSpec {
    Lasso {
        n: usize,
        p: usize,
        s: usize,
        zeta: f64,
    },
    TvDeblur {
        image: ImageSource,
        window: usize,
        density: f64,
        nu: f64,
        kappa1: f64,
    },
    Synthetic {
        n: usize,
        m: usize,
        gamma_f: f64,
        gamma_g: f64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub enum ReferencePolicy {
    Compute { max_iterations: usize, tol: f64 },
    /// JSON file with `objective` and optionally `x`, `y`.
    Load(PathBuf),
    None,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StopSpec {
    Objective(f64),
    RelativeObjective(f64),
    Gap(f64),
    Budget,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct TraceSpec {
    pub objective: bool,
    pub gap: bool,
    pub ergodic_gap: bool,
}

/// Per-solver scalars after defaults and overrides are merged.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverParams {
    pub phi: f64,
    pub eta: f64,
    pub mu: f64,
    pub beta: Option<f64>,
    pub tau0: Option<f64>,
    pub probe_scale: f64,
    pub probe_seed: u64,
    pub delta: ErrorSchedule,
    pub eps: ErrorSchedule,
    pub trial: TrialPolicy,
    pub max_iterations: usize,
    pub max_inner: usize,
    pub primal_metric: Option<f64>,
    pub dual_metric: Option<f64>,
    pub pda_ratio: f64,
    pub pda_safety: f64,
    pub pdal_delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolverSpec {
    pub kind: SolverKind,
    pub params: SolverParams,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    pub problem: ProblemSpec,
    pub solvers: Vec<SolverSpec>,
    pub seeds: Vec<u64>,
    pub output: PathBuf,
    pub reference: ReferencePolicy,
    pub stop: StopSpec,
    pub trace: TraceSpec,
}

const GLOBAL_KEYS: &[&str] = &[
    "experiment",
    "solvers",
    "seed",
    "seeds",
    "output",
    "stop",
    "tol",
    "trace",
    "reference",
    "reference_file",
    "reference_max_iterations",
    "reference_tol",
];
const LASSO_KEYS: &[&str] = &["n", "p", "s", "zeta"];
const TV_KEYS: &[&str] = &["image", "height", "width", "window", "density", "nu", "kappa1"];
const SYNTHETIC_KEYS: &[&str] = &["n", "m", "gamma_f", "gamma_g"];
const SOLVER_KEYS: &[&str] = &[
    "phi",
    "eta",
    "mu",
    "beta",
    "tau0",
    "probe_scale",
    "probe_seed",
    "delta",
    "eps",
    "trial",
    "max_iterations",
    "max_inner",
    "primal_metric",
    "dual_metric",
    "pda_ratio",
    "pda_safety",
    "pdal_delta",
];

struct Entries {
    map: BTreeMap<String, (String, usize)>,
}

impl Entries {
    fn raw(&self, key: &str) -> Option<(&str, usize)> {
        self.map.get(key).map(|(v, l)| (v.as_str(), *l))
    }

    fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        match self.raw(key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .or_else(|_| err(Some(line), format!("cannot parse `{key} = {v}`"))),
        }
    }

    fn or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T, ConfigError> {
        Ok(self.get(key)?.unwrap_or(default))
    }

    fn line(&self, key: &str) -> Option<usize> {
        self.raw(key).map(|(_, l)| l)
    }

    /// Scoped value first, then the bare default.
    fn solver_raw(&self, solver: SolverKind, key: &str) -> Option<(&str, usize)> {
        self.raw(&format!("{}.{key}", solver.name())).or_else(|| self.raw(key))
    }

    fn solver_get<T: std::str::FromStr>(&self, solver: SolverKind, key: &str) -> Result<Option<T>, ConfigError> {
        match self.solver_raw(solver, key) {
            None => Ok(None),
            Some((v, line)) => v
                .parse()
                .map(Some)
                .or_else(|_| err(Some(line), format!("cannot parse {key} = {v}"))),
        }
    }
}

/// Parses `text`; relative paths are resolved against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<ExperimentConfig, ConfigError> {
    let mut map = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((k, v)) = content.split_once('=') else {
            return err(Some(line), format!("expected `key = value`, got `{content}`"));
        };
        let (k, v) = (k.trim().to_string(), v.trim().to_string());
        if k.is_empty() {
            return err(Some(line), "empty key");
        }
        if let Some((_, first)) = map.get(&k) {
            return err(Some(line), format!("duplicate key `{k}` (first set on line {first})"));
        }
        map.insert(k, (v, line));
    }
    let e = Entries { map };

    let Some((kind_name, kind_line)) = e.raw("experiment") else {
        return err(None, "missing required key `experiment`");
    };
    let kind = match kind_name {
        "lasso" => ExperimentKind::Lasso,
        "tv-deblur" => ExperimentKind::TvDeblur,
        "synthetic-strongly-convex" => ExperimentKind::SyntheticStronglyConvex,
        other => return err(Some(kind_line), format!("unknown experiment `{other}`")),
    };
    let problem_keys = match kind {
        ExperimentKind::Lasso => LASSO_KEYS,
        ExperimentKind::TvDeblur => TV_KEYS,
        ExperimentKind::SyntheticStronglyConvex => SYNTHETIC_KEYS,
    };
    for (k, (_, line)) in &e.map {
        let known = match k.split_once('.') {
            Some((solver, param)) => {
                if SolverKind::parse(solver).is_none() {
                    return err(Some(*line), format!("unknown solver `{solver}` in `{k}`"));
                }
                SOLVER_KEYS.contains(&param)
            }
            None => GLOBAL_KEYS.contains(&k.as_str()) || problem_keys.contains(&k.as_str()) || SOLVER_KEYS.contains(&k.as_str()),
        };
        if !known {
            return err(Some(*line), format!("unknown key `{k}` for experiment {}", kind.name()));
        }
    }

    let solver_kinds = parse_solver_list(&e)?;
    let problem = parse_problem(&e, kind, base)?;
    let seeds = parse_seeds(&e)?;
    let output = base.join(e.raw("output").map_or("out", |(v, _)| v));
    let stop = parse_stop(&e, kind)?;
    let reference = parse_reference(&e, kind, base)?;
    let trace = parse_trace(&e, kind, &reference)?;
    if matches!(stop, StopSpec::Objective(_) | StopSpec::RelativeObjective(_) | StopSpec::Gap(_))
        && reference == ReferencePolicy::None
    {
        return err(e.line("stop"), "objective and gap stopping rules need a reference solution");
    }
    if let (StopSpec::Gap(_), ExperimentKind::TvDeblur) = (stop, kind) {
        return err(e.line("stop"), "gap stopping is not available for tv-deblur");
    }

    let mut solvers = Vec::new();
    for sk in solver_kinds {
        let params = parse_solver_params(&e, sk, kind)?;
        solvers.push(SolverSpec { kind: sk, params });
    }
    Ok(ExperimentConfig {
        kind,
        problem,
        solvers,
        seeds,
        output,
        reference,
        stop,
        trace,
    })
}

fn parse_solver_list(e: &Entries) -> Result<Vec<SolverKind>, ConfigError> {
    let Some((list, line)) = e.raw("solvers") else {
        return err(None, "missing required key `solvers`");
    };
    let mut out = Vec::new();
    for name in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let Some(k) = SolverKind::parse(name) else {
            return err(Some(line), format!("unknown solver `{name}`"));
        };
        if out.contains(&k) {
            return err(Some(line), format!("solver `{name}` listed twice"));
        }
        out.push(k);
    }
    if out.is_empty() {
        return err(Some(line), "solver list is empty");
    }
    Ok(out)
}

fn parse_problem(e: &Entries, kind: ExperimentKind, base: &Path) -> Result<ProblemSpec, ConfigError> {
    Ok(match kind {
        ExperimentKind::Lasso => {
            let (n, p, s) = (e.or("n", 100usize)?, e.or("p", 100usize)?, e.or("s", 10usize)?);
            let zeta = e.or("zeta", 0.1)?;
            if n == 0 || p == 0 || s == 0 || s > p {
                return err(e.line("s"), format!("need n, p >= 1 and 0 < s <= p, got ({n}, {p}, {s})"));
            }
            if !(zeta > 0.0) {
                return err(e.line("zeta"), "zeta must be positive");
            }
            ProblemSpec::Lasso { n, p, s, zeta }
        }
        ExperimentKind::TvDeblur => {
            let image = match e.raw("image") {
                None | Some(("phantom", _)) => {
                    let (height, width) = (e.or("height", 64usize)?, e.or("width", 64usize)?);
                    if height < 2 || width < 2 {
                        return err(e.line("height"), "phantom must be at least 2x2");
                    }
                    ImageSource::Phantom { height, width }
                }
                Some((path, line)) => {
                    let p = base.join(path);
                    if !p.is_file() {
                        return err(Some(line), format!("image file {} does not exist", p.display()));
                    }
                    ImageSource::File(p)
                }
            };
            let window = e.or("window", 9usize)?;
            if window % 2 == 0 {
                return err(e.line("window"), format!("blur window must be odd, got {window}"));
            }
            let density = e.or("density", 0.2)?;
            if !(0.0..=1.0).contains(&density) {
                return err(e.line("density"), "density must lie in [0, 1]");
            }
            let nu = e.or("nu", 0.1)?;
            let kappa1 = e.or("kappa1", nu / 2.0)?;
            if !(nu > 0.0 && kappa1 > 0.0 && kappa1 < nu) {
                return err(e.line("kappa1"), "need nu > 0 and 0 < kappa1 < nu");
            }
            ProblemSpec::TvDeblur {
                image,
                window,
                density,
                nu,
                kappa1,
            }
        }
        ExperimentKind::SyntheticStronglyConvex => {
            let (n, m) = (e.or("n", 50usize)?, e.or("m", 50usize)?);
            let (gamma_f, gamma_g) = (e.or("gamma_f", 1.0)?, e.or("gamma_g", 1.0)?);
            if n == 0 || m == 0 || !(gamma_f > 0.0 && gamma_g > 0.0) {
                return err(None, "synthetic problem needs positive dimensions and moduli");
            }
            ProblemSpec::Synthetic { n, m, gamma_f, gamma_g }
        }
    })
}

fn parse_seeds(e: &Entries) -> Result<Vec<u64>, ConfigError> {
    match (e.raw("seed"), e.raw("seeds")) {
        (Some(_), Some((_, line))) => err(Some(line), "give either `seed` or `seeds`, not both"),
        (Some((v, line)), None) => v
            .parse()
            .map(|s| vec![s])
            .or_else(|_| err(Some(line), format!("bad seed `{v}`"))),
        (None, Some((v, line))) => {
            let bad = || err(Some(line), format!("bad seed list `{v}` (use `a..b` or `a, b, c`)"));
            let seeds: Vec<u64> = if let Some((a, b)) = v.split_once("..") {
                let (Ok(a), Ok(b)) = (a.trim().parse::<u64>(), b.trim().parse::<u64>()) else {
                    return bad();
                };
                (a..b).collect()
            } else {
                let parsed: Result<Vec<u64>, _> = v.split(',').map(|s| s.trim().parse()).collect();
                match parsed {
                    Ok(s) => s,
                    Err(_) => return bad(),
                }
            };
            if seeds.is_empty() {
                return err(Some(line), "seed list is empty");
            }
            Ok(seeds)
        }
        (None, None) => Ok(vec![0]),
    }
}

fn parse_stop(e: &Entries, kind: ExperimentKind) -> Result<StopSpec, ConfigError> {
    let default_rule = match kind {
        ExperimentKind::Lasso => "objective",
        ExperimentKind::TvDeblur => "relative-objective",
        ExperimentKind::SyntheticStronglyConvex => "gap",
    };
    let default_tol = match kind {
        ExperimentKind::Lasso => 1e-10,
        ExperimentKind::TvDeblur => 1e-3,
        ExperimentKind::SyntheticStronglyConvex => 1e-12,
    };
    let rule = e.raw("stop").map_or(default_rule, |(v, _)| v);
    let tol: f64 = e.or("tol", default_tol)?;
    if !(tol > 0.0) {
        return err(e.line("tol"), "tol must be positive");
    }
    Ok(match rule {
        "objective" => StopSpec::Objective(tol),
        "relative-objective" => StopSpec::RelativeObjective(tol),
        "gap" => StopSpec::Gap(tol),
        "budget" => StopSpec::Budget,
        other => return err(e.line("stop"), format!("unknown stopping rule `{other}`")),
    })
}

fn parse_reference(e: &Entries, kind: ExperimentKind, base: &Path) -> Result<ReferencePolicy, ConfigError> {
    let policy = e.raw("reference").map_or("compute", |(v, _)| v);
    Ok(match policy {
        "compute" => {
            let tol = e.or("reference_tol", 1e-13)?;
            let max_iterations = e.or("reference_max_iterations", 50_000usize)?;
            if max_iterations == 0 || !(tol > 0.0) {
                return err(e.line("reference_tol"), "reference budget and tolerance must be positive");
            }
            ReferencePolicy::Compute { max_iterations, tol }
        }
        "load" => {
            let Some((path, line)) = e.raw("reference_file") else {
                return err(e.line("reference"), "`reference = load` needs `reference_file`");
            };
            let p = base.join(path);
            if !p.is_file() {
                return err(Some(line), format!("reference file {} does not exist", p.display()));
            }
            if kind == ExperimentKind::SyntheticStronglyConvex {
                return err(Some(line), "the synthetic problem has an exact reference; do not load one");
            }
            ReferencePolicy::Load(p)
        }
        "none" => ReferencePolicy::None,
        other => return err(e.line("reference"), format!("unknown reference policy `{other}`")),
    })
}

fn parse_trace(e: &Entries, kind: ExperimentKind, reference: &ReferencePolicy) -> Result<TraceSpec, ConfigError> {
    let default = match (kind, reference) {
        (_, ReferencePolicy::None) => "objective",
        (ExperimentKind::TvDeblur, _) => "objective",
        _ => "objective, gap",
    };
    let (list, line) = e.raw("trace").unwrap_or((default, 0));
    let line = (line > 0).then_some(line);
    let mut t = TraceSpec::default();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        match item {
            "objective" => t.objective = true,
            "gap" => t.gap = true,
            "ergodic_gap" => t.ergodic_gap = true,
            "none" => {}
            other => return err(line, format!("unknown trace column `{other}`")),
        }
    }
    if (t.gap || t.ergodic_gap) && (kind == ExperimentKind::TvDeblur || *reference == ReferencePolicy::None) {
        return err(line, "gap tracing needs a reference saddle point (not available for tv-deblur)");
    }
    Ok(t)
}

fn parse_schedule(v: &str, line: usize) -> Result<ErrorSchedule, ConfigError> {
    let bad = || err(Some(line), format!("bad error schedule `{v}` (use zero, poly:c,alpha or geom:c,q)"));
    if v == "zero" {
        return Ok(ErrorSchedule::Zero);
    }
    let Some((form, args)) = v.split_once(':') else {
        return bad();
    };
    let nums: Result<Vec<f64>, _> = args.split(',').map(|s| s.trim().parse()).collect();
    let Ok(nums) = nums else {
        return bad();
    };
    let s = match (form.trim(), nums.as_slice()) {
        ("poly", [c, alpha]) => ErrorSchedule::Polynomial { c: *c, alpha: *alpha },
        ("geom", [c, q]) => ErrorSchedule::Geometric { c: *c, q: *q },
        _ => return bad(),
    };
    s.validate().or_else(|e| err(Some(line), e.to_string()))?;
    Ok(s)
}

fn parse_solver_params(e: &Entries, s: SolverKind, kind: ExperimentKind) -> Result<SolverParams, ConfigError> {
    let tv = kind == ExperimentKind::TvDeblur;
    let schedule = |key: &str, default: ErrorSchedule| -> Result<ErrorSchedule, ConfigError> {
        match e.solver_raw(s, key) {
            None => Ok(default),
            Some((v, line)) => parse_schedule(v, line),
        }
    };
    let inexact = matches!(s, SolverKind::IpGrpdal | SolverKind::IpGrpdalAccel | SolverKind::IpGrpdalLinear);
    // the TV primal term has no closed-form prox, so it needs a positive schedule
    let delta_default = if tv {
        ErrorSchedule::Polynomial { c: 1.0, alpha: 2.0 }
    } else {
        ErrorSchedule::Zero
    };
    if tv && !inexact {
        return err(
            e.line("solvers"),
            format!("solver {} needs a closed-form primal prox; tv-deblur supports only ip-grpdal variants", s.name()),
        );
    }
    let (delta, eps) = if inexact {
        (schedule("delta", delta_default)?, schedule("eps", ErrorSchedule::Zero)?)
    } else {
        // bare schedules are defaults for the inexact solvers only
        for key in ["delta", "eps"] {
            if let Some(line) = e.line(&format!("{}.{key}", s.name())) {
                return err(Some(line), format!("solver {} uses exact proxes; {key} does not apply", s.name()));
            }
        }
        (ErrorSchedule::Zero, ErrorSchedule::Zero)
    };
    let trial = match e.solver_raw(s, "trial") {
        None | Some(("aggressive", _)) => TrialPolicy::Aggressive,
        Some(("conservative", _)) => TrialPolicy::Conservative,
        Some((v, line)) => return err(Some(line), format!("unknown trial policy `{v}`")),
    };
    let tau0 = match e.solver_raw(s, "tau0") {
        None | Some(("probe", _)) => None,
        Some((v, line)) => match v.parse::<f64>() {
            Ok(t) if t > 0.0 => Some(t),
            _ => return err(Some(line), format!("tau0 must be `probe` or a positive number, got `{v}`")),
        },
    };
    if s == SolverKind::IpGrpdalLinear && tau0.is_none() {
        return err(None, "ip-grpdal-linear needs a fixed `tau0`");
    }
    let default_phi = match s {
        SolverKind::IpGrpdalAccel | SolverKind::IpGrpdalLinear => 1.5,
        _ => 1.618,
    };
    let default_beta = match kind {
        ExperimentKind::Lasso => 100.0,
        _ => 1.0,
    };
    let beta = match s {
        // balanced automatically unless given for this solver explicitly
        SolverKind::IpGrpdalLinear => e.get(&format!("{}.beta", s.name()))?,
        _ => Some(e.solver_get(s, "beta")?.unwrap_or(default_beta)),
    };
    let default_iters = match kind {
        ExperimentKind::Lasso => 100_000,
        ExperimentKind::TvDeblur => 2_000,
        ExperimentKind::SyntheticStronglyConvex => 1_000,
    };
    // the accelerated variants need metric eigenvalues strictly above 1
    let default_metric = match s {
        SolverKind::IpGrpdalAccel | SolverKind::IpGrpdalLinear => Some(1.1),
        _ => None,
    };
    let metric = |key: &str| -> Result<Option<f64>, ConfigError> {
        let v: Option<f64> = e.solver_get(s, key)?;
        match v {
            Some(c) if !(c > 0.0) => err(e.solver_raw(s, key).map(|(_, l)| l), format!("{key} must be positive")),
            None => Ok(default_metric),
            other => Ok(other),
        }
    };
    Ok(SolverParams {
        phi: e.solver_get(s, "phi")?.unwrap_or(default_phi),
        eta: e.solver_get(s, "eta")?.unwrap_or(0.99),
        mu: e.solver_get(s, "mu")?.unwrap_or(0.7),
        beta,
        tau0,
        probe_scale: e.solver_get(s, "probe_scale")?.unwrap_or(1e-2),
        probe_seed: e.solver_get(s, "probe_seed")?.unwrap_or(0),
        delta,
        eps,
        trial,
        max_iterations: e.solver_get(s, "max_iterations")?.unwrap_or(default_iters),
        max_inner: e.solver_get(s, "max_inner")?.unwrap_or(grpdal_core::prox::DEFAULT_MAX_INNER),
        primal_metric: metric("primal_metric")?,
        dual_metric: metric("dual_metric")?,
        pda_ratio: e.solver_get(s, "pda_ratio")?.unwrap_or(10.0),
        pda_safety: e.solver_get(s, "pda_safety")?.unwrap_or(0.99),
        pdal_delta: e.solver_get(s, "pdal_delta")?.unwrap_or(0.99),
    })
}
