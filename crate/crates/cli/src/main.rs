//! `minksym`: staged symmetrization experiments, probes and norm checks.
//!
//! Exit codes: 0 success, 1 property violation, 2 configuration error,
//! 3 runtime error.

mod config;
mod output;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{Context, Result};
use clap::{Args, CommandFactory, Parser, Subcommand};
use minksym::bodies::{EuclideanBall, IntersectionBody, PolytopeHull, ScaledCrossPolytope, SupportBody};
use minksym::linalg::Seed;
use minksym::norms::{equivalence_ratios, equivalence_sweep, EquivalenceReport};
use minksym::pipeline::{
    decay_experiment, run_pipeline, schedule_of_kind, DecayScope, DecayTable, EstimatorConfig, ExperimentReport,
    ScheduleKind, StageReport,
};
use minksym::probes::{run_probe, MomentDist, ProbeParams, ProbeReport, PROBE_NAMES};
use serde::Serialize;

use config::{config_error, CommandName, ConfigError, Format, MetricsArg, RunConfig, ScopeArg};
use output::{cell, emit, plan, Table, NORM_COLUMNS, PROBE_COLUMNS, STAGE_COLUMNS};

#[derive(Parser, Debug)]
#[command(name = "minksym", version, about = "Minkowski symmetrization experiments")]
struct Cli {
    /// JSON run configuration; flags on the command line take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Option<Command>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Diameter decay of the cross-polytope and the intersection body across dimensions.
    Decay(DecayArgs),
    /// Run a full schedule on one body, one report per seed.
    Pipeline(PipelineArgs),
    /// Run a named randomized probe.
    Probe(ProbeArgs),
    /// Check the equivalence between the inf-convolution norm and its surrogate.
    NormCheck(NormCheckArgs),
}

#[derive(Args, Debug, Default)]
struct Common {
    /// Seeds, comma separated.
    #[arg(long = "seeds", visible_alias = "seed", value_delimiter = ',')]
    seeds: Vec<u64>,
    /// Output file; without it results go to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_enum)]
    format: Option<Format>,
}

#[derive(Args, Debug, Default)]
struct EstimatorArgs {
    #[arg(long)]
    n_dirs: Option<usize>,
    #[arg(long)]
    mc_samples: Option<usize>,
    #[arg(long)]
    exact_cap: Option<usize>,
    #[arg(long)]
    starts: Option<usize>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    sandwich_dirs: Option<usize>,
    #[arg(long)]
    refine: Option<usize>,
    #[arg(long)]
    defect_tests: Option<usize>,
    /// Which stages get circumradius, sandwich and defect measurements.
    #[arg(long, value_enum)]
    metrics: Option<MetricsArg>,
    /// Record wall-clock seconds per stage (output is then not reproducible).
    #[arg(long)]
    timing: bool,
}

#[derive(Args, Debug)]
struct DecayArgs {
    /// Dimensions, comma separated.
    #[arg(long, value_delimiter = ',')]
    ns: Vec<usize>,
    /// random6, walsh5 or iterated.
    #[arg(long)]
    schedule: Option<ScheduleKind>,
    /// `full` runs and reports every stage; `relevant` only the diameter checks.
    #[arg(long, value_enum)]
    scope: Option<ScopeArg>,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    est: EstimatorArgs,
}

#[derive(Args, Debug)]
struct PipelineArgs {
    /// ball, cross, kt:T or hull:FILE (a JSON array of vertices).
    #[arg(long)]
    body: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    schedule: Option<ScheduleKind>,
    #[command(flatten)]
    common: Common,
    #[command(flatten)]
    est: EstimatorArgs,
}

#[derive(Args, Debug)]
struct ProbeArgs {
    /// Probe name.
    name: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    trials: Option<usize>,
    /// Overlap constant for basis-overlap.
    #[arg(long)]
    c1: Option<f64>,
    /// Top-k size for rearranged-moment.
    #[arg(long)]
    k: Option<usize>,
    /// exponential, gaussian-squared-half, gaussian or constant.
    #[arg(long)]
    dist: Option<MomentDist>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug)]
struct NormCheckArgs {
    /// Dimensions of the random sweep.
    #[arg(long, value_delimiter = ',')]
    ns: Vec<usize>,
    /// Random vectors per dimension.
    #[arg(long)]
    vectors: Option<usize>,
    /// Add the deterministic edge-case vectors.
    #[arg(long)]
    adversarial: bool,
    /// Check a single vector (comma separated) instead of sweeping; needs --k.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Option<Vec<f64>>,
    #[arg(long)]
    k: Option<f64>,
    #[command(flatten)]
    common: Common,
}

const DEFAULT_TRIALS: usize = 1000;
const DEFAULT_C1: f64 = 5.0;
const DEFAULT_NORM_NS: [usize; 3] = [8, 32, 128];
const DEFAULT_NORM_VECTORS: usize = 10_000;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            let code = if e.downcast_ref::<ConfigError>().is_some() {
                2
            } else {
                3
            };
            eprintln!("error: {e:#}");
            if code == 2 {
                eprintln!("{}", Cli::command().render_usage());
            }
            ExitCode::from(code)
        }
    }
}

fn overlay<T>(slot: &mut Option<T>, v: Option<T>) {
    if v.is_some() {
        *slot = v;
    }
}

fn apply_common(cfg: &mut RunConfig, c: Common) {
    if !c.seeds.is_empty() {
        cfg.seeds = c.seeds;
    }
    overlay(&mut cfg.out, c.out);
    overlay(&mut cfg.format, c.format);
}

fn apply_estimator(cfg: &mut EstimatorConfig, a: EstimatorArgs) {
    let set = |slot: &mut usize, v: Option<usize>| {
        if let Some(v) = v {
            *slot = v;
        }
    };
    set(&mut cfg.n_dirs, a.n_dirs);
    set(&mut cfg.mc_samples, a.mc_samples);
    set(&mut cfg.exact_cap, a.exact_cap);
    set(&mut cfg.starts, a.starts);
    set(&mut cfg.steps, a.steps);
    set(&mut cfg.sandwich_dirs, a.sandwich_dirs);
    set(&mut cfg.refine, a.refine);
    set(&mut cfg.defect_tests, a.defect_tests);
    if let Some(m) = a.metrics {
        cfg.metrics = m.into();
    }
    if a.timing {
        cfg.timing = true;
    }
}

/// Merges the optional config file with the flags of the chosen subcommand.
fn resolve(cli: Cli) -> Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| config_error(format!("cannot read {}: {e}", path.display())))?;
            RunConfig::from_json(&text).with_context(|| format!("in {}", path.display()))?
        }
        None => RunConfig::default(),
    };
    let Some(command) = cli.command else {
        if cfg.command.is_none() {
            return Err(config_error("no command given"));
        }
        return Ok(cfg);
    };
    match command {
        Command::Decay(a) => {
            cfg.command = Some(CommandName::Decay);
            if !a.ns.is_empty() {
                cfg.ns = a.ns;
            }
            overlay(&mut cfg.schedule, a.schedule);
            overlay(&mut cfg.scope, a.scope);
            apply_common(&mut cfg, a.common);
            apply_estimator(&mut cfg.estimator, a.est);
        }
        Command::Pipeline(a) => {
            cfg.command = Some(CommandName::Pipeline);
            overlay(&mut cfg.body, a.body);
            overlay(&mut cfg.n, a.n);
            overlay(&mut cfg.schedule, a.schedule);
            apply_common(&mut cfg, a.common);
            apply_estimator(&mut cfg.estimator, a.est);
        }
        Command::Probe(a) => {
            cfg.command = Some(CommandName::Probe);
            overlay(&mut cfg.probe, a.name);
            overlay(&mut cfg.n, a.n);
            overlay(&mut cfg.trials, a.trials);
            overlay(&mut cfg.c1, a.c1);
            overlay(&mut cfg.k, a.k.map(|k| k as f64));
            overlay(&mut cfg.dist, a.dist);
            apply_common(&mut cfg, a.common);
        }
        Command::NormCheck(a) => {
            cfg.command = Some(CommandName::NormCheck);
            if !a.ns.is_empty() {
                cfg.ns = a.ns;
            }
            overlay(&mut cfg.vectors, a.vectors);
            if a.adversarial {
                cfg.adversarial = Some(true);
            }
            overlay(&mut cfg.x, a.x);
            overlay(&mut cfg.k, a.k);
            apply_common(&mut cfg, a.common);
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let cfg = resolve(cli)?;
    match cfg.command.expect("resolved") {
        CommandName::Decay => cmd_decay(cfg),
        CommandName::Pipeline => cmd_pipeline(cfg),
        CommandName::Probe => cmd_probe(cfg),
        CommandName::NormCheck => cmd_norm_check(cfg),
    }
}

fn seeds(cfg: &RunConfig) -> Vec<Seed> {
    cfg.seeds.iter().map(|&s| Seed(s)).collect()
}

fn stage_row(n: usize, seed: Seed, stage: &StageReport) -> Vec<String> {
    vec![
        n.to_string(),
        seed.0.to_string(),
        stage.stage.to_string(),
        stage.reflections.to_string(),
        stage.mean_width.value.to_string(),
        stage.mean_width.half_width.to_string(),
        cell(stage.circumradius_lb),
        cell(stage.sandwich.as_ref().map(|s| s.ratio)),
        cell(stage.unconditionality.as_ref().map(|d| d.defect)),
        cell(stage.seconds),
    ]
}

/// Stage rows of a report; the input measurement (stage 0) stays in the JSON.
fn report_rows(r: &ExperimentReport) -> impl Iterator<Item = Vec<String>> + '_ {
    r.stages.iter().skip(1).map(move |s| stage_row(r.n, r.seed, s))
}

fn cmd_decay(mut cfg: RunConfig) -> Result<ExitCode> {
    if cfg.ns.is_empty() {
        return Err(config_error("decay needs --ns (e.g. --ns 16,32,64)"));
    }
    cfg.require_seeds()?;
    cfg.schedule.get_or_insert(ScheduleKind::Random6);
    cfg.scope.get_or_insert(ScopeArg::Full);
    cfg.estimator.validate().map_err(|e| config_error(e.to_string()))?;
    for &n in &cfg.ns {
        schedule_of_kind(cfg.schedule.unwrap(), n).map_err(|e| config_error(e.to_string()))?;
    }
    let plan = plan(&cfg)?;
    let scope: DecayScope = cfg.scope.unwrap().into();
    let table: DecayTable = decay_experiment(&cfg.ns, cfg.schedule.unwrap(), &seeds(&cfg), &cfg.estimator, scope)
        .context("decay experiment failed")?;
    let mut rows = Vec::new();
    for row in &table.rows {
        match &row.pipeline {
            Some(p) => rows.extend(report_rows(p)),
            None => {
                let mut q = vec![String::new(); STAGE_COLUMNS.len()];
                q[0] = row.n.to_string();
                q[1] = row.seed.0.to_string();
                q[2] = "2".into();
                q[6] = row.radius_q.to_string();
                let mut kt = q.clone();
                kt[2] = "kt".into();
                kt[6] = row.radius_kt.to_string();
                rows.push(q);
                rows.push(kt);
            }
        }
    }
    emit(&plan, &cfg, &table, &Table { columns: &STAGE_COLUMNS, rows })?;
    Ok(ExitCode::SUCCESS)
}

fn read_hull(path: &Path) -> Result<PolytopeHull> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| config_error(format!("cannot read hull file {}: {e}", path.display())))?;
    let vertices: Vec<Vec<f64>> = serde_json::from_str(&text).map_err(|e| {
        config_error(format!(
            "hull file {} is not a JSON array of vertices: {e}",
            path.display()
        ))
    })?;
    PolytopeHull::new(&vertices).map_err(|e| config_error(format!("hull file {}: {e}", path.display())))
}

fn build_body(selector: &str, n: Option<usize>) -> Result<Arc<dyn SupportBody>> {
    let need_n = || n.ok_or_else(|| config_error(format!("body {selector:?} needs --n")));
    let built: minksym::Result<Arc<dyn SupportBody>> = match selector.split_once(':') {
        None if selector == "ball" => EuclideanBall::new(need_n()?, 1.0).map(|b| Arc::new(b) as _),
        None if selector == "cross" => ScaledCrossPolytope::normalized(need_n()?).map(|b| Arc::new(b) as _),
        Some(("kt", t)) => {
            let t: f64 = t
                .parse()
                .map_err(|_| config_error(format!("kt:T needs a number, got {t:?}")))?;
            IntersectionBody::new(need_n()?, t).map(|b| Arc::new(b) as _)
        }
        Some(("hull", file)) => {
            let hull = read_hull(Path::new(file))?;
            if let Some(n) = n {
                if n != hull.dim() {
                    return Err(config_error(format!("hull has dimension {}, --n is {n}", hull.dim())));
                }
            }
            Ok(Arc::new(hull) as _)
        }
        _ => {
            return Err(config_error(format!(
                "unknown body {selector:?} (expected ball, cross, kt:T or hull:FILE)"
            )))
        }
    };
    built.map_err(|e| config_error(e.to_string()))
}

fn cmd_pipeline(mut cfg: RunConfig) -> Result<ExitCode> {
    cfg.require_seeds()?;
    let selector = cfg.body.get_or_insert_with(|| "cross".into()).clone();
    let body = build_body(&selector, cfg.n)?;
    cfg.n = Some(body.dim());
    let kind = *cfg.schedule.get_or_insert(ScheduleKind::Random6);
    let schedule = schedule_of_kind(kind, body.dim()).map_err(|e| config_error(e.to_string()))?;
    cfg.estimator.validate().map_err(|e| config_error(e.to_string()))?;
    let plan = plan(&cfg)?;
    let reports = seeds(&cfg)
        .into_iter()
        .map(|s| run_pipeline(body.clone(), &schedule, s, &cfg.estimator).with_context(|| format!("seed {}", s.0)))
        .collect::<Result<Vec<_>>>()?;
    let rows = reports.iter().flat_map(report_rows).collect();
    emit(&plan, &cfg, &reports, &Table { columns: &STAGE_COLUMNS, rows })?;
    Ok(ExitCode::SUCCESS)
}

fn probe_rows(r: &ProbeReport) -> Vec<Vec<String>> {
    r.summaries
        .iter()
        .map(|s| {
            vec![
                r.probe.clone(),
                r.n.to_string(),
                r.trials.to_string(),
                r.seed.0.to_string(),
                s.name.clone(),
                s.mean.to_string(),
                s.std.to_string(),
                s.min.to_string(),
                s.q50.to_string(),
                s.q90.to_string(),
                s.q99.to_string(),
                s.max.to_string(),
                cell(r.threshold),
                cell(r.success_rate),
                cell(r.violations),
            ]
        })
        .collect()
}

fn cmd_probe(mut cfg: RunConfig) -> Result<ExitCode> {
    let name = cfg.probe.clone().unwrap_or_default();
    if !PROBE_NAMES.contains(&name.as_str()) {
        return Err(config_error(format!(
            "unknown probe {name:?}; available probes: {}",
            PROBE_NAMES.join(", ")
        )));
    }
    let n = cfg.require_n()?;
    cfg.require_seeds()?;
    let trials = *cfg.trials.get_or_insert(DEFAULT_TRIALS);
    let c1 = *cfg.c1.get_or_insert(DEFAULT_C1);
    let k = *cfg.k.get_or_insert(1.0);
    let dist = *cfg.dist.get_or_insert(MomentDist::Exponential);
    if k < 1.0 || k.fract() != 0.0 {
        return Err(config_error(format!("--k must be a positive integer, got {k}")));
    }
    let plan = plan(&cfg)?;
    let mut reports = Vec::new();
    for seed in seeds(&cfg) {
        let p = ProbeParams {
            n,
            trials,
            seed,
            c1,
            k: k as usize,
            dist,
        };
        let r = run_probe(&name, &p).map_err(|e| match e {
            minksym::Error::Argument(m) => config_error(m),
            other => anyhow::Error::new(other),
        })?;
        reports.push(r);
    }
    let violated = reports.iter().any(|r| r.violations.is_some_and(|v| v > 0));
    let rows = reports.iter().flat_map(probe_rows).collect();
    emit(&plan, &cfg, &reports, &Table { columns: &PROBE_COLUMNS, rows })?;
    Ok(if violated { ExitCode::from(1) } else { ExitCode::SUCCESS })
}

#[derive(Serialize)]
struct NormCheck {
    report: EquivalenceReport,
    bound: f64,
    holds: bool,
}

fn cmd_norm_check(mut cfg: RunConfig) -> Result<ExitCode> {
    let report = if let Some(x) = cfg.x.clone() {
        let k = cfg.k.ok_or_else(|| config_error("--x needs --k"))?;
        if x.is_empty() {
            return Err(config_error("--x needs at least one coordinate"));
        }
        let (r, inv) = equivalence_ratios(&x, k).map_err(|e| config_error(e.to_string()))?;
        let tol = 1e-9;
        let bound = std::f64::consts::SQRT_2 + tol;
        EquivalenceReport {
            ns: vec![x.len()],
            vectors_per_n: 1,
            adversarial: false,
            checks: 1,
            max_ratio: r,
            max_inverse_ratio: inv,
            violations: usize::from(r > bound || inv > bound),
            tol,
        }
    } else {
        cfg.require_seeds()?;
        if cfg.ns.is_empty() {
            cfg.ns = DEFAULT_NORM_NS.to_vec();
        }
        let vectors = *cfg.vectors.get_or_insert(DEFAULT_NORM_VECTORS);
        let adversarial = *cfg.adversarial.get_or_insert(false);
        let seed = Seed(cfg.seeds[0]);
        equivalence_sweep(&cfg.ns, vectors, adversarial, seed).map_err(|e| config_error(e.to_string()))?
    };
    let plan = plan(&cfg)?;
    let ns = report.ns.iter().map(|n| n.to_string()).collect::<Vec<_>>().join(";");
    let row = vec![
        ns,
        report.vectors_per_n.to_string(),
        report.adversarial.to_string(),
        report.checks.to_string(),
        report.max_ratio.to_string(),
        report.max_inverse_ratio.to_string(),
        report.violations.to_string(),
    ];
    let holds = report.holds();
    let result = NormCheck {
        bound: std::f64::consts::SQRT_2 + report.tol,
        holds,
        report,
    };
    emit(&plan, &cfg, &result, &Table { columns: &NORM_COLUMNS, rows: vec![row] })?;
    if !holds {
        eprintln!("norm equivalence violated: ratios exceed sqrt(2)");
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}
