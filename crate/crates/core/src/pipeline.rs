//! Symmetrization schedules and per-stage measurements.

use std::sync::Arc;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::bodies::{BodyDescriptor, EvalMode, IntersectionBody, ScaledCrossPolytope, SupportBody, SymmetrizedBody};
use crate::estimators::{
    circumradius_with, mean_width, sandwich_with, symmetry_defect, unconditionality_defect, DefectReport,
    SandwichReport, SearchConfig,
};
use crate::linalg::{relative_flat_basis, sample_haar_basis, OrthogonalBasis, Seed};
use crate::par;
use crate::stats::{median, EstimateWithCI};
use crate::{Error, Result};

/// Where a stage's orthogonal basis comes from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum BasisSource {
    Given { basis: OrthogonalBasis },
    HaarRandom,
    WalshRelativeToPrevious,
    /// Walsh-flat relative to the basis of an earlier stage (0-based).
    WalshRelativeTo { stage: usize },
}

impl BasisSource {
    pub fn label(&self) -> String {
        match self {
            BasisSource::Given { .. } => "given".into(),
            BasisSource::HaarRandom => "haar".into(),
            BasisSource::WalshRelativeToPrevious => "walsh-previous".into(),
            BasisSource::WalshRelativeTo { stage } => format!("walsh-stage-{stage}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageSpec {
    pub source: BasisSource,
    pub skip_last: bool,
}

impl StageSpec {
    pub fn new(source: BasisSource, skip_last: bool) -> Self {
        Self { source, skip_last }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    Random6,
    Walsh5,
    Iterated,
    Custom,
}

impl std::str::FromStr for ScheduleKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random6" => Ok(ScheduleKind::Random6),
            "walsh5" => Ok(ScheduleKind::Walsh5),
            "iterated" => Ok(ScheduleKind::Iterated),
            other => Err(Error::arg(format!("unknown schedule {other:?} (expected random6, walsh5 or iterated)"))),
        }
    }
}

/// An ordered list of stages for bodies in dimension `n`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub n: usize,
    pub kind: ScheduleKind,
    pub stages: Vec<StageSpec>,
}

impl Schedule {
    pub fn new(n: usize, kind: ScheduleKind, stages: Vec<StageSpec>) -> Result<Self> {
        let s = Self { n, kind, stages };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::arg(format!("schedules need n >= 2, got {}", self.n)));
        }
        for (k, st) in self.stages.iter().enumerate() {
            match &st.source {
                BasisSource::Given { basis } => Error::check_dim(self.n, basis.dim()).map_err(|e| e.in_stage(k))?,
                BasisSource::WalshRelativeToPrevious if k == 0 => {
                    return Err(Error::arg("the first stage cannot be Walsh relative to a previous stage"));
                }
                BasisSource::WalshRelativeTo { stage } if *stage >= k => {
                    return Err(Error::arg(format!("stage {k} refers to stage {stage}, which is not earlier")));
                }
                _ => {}
            }
        }
        Ok(())
    }

    pub fn reflections(&self, stage: usize) -> usize {
        self.n - usize::from(self.stages[stage].skip_last)
    }

    pub fn total_reflections(&self) -> usize {
        (0..self.stages.len()).map(|k| self.reflections(k)).sum()
    }

    /// Materializes every basis: Haar stages from `seed`, Walsh stages from the
    /// realized basis they refer to.
    pub fn realize(&self, seed: Seed) -> Result<Vec<Arc<OrthogonalBasis>>> {
        self.validate()?;
        let seed = seed.derive("schedule");
        let mut out: Vec<Arc<OrthogonalBasis>> = Vec::with_capacity(self.stages.len());
        for (k, st) in self.stages.iter().enumerate() {
            let b = match &st.source {
                BasisSource::Given { basis } => basis.clone(),
                BasisSource::HaarRandom => sample_haar_basis(self.n, seed.index(k as u64))?,
                BasisSource::WalshRelativeToPrevious => relative_flat_basis(&out[k - 1])?,
                BasisSource::WalshRelativeTo { stage } => relative_flat_basis(&out[*stage])?,
            };
            out.push(Arc::new(b));
        }
        Ok(out)
    }
}

/// Basis for the stage that creates unconditionality.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FirstStage {
    #[default]
    Identity,
    Haar,
}

impl FirstStage {
    fn spec(self, n: usize) -> StageSpec {
        let source = match self {
            FirstStage::Identity => BasisSource::Given {
                basis: OrthogonalBasis::identity(n),
            },
            FirstStage::Haar => BasisSource::HaarRandom,
        };
        StageSpec::new(source, false)
    }
}

/// Choice between a Walsh basis and a random one where the process allows both.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlexibleBasis {
    #[default]
    Walsh,
    Haar,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Walsh5Options {
    pub first: FirstStage,
    pub second: FlexibleBasis,
    pub fifth: FlexibleBasis,
    /// The input is already unconditional in this frame: drop the first stage.
    pub unconditional_in: Option<OrthogonalBasis>,
}

/// Standard-frame first stage, then five Haar stages: `6n - 5` reflections.
pub fn schedule_random6(n: usize) -> Result<Schedule> {
    schedule_random6_with(n, FirstStage::Identity)
}

pub fn schedule_random6_with(n: usize, first: FirstStage) -> Result<Schedule> {
    if n < 2 {
        return Err(Error::arg(format!("schedules need n >= 2, got {n}")));
    }
    let mut stages = vec![first.spec(n)];
    stages.extend((0..5).map(|_| StageSpec::new(BasisSource::HaarRandom, true)));
    Schedule::new(n, ScheduleKind::Random6, stages)
}

/// The five-basis process with Walsh bases where allowed: `5n - 4` reflections.
pub fn schedule_walsh5(n: usize) -> Result<Schedule> {
    schedule_walsh5_with(n, &Walsh5Options::default())
}

/// `5n - 4` reflections, or `4n - 4` when the input is declared unconditional.
pub fn schedule_walsh5_with(n: usize, opts: &Walsh5Options) -> Result<Schedule> {
    if n < 2 {
        return Err(Error::arg(format!("schedules need n >= 2, got {n}")));
    }
    let mut stages = Vec::with_capacity(5);
    let second = match (&opts.unconditional_in, opts.second) {
        (None, FlexibleBasis::Walsh) => BasisSource::WalshRelativeToPrevious,
        (Some(frame), FlexibleBasis::Walsh) => {
            Error::check_dim(n, frame.dim())?;
            BasisSource::Given {
                basis: relative_flat_basis(frame)?,
            }
        }
        (_, FlexibleBasis::Haar) => BasisSource::HaarRandom,
    };
    if opts.unconditional_in.is_none() {
        stages.push(opts.first.spec(n));
    }
    stages.push(StageSpec::new(second, true));
    stages.push(StageSpec::new(BasisSource::WalshRelativeToPrevious, true));
    stages.push(StageSpec::new(BasisSource::HaarRandom, true));
    let fifth = match opts.fifth {
        FlexibleBasis::Walsh => BasisSource::WalshRelativeToPrevious,
        FlexibleBasis::Haar => BasisSource::HaarRandom,
    };
    stages.push(StageSpec::new(fifth, true));
    Schedule::new(n, ScheduleKind::Walsh5, stages)
}

/// Standard-frame first stage followed by `rounds` pairs (Haar, Walsh relative
/// to that Haar basis). Carries no guarantee; provided for exploration.
pub fn schedule_iterated(n: usize, rounds: usize) -> Result<Schedule> {
    if n < 2 {
        return Err(Error::arg(format!("schedules need n >= 2, got {n}")));
    }
    let mut stages = vec![FirstStage::Identity.spec(n)];
    for _ in 0..rounds {
        stages.push(StageSpec::new(BasisSource::HaarRandom, true));
        stages.push(StageSpec::new(BasisSource::WalshRelativeToPrevious, true));
    }
    Schedule::new(n, ScheduleKind::Iterated, stages)
}

pub fn schedule_of_kind(kind: ScheduleKind, n: usize) -> Result<Schedule> {
    match kind {
        ScheduleKind::Random6 => schedule_random6(n),
        ScheduleKind::Walsh5 => schedule_walsh5(n),
        ScheduleKind::Iterated => schedule_iterated(n, 3),
        ScheduleKind::Custom => Err(Error::arg("custom schedules must be given explicitly")),
    }
}

/// Which stages get the expensive measurements.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricsScope {
    #[default]
    Every,
    /// Intermediate stages report bookkeeping and mean width only.
    Final,
}

/// Sample sizes and search effort for every measurement.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimatorConfig {
    pub n_dirs: usize,
    pub mc_samples: usize,
    pub exact_cap: usize,
    pub starts: usize,
    pub steps: usize,
    pub sandwich_dirs: usize,
    /// Extreme sampled directions refined by local search in the sandwich.
    pub refine: usize,
    pub defect_tests: usize,
    pub metrics: MetricsScope,
    /// Record wall-clock seconds per stage (makes reports non-reproducible).
    pub timing: bool,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            n_dirs: 256,
            mc_samples: 20_000,
            exact_cap: 20,
            starts: 64,
            steps: 200,
            sandwich_dirs: 256,
            refine: 4,
            defect_tests: 64,
            metrics: MetricsScope::Every,
            timing: false,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_dirs < 2 {
            return Err(Error::arg("n_dirs must be at least 2"));
        }
        if self.mc_samples < 2 {
            return Err(Error::arg("mc_samples must be at least 2"));
        }
        if self.sandwich_dirs < 10 {
            return Err(Error::arg("sandwich_dirs must be at least 10"));
        }
        if self.starts == 0 || self.defect_tests == 0 {
            return Err(Error::arg("starts and defect_tests must be positive"));
        }
        Ok(())
    }

    pub fn circumradius_search(&self) -> SearchConfig {
        SearchConfig {
            starts: self.starts,
            steps: self.steps,
            ..SearchConfig::default()
        }
    }

    pub fn sandwich_search(&self) -> SearchConfig {
        SearchConfig {
            starts: self.refine,
            steps: self.steps,
            ..SearchConfig::default()
        }
    }
}

/// Measurements after one stage (stage 0 is the input body).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StageReport {
    pub stage: usize,
    pub source: String,
    pub reflections: usize,
    pub total_reflections: usize,
    pub effective_reflections: usize,
    pub mode: EvalMode,
    /// Unpaired estimate on the same directions for every stage.
    pub mean_width: EstimateWithCI,
    /// Relative change of the mean width estimate paired over the stage's last
    /// reflection, comparing the body before and after that reflection.
    pub paired_mean_width_change: Option<f64>,
    pub circumradius_lb: Option<f64>,
    pub sandwich: Option<SandwichReport>,
    /// Sign-flip defect in this stage's frame.
    pub unconditionality: Option<DefectReport>,
    /// `h(x)` versus `h(-x)`.
    pub symmetry: Option<DefectReport>,
    pub seconds: Option<f64>,
}

/// Checks summarizing a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdicts {
    pub reflection_count_matches: bool,
    /// Unpaired mean widths within 3 combined CIs of the input's.
    pub mean_width_stable: bool,
    /// Largest paired change; invariance means rounding level.
    pub max_paired_change: Option<f64>,
    /// After the first stage: unconditional in its frame (1e-9 exact, 3 CIs otherwise).
    pub unconditional_after_first: Option<bool>,
    pub symmetric_after_first: Option<bool>,
    pub final_sandwich_ratio: Option<f64>,
    pub final_sandwich_within_two: Option<bool>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub version: String,
    pub n: usize,
    pub seed: Seed,
    pub schedule: Schedule,
    pub body: Option<BodyDescriptor>,
    pub config: EstimatorConfig,
    pub stages: Vec<StageReport>,
    pub verdicts: Verdicts,
}

fn signs(cfg: &EstimatorConfig, seed: Seed) -> EvalMode {
    EvalMode::MonteCarlo {
        samples: cfg.mc_samples,
        seed,
    }
}

/// Exact evaluation when the effective stack fits under the cap.
fn auto(body: &SymmetrizedBody, cfg: &EstimatorConfig, seed: Seed) -> Result<SymmetrizedBody> {
    body.with_auto_mode(cfg.mc_samples, seed.derive("signs"))
}

struct StageInput<'a> {
    index: usize,
    source: String,
    reflections: usize,
    frame: Option<&'a OrthogonalBasis>,
    /// The body one reflection earlier, for the paired check.
    before_last: Option<SymmetrizedBody>,
    full: bool,
}

fn measure(body: &SymmetrizedBody, input: StageInput<'_>, cfg: &EstimatorConfig, seed: Seed) -> Result<StageReport> {
    let clock = Instant::now();
    let index = input.index;
    let wrap = |e: Error| e.in_stage(index);
    let eval = auto(body, cfg, seed).map_err(wrap)?;
    let mean = mean_width(&eval, cfg.n_dirs, seed.derive("mean-width"), false, None).map_err(wrap)?;
    let paired = match (&input.before_last, input.frame) {
        (Some(prev), Some(frame)) if input.full => {
            let u = frame.unit_column(input.reflections - 1);
            // Same evaluation mode on both sides, so the pair shares every sign.
            let before = prev.with_mode(eval.mode()).map_err(wrap)?;
            let after = eval.with_exact_tail(1).map_err(wrap)?;
            let a = mean_width(&before, cfg.n_dirs, seed.derive("paired"), true, Some(&u)).map_err(wrap)?;
            let b = mean_width(&after, cfg.n_dirs, seed.derive("paired"), true, Some(&u)).map_err(wrap)?;
            Some((a.value - b.value).abs() / a.value.abs().max(f64::MIN_POSITIVE))
        }
        _ => None,
    };
    let (circ, sand, uncond, sym) = if input.full {
        let circ = circumradius_with(&eval, &cfg.circumradius_search(), seed.derive("circumradius")).map_err(wrap)?;
        let sand = sandwich_with(&eval, cfg.sandwich_dirs, &cfg.sandwich_search(), seed.derive("sandwich"));
        // A body without interior around the origin has no sandwich ratio.
        let sand = match sand {
            Ok(s) => Some(s),
            Err(Error::Degenerate(_)) => None,
            Err(e) => return Err(wrap(e)),
        };
        let uncond = match input.frame {
            Some(f) => Some(unconditionality_defect(&eval, f, cfg.defect_tests, seed.derive("defect")).map_err(wrap)?),
            None => None,
        };
        let sym = symmetry_defect(&eval, cfg.defect_tests, seed.derive("symmetry")).map_err(wrap)?;
        (Some(circ), sand, uncond, Some(sym))
    } else {
        (None, None, None, None)
    };
    Ok(StageReport {
        stage: index,
        source: input.source,
        reflections: input.reflections,
        total_reflections: body.reflection_count(),
        effective_reflections: body.effective_reflections(),
        mode: eval.mode(),
        mean_width: mean,
        paired_mean_width_change: paired,
        circumradius_lb: circ,
        sandwich: sand,
        unconditionality: uncond,
        symmetry: sym,
        seconds: cfg.timing.then(|| clock.elapsed().as_secs_f64()),
    })
}

/// Applies the schedule stage by stage, measuring the input and every stage.
///
/// Monte Carlo evaluation (when the effective stack exceeds the exact cap)
/// draws its signs from `seed`, and Haar bases from an independent sub-seed.
pub fn run_pipeline(
    body: Arc<dyn SupportBody>,
    schedule: &Schedule,
    seed: Seed,
    cfg: &EstimatorConfig,
) -> Result<ExperimentReport> {
    cfg.validate()?;
    Error::check_dim(schedule.n, body.dim())?;
    let bases = schedule.realize(seed)?;
    let descriptor = body.descriptor();
    let mut current = SymmetrizedBody::new(body, signs(cfg, seed.derive("signs")))?.with_exact_cap(cfg.exact_cap)?;
    let last = schedule.stages.len();
    let mut reports = vec![measure(
        &current,
        StageInput {
            index: 0,
            source: "input".into(),
            reflections: 0,
            frame: None,
            before_last: None,
            full: cfg.metrics == MetricsScope::Every || last == 0,
        },
        cfg,
        seed,
    )?];
    for (k, basis) in bases.iter().enumerate() {
        let active = schedule.reflections(k);
        let before_last = current.symmetrize_shared(basis.clone(), active - 1)?;
        current = current.symmetrize_shared(basis.clone(), active)?;
        let full = cfg.metrics == MetricsScope::Every || k + 1 == last;
        reports.push(measure(
            &current,
            StageInput {
                index: k + 1,
                source: schedule.stages[k].source.label(),
                reflections: active,
                frame: Some(basis),
                before_last: Some(before_last),
                full,
            },
            cfg,
            seed,
        )?);
    }
    let verdicts = verdicts(schedule, &reports);
    Ok(ExperimentReport {
        version: crate::VERSION.into(),
        n: schedule.n,
        seed,
        schedule: schedule.clone(),
        body: descriptor,
        config: cfg.clone(),
        stages: reports,
        verdicts,
    })
}

fn verdicts(schedule: &Schedule, reports: &[StageReport]) -> Verdicts {
    let input = &reports[0].mean_width;
    let first = reports.get(1);
    let final_ratio = reports.last().and_then(|r| r.sandwich.as_ref()).map(|s| s.ratio);
    Verdicts {
        reflection_count_matches: reports.last().map_or(0, |r| r.total_reflections) == schedule.total_reflections(),
        mean_width_stable: reports.iter().all(|r| r.mean_width.agrees_with(input, 3.0, 1e-12 * input.value.abs())),
        max_paired_change: reports
            .iter()
            .filter_map(|r| r.paired_mean_width_change)
            .reduce(f64::max),
        unconditional_after_first: first.and_then(|r| r.unconditionality.as_ref()).map(|d| d.passes(1e-9, 3.0)),
        symmetric_after_first: first.and_then(|r| r.symmetry.as_ref()).map(|d| d.passes(1e-9, 3.0)),
        final_sandwich_ratio: final_ratio,
        final_sandwich_within_two: final_ratio.map(|r| r <= 2.0),
    }
}

/// Whether [`decay_experiment`] runs whole schedules or only the stages each check needs.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecayScope {
    /// The diameter checks only.
    #[default]
    Relevant,
    /// Also run the full schedule on the cross-polytope and keep its report.
    FullSchedule,
}

/// One `(n, seed)` cell of the decay experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub n: usize,
    pub seed: Seed,
    /// Circumradius lower bound of the cross-polytope after the first two stages.
    pub radius_q: f64,
    pub radius_q_over_log_n: f64,
    /// Cap of the intersection body, the measured radius clamped to `sqrt(n)`.
    pub t: f64,
    /// Circumradius lower bound of the intersection body after the next stage(s).
    pub radius_kt: f64,
    /// `radius_kt / ln t`, absent when `t <= 1`.
    pub radius_kt_over_log_t: Option<f64>,
    pub kt_below_t: bool,
    pub pipeline: Option<ExperimentReport>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecaySummary {
    pub n: usize,
    pub seeds: usize,
    pub median_radius_q_over_log_n: f64,
    pub max_radius_q_over_log_n: f64,
    pub median_radius_kt_over_log_t: Option<f64>,
    pub max_radius_kt_over_log_t: Option<f64>,
    pub fraction_kt_below_t: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecayTable {
    pub version: String,
    pub kind: ScheduleKind,
    pub config: EstimatorConfig,
    pub rows: Vec<DecayRow>,
    pub summary: Vec<DecaySummary>,
}

fn decay_cell(n: usize, kind: ScheduleKind, seed: Seed, cfg: &EstimatorConfig, scope: DecayScope) -> Result<DecayRow> {
    let schedule = schedule_of_kind(kind, n)?;
    let bases = schedule.realize(seed)?;
    let q: Arc<dyn SupportBody> = Arc::new(ScaledCrossPolytope::normalized(n)?);
    let pipeline = match scope {
        DecayScope::FullSchedule => Some(run_pipeline(q.clone(), &schedule, seed, cfg)?),
        DecayScope::Relevant => None,
    };
    let radius_q = match pipeline.as_ref().and_then(|p| p.stages.get(2)).and_then(|s| s.circumradius_lb) {
        Some(r) => r,
        None => {
            let mut body = SymmetrizedBody::new(q, signs(cfg, seed.derive("signs")))?.with_exact_cap(cfg.exact_cap)?;
            for (k, basis) in bases.iter().enumerate().take(2) {
                body = body.symmetrize_shared(basis.clone(), schedule.reflections(k))?;
            }
            let body = auto(&body, cfg, seed)?;
            circumradius_with(&body, &cfg.circumradius_search(), seed.derive("circumradius"))?
        }
    };
    let t = radius_q.min((n as f64).sqrt());
    let kt: Arc<dyn SupportBody> = Arc::new(IntersectionBody::new(n, t)?);
    let mut body = SymmetrizedBody::new(kt, signs(cfg, seed.derive("kt-signs")))?.with_exact_cap(cfg.exact_cap)?;
    // After two stages the body is unconditional in the second frame, so K_t
    // lives in that frame: later bases are taken relative to it. The random
    // process needs two further bases to shrink K_t, the Walsh process one.
    let next: &[usize] = match kind {
        ScheduleKind::Walsh5 => &[2],
        _ => &[2, 3],
    };
    let frame = bases[1].matrix();
    for &k in next {
        let relative = OrthogonalBasis::from_trusted(frame.tr_mul(bases[k].matrix()));
        body = body.symmetrize_shared(Arc::new(relative), schedule.reflections(k))?;
    }
    let body = auto(&body, cfg, seed.derive("kt"))?;
    let radius_kt = circumradius_with(&body, &cfg.circumradius_search(), seed.derive("kt-circumradius"))?;
    Ok(DecayRow {
        n,
        seed,
        radius_q,
        radius_q_over_log_n: radius_q / (n as f64).ln(),
        t,
        radius_kt,
        radius_kt_over_log_t: (t > 1.0).then(|| radius_kt / t.ln()),
        kt_below_t: radius_kt < t,
        pipeline,
    })
}

/// Diameter decay across dimensions: the cross-polytope after two stages and
/// the intersection body `K_t` (with `t` the measured radius) after the next.
pub fn decay_experiment(
    ns: &[usize],
    kind: ScheduleKind,
    seeds: &[Seed],
    cfg: &EstimatorConfig,
    scope: DecayScope,
) -> Result<DecayTable> {
    cfg.validate()?;
    if ns.is_empty() || seeds.is_empty() {
        return Err(Error::arg("decay experiment needs at least one dimension and one seed"));
    }
    if let Some(&n) = ns.iter().find(|&&n| n < 2) {
        return Err(Error::arg(format!("dimensions must be at least 2, got {n}")));
    }
    let cells: Vec<(usize, Seed)> = ns.iter().flat_map(|&n| seeds.iter().map(move |&s| (n, s))).collect();
    let rows = par::map_slice(&cells, |&(n, s)| decay_cell(n, kind, s, cfg, scope))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let summary = ns
        .iter()
        .map(|&n| {
            let mine: Vec<&DecayRow> = rows.iter().filter(|r| r.n == n).collect();
            let q: Vec<f64> = mine.iter().map(|r| r.radius_q_over_log_n).collect();
            let kt: Vec<f64> = mine.iter().filter_map(|r| r.radius_kt_over_log_t).collect();
            DecaySummary {
                n,
                seeds: mine.len(),
                median_radius_q_over_log_n: median(&q),
                max_radius_q_over_log_n: q.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                median_radius_kt_over_log_t: (!kt.is_empty()).then(|| median(&kt)),
                max_radius_kt_over_log_t: kt.iter().copied().reduce(f64::max),
                fraction_kt_below_t: mine.iter().filter(|r| r.kt_below_t).count() as f64 / mine.len() as f64,
            }
        })
        .collect();
    Ok(DecayTable {
        version: crate::VERSION.into(),
        kind,
        config: cfg.clone(),
        rows,
        summary,
    })
}
