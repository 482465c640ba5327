//! Stacks of Minkowski symmetrizations evaluated through the base support function.
//!
//! Symmetrizing in the hyperplane `u^perp` maps `h` to `x -> (h(x) + h(R_u x)) / 2`
//! with `R_u x = x - 2<x, u>u`. A stack of reflections `R_1, ..., R_m` (oldest
//! first) therefore gives `h(x) = E_s h_base(R_1^{s_1} ... R_m^{s_m} x)` over
//! uniform sign patterns `s`. Reflections sharing an orthonormal frame commute
//! and become coordinate sign flips, so a frame stage costs one change of basis
//! per pattern; batches of patterns go through a single dense product.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::kernels::{gemm_nn, gemm_tn};
use super::{BodyDescriptor, StageDescriptor, SupportBody};
use crate::linalg::{reflect_in_place, stream_word, OrthogonalBasis, Seed, UnitVector};
use crate::par;
use crate::stats::{EstimateWithCI, MeanAcc};
use crate::{Error, Result};

/// Largest number of effective reflections enumerated exactly by default.
pub const DEFAULT_EXACT_CAP: usize = 20;
/// Largest exactly-enumerated tail inside a Monte Carlo draw.
pub const MAX_MC_TAIL: usize = 12;
const CHUNK: usize = 256;
const IDENTITY_TOL: f64 = 1e-13;

/// How the average over sign patterns is computed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EvalMode {
    /// All `2^m` patterns; error bars are zero.
    Exact,
    /// `samples` independent sign patterns drawn from `seed`.
    MonteCarlo { samples: usize, seed: Seed },
}

impl EvalMode {
    fn validate(self) -> Result<Self> {
        match self {
            EvalMode::MonteCarlo { samples, .. } if samples < 2 => {
                Err(Error::Mode(format!("Monte Carlo needs at least 2 samples, got {samples}")))
            }
            m => Ok(m),
        }
    }
}

/// One entry of the symmetrization stack.
#[derive(Clone, Debug)]
pub enum Stage {
    /// Reflections in the hyperplanes orthogonal to the first `active` columns.
    Frame { basis: Arc<OrthogonalBasis>, active: usize },
    /// A single reflection.
    Reflection(UnitVector),
}

impl Stage {
    pub fn reflections(&self) -> usize {
        match self {
            Stage::Frame { active, .. } => *active,
            Stage::Reflection(_) => 1,
        }
    }

    fn dim(&self) -> usize {
        match self {
            Stage::Frame { basis, .. } => basis.dim(),
            Stage::Reflection(u) => u.dim(),
        }
    }

    /// Sign bits drawn per Monte Carlo sample; fixed per stage so that
    /// appending stages never changes earlier signs.
    fn stream_width(&self) -> usize {
        match self {
            Stage::Frame { basis, .. } => basis.dim(),
            Stage::Reflection(_) => 1,
        }
    }

    pub(crate) fn to_descriptor(&self) -> StageDescriptor {
        match self {
            Stage::Frame { basis, active } => StageDescriptor::Frame {
                basis: (**basis).clone(),
                active: *active,
            },
            Stage::Reflection(u) => StageDescriptor::Reflection { direction: u.clone() },
        }
    }
}

#[derive(Debug)]
enum Op {
    /// `z <- T z`, column-major `n x n`.
    Transform(Vec<f64>),
    /// Flip coordinates `0..active` in the current frame.
    Flip { stage: usize, slot0: usize, active: usize },
    /// Reflect in `w^perp`, `w` in current coordinates.
    Reflect { w: Vec<f64>, stage: usize, slot0: usize },
}

#[derive(Debug)]
struct Plan {
    n: usize,
    /// Applied once to the query before the patterns fan out.
    first: Option<Vec<f64>>,
    ops: Vec<Op>,
    slots: usize,
    absorbed: usize,
    symmetric: bool,
    /// Sign-stream width of each stage.
    widths: Vec<usize>,
}

fn is_identity(t: &[f64], n: usize) -> bool {
    t.iter().enumerate().all(|(k, &v)| {
        let want = if k % n == k / n { 1.0 } else { 0.0 };
        (v - want).abs() <= IDENTITY_TOL
    })
}

fn absorbs(base: &dyn SupportBody, stage: &Stage) -> bool {
    match stage {
        Stage::Frame { basis, .. } => base.invariant_under_frame(basis),
        Stage::Reflection(u) => base.invariant_under_reflection(u),
    }
}

impl Plan {
    fn compile(base: &dyn SupportBody, stages: &[Stage]) -> Plan {
        let n = base.dim();
        let absorbed = stages.iter().take_while(|s| absorbs(base, s)).count();
        let mut offsets = vec![0; stages.len()];
        let mut slots = 0;
        for (k, s) in stages.iter().enumerate().skip(absorbed) {
            offsets[k] = slots;
            slots += s.reflections();
        }
        let mut ops = Vec::new();
        let mut cur: Option<&OrthogonalBasis> = None;
        for k in (absorbed..stages.len()).rev() {
            match &stages[k] {
                Stage::Frame { active: 0, .. } => {}
                Stage::Frame { basis, active } => {
                    let t = match cur {
                        None => basis.matrix().transpose(),
                        Some(v) => basis.matrix().tr_mul(v.matrix()),
                    };
                    if !is_identity(t.as_slice(), n) {
                        ops.push(Op::Transform(t.as_slice().to_vec()));
                    }
                    ops.push(Op::Flip {
                        stage: k,
                        slot0: offsets[k],
                        active: *active,
                    });
                    cur = Some(basis);
                }
                Stage::Reflection(u) => {
                    let w = match cur {
                        None => u.as_slice().to_vec(),
                        Some(v) => v.coords(u.as_slice()),
                    };
                    ops.push(Op::Reflect {
                        w,
                        stage: k,
                        slot0: offsets[k],
                    });
                }
            }
        }
        if let Some(v) = cur {
            let t = v.matrix().as_slice();
            if !is_identity(t, n) {
                ops.push(Op::Transform(t.to_vec()));
            }
        }
        let first = match ops.first() {
            Some(Op::Transform(_)) => match ops.remove(0) {
                Op::Transform(t) => Some(t),
                _ => unreachable!(),
            },
            _ => None,
        };
        let symmetric = base.is_centrally_symmetric()
            || stages
                .iter()
                .any(|s| matches!(s, Stage::Frame { basis, active } if *active == basis.dim()));
        Plan {
            n,
            first,
            ops,
            slots,
            absorbed,
            symmetric,
            widths: stages.iter().map(Stage::stream_width).collect(),
        }
    }
}

/// A base body followed by a stack of symmetrizations.
#[derive(Clone)]
pub struct SymmetrizedBody {
    base: Arc<dyn SupportBody>,
    stages: Vec<Stage>,
    mode: EvalMode,
    exact_cap: usize,
    exact_tail: usize,
    plan: Arc<Plan>,
}

impl fmt::Debug for SymmetrizedBody {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SymmetrizedBody")
            .field("base", &self.base)
            .field("stages", &self.stages.len())
            .field("reflections", &self.reflection_count())
            .field("effective", &self.plan.slots)
            .field("mode", &self.mode)
            .finish()
    }
}

struct ChunkOut {
    sum: f64,
    draws: MeanAcc,
    grad: Option<Vec<f64>>,
}

/// Where the sign patterns of one evaluation come from.
struct Layout {
    key: u64,
    /// Exactly enumerated trailing slots.
    tail: usize,
    total: usize,
    chunk: usize,
    exact: bool,
}

impl SymmetrizedBody {
    /// The base body with an empty stack.
    pub fn new(base: Arc<dyn SupportBody>, mode: EvalMode) -> Result<Self> {
        Self::from_stages(base, Vec::new(), mode)
    }

    pub fn from_stages(base: Arc<dyn SupportBody>, stages: Vec<Stage>, mode: EvalMode) -> Result<Self> {
        Self::assemble(base, stages, mode.validate()?, DEFAULT_EXACT_CAP, 0)
    }

    fn assemble(
        base: Arc<dyn SupportBody>,
        stages: Vec<Stage>,
        mode: EvalMode,
        exact_cap: usize,
        exact_tail: usize,
    ) -> Result<Self> {
        let n = base.dim();
        for (k, s) in stages.iter().enumerate() {
            Error::check_dim(n, s.dim()).map_err(|e| e.in_stage(k))?;
            if let Stage::Frame { active, .. } = s {
                if *active > n {
                    return Err(Error::arg(format!("{active} active reflections exceed dimension {n}")).in_stage(k));
                }
            }
        }
        if exact_tail > MAX_MC_TAIL {
            return Err(Error::Mode(format!("exact tail {exact_tail} exceeds {MAX_MC_TAIL}")));
        }
        let plan = Plan::compile(base.as_ref(), &stages);
        if mode == EvalMode::Exact && plan.slots > exact_cap {
            return Err(Error::Mode(format!(
                "exact evaluation would enumerate 2^{} patterns; cap is 2^{exact_cap}",
                plan.slots
            )));
        }
        Ok(Self {
            base,
            stages,
            mode,
            exact_cap,
            exact_tail,
            plan: Arc::new(plan),
        })
    }

    pub(crate) fn replace_stages(&self, stages: Vec<Stage>) -> Result<Self> {
        Self::assemble(self.base.clone(), stages, self.mode, self.exact_cap, self.exact_tail)
    }

    fn push(&self, stage: Stage) -> Result<Self> {
        let mut stages = self.stages.clone();
        stages.push(stage);
        Self::assemble(self.base.clone(), stages, self.mode, self.exact_cap, self.exact_tail)
    }

    /// Adds the symmetrization in `u^perp`.
    pub fn symmetrize(&self, u: &UnitVector) -> Result<Self> {
        self.push(Stage::Reflection(u.clone()))
    }

    /// Adds the reflections in the first `active` columns of `basis`.
    pub fn symmetrize_frame(&self, basis: &OrthogonalBasis, active: usize) -> Result<Self> {
        self.symmetrize_shared(Arc::new(basis.clone()), active)
    }

    pub(crate) fn symmetrize_shared(&self, basis: Arc<OrthogonalBasis>, active: usize) -> Result<Self> {
        self.push(Stage::Frame { basis, active })
    }

    /// Symmetrizes in every column of `basis`, or all but the last with `skip_last`.
    pub fn symmetrize_basis(&self, basis: &OrthogonalBasis, skip_last: bool) -> Result<Self> {
        let active = basis.dim() - usize::from(skip_last);
        self.symmetrize_frame(basis, active)
    }

    pub fn with_mode(&self, mode: EvalMode) -> Result<Self> {
        Self::assemble(self.base.clone(), self.stages.clone(), mode.validate()?, self.exact_cap, self.exact_tail)
    }

    pub fn with_exact_cap(&self, cap: usize) -> Result<Self> {
        Self::assemble(self.base.clone(), self.stages.clone(), self.mode, cap, self.exact_tail)
    }

    /// Enumerate the last `tail` reflections exactly inside each Monte Carlo draw.
    ///
    /// With `tail >= 1`, the estimates for a stack and for the same stack with
    /// its last reflection removed share every random sign, so paired
    /// comparisons across one symmetrization step see no sampling noise.
    pub fn with_exact_tail(&self, tail: usize) -> Result<Self> {
        Self::assemble(self.base.clone(), self.stages.clone(), self.mode, self.exact_cap, tail)
    }

    /// Picks exact evaluation when the effective stack fits under the cap.
    pub fn with_auto_mode(&self, samples: usize, seed: Seed) -> Result<Self> {
        if self.plan.slots <= self.exact_cap {
            self.with_mode(EvalMode::Exact)
        } else {
            self.with_mode(EvalMode::MonteCarlo { samples, seed })
        }
    }

    pub fn base(&self) -> &Arc<dyn SupportBody> {
        &self.base
    }

    pub fn stages(&self) -> &[Stage] {
        &self.stages
    }

    pub fn mode(&self) -> EvalMode {
        self.mode
    }

    pub fn exact_cap(&self) -> usize {
        self.exact_cap
    }

    pub fn exact_tail(&self) -> usize {
        self.exact_tail
    }

    /// Total reflections in the stack.
    pub fn reflection_count(&self) -> usize {
        self.stages.iter().map(Stage::reflections).sum()
    }

    /// Reflections left after dropping leading stages the base is invariant under.
    pub fn effective_reflections(&self) -> usize {
        self.plan.slots
    }

    pub fn absorbed_stages(&self) -> usize {
        self.plan.absorbed
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<EstimateWithCI> {
        Error::check_dim(self.plan.n, x.len())?;
        Ok(self.run(x, false).0)
    }

    /// `h(x)` together with the averaged supporting point (the gradient of `h`),
    /// when the base body provides supporting points.
    pub fn evaluate_with_gradient(&self, x: &[f64]) -> Result<(EstimateWithCI, Option<Vec<f64>>)> {
        Error::check_dim(self.plan.n, x.len())?;
        Ok(self.run(x, true))
    }

    fn layout(&self) -> Layout {
        let m = self.plan.slots;
        match self.mode {
            EvalMode::Exact => {
                let total = 1usize << m;
                Layout {
                    key: 0,
                    tail: m,
                    total,
                    chunk: CHUNK.min(total),
                    exact: true,
                }
            }
            EvalMode::MonteCarlo { samples, seed } => {
                let tail = self.exact_tail.min(m);
                Layout {
                    key: seed.derive("signs").0,
                    tail,
                    total: samples << tail,
                    chunk: CHUNK.max(1 << tail),
                    exact: false,
                }
            }
        }
    }

    fn run(&self, x: &[f64], want_grad: bool) -> (EstimateWithCI, Option<Vec<f64>>) {
        let plan = &*self.plan;
        let n = plan.n;
        if plan.slots == 0 {
            if want_grad && self.base.has_supporting_points() {
                let mut y = vec![0.0; n];
                let v = self.base.supporting_point(x, &mut y).unwrap_or(f64::NAN);
                return (EstimateWithCI::exact(v), Some(y));
            }
            return (self.base.h_ci(x), None);
        }
        let start = match &plan.first {
            Some(t) => {
                let mut s = vec![0.0; n];
                gemm_nn(n, n, 1, t, x, &mut s);
                s
            }
            None => x.to_vec(),
        };
        let lay = self.layout();
        let chunks = lay.total.div_ceil(lay.chunk);
        let outs = par::map_indices(chunks, |c| {
            let e0 = c * lay.chunk;
            self.run_chunk(&start, e0, (e0 + lay.chunk).min(lay.total), &lay, want_grad)
        });
        let mut sum = 0.0;
        let mut draws = MeanAcc::default();
        let mut grad: Option<Vec<f64>> = want_grad.then(|| vec![0.0; n]);
        for out in outs {
            sum += out.sum;
            draws.merge(&out.draws);
            match (&mut grad, out.grad) {
                (Some(g), Some(part)) => g.iter_mut().zip(part).for_each(|(a, b)| *a += b),
                (g, None) => *g = None,
                _ => {}
            }
        }
        let value = if lay.exact {
            EstimateWithCI::exact(sum / lay.total as f64)
        } else {
            draws.estimate()
        };
        let grad = grad.map(|g| {
            let g: Vec<f64> = g.into_iter().map(|v| v / lay.total as f64).collect();
            match &plan.first {
                Some(t) => {
                    let mut out = vec![0.0; n];
                    gemm_tn(n, n, 1, t, &g, &mut out);
                    out
                }
                None => g,
            }
        });
        (value, grad)
    }

    /// Fills `neg[i]` with whether reflection `slot0 + i` is applied in pattern `e`.
    fn signs(&self, lay: &Layout, e: usize, stage: usize, slot0: usize, neg: &mut [bool]) {
        let tail_start = self.plan.slots - lay.tail;
        let draw = (e >> lay.tail) as u64;
        let pattern = e & ((1usize << lay.tail) - 1);
        let words = self.plan.widths[stage].div_ceil(64) as u64;
        let stage_key = stream_word(lay.key, stage as u64);
        let mut word = 0u64;
        for (i, b) in neg.iter_mut().enumerate() {
            let slot = slot0 + i;
            if slot >= tail_start {
                *b = (pattern >> (slot - tail_start)) & 1 == 1;
            } else {
                if i % 64 == 0 {
                    word = stream_word(stage_key, draw * words + (i / 64) as u64);
                }
                *b = (word >> (i % 64)) & 1 == 1;
            }
        }
    }

    fn apply_signs(&self, op: &Op, lay: &Layout, e0: usize, z: &mut [f64], neg: &mut Vec<bool>) {
        let n = self.plan.n;
        match op {
            Op::Transform(_) => unreachable!(),
            Op::Flip { stage, slot0, active } => {
                neg.resize(*active, false);
                for (j, col) in z.chunks_exact_mut(n).enumerate() {
                    self.signs(lay, e0 + j, *stage, *slot0, neg);
                    for (v, &s) in col.iter_mut().zip(neg.iter()) {
                        if s {
                            *v = -*v;
                        }
                    }
                }
            }
            Op::Reflect { w, stage, slot0 } => {
                neg.resize(1, false);
                for (j, col) in z.chunks_exact_mut(n).enumerate() {
                    self.signs(lay, e0 + j, *stage, *slot0, neg);
                    if neg[0] {
                        reflect_in_place(col, w);
                    }
                }
            }
        }
    }

    fn run_chunk(&self, start: &[f64], e0: usize, e1: usize, lay: &Layout, want_grad: bool) -> ChunkOut {
        let n = self.plan.n;
        let b = e1 - e0;
        let mut z: Vec<f64> = Vec::with_capacity(n * b);
        for _ in 0..b {
            z.extend_from_slice(start);
        }
        let mut tmp = vec![0.0; n * b];
        let mut neg = Vec::with_capacity(n);
        for op in &self.plan.ops {
            match op {
                Op::Transform(t) => {
                    gemm_nn(n, n, b, t, &z, &mut tmp);
                    std::mem::swap(&mut z, &mut tmp);
                }
                _ => self.apply_signs(op, lay, e0, &mut z, &mut neg),
            }
        }
        let mut values = vec![0.0; b];
        let mut points = want_grad.then(|| vec![0.0; n * b]);
        let got = self.base.support_columns(&z, &mut values, points.as_deref_mut());
        let grad = match points {
            Some(mut y) if got => {
                for op in self.plan.ops.iter().rev() {
                    match op {
                        Op::Transform(t) => {
                            gemm_tn(n, n, b, t, &y, &mut tmp);
                            std::mem::swap(&mut y, &mut tmp);
                        }
                        _ => self.apply_signs(op, lay, e0, &mut y, &mut neg),
                    }
                }
                let mut g = vec![0.0; n];
                for col in y.chunks_exact(n) {
                    g.iter_mut().zip(col).for_each(|(a, v)| *a += v);
                }
                Some(g)
            }
            _ => None,
        };
        let mut draws = MeanAcc::default();
        if !lay.exact {
            let per = 1usize << lay.tail;
            for d in values.chunks_exact(per) {
                draws.push(d.iter().sum::<f64>() / per as f64);
            }
        }
        ChunkOut {
            sum: values.iter().sum(),
            draws,
            grad,
        }
    }
}

impl SupportBody for SymmetrizedBody {
    fn dim(&self) -> usize {
        self.plan.n
    }

    fn h(&self, x: &[f64]) -> f64 {
        self.run(x, false).0.value
    }

    fn h_ci(&self, x: &[f64]) -> EstimateWithCI {
        self.run(x, false).0
    }

    fn supporting_point(&self, x: &[f64], out: &mut [f64]) -> Option<f64> {
        let (v, g) = self.run(x, true);
        out.copy_from_slice(&g?);
        Some(v.value)
    }

    fn has_supporting_points(&self) -> bool {
        self.base.has_supporting_points()
    }

    fn is_centrally_symmetric(&self) -> bool {
        self.plan.symmetric
    }

    fn descriptor(&self) -> Option<BodyDescriptor> {
        Some(BodyDescriptor::Symmetrized {
            n: self.plan.n,
            base: Box::new(self.base.descriptor()?),
            stages: self.stages.iter().map(Stage::to_descriptor).collect(),
            mode: self.mode,
            exact_cap: self.exact_cap,
            exact_tail: self.exact_tail,
        })
    }
}

/// `body` symmetrized in `u^perp`.
pub fn symmetrize(body: &SymmetrizedBody, u: &UnitVector) -> Result<SymmetrizedBody> {
    body.symmetrize(u)
}

/// `body` symmetrized in all columns of `basis` (all but the last with `skip_last`).
pub fn symmetrize_basis(body: &SymmetrizedBody, basis: &OrthogonalBasis, skip_last: bool) -> Result<SymmetrizedBody> {
    body.symmetrize_basis(basis, skip_last)
}
