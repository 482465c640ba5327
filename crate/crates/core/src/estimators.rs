//! Geometric functionals computed from support-function evaluations.
//!
//! Searches over the sphere use supporting points when the body provides them:
//! `x <- y(x) / |y(x)|` never decreases `h` (since `h(y/|y|) >= |y| >= <x, y> = h(x)`)
//! and stops only at critical points. Bodies without supporting points fall
//! back to central finite differences.

use serde::{Deserialize, Serialize};

use crate::bodies::SupportBody;
use crate::linalg::{dot, norm, reflect, sample_sphere, OrthogonalBasis, Seed, UnitVector};
use crate::par;
use crate::stats::EstimateWithCI;
use crate::{Error, Result};

const TINY: f64 = 1e-300;
const FD_STEP: f64 = 1e-6;

/// Multi-start search knobs for [`circumradius`], [`diameter`] and [`sandwich_with`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchConfig {
    pub starts: usize,
    pub steps: usize,
    /// Initial tangent step (radians, roughly).
    pub step: f64,
    /// Per-iteration geometric step decay.
    pub decay: f64,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            starts: 64,
            steps: 200,
            step: 0.1,
            decay: 0.9,
        }
    }
}

/// Extremes of `h` over the sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SandwichReport {
    pub h_min: f64,
    pub h_max: f64,
    pub ratio: f64,
    pub directions: usize,
}

/// Outcome of a paired-evaluation invariance test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DefectReport {
    /// Largest `|h(x) - h(x')| / max(|h(x)|, |h(x')|)`.
    pub defect: f64,
    /// Largest `|h(x) - h(x')|` in units of the combined 95% half-width;
    /// `0` for exact evaluation with no discrepancy, `None` when an exact
    /// evaluation disagrees (there is no interval to measure against).
    pub max_ci_units: Option<f64>,
    pub tests: usize,
}

impl DefectReport {
    /// Exact bodies: `defect <= tol`. Monte Carlo bodies: every test within `k` combined CIs.
    pub fn passes(&self, tol: f64, k: f64) -> bool {
        self.defect <= tol || self.max_ci_units.is_some_and(|u| u <= k)
    }
}

fn directions(n: usize, count: usize, seed: Seed) -> Result<Vec<UnitVector>> {
    (0..count as u64).map(|i| sample_sphere(n, seed.index(i))).collect()
}

fn normalized(v: &[f64]) -> Option<Vec<f64>> {
    let l = norm(v);
    (l > 0.0 && l.is_finite()).then(|| v.iter().map(|c| c / l).collect())
}

/// `h(x)` and a (super)gradient of `h` at `x`.
fn value_and_gradient(body: &dyn SupportBody, x: &[f64]) -> (f64, Vec<f64>) {
    let n = x.len();
    let mut y = vec![0.0; n];
    if body.has_supporting_points() {
        if let Some(v) = body.supporting_point(x, &mut y) {
            return (v, y);
        }
    }
    let mut p = x.to_vec();
    for i in 0..n {
        p[i] = x[i] + FD_STEP;
        let up = body.h(&p);
        p[i] = x[i] - FD_STEP;
        let down = body.h(&p);
        p[i] = x[i];
        y[i] = (up - down) / (2.0 * FD_STEP);
    }
    (body.h(x), y)
}

fn tangent(g: &[f64], x: &[f64]) -> Vec<f64> {
    let r = dot(g, x);
    g.iter().zip(x).map(|(a, b)| a - r * b).collect()
}

fn step_along(x: &[f64], dir: &[f64], step: f64) -> Option<Vec<f64>> {
    let moved: Vec<f64> = x.iter().zip(dir).map(|(a, d)| a + step * d).collect();
    normalized(&moved)
}

/// Local maximum of `h` on the sphere starting from unit `x`.
fn ascend(body: &dyn SupportBody, x: Vec<f64>, cfg: &SearchConfig) -> (f64, Vec<f64>) {
    let fixed_point = body.has_supporting_points();
    let (mut v, mut g) = value_and_gradient(body, &x);
    let mut x = x;
    let mut step = cfg.step;
    for _ in 0..cfg.steps {
        let cand = if fixed_point {
            normalized(&g)
        } else {
            let t = tangent(&g, &x);
            normalized(&t).and_then(|d| step_along(&x, &d, step))
        };
        let Some(cand) = cand else { break };
        let (cv, cg) = value_and_gradient(body, &cand);
        if cv > v + 1e-14 * v.abs() {
            (x, v, g) = (cand, cv, cg);
        } else if fixed_point {
            break;
        } else {
            step *= 0.5;
        }
        step *= cfg.decay;
        if step < 1e-10 {
            break;
        }
    }
    (v, x)
}

/// Local minimum of `h` on the sphere by projected descent.
fn descend(body: &dyn SupportBody, x: Vec<f64>, cfg: &SearchConfig) -> (f64, Vec<f64>) {
    let (mut v, mut g) = value_and_gradient(body, &x);
    let mut x = x;
    let mut step = cfg.step;
    for _ in 0..cfg.steps {
        let t = tangent(&g, &x);
        let Some(d) = normalized(&t) else { break };
        if norm(&t) <= 1e-14 * v.abs() {
            break;
        }
        let neg: Vec<f64> = d.iter().map(|c| -c).collect();
        let Some(cand) = step_along(&x, &neg, step) else { break };
        let (cv, cg) = value_and_gradient(body, &cand);
        if cv < v {
            (x, v, g) = (cand, cv, cg);
        } else {
            step *= 0.5;
        }
        step *= cfg.decay;
        if step < 1e-10 {
            break;
        }
    }
    (v, x)
}

/// Monte Carlo estimate of the half mean width `M*(K) = ∫ h dσ`.
///
/// With `paired`, directions come as `{x, R_u x}` for the given `u` and each
/// pair contributes one observation `(h(x) + h(R_u x)) / 2`. The estimate is
/// then unchanged by symmetrizing the body in `u^perp`, up to rounding.
pub fn mean_width(
    body: &dyn SupportBody,
    n_dirs: usize,
    seed: Seed,
    paired: bool,
    pairing_direction: Option<&UnitVector>,
) -> Result<EstimateWithCI> {
    if n_dirs < 2 {
        return Err(Error::arg(format!("mean width needs at least 2 directions, got {n_dirs}")));
    }
    let n = body.dim();
    let dirs = directions(n, if paired { n_dirs / 2 } else { n_dirs }, seed.derive("mean-width"))?;
    let obs: Vec<f64> = if paired {
        let u = pairing_direction.ok_or_else(|| Error::arg("paired mean width needs a pairing direction"))?;
        Error::check_dim(n, u.dim())?;
        par::map_slice(&dirs, |x| {
            let rx = reflect(x.as_slice(), u).expect("dimensions checked");
            0.5 * (body.h(x.as_slice()) + body.h(&rx))
        })
    } else {
        par::map_slice(&dirs, |x| body.h(x.as_slice()))
    };
    Ok(EstimateWithCI::from_observations(&obs))
}

/// Lower bound on `sup_{|x|=1} h(x)` by multi-start local ascent.
pub fn circumradius(body: &dyn SupportBody, n_starts: usize, ascent_steps: usize, seed: Seed) -> Result<f64> {
    circumradius_with(
        body,
        &SearchConfig {
            starts: n_starts,
            steps: ascent_steps,
            ..SearchConfig::default()
        },
        seed,
    )
}

pub fn circumradius_with(body: &dyn SupportBody, cfg: &SearchConfig, seed: Seed) -> Result<f64> {
    let starts = directions(body.dim(), cfg.starts.max(1), seed.derive("circumradius"))?;
    let best = par::map_slice(&starts, |x| ascend(body, x.as_slice().to_vec(), cfg).0);
    Ok(best.into_iter().fold(f64::NEG_INFINITY, f64::max))
}

/// `K - K`, whose circumradius is the largest width of `K`.
#[derive(Debug)]
struct DifferenceBody<'a>(&'a dyn SupportBody);

impl SupportBody for DifferenceBody<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn h(&self, x: &[f64]) -> f64 {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        self.0.h(x) + self.0.h(&neg)
    }

    fn supporting_point(&self, x: &[f64], out: &mut [f64]) -> Option<f64> {
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        let mut other = vec![0.0; x.len()];
        let a = self.0.supporting_point(x, out)?;
        let b = self.0.supporting_point(&neg, &mut other)?;
        out.iter_mut().zip(&other).for_each(|(o, v)| *o -= v);
        Some(a + b)
    }

    fn has_supporting_points(&self) -> bool {
        self.0.has_supporting_points()
    }

    fn is_centrally_symmetric(&self) -> bool {
        true
    }
}

/// Lower bound on the diameter: `2 * circumradius` for centrally symmetric
/// bodies, otherwise the largest width `h(u) + h(-u)` found by the same search.
pub fn diameter(body: &dyn SupportBody, n_starts: usize, ascent_steps: usize, seed: Seed) -> Result<f64> {
    let cfg = SearchConfig {
        starts: n_starts,
        steps: ascent_steps,
        ..SearchConfig::default()
    };
    if body.is_centrally_symmetric() {
        Ok(2.0 * circumradius_with(body, &cfg, seed)?)
    } else {
        circumradius_with(&DifferenceBody(body), &cfg, seed)
    }
}

/// Extremes of `h` over `n_dirs` random directions, the four largest and
/// smallest refined by 20 steps of local ascent / descent.
pub fn sandwich(body: &dyn SupportBody, n_dirs: usize, seed: Seed) -> Result<SandwichReport> {
    sandwich_with(
        body,
        n_dirs,
        &SearchConfig {
            starts: 4,
            steps: 20,
            ..SearchConfig::default()
        },
        seed,
    )
}

/// [`sandwich`] refining the `cfg.starts` most extreme sampled directions on each side.
pub fn sandwich_with(body: &dyn SupportBody, n_dirs: usize, cfg: &SearchConfig, seed: Seed) -> Result<SandwichReport> {
    if n_dirs < 10 {
        return Err(Error::arg(format!("sandwich needs at least 10 directions, got {n_dirs}")));
    }
    let dirs = directions(body.dim(), n_dirs, seed.derive("sandwich"))?;
    let values = par::map_slice(&dirs, |x| body.h(x.as_slice()));
    let mut order: Vec<usize> = (0..n_dirs).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let k = cfg.starts.min(n_dirs);
    let lows: Vec<Vec<f64>> = order[..k].iter().map(|&i| dirs[i].as_slice().to_vec()).collect();
    let highs: Vec<Vec<f64>> = order[n_dirs - k..].iter().map(|&i| dirs[i].as_slice().to_vec()).collect();
    let h_min = par::map_slice(&lows, |x| descend(body, x.clone(), cfg).0)
        .into_iter()
        .fold(values[order[0]], f64::min);
    let h_max = par::map_slice(&highs, |x| ascend(body, x.clone(), cfg).0)
        .into_iter()
        .fold(values[order[n_dirs - 1]], f64::max);
    if !(h_min > 0.0) {
        return Err(Error::Degenerate(format!(
            "support function reached {h_min} on the sphere; the body has empty interior around the origin"
        )));
    }
    Ok(SandwichReport {
        h_min,
        h_max,
        ratio: h_max / h_min,
        directions: n_dirs,
    })
}

fn compare_pairs<F>(body: &dyn SupportBody, n_tests: usize, seed: Seed, image: F) -> Result<DefectReport>
where
    F: Fn(&[f64], Seed) -> Vec<f64> + Sync,
{
    let dirs = directions(body.dim(), n_tests, seed.derive("directions"))?;
    let idx: Vec<usize> = (0..n_tests).collect();
    let rows = par::map_slice(&idx, |&i| {
        let x = dirs[i].as_slice();
        let xp = image(x, seed.derive("patterns").index(i as u64));
        let (a, b) = (body.h_ci(x), body.h_ci(&xp));
        let diff = (a.value - b.value).abs();
        let rel = diff / a.value.abs().max(b.value.abs()).max(TINY);
        let hw = a.combined_half_width(&b);
        let units = if diff == 0.0 {
            Some(0.0)
        } else if hw > 0.0 {
            Some(diff / hw)
        } else {
            None
        };
        (rel, units)
    });
    Ok(DefectReport {
        defect: rows.iter().map(|r| r.0).fold(0.0, f64::max),
        max_ci_units: rows.iter().try_fold(0.0, |m: f64, r| r.1.map(|u| m.max(u))),
        tests: n_tests,
    })
}

/// Largest relative change of `h` under random sign flips of the frame coordinates.
pub fn unconditionality_defect(
    body: &dyn SupportBody,
    frame: &OrthogonalBasis,
    n_tests: usize,
    seed: Seed,
) -> Result<DefectReport> {
    Error::check_dim(body.dim(), frame.dim())?;
    compare_pairs(body, n_tests, seed.derive("unconditionality"), |x, s| {
        let mut c = frame.coords(x);
        let mut rng = s.rng();
        for v in c.iter_mut() {
            if rand::Rng::random::<bool>(&mut rng) {
                *v = -*v;
            }
        }
        frame.combine(&c)
    })
}

/// Largest relative difference between `h(x)` and `h(-x)`.
pub fn symmetry_defect(body: &dyn SupportBody, n_tests: usize, seed: Seed) -> Result<DefectReport> {
    compare_pairs(body, n_tests, seed.derive("symmetry"), |x, _| x.iter().map(|v| -v).collect())
}

/// Largest sampled excess of `h_K(x)` over `rho sqrt(n) max_i |<x, e_i>|`, clamped at 0.
/// Zero means no sampled direction contradicts `K ⊆ rho sqrt(n) conv{±e_i}`.
pub fn l1_envelope_defect(
    body: &dyn SupportBody,
    frame: &OrthogonalBasis,
    rho: f64,
    n_dirs: usize,
    seed: Seed,
) -> Result<f64> {
    if !(rho > 0.0) {
        return Err(Error::arg(format!("envelope scale must be positive, got {rho}")));
    }
    Error::check_dim(body.dim(), frame.dim())?;
    let scale = rho * (body.dim() as f64).sqrt();
    let dirs = directions(body.dim(), n_dirs, seed.derive("l1-envelope"))?;
    let excess = par::map_slice(&dirs, |x| {
        let env = frame.coords(x.as_slice()).iter().fold(0.0f64, |m, c| m.max(c.abs()));
        body.h(x.as_slice()) - scale * env
    });
    Ok(excess.into_iter().fold(0.0, f64::max))
}

/// Unpaired mean-width estimates of two bodies on the same directions agree
/// within `k` combined half-widths.
pub fn mean_widths_agree(a: &EstimateWithCI, b: &EstimateWithCI, k: f64) -> bool {
    a.agrees_with(b, k, 0.0)
}
