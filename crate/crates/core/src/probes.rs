//! Fast randomized experiments checking the probabilistic estimates behind the
//! diameter-decay argument. Every probe is deterministic given its seed.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Exp1, StandardNormal};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::linalg::{dot, max_overlap, rearrange_desc_abs, sample_haar_basis, sample_sphere, OrthogonalBasis, Seed};
use crate::norms::psi_alpha_estimate;
use crate::par;
use crate::stats::Summary;
use crate::{Error, Result};

/// Slack for the deterministic domination check.
pub const DOMINATION_SLACK: f64 = 1e-12;
/// Sign patterns sampled per chaos trial when not enumerating.
pub const CHAOS_SAMPLES: usize = 10_000;
/// Largest dimension whose chaos is enumerated exactly (`4^n` patterns).
pub const CHAOS_EXACT_MAX_N: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub version: String,
    pub probe: String,
    pub n: usize,
    pub trials: usize,
    pub seed: Seed,
    pub parameters: serde_json::Value,
    pub summaries: Vec<Summary>,
    pub threshold: Option<f64>,
    pub success_rate: Option<f64>,
    pub violations: Option<usize>,
}

impl ProbeReport {
    pub fn summary(&self, name: &str) -> Option<&Summary> {
        self.summaries.iter().find(|s| s.name == name)
    }
}

fn report(probe: &str, n: usize, trials: usize, seed: Seed, parameters: serde_json::Value) -> ProbeReport {
    ProbeReport {
        version: crate::VERSION.into(),
        probe: probe.into(),
        n,
        trials,
        seed,
        parameters,
        summaries: Vec::new(),
        threshold: None,
        success_rate: None,
        violations: None,
    }
}

fn check_trials(trials: usize) -> Result<()> {
    if trials == 0 {
        Err(Error::arg("trials must be positive"))
    } else {
        Ok(())
    }
}

/// Largest entry of a Haar basis against the standard frame.
///
/// The threshold `c1 sqrt(ln n / n)` is clamped at 1; the normalized statistic
/// `max * sqrt(n / ln n)` is reported as well.
pub fn probe_basis_overlap(n: usize, trials: usize, c1: f64, seed: Seed) -> Result<ProbeReport> {
    let maxes = basis_overlap_maxima(n, trials, seed)?;
    Ok(basis_overlap_report(n, &maxes, c1, seed))
}

/// Per-trial maxima behind [`probe_basis_overlap`], so several thresholds can
/// share one set of draws.
pub fn basis_overlap_maxima(n: usize, trials: usize, seed: Seed) -> Result<Vec<f64>> {
    if n < 2 {
        return Err(Error::arg("basis overlap needs n >= 2"));
    }
    check_trials(trials)?;
    let base = seed.derive("basis-overlap");
    let id = OrthogonalBasis::identity(n);
    Ok(par::map_indices(trials, |t| {
        let b = sample_haar_basis(n, base.index(t as u64)).expect("n >= 2");
        max_overlap(&id, &b).expect("same dimension")
    }))
}

/// Report for maxima drawn by [`basis_overlap_maxima`] with `seed`.
pub fn basis_overlap_report(n: usize, maxes: &[f64], c1: f64, seed: Seed) -> ProbeReport {
    let trials = maxes.len();
    let scale = ((n as f64).ln() / n as f64).sqrt();
    let threshold = (c1 * scale).min(1.0);
    let normalized: Vec<f64> = maxes.iter().map(|m| m / scale).collect();
    let mut r = report("basis-overlap", n, trials, seed, json!({ "c1": c1 }));
    r.summaries = vec![Summary::of("max_overlap", maxes), Summary::of("normalized", &normalized)];
    r.threshold = Some(threshold);
    r.success_rate = Some(maxes.iter().filter(|&&m| m <= threshold).count() as f64 / trials.max(1) as f64);
    r
}

/// `sum_i x_i^2 y_i^2` for independent uniform unit vectors.
pub fn probe_product_sum(n: usize, trials: usize, seed: Seed) -> Result<ProbeReport> {
    check_trials(trials)?;
    let base = seed.derive("product-sum");
    let sums = par::map_indices(trials, |t| {
        let s = base.index(t as u64);
        let x = sample_sphere(n, s.derive("x")).expect("n >= 1");
        let y = sample_sphere(n, s.derive("y")).expect("n >= 1");
        x.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a * a * b * b).sum::<f64>()
    });
    let scaled: Vec<f64> = sums.iter().map(|s| n as f64 * s).collect();
    let mut r = report("product-sum", n, trials, seed, json!({ "expected_mean": 1.0 / n as f64 }));
    r.summaries = vec![Summary::of("sum", &sums), Summary::of("n_times_sum", &scaled)];
    Ok(r)
}

/// Column-major `n x n` matrices `M = V^T U` and the squared entries of `U`.
fn chaos_coefficients(x: &[f64], i: usize, u: &OrthogonalBasis, v: &OrthogonalBasis) -> Vec<f64> {
    // phi(eps, eps') = sum_{j,k} eps_j eps'_k c_{jk}, c_{jk} = <x,v_j><v_j,u_k><u_k,e_i>.
    let n = x.len();
    let a: Vec<f64> = v.columns().map(|vj| dot(x, vj)).collect();
    let mut c = vec![0.0; n * n];
    for (j, vj) in v.columns().enumerate() {
        for (k, uk) in u.columns().enumerate() {
            c[j * n + k] = a[j] * dot(vj, uk) * uk[i];
        }
    }
    c
}

/// `sqrt(sum_j <x,v_j>^2 sum_k <v_j,u_k>^2 <u_k,e_i>^2)`, the L2 norm of the
/// chaos `phi^i_x` over uniform signs.
pub fn chaos_l2_proxy(x: &[f64], i: usize, u: &OrthogonalBasis, v: &OrthogonalBasis) -> Result<f64> {
    check_chaos(x, i, u, v)?;
    Ok(chaos_coefficients(x, i, u, v).iter().map(|c| c * c).sum::<f64>().sqrt())
}

fn check_chaos(x: &[f64], i: usize, u: &OrthogonalBasis, v: &OrthogonalBasis) -> Result<()> {
    Error::check_dim(x.len(), u.dim())?;
    Error::check_dim(x.len(), v.dim())?;
    if i >= x.len() {
        return Err(Error::arg(format!("coordinate {i} out of range")));
    }
    Ok(())
}

/// Values of `phi^i_x(eps, eps')`: all `4^n` sign patterns when `n` is at most
/// [`CHAOS_EXACT_MAX_N`], otherwise `samples` random ones.
pub fn chaos_values(
    x: &[f64],
    i: usize,
    u: &OrthogonalBasis,
    v: &OrthogonalBasis,
    samples: usize,
    seed: Seed,
) -> Result<Vec<f64>> {
    check_chaos(x, i, u, v)?;
    let n = x.len();
    let c = chaos_coefficients(x, i, u, v);
    let eval = |eps: &[f64], eps2: &[f64]| -> f64 {
        c.chunks_exact(n)
            .zip(eps)
            .map(|(row, e)| e * row.iter().zip(eps2).map(|(a, b)| a * b).sum::<f64>())
            .sum()
    };
    let mut eps = vec![0.0; 2 * n];
    if n <= CHAOS_EXACT_MAX_N {
        let count = 1usize << (2 * n);
        Ok((0..count)
            .map(|p| {
                for (b, e) in eps.iter_mut().enumerate() {
                    *e = if (p >> b) & 1 == 1 { -1.0 } else { 1.0 };
                }
                eval(&eps[..n], &eps[n..])
            })
            .collect())
    } else {
        let mut rng = seed.derive("chaos").rng();
        Ok((0..samples)
            .map(|_| {
                for e in eps.iter_mut() {
                    *e = if rng.random::<bool>() { 1.0 } else { -1.0 };
                }
                eval(&eps[..n], &eps[n..])
            })
            .collect())
    }
}

/// Degree-two Rademacher chaos of the two-basis symmetrization: the per-entry
/// L2 proxy `n max_{i,j} sum_k <v_j,u_k>^2 <u_k,e_i>^2` and a moment-ratio
/// psi_1 estimate of `phi^1_x` for a random unit `x`.
pub fn probe_chaos_psi1(n: usize, trials: usize, seed: Seed) -> Result<ProbeReport> {
    if n < 2 {
        return Err(Error::arg("chaos probe needs n >= 2"));
    }
    check_trials(trials)?;
    let base = seed.derive("chaos-psi1");
    let rows = par::map_indices(trials, |t| -> Result<(f64, f64, f64)> {
        let s = base.index(t as u64);
        let u = sample_haar_basis(n, s.derive("u"))?;
        let v = sample_haar_basis(n, s.derive("v"))?;
        let x = sample_sphere(n, s.derive("x"))?;
        let m = v.matrix().tr_mul(u.matrix());
        let mut proxy_max = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let s: f64 = (0..n).map(|k| (m[(j, k)] * u.matrix()[(i, k)]).powi(2)).sum();
                proxy_max = proxy_max.max(s);
            }
        }
        let values = chaos_values(x.as_slice(), 0, &u, &v, CHAOS_SAMPLES, s)?;
        let psi = psi_alpha_estimate(&values, 1.0)?.value;
        Ok((n as f64 * proxy_max, (n as f64).sqrt() * psi, chaos_l2_proxy(x.as_slice(), 0, &u, &v)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let mut r = report(
        "chaos-psi1",
        n,
        trials,
        seed,
        json!({
            "coordinate": 0,
            "sign_patterns": if n <= CHAOS_EXACT_MAX_N { 1usize << (2 * n) } else { CHAOS_SAMPLES },
            "exact": n <= CHAOS_EXACT_MAX_N,
        }),
    );
    let sqrt_n = (n as f64).sqrt();
    let col = |f: &dyn Fn(&(f64, f64, f64)) -> f64| rows.iter().map(f).collect::<Vec<_>>();
    r.summaries = vec![
        Summary::of("n_max_proxy", &col(&|r| r.0)),
        Summary::of("sqrt_n_psi1", &col(&|r| r.1)),
        Summary::of("sqrt_n_l2", &col(&|r| r.2 * sqrt_n)),
    ];
    Ok(r)
}

/// `sqrt(sum_{i,j} <x,v_i>^2 <v_i,u_j>^2 <u_j,y>^2)`.
pub fn unbiased_majorant(x: &[f64], y: &[f64], u: &OrthogonalBasis, v: &OrthogonalBasis) -> Result<f64> {
    Error::check_dim(x.len(), y.len())?;
    Error::check_dim(x.len(), u.dim())?;
    Error::check_dim(x.len(), v.dim())?;
    let a: Vec<f64> = v.columns().map(|vi| dot(x, vi).powi(2)).collect();
    let b: Vec<f64> = u.columns().map(|uj| dot(y, uj).powi(2)).collect();
    let m = v.matrix().tr_mul(u.matrix());
    let mut total = 0.0;
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            total += ai * m[(i, j)].powi(2) * bj;
        }
    }
    Ok(total.sqrt())
}

/// The Cauchy–Schwarz majorant for averages over the sign orbit, with its
/// deterministic domination by the largest basis overlap.
pub fn probe_unbiased_directions(n: usize, trials: usize, seed: Seed) -> Result<ProbeReport> {
    if n < 2 {
        return Err(Error::arg("unbiased-directions probe needs n >= 2"));
    }
    check_trials(trials)?;
    let base = seed.derive("unbiased-directions");
    let rows = par::map_indices(trials, |t| -> Result<(f64, f64)> {
        let s = base.index(t as u64);
        let u = sample_haar_basis(n, s.derive("u"))?;
        let v = sample_haar_basis(n, s.derive("v"))?;
        let x = sample_sphere(n, s.derive("x"))?;
        let y = sample_sphere(n, s.derive("y"))?;
        Ok((unbiased_majorant(x.as_slice(), y.as_slice(), &u, &v)?, max_overlap(&v, &u)?))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let scale = (n as f64 / (n as f64).ln()).sqrt();
    let majorants: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let overlaps: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let violations = rows.iter().filter(|(m, o)| *m > o + DOMINATION_SLACK).count();
    let mut r = report("unbiased-directions", n, trials, seed, json!({ "slack": DOMINATION_SLACK }));
    r.summaries = vec![
        Summary::of("majorant", &majorants),
        Summary::of("normalized_majorant", &majorants.iter().map(|m| m * scale).collect::<Vec<_>>()),
        Summary::of("max_overlap", &overlaps),
    ];
    r.violations = Some(violations);
    r.success_rate = Some(1.0 - violations as f64 / trials as f64);
    Ok(r)
}

/// Distributions for [`probe_rearranged_moment`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MomentDist {
    /// Standard exponential (psi_1).
    Exponential,
    /// `g^2 / 2` for standard Gaussian `g` (psi_1).
    GaussianSquaredHalf,
    /// Standard Gaussian (psi_2).
    Gaussian,
    /// Constant 1, for testing.
    Constant,
}

impl MomentDist {
    pub const ALL: [MomentDist; 4] = [
        MomentDist::Exponential,
        MomentDist::GaussianSquaredHalf,
        MomentDist::Gaussian,
        MomentDist::Constant,
    ];

    fn sample<R: Rng + ?Sized>(self, rng: &mut R) -> f64 {
        match self {
            MomentDist::Exponential => Exp1.sample(rng),
            MomentDist::GaussianSquaredHalf => {
                let g: f64 = StandardNormal.sample(rng);
                0.5 * g * g
            }
            MomentDist::Gaussian => StandardNormal.sample(rng),
            MomentDist::Constant => 1.0,
        }
    }

    /// `log(2n/k)` for the psi_1 laws, its square root for the Gaussian.
    pub fn scale(self, n: usize, k: usize) -> f64 {
        let l = (2.0 * n as f64 / k as f64).ln();
        match self {
            MomentDist::Gaussian => l.sqrt(),
            _ => l,
        }
    }
}

impl fmt::Display for MomentDist {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MomentDist::Exponential => "exponential",
            MomentDist::GaussianSquaredHalf => "gaussian-squared-half",
            MomentDist::Gaussian => "gaussian",
            MomentDist::Constant => "constant",
        })
    }
}

impl FromStr for MomentDist {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        MomentDist::ALL
            .into_iter()
            .find(|d| d.to_string() == s)
            .ok_or_else(|| Error::arg(format!("unknown distribution {s:?}")))
    }
}

/// `sqrt((1/k) sum_{i<=k} a_i^2)` for a non-increasing rearrangement `a`.
pub fn top_k_rms(rearranged: &[f64], k: usize) -> f64 {
    (rearranged[..k].iter().map(|v| v * v).sum::<f64>() / k as f64).sqrt()
}

/// Top-`k` quadratic mean of `n` i.i.d. draws, against `log(2n/k)`
/// (or its square root for Gaussian draws).
pub fn probe_rearranged_moment(n: usize, k: usize, trials: usize, dist: MomentDist, seed: Seed) -> Result<ProbeReport> {
    if k == 0 || k > n {
        return Err(Error::arg(format!("k must lie in 1..={n}, got {k}")));
    }
    check_trials(trials)?;
    let base = seed.derive("rearranged-moment");
    let stats = par::map_indices(trials, |t| {
        let mut rng = base.index(t as u64).rng();
        let draws: Vec<f64> = (0..n).map(|_| dist.sample(&mut rng)).collect();
        top_k_rms(&rearrange_desc_abs(&draws), k)
    });
    let scale = dist.scale(n, k);
    let mut r = report(
        "rearranged-moment",
        n,
        trials,
        seed,
        json!({ "k": k, "dist": dist.to_string(), "scale": scale }),
    );
    r.summaries = vec![
        Summary::of("statistic", &stats),
        Summary::of("ratio", &stats.iter().map(|s| s / scale).collect::<Vec<_>>()),
    ];
    Ok(r)
}

/// Names accepted by [`run_probe`].
pub const PROBE_NAMES: [&str; 5] = [
    "basis-overlap",
    "product-sum",
    "chaos-psi1",
    "unbiased-directions",
    "rearranged-moment",
];

/// Parameters for [`run_probe`]; unused fields are ignored by each probe.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProbeParams {
    pub n: usize,
    pub trials: usize,
    pub seed: Seed,
    pub c1: f64,
    pub k: usize,
    pub dist: MomentDist,
}

/// Dispatches a probe by name.
pub fn run_probe(name: &str, p: &ProbeParams) -> Result<ProbeReport> {
    match name {
        "basis-overlap" => probe_basis_overlap(p.n, p.trials, p.c1, p.seed),
        "product-sum" => probe_product_sum(p.n, p.trials, p.seed),
        "chaos-psi1" => probe_chaos_psi1(p.n, p.trials, p.seed),
        "unbiased-directions" => probe_unbiased_directions(p.n, p.trials, p.seed),
        "rearranged-moment" => probe_rearranged_moment(p.n, p.k, p.trials, p.dist, p.seed),
        other => Err(Error::arg(format!(
            "unknown probe {other:?}; available: {}",
            PROBE_NAMES.join(", ")
        ))),
    }
}
