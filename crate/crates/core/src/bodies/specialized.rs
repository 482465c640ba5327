//! Closed-form evaluators for the two stacks the decay experiment needs.
//!
//! Both run over sign patterns in Gray-code order, so consecutive patterns
//! differ by one rank-one update instead of a full change of basis.

use rand::Rng;

use super::symmetrized::{EvalMode, DEFAULT_EXACT_CAP};
use crate::linalg::{dot, OrthogonalBasis};
use crate::norms::inf_conv_sorted;
use crate::par;
use crate::stats::{EstimateWithCI, MeanAcc};
use crate::{Error, Result};

const GRAY_BITS: usize = 12;
const MC_CHUNK: usize = 1024;

fn check(x: &[f64], bases: &[&OrthogonalBasis]) -> Result<usize> {
    let n = x.len();
    if n < 2 {
        return Err(Error::arg("dimension must be at least 2"));
    }
    for b in bases {
        Error::check_dim(n, b.dim())?;
    }
    Ok(n)
}

/// Rows `r_i = <x, u_i> (<u_i, f_j>)_j` for `i < n - 1`, plus the fixed last row.
fn weighted_rows(x: &[f64], u: &OrthogonalBasis, f: &OrthogonalBasis) -> Vec<Vec<f64>> {
    u.columns()
        .map(|ui| {
            let a = dot(x, ui);
            f.columns().map(|fj| a * dot(ui, fj)).collect()
        })
        .collect()
}

/// Sums `value(Σ_i ε_i r_i)` over all signs of the first `bits` rows, the
/// remaining rows entering with `+1`.
fn gray_sum<F>(rows: &[Vec<f64>], bits: usize, value: F) -> f64
where
    F: Fn(&[f64], &mut Vec<f64>) -> f64 + Sync,
{
    let n = rows[0].len();
    let low = bits.min(GRAY_BITS);
    let chunks = 1usize << (bits - low);
    let parts = par::map_indices(chunks, |c| {
        let mut eps: Vec<f64> = (0..rows.len())
            .map(|i| if i >= low && i < bits && (c >> (i - low)) & 1 == 1 { -1.0 } else { 1.0 })
            .collect();
        let mut s = vec![0.0; n];
        for (e, r) in eps.iter().zip(rows) {
            s.iter_mut().zip(r).for_each(|(a, v)| *a += e * v);
        }
        let mut scratch = Vec::with_capacity(n);
        let mut total = value(&s, &mut scratch);
        for k in 1..(1usize << low) {
            let b = k.trailing_zeros() as usize;
            let f = 2.0 * eps[b];
            s.iter_mut().zip(&rows[b]).for_each(|(a, v)| *a -= f * v);
            eps[b] = -eps[b];
            total += value(&s, &mut scratch);
        }
        total
    });
    parts.into_iter().sum()
}

fn mc_estimate<F>(samples: usize, seed: crate::linalg::Seed, label: &str, draw: F) -> EstimateWithCI
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> f64 + Sync,
{
    let base = seed.derive(label);
    let chunks = samples.div_ceil(MC_CHUNK);
    let parts = par::map_indices(chunks, |c| {
        let mut rng = base.index(c as u64).rng();
        let mut acc = MeanAcc::default();
        for _ in c * MC_CHUNK..((c + 1) * MC_CHUNK).min(samples) {
            acc.push(draw(&mut rng));
        }
        acc
    });
    let mut acc = MeanAcc::default();
    parts.iter().for_each(|p| acc.merge(p));
    acc.estimate()
}

fn max_abs(s: &[f64]) -> f64 {
    s.iter().fold(0.0f64, |m, v| m.max(v.abs()))
}

/// Support function of `sqrt(n) conv{+-f_j}` symmetrized in the first `n - 1`
/// columns of `u`: the average of `sqrt(n) max_j |<Σ_i ε_i <x,u_i> u_i, f_j>|`
/// over `ε in {±1}^n` with `ε_n = 1`.
pub fn cross_dual_norm(x: &[f64], u: &OrthogonalBasis, f: &OrthogonalBasis, mode: EvalMode) -> Result<EstimateWithCI> {
    let n = check(x, &[u, f])?;
    let scale = (n as f64).sqrt();
    let rows = weighted_rows(x, u, f);
    match mode {
        EvalMode::Exact => {
            if n - 1 > DEFAULT_EXACT_CAP {
                return Err(Error::Mode(format!("exact enumeration needs n - 1 <= {DEFAULT_EXACT_CAP}")));
            }
            let total = gray_sum(&rows, n - 1, |s, _| max_abs(s));
            Ok(EstimateWithCI::exact(scale * total / (1u64 << (n - 1)) as f64))
        }
        EvalMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::Mode("Monte Carlo needs at least 2 samples".into()));
            }
            Ok(mc_estimate(samples, seed, "cross", |rng| {
                let mut s = rows[n - 1].clone();
                for r in &rows[..n - 1] {
                    let e = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    s.iter_mut().zip(r).for_each(|(a, v)| *a += e * v);
                }
                scale * max_abs(&s)
            }))
        }
    }
}

/// Support function of `K_t = sqrt(n) B_1 ∩ t B_2` symmetrized in the first
/// `n - 1` columns of `u` and then in the first `n - 1` columns of `v`.
pub fn kt_dual_norm(
    x: &[f64],
    t: f64,
    u: &OrthogonalBasis,
    v: &OrthogonalBasis,
    mode: EvalMode,
) -> Result<EstimateWithCI> {
    let n = check(x, &[u, v])?;
    if !(t > 0.0 && t <= (n as f64).sqrt()) {
        return Err(Error::arg(format!("t must lie in (0, sqrt(n)], got {t}")));
    }
    let weight = (n as f64).sqrt() / t;
    // Outer rows live in u-coordinates, inner rows are the columns of u.
    let outer = weighted_rows(x, v, u);
    let inner: Vec<&[f64]> = u.columns().collect();
    let kt = |phi: &[f64], scratch: &mut Vec<f64>| {
        scratch.clear();
        scratch.extend(phi.iter().map(|p| p.abs()));
        scratch.sort_unstable_by(|a, b| b.total_cmp(a));
        t * inf_conv_sorted(scratch, weight).value
    };
    match mode {
        EvalMode::Exact => {
            if 2 * (n - 1) > DEFAULT_EXACT_CAP {
                return Err(Error::Mode(format!(
                    "exact enumeration needs 2(n - 1) <= {DEFAULT_EXACT_CAP}"
                )));
            }
            let total = gray_sum(&outer, n - 1, |b, _| {
                let rows: Vec<Vec<f64>> = inner
                    .iter()
                    .zip(b)
                    .map(|(col, bk)| col.iter().map(|c| bk * c).collect())
                    .collect();
                gray_sum_seq(&rows, n - 1, &kt)
            });
            Ok(EstimateWithCI::exact(total / (1u64 << (2 * (n - 1))) as f64))
        }
        EvalMode::MonteCarlo { samples, seed } => {
            if samples < 2 {
                return Err(Error::Mode("Monte Carlo needs at least 2 samples".into()));
            }
            Ok(mc_estimate(samples, seed, "kt", |rng| {
                let mut b = outer[n - 1].clone();
                for r in &outer[..n - 1] {
                    let e = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    b.iter_mut().zip(r).for_each(|(a, v)| *a += e * v);
                }
                let mut phi = vec![0.0; n];
                for (k, col) in inner.iter().enumerate() {
                    let e = if k == n - 1 || rng.random::<bool>() { b[k] } else { -b[k] };
                    phi.iter_mut().zip(*col).for_each(|(a, c)| *a += e * c);
                }
                kt(&phi, &mut Vec::with_capacity(n))
            }))
        }
    }
}

/// Sequential Gray-code sum, used inside an already parallel outer loop.
fn gray_sum_seq<F>(rows: &[Vec<f64>], bits: usize, value: &F) -> f64
where
    F: Fn(&[f64], &mut Vec<f64>) -> f64,
{
    let n = rows[0].len();
    let mut eps = vec![1.0; rows.len()];
    let mut s = vec![0.0; n];
    for r in rows {
        s.iter_mut().zip(r).for_each(|(a, v)| *a += v);
    }
    let mut scratch = Vec::with_capacity(n);
    let mut total = value(&s, &mut scratch);
    for k in 1..(1usize << bits) {
        let b = k.trailing_zeros() as usize;
        let f = 2.0 * eps[b];
        s.iter_mut().zip(&rows[b]).for_each(|(a, v)| *a -= f * v);
        eps[b] = -eps[b];
        total += value(&s, &mut scratch);
    }
    total
}
