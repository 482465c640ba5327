//! The inf-convolution norm `||x||'_k = inf { |x'|_2 + k |x''|_inf : x = x' + x'' }`,
//! its tail-l2 surrogate, and moment-ratio psi-alpha estimates.

use serde::{Deserialize, Serialize};

use rand::Rng;
use rand_distr::{Cauchy, Distribution, StandardNormal};

use crate::linalg::{rearrange_desc_abs, Seed};
use crate::{Error, Result};

/// Moments used by [`psi_alpha_estimate`].
pub const PSI_MOMENTS: [f64; 5] = [1.0, 2.0, 4.0, 8.0, 16.0];
/// Smallest sample accepted by [`psi_alpha_estimate`].
pub const PSI_MIN_SAMPLES: usize = 100;

/// Exact value of `||x||'_k`.
///
/// The optimal `x''` clips every coordinate at a common threshold `tau`, so the
/// norm is `min_{tau >= 0} sqrt(sum_i (|x_i| - tau)_+^2) + k tau`. The objective
/// is convex and smooth between consecutive sorted magnitudes; the minimizer is
/// located by walking the breakpoints from the top and solving the stationarity
/// condition in closed form on the bracketing segment.
pub fn inf_conv_norm(x: &[f64], k: f64) -> Result<f64> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::arg(format!("inf-convolution weight must be positive, got {k}")));
    }
    let a = rearrange_desc_abs(x);
    Ok(inf_conv_sorted(&a, k).value)
}

/// Optimal clipping threshold together with the norm value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InfConvSolution {
    pub value: f64,
    pub tau: f64,
}

/// [`inf_conv_norm`] with the optimal threshold, for a non-increasing,
/// non-negative input.
pub fn inf_conv_sorted(a: &[f64], k: f64) -> InfConvSolution {
    let tau = optimal_threshold(a, k);
    InfConvSolution {
        value: clipped_objective(a, k, tau),
        tau,
    }
}

/// `sqrt(sum (a_i - tau)_+^2) + k tau`.
pub fn clipped_objective(a: &[f64], k: f64, tau: f64) -> f64 {
    let ss: f64 = a
        .iter()
        .map(|&v| (v - tau).max(0.0))
        .take_while(|&d| d > 0.0)
        .map(|d| d * d)
        .sum();
    ss.sqrt() + k * tau
}

fn optimal_threshold(a: &[f64], k: f64) -> f64 {
    let nz = a.iter().take_while(|&&v| v > 0.0).count();
    if nz == 0 {
        return 0.0;
    }
    // Welford running mean / M2 of the top r magnitudes.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for r in 1..=nz {
        let v = a[r - 1];
        let delta = v - mean;
        mean += delta / r as f64;
        m2 += delta * (v - mean);

        let rf = r as f64;
        let var = (m2 / rf).max(0.0);
        let hi = v;
        let lo = if r == nz { 0.0 } else { a[r] };

        // Slope just below `hi` is k - |d|_1 / |d|_2 with d_i = a_i - hi, i < r;
        // the slope increases with tau, so a non-positive value puts the minimum at `hi`.
        let w = mean - hi;
        let spread = var + w * w;
        let ratio = if spread > 0.0 {
            rf * w / (rf * spread).sqrt()
        } else {
            rf.sqrt()
        };
        if k <= ratio {
            return hi;
        }
        // Stationary point inside [lo, hi]: r w^2 = k^2 (var + w^2).
        if rf > k * k {
            let tau = mean - k * (var / (rf - k * k)).sqrt();
            if tau >= lo {
                return tau.min(hi);
            }
        }
    }
    0.0
}

/// `sqrt(sum_{i <= m} (x_i^*)^2)` with `m = min(ceil(k^2), n)`.
pub fn tail_l2_surrogate(x: &[f64], k: f64) -> f64 {
    let a = rearrange_desc_abs(x);
    let m = surrogate_terms(k, a.len());
    a[..m].iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Number of leading rearranged coordinates kept by [`tail_l2_surrogate`].
pub fn surrogate_terms(k: f64, n: usize) -> usize {
    let m = (k * k).ceil();
    if m.is_nan() || m <= 0.0 {
        0
    } else if m >= n as f64 {
        n
    } else {
        m as usize
    }
}

/// Moment-ratio proxy for the psi-alpha Orlicz norm.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PsiAlphaEstimate {
    pub alpha: f64,
    pub value: f64,
    /// Moment order `p` at which the maximum ratio was attained.
    pub argmax_p: f64,
    pub method: String,
}

/// `max_{p in {1,2,4,8,16}} (E|f|^p)^{1/p} / p^{1/alpha}` over the empirical sample.
pub fn psi_alpha_estimate(samples: &[f64], alpha: f64) -> Result<PsiAlphaEstimate> {
    if samples.len() < PSI_MIN_SAMPLES {
        return Err(Error::arg(format!(
            "psi-alpha estimate needs at least {PSI_MIN_SAMPLES} samples, got {}",
            samples.len()
        )));
    }
    if !(0.5..=2.0).contains(&alpha) {
        return Err(Error::arg(format!("alpha must lie in [1/2, 2], got {alpha}")));
    }
    let scale = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let (value, argmax_p) = if scale == 0.0 {
        (0.0, 1.0)
    } else {
        let n = samples.len() as f64;
        PSI_MOMENTS
            .iter()
            .map(|&p| {
                let mean: f64 = samples.iter().map(|v| (v.abs() / scale).powf(p)).sum::<f64>() / n;
                (scale * mean.powf(1.0 / p) / p.powf(1.0 / alpha), p)
            })
            .fold((f64::NEG_INFINITY, 1.0), |best, cur| if cur.0 > best.0 { cur } else { best })
    };
    Ok(PsiAlphaEstimate {
        alpha,
        value,
        argmax_p,
        method: "moment-ratio max over p in {1,2,4,8,16}".to_string(),
    })
}

/// Random vector families for [`equivalence_sweep`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepFamily {
    Gaussian,
    /// Gaussian entries on a random support of about `sqrt(n)` coordinates.
    Sparse,
    /// Standard Cauchy entries.
    HeavyTailed,
}

impl SweepFamily {
    pub const ALL: [SweepFamily; 3] = [SweepFamily::Gaussian, SweepFamily::Sparse, SweepFamily::HeavyTailed];

    pub fn sample<R: Rng + ?Sized>(self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            SweepFamily::Gaussian => (0..n).map(|_| rng.sample(StandardNormal)).collect(),
            SweepFamily::Sparse => {
                let p = ((n as f64).sqrt() / n as f64).min(1.0);
                let mut x: Vec<f64> =
                    (0..n).map(|_| if rng.random::<f64>() < p { rng.sample(StandardNormal) } else { 0.0 }).collect();
                let j = rng.random_range(0..n);
                if x.iter().all(|&v| v == 0.0) {
                    x[j] = 1.0;
                }
                x
            }
            SweepFamily::HeavyTailed => {
                let c = Cauchy::new(0.0, 1.0).expect("valid scale");
                (0..n).map(|_| c.sample(rng)).collect()
            }
        }
    }
}

/// The weights `{1, 2, sqrt(n)/4, sqrt(n)}` checked per dimension.
pub fn equivalence_weights(n: usize) -> [f64; 4] {
    let r = (n as f64).sqrt();
    [1.0, 2.0, r / 4.0, r]
}

/// Deterministic vectors that sit on the edges of the equivalence: all-ones,
/// axis vectors, two-level and geometric profiles.
pub fn adversarial_vectors(n: usize) -> Vec<Vec<f64>> {
    let mut out = vec![vec![1.0; n]];
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    out.push(e1);
    for m in [2usize, 4, (n as f64).sqrt().ceil() as usize, n / 2] {
        let m = m.clamp(1, n);
        out.push((0..n).map(|i| if i < m { 1.0 } else { 0.0 }).collect());
        out.push((0..n).map(|i| if i < m { 1.0 } else { 1e-3 }).collect());
    }
    for r in [0.5, 0.9, 0.99] {
        out.push((0..n).map(|i| f64::powi(r, i as i32)).collect());
    }
    out.push((0..n).map(|i| 1.0 / ((i + 1) as f64).sqrt()).collect());
    out
}

/// Outcome of [`equivalence_sweep`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EquivalenceReport {
    pub ns: Vec<usize>,
    pub vectors_per_n: usize,
    pub adversarial: bool,
    /// Number of `(x, k)` pairs checked.
    pub checks: usize,
    /// Largest `||x||'_k / surrogate(x, k)`.
    pub max_ratio: f64,
    /// Largest `surrogate(x, k) / ||x||'_k`.
    pub max_inverse_ratio: f64,
    /// Pairs where either ratio exceeds `sqrt(2) + tol`.
    pub violations: usize,
    pub tol: f64,
}

impl EquivalenceReport {
    pub fn holds(&self) -> bool {
        self.violations == 0
    }
}

/// Both ratios between `||x||'_k` and its surrogate for one pair.
pub fn equivalence_ratios(x: &[f64], k: f64) -> Result<(f64, f64)> {
    let a = inf_conv_norm(x, k)?;
    let b = tail_l2_surrogate(x, k);
    if a == 0.0 && b == 0.0 {
        return Ok((1.0, 1.0));
    }
    Ok((a / b, b / a))
}

/// Checks `surrogate / sqrt 2 <= ||x||'_k <= sqrt 2 * surrogate` over random
/// vectors (cycling through [`SweepFamily::ALL`]) and every weight in
/// [`equivalence_weights`], optionally adding [`adversarial_vectors`].
pub fn equivalence_sweep(ns: &[usize], vectors_per_n: usize, adversarial: bool, seed: Seed) -> Result<EquivalenceReport> {
    if ns.is_empty() || ns.contains(&0) {
        return Err(Error::arg("equivalence sweep needs positive dimensions"));
    }
    let tol = 1e-9;
    let bound = std::f64::consts::SQRT_2 + tol;
    let mut report = EquivalenceReport {
        ns: ns.to_vec(),
        vectors_per_n,
        adversarial,
        checks: 0,
        max_ratio: 0.0,
        max_inverse_ratio: 0.0,
        violations: 0,
        tol,
    };
    for &n in ns {
        let mut rng = seed.derive("equivalence").index(n as u64).rng();
        let mut vectors: Vec<Vec<f64>> = (0..vectors_per_n)
            .map(|i| SweepFamily::ALL[i % SweepFamily::ALL.len()].sample(n, &mut rng))
            .collect();
        if adversarial {
            vectors.extend(adversarial_vectors(n));
        }
        for x in &vectors {
            for k in equivalence_weights(n) {
                let (r, inv) = equivalence_ratios(x, k)?;
                report.checks += 1;
                report.max_ratio = report.max_ratio.max(r);
                report.max_inverse_ratio = report.max_inverse_ratio.max(inv);
                if r > bound || inv > bound {
                    report.violations += 1;
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{norm, Seed};
    use proptest::prelude::*;
    use rand::Rng;
    use rand_distr::StandardNormal;

    /// Multi-level grid search of the clipped objective, independent of the
    /// breakpoint solver. The final level has step at most 1e-6.
    fn grid_oracle(x: &[f64], k: f64) -> f64 {
        let a: Vec<f64> = x.iter().map(|v| v.abs()).collect();
        let g = |tau: f64| {
            a.iter().map(|&v| (v - tau).max(0.0).powi(2)).sum::<f64>().sqrt() + k * tau
        };
        let top = a.iter().cloned().fold(0.0, f64::max);
        let (mut lo, mut hi) = (0.0, top);
        let points = 2000;
        loop {
            let step = (hi - lo) / points as f64;
            let (best_i, _) = (0..=points)
                .map(|i| (i, g(lo + step * i as f64)))
                .fold((0, f64::INFINITY), |b, c| if c.1 < b.1 { c } else { b });
            if step <= 1e-6 {
                return g(lo + step * best_i as f64);
            }
            let c = lo + step * best_i as f64;
            lo = (c - 2.0 * step).max(0.0);
            hi = (c + 2.0 * step).min(top);
        }
    }

    #[test]
    fn axis_vector_is_one_for_large_weight() {
        for k in [1.0, 1.5, 10.0] {
            assert!((inf_conv_norm(&[1.0, 0.0, 0.0], k).unwrap() - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn all_ones_is_min_of_sqrt_n_and_k() {
        for n in [1usize, 4, 9, 16] {
            let x = vec![1.0; n];
            for k in [0.5, 1.0, 2.0, 3.0, 5.0] {
                let expect = (n as f64).sqrt().min(k);
                let got = inf_conv_norm(&x, k).unwrap();
                assert!((got - expect).abs() < 1e-12, "n={n} k={k} got={got}");
                assert!((grid_oracle(&x, k) - expect).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn three_one_example() {
        let v = inf_conv_norm(&[3.0, 1.0], 1.0).unwrap();
        assert!((v - 3.0).abs() < 1e-12);
        assert!((grid_oracle(&[3.0, 1.0], 1.0) - 3.0).abs() < 1e-5);
    }

    #[test]
    fn rejects_non_positive_weight() {
        assert!(inf_conv_norm(&[1.0], 0.0).is_err());
        assert!(inf_conv_norm(&[1.0], -1.0).is_err());
        assert!(inf_conv_norm(&[1.0], f64::NAN).is_err());
    }

    #[test]
    fn zero_vector() {
        assert_eq!(inf_conv_norm(&[0.0, 0.0], 2.0).unwrap(), 0.0);
        assert_eq!(tail_l2_surrogate(&[0.0, 0.0], 2.0), 0.0);
    }

    #[test]
    fn surrogate_examples() {
        assert_eq!(tail_l2_surrogate(&[1.0, 0.0, 0.0], 2.0), 1.0);
        assert_eq!(tail_l2_surrogate(&[3.0, 1.0], 1.0), 3.0);
        let ones = vec![1.0; 16];
        for k in [1.0, 2.0, 3.0, 4.0] {
            assert!((tail_l2_surrogate(&ones, k) - k).abs() < 1e-12);
        }
        assert_eq!(surrogate_terms(1.5, 10), 3);
        assert_eq!(surrogate_terms(10.0, 10), 10);
    }

    #[test]
    fn grid_oracle_agreement_on_random_instances() {
        let mut rng = Seed(5).rng();
        for _ in 0..1000 {
            let n = rng.random_range(1..12);
            let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal) * 2.0).collect();
            let k = rng.random_range(0.05..4.0);
            let got = inf_conv_norm(&x, k).unwrap();
            let want = grid_oracle(&x, k);
            assert!((got - want).abs() <= 1e-5, "x={x:?} k={k} got={got} want={want}");
        }
    }

    #[test]
    fn psi_examples() {
        let ones = vec![1.0; 200];
        let e = psi_alpha_estimate(&ones, 2.0).unwrap();
        assert!((e.value - 1.0).abs() < 1e-15);
        assert_eq!(e.argmax_p, 1.0);

        let mut rng = Seed(9).rng();
        let g: Vec<f64> = (0..100_000).map(|_| rng.sample(StandardNormal)).collect();
        let v = psi_alpha_estimate(&g, 2.0).unwrap().value;
        assert!((0.5..=1.5).contains(&v), "{v}");

        let g3: Vec<f64> = g.iter().map(|v| 3.0 * v).collect();
        let v3 = psi_alpha_estimate(&g3, 2.0).unwrap().value;
        assert!((v3 - 3.0 * v).abs() <= 1e-12 * v3);
    }

    #[test]
    fn psi_argument_errors() {
        assert!(psi_alpha_estimate(&[1.0; 99], 1.0).is_err());
        assert!(psi_alpha_estimate(&[1.0; 100], 0.4).is_err());
        assert!(psi_alpha_estimate(&[1.0; 100], 2.5).is_err());
    }

    fn vec_and_k() -> impl Strategy<Value = (Vec<f64>, Vec<f64>, f64)> {
        (1usize..16).prop_flat_map(|n| {
            (
                prop::collection::vec(-5.0f64..5.0, n),
                prop::collection::vec(-5.0f64..5.0, n),
                0.1f64..6.0,
            )
        })
    }

    proptest! {
        #[test]
        fn is_a_norm((x, y, k) in vec_and_k(), lambda in 0.0f64..10.0) {
            let nx = inf_conv_norm(&x, k).unwrap();
            let ny = inf_conv_norm(&y, k).unwrap();
            let sum: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
            prop_assert!(inf_conv_norm(&sum, k).unwrap() <= nx + ny + 1e-9);
            let scaled: Vec<f64> = x.iter().map(|v| lambda * v).collect();
            prop_assert!((inf_conv_norm(&scaled, k).unwrap() - lambda * nx).abs() <= 1e-9 * (1.0 + lambda * nx));
        }

        #[test]
        fn bounded_by_both_pure_splits((x, _y, k) in vec_and_k()) {
            let v = inf_conv_norm(&x, k).unwrap();
            let linf = x.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            prop_assert!(v <= norm(&x).min(k * linf) + 1e-12);
        }

        #[test]
        fn monotone_in_weight((x, _y, k) in vec_and_k(), dk in 0.0f64..3.0) {
            prop_assert!(inf_conv_norm(&x, k).unwrap() <= inf_conv_norm(&x, k + dk).unwrap() + 1e-12);
        }

        #[test]
        fn surrogate_equivalence_within_sqrt2((x, _y, k) in vec_and_k()) {
            prop_assume!(k * k >= 0.5);
            let a = inf_conv_norm(&x, k).unwrap();
            let b = tail_l2_surrogate(&x, k);
            prop_assume!(b > 1e-9);
            let r = a / b;
            prop_assert!(r <= std::f64::consts::SQRT_2 + 1e-12);
            prop_assert!(r >= std::f64::consts::FRAC_1_SQRT_2 - 1e-12);
        }
    }

    #[test]
    fn sweep_with_edge_vectors_holds() {
        let r = equivalence_sweep(&[8, 32], 300, true, Seed(4)).unwrap();
        assert!(r.holds(), "{r:?}");
        assert!(r.max_ratio <= SQRT_2_TOL && r.max_inverse_ratio <= SQRT_2_TOL);
        assert_eq!(r.checks, 2 * 4 * 300 + 4 * (adversarial_vectors(8).len() + adversarial_vectors(32).len()));
        assert_eq!(equivalence_ratios(&[1.0, 0.0, 0.0], 2.0).unwrap(), (1.0, 1.0));
    }

    const SQRT_2_TOL: f64 = std::f64::consts::SQRT_2 + 1e-9;
}
