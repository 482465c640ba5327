use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{norm, OrthogonalBasis, Seed, UnitVector};
use crate::{Error, Result};

/// A Haar-distributed orthogonal matrix of order `n`.
///
/// QR of a standard Gaussian matrix, with column `j` of `Q` multiplied by
/// `sign(R_jj)` so the distribution is exactly Haar.
pub fn sample_haar_basis(n: usize, seed: Seed) -> Result<OrthogonalBasis> {
    sample_haar_basis_with(n, &mut seed.derive("haar").rng())
}

pub fn sample_haar_basis_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<OrthogonalBasis> {
    if n == 0 {
        return Err(Error::arg("dimension must be positive"));
    }
    let g = DMatrix::<f64>::from_fn(n, n, |_, _| rng.sample(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    Ok(OrthogonalBasis::from_trusted(q))
}

/// A uniform point on the unit sphere `S^{n-1}` (normalized Gaussian vector).
pub fn sample_sphere(n: usize, seed: Seed) -> Result<UnitVector> {
    sample_sphere_with(n, &mut seed.derive("sphere").rng())
}

pub fn sample_sphere_with<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<UnitVector> {
    if n == 0 {
        return Err(Error::arg("dimension must be positive"));
    }
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let len = norm(&v);
        if len > 0.0 && len.is_finite() {
            v.iter_mut().for_each(|c| *c /= len);
            return Ok(UnitVector::from_trusted(v));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_given_seed() {
        let a = sample_haar_basis(3, Seed(7)).unwrap();
        let b = sample_haar_basis(3, Seed(7)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_haar_basis(3, Seed(8)).unwrap());
    }

    #[test]
    fn zero_dimension_rejected() {
        assert!(sample_haar_basis(0, Seed(1)).is_err());
        assert!(sample_sphere(0, Seed(1)).is_err());
    }

    #[test]
    fn one_dimensional_sign_is_fair() {
        let trials = 10_000;
        let pos = (0..trials)
            .filter(|&s| sample_haar_basis(1, Seed(s)).unwrap().matrix()[(0, 0)] > 0.0)
            .count();
        let frac = pos as f64 / trials as f64;
        assert!((frac - 0.5).abs() <= 0.02, "{frac}");
    }

    #[test]
    fn one_dimensional_sphere_is_sign() {
        for s in 0..20 {
            let v = sample_sphere(1, Seed(s)).unwrap();
            assert_eq!(v.as_slice()[0].abs(), 1.0);
        }
    }

    #[test]
    fn sphere_points_have_unit_norm() {
        for s in 0..50 {
            let v = sample_sphere(17, Seed(s)).unwrap();
            assert!((norm(v.as_slice()) - 1.0).abs() <= 1e-12);
        }
    }

    #[test]
    fn squared_overlap_mean_is_one_over_n() {
        let n = 16;
        let trials = 10_000;
        let mean = (0..trials)
            .map(|s| sample_haar_basis(n, Seed(s)).unwrap().matrix()[(0, 0)].powi(2))
            .sum::<f64>()
            / trials as f64;
        let target = 1.0 / n as f64;
        assert!((mean - target).abs() <= 0.05 * target, "{mean}");
    }

    #[test]
    fn large_bases_stay_orthonormal() {
        for n in [1usize, 2, 33, 256] {
            let b = sample_haar_basis(n, Seed(n as u64)).unwrap();
            assert!(b.orthonormality_defect() < 1e-10, "n={n}");
        }
    }
}
