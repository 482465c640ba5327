use std::f64::consts::PI;

use nalgebra::DMatrix;

use super::OrthogonalBasis;
use crate::{Error, Result};

/// An orthonormal basis whose entries are all at most `2 / sqrt(n)` in absolute value.
///
/// Powers of two use the Sylvester-ordered Hadamard-Walsh matrix (entries exactly
/// `1 / sqrt(n)`). Other dimensions use the real characters of `Z/nZ`: the constant
/// vector, cosine/sine pairs of frequency `1 <= k < n/2` scaled by `sqrt(2/n)`, and
/// the alternating vector when `n` is even. Those entries are bounded by `sqrt(2/n)`.
pub fn walsh_flat_basis(n: usize) -> Result<OrthogonalBasis> {
    if n == 0 {
        return Err(Error::arg("dimension must be positive"));
    }
    let m = if n.is_power_of_two() {
        hadamard(n)
    } else {
        characters(n)
    };
    Ok(OrthogonalBasis::from_trusted(m))
}

/// `base * H`, a Walsh-flat basis relative to `base`.
pub fn relative_flat_basis(base: &OrthogonalBasis) -> Result<OrthogonalBasis> {
    let defect = base.orthonormality_defect();
    if defect > super::ORTHO_TOL {
        return Err(Error::arg(format!(
            "base is not orthonormal (defect {defect:e})"
        )));
    }
    let h = walsh_flat_basis(base.dim())?;
    Ok(OrthogonalBasis::from_trusted(base.matrix() * h.matrix()))
}

fn hadamard(n: usize) -> DMatrix<f64> {
    let s = 1.0 / (n as f64).sqrt();
    DMatrix::from_fn(n, n, |i, j| {
        if (i & j).count_ones() % 2 == 0 {
            s
        } else {
            -s
        }
    })
}

fn characters(n: usize) -> DMatrix<f64> {
    let nf = n as f64;
    let mut m = DMatrix::zeros(n, n);
    let c0 = 1.0 / nf.sqrt();
    let c1 = (2.0 / nf).sqrt();
    for i in 0..n {
        m[(i, 0)] = c0;
    }
    let mut col = 1;
    let mut k = 1;
    while 2 * k < n {
        for i in 0..n {
            // Reduce the phase index modulo n before scaling to keep the angle small.
            let angle = 2.0 * PI * ((k * i) % n) as f64 / nf;
            m[(i, col)] = c1 * angle.cos();
            m[(i, col + 1)] = c1 * angle.sin();
        }
        col += 2;
        k += 1;
    }
    if n % 2 == 0 {
        for i in 0..n {
            m[(i, col)] = if i % 2 == 0 { c0 } else { -c0 };
        }
        col += 1;
    }
    debug_assert_eq!(col, n);
    m
}
