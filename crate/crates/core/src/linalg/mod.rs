//! Vectors, orthogonal frames, reflections and the random/flat bases that drive
//! every symmetrization.

mod haar;
mod seed;
mod walsh;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

pub use haar::{sample_haar_basis, sample_haar_basis_with, sample_sphere, sample_sphere_with};
pub use seed::Seed;
pub(crate) use seed::stream_word;
pub use walsh::{relative_flat_basis, walsh_flat_basis};

/// Entrywise tolerance on `Q^T Q - I` for a basis to count as orthonormal.
pub const ORTHO_TOL: f64 = 1e-10;
/// Relative tolerance on `|u| - 1` for a unit vector.
pub const UNIT_TOL: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// A direction on the unit sphere.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct UnitVector(Vec<f64>);

impl UnitVector {
    /// Wraps `coords`, which must already have unit length.
    pub fn new(coords: Vec<f64>) -> Result<Self> {
        if coords.is_empty() {
            return Err(Error::arg("unit vector must have positive dimension"));
        }
        let len = norm(&coords);
        if !len.is_finite() || (len - 1.0).abs() > UNIT_TOL {
            return Err(Error::arg(format!("vector has length {len}, expected 1")));
        }
        Ok(Self(coords))
    }

    /// Scales `v` to unit length.
    pub fn normalized(mut v: Vec<f64>) -> Result<Self> {
        let len = norm(&v);
        if v.is_empty() || !len.is_finite() || len == 0.0 {
            return Err(Error::arg("cannot normalize a zero or non-finite vector"));
        }
        v.iter_mut().for_each(|c| *c /= len);
        Ok(Self(v))
    }

    /// The `i`-th standard basis vector of `R^n`.
    pub fn axis(n: usize, i: usize) -> Result<Self> {
        if i >= n {
            return Err(Error::arg(format!("axis {i} out of range for dimension {n}")));
        }
        let mut v = vec![0.0; n];
        v[i] = 1.0;
        Ok(Self(v))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub(crate) fn from_trusted(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl TryFrom<Vec<f64>> for UnitVector {
    type Error = Error;
    fn try_from(v: Vec<f64>) -> Result<Self> {
        UnitVector::new(v)
    }
}

impl From<UnitVector> for Vec<f64> {
    fn from(u: UnitVector) -> Self {
        u.0
    }
}

/// An orthonormal frame stored as the columns of an `n x n` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthogonalBasis {
    columns: DMatrix<f64>,
}

impl OrthogonalBasis {
    /// Validates `columns^T columns = I` within [`ORTHO_TOL`].
    pub fn new(columns: DMatrix<f64>) -> Result<Self> {
        if !columns.is_square() || columns.nrows() == 0 {
            return Err(Error::arg(format!(
                "basis must be a non-empty square matrix, got {}x{}",
                columns.nrows(),
                columns.ncols()
            )));
        }
        let b = Self { columns };
        let defect = b.orthonormality_defect();
        if !(defect <= ORTHO_TOL) {
            return Err(Error::arg(format!("columns are not orthonormal (defect {defect:e})")));
        }
        Ok(b)
    }

    /// Builds a basis from column vectors.
    pub fn from_columns(cols: &[Vec<f64>]) -> Result<Self> {
        let n = cols.len();
        if n == 0 || cols.iter().any(|c| c.len() != n) {
            return Err(Error::arg("basis needs n columns of length n"));
        }
        Self::new(DMatrix::from_fn(n, n, |i, j| cols[j][i]))
    }

    pub fn identity(n: usize) -> Self {
        Self {
            columns: DMatrix::identity(n, n),
        }
    }

    pub(crate) fn from_trusted(columns: DMatrix<f64>) -> Self {
        debug_assert!(columns.is_square());
        Self { columns }
    }

    pub fn dim(&self) -> usize {
        self.columns.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.columns
    }

    /// Column `j` as a contiguous slice.
    pub fn column(&self, j: usize) -> &[f64] {
        let n = self.dim();
        &self.columns.as_slice()[j * n..(j + 1) * n]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[f64]> {
        self.columns.as_slice().chunks_exact(self.dim())
    }

    pub fn unit_column(&self, j: usize) -> UnitVector {
        UnitVector::from_trusted(self.column(j).to_vec())
    }

    /// Coordinates of `x` in this frame, `B^T x`.
    pub fn coords(&self, x: &[f64]) -> Vec<f64> {
        self.columns().map(|c| dot(c, x)).collect()
    }

    /// The vector with coordinates `c` in this frame, `B c`.
    pub fn combine(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        for (col, &w) in self.columns().zip(c) {
            out.iter_mut().zip(col).for_each(|(o, v)| *o += w * v);
        }
        out
    }

    /// Max entrywise deviation of `B^T B` from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let n = self.dim();
        let mut g = vec![0.0; n * n];
        let a = self.columns.as_slice();
        crate::kernels::gemm_tn(n, n, n, a, a, &mut g);
        let mut worst = 0.0f64;
        for j in 0..n {
            for i in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                let d = (g[i + j * n] - target).abs();
                if !(d <= worst) {
                    worst = d;
                }
            }
        }
        worst
    }

    /// True when the frame is the standard one up to signs and order of columns.
    pub fn is_signed_permutation(&self) -> bool {
        self.columns().all(|c| {
            let big = c.iter().filter(|v| (v.abs() - 1.0).abs() < 1e-12).count();
            let zero = c.iter().filter(|v| v.abs() < 1e-12).count();
            big == 1 && zero == c.len() - 1
        })
    }

    /// True when `other` spans the same frame up to column signs and order.
    pub fn matches_frame(&self, other: &OrthogonalBasis) -> bool {
        if self.dim() != other.dim() {
            return false;
        }
        OrthogonalBasis::from_trusted(self.columns.tr_mul(&other.columns)).is_signed_permutation()
    }

    pub fn to_columns(&self) -> Vec<Vec<f64>> {
        self.columns().map(<[f64]>::to_vec).collect()
    }
}

impl Serialize for OrthogonalBasis {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.to_columns().serialize(s)
    }
}

impl<'de> Deserialize<'de> for OrthogonalBasis {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let cols = Vec::<Vec<f64>>::deserialize(d)?;
        OrthogonalBasis::from_columns(&cols).map_err(serde::de::Error::custom)
    }
}

/// The reflection `x - 2 <x, u> u` through the hyperplane orthogonal to `u`.
pub fn reflect(x: &[f64], u: &UnitVector) -> Result<Vec<f64>> {
    Error::check_dim(u.dim(), x.len())?;
    let mut out = x.to_vec();
    reflect_in_place(&mut out, u.as_slice());
    Ok(out)
}

#[inline]
pub(crate) fn reflect_in_place(x: &mut [f64], u: &[f64]) {
    let s = 2.0 * dot(x, u);
    x.iter_mut().zip(u).for_each(|(v, w)| *v -= s * w);
}

/// Absolute values sorted non-increasingly; ties keep their original order.
pub fn rearrange_desc_abs(x: &[f64]) -> Vec<f64> {
    let mut out: Vec<f64> = x.iter().map(|v| v.abs()).collect();
    out.sort_by(|a, b| b.total_cmp(a));
    out
}

/// `max_{i,j} |<A_i, B_j>|`.
pub fn max_overlap(a: &OrthogonalBasis, b: &OrthogonalBasis) -> Result<f64> {
    Error::check_dim(a.dim(), b.dim())?;
    let g = a.matrix().tr_mul(b.matrix());
    Ok(g.iter().fold(0.0f64, |m, v| m.max(v.abs())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn e(n: usize, i: usize) -> UnitVector {
        UnitVector::axis(n, i).unwrap()
    }

    #[test]
    fn reflect_axis_examples() {
        assert_eq!(reflect(&[1.0, 0.0], &e(2, 0)).unwrap(), vec![-1.0, 0.0]);
        assert_eq!(reflect(&[0.0, 1.0], &e(2, 0)).unwrap(), vec![0.0, 1.0]);
        assert_eq!(reflect(&[1.0, 1.0], &e(2, 0)).unwrap(), vec![-1.0, 1.0]);
    }

    #[test]
    fn reflect_dimension_mismatch() {
        assert!(matches!(
            reflect(&[1.0, 2.0, 3.0], &e(2, 0)),
            Err(Error::Dimension { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn rearrangement_examples() {
        assert_eq!(rearrange_desc_abs(&[-3.0, 1.0, -2.0]), vec![3.0, 2.0, 1.0]);
        assert_eq!(rearrange_desc_abs(&[0.0, 0.0]), vec![0.0, 0.0]);
        assert_eq!(rearrange_desc_abs(&[1.0, -1.0, 1.0]), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn overlap_examples() {
        let id = OrthogonalBasis::identity(4);
        assert_eq!(max_overlap(&id, &id).unwrap(), 1.0);
        let w = walsh_flat_basis(4).unwrap();
        assert_eq!(max_overlap(&id, &w).unwrap(), 0.5);
        let w6 = walsh_flat_basis(6).unwrap();
        assert!(max_overlap(&OrthogonalBasis::identity(6), &w6).unwrap() <= 2.0 / 6f64.sqrt());
        assert!(max_overlap(&id, &OrthogonalBasis::identity(3)).is_err());
    }

    #[test]
    fn unit_vector_validation() {
        assert!(UnitVector::new(vec![0.6, 0.8]).is_ok());
        assert!(UnitVector::new(vec![0.6, 0.81]).is_err());
        assert!(UnitVector::normalized(vec![0.0, 0.0]).is_err());
        assert!(UnitVector::new(vec![]).is_err());
        let u: UnitVector = serde_json::from_str("[0.6,0.8]").unwrap();
        assert_eq!(u.as_slice(), &[0.6, 0.8]);
        assert!(serde_json::from_str::<UnitVector>("[1.0,1.0]").is_err());
    }

    #[test]
    fn basis_validation() {
        assert!(OrthogonalBasis::new(DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 0.0, 1.0])).is_err());
        assert!(OrthogonalBasis::new(DMatrix::zeros(2, 3)).is_err());
        let b = sample_haar_basis(5, Seed(1)).unwrap();
        let json = serde_json::to_string(&b).unwrap();
        let back: OrthogonalBasis = serde_json::from_str(&json).unwrap();
        assert_eq!(back, b);
    }

    #[test]
    fn frame_matching() {
        let id = OrthogonalBasis::identity(3);
        let perm = OrthogonalBasis::from_columns(&[
            vec![0.0, -1.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0],
        ])
        .unwrap();
        assert!(id.matches_frame(&perm));
        assert!(!id.matches_frame(&walsh_flat_basis(3).unwrap()));
    }

    fn vec_strategy(n: usize) -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-10.0f64..10.0, n)
    }

    proptest! {
        #[test]
        fn reflection_is_isometric_involution(
            (x, u) in (1usize..12).prop_flat_map(|n| (vec_strategy(n), vec_strategy(n)))
        ) {
            prop_assume!(norm(&u) > 1e-3);
            let u = UnitVector::normalized(u).unwrap();
            let y = reflect(&x, &u).unwrap();
            let z = reflect(&y, &u).unwrap();
            let scale = 1.0 + norm(&x);
            prop_assert!((norm(&y) - norm(&x)).abs() <= 1e-12 * scale);
            for (a, b) in x.iter().zip(&z) {
                prop_assert!((a - b).abs() <= 1e-12 * scale);
            }
        }

        #[test]
        fn rearrangement_is_idempotent_and_order_free(x in prop::collection::vec(-5.0f64..5.0, 0..20)) {
            let r = rearrange_desc_abs(&x);
            prop_assert_eq!(rearrange_desc_abs(&r), r.clone());
            let mut rev = x.clone();
            rev.reverse();
            prop_assert_eq!(rearrange_desc_abs(&rev), r.clone());
            prop_assert!(r.windows(2).all(|w| w[0] >= w[1]));
        }

        #[test]
        fn overlap_is_bracketed(n in 1usize..24, s1 in any::<u64>(), s2 in any::<u64>()) {
            let a = sample_haar_basis(n, Seed(s1)).unwrap();
            let b = sample_haar_basis(n, Seed(s2)).unwrap();
            let m = max_overlap(&a, &b).unwrap();
            prop_assert!(m >= 1.0 / (n as f64).sqrt() - 1e-12);
            prop_assert!(m <= 1.0 + 1e-12);
        }
    }
}
