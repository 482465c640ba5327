//! Column-major dense products on raw slices.

/// `c = a^T b` with `a` a `k x m` and `b` a `k x cols` column-major matrix.
pub(crate) fn gemm_tn(m: usize, k: usize, cols: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert!(a.len() >= k * m && b.len() >= k * cols && c.len() >= m * cols);
    // SAFETY: the slice lengths cover every index addressed by the strides.
    unsafe {
        matrixmultiply::dgemm(
            m, k, cols, 1.0,
            a.as_ptr(), k as isize, 1,
            b.as_ptr(), 1, k as isize,
            0.0,
            c.as_mut_ptr(), 1, m as isize,
        );
    }
}

/// `c = a b` with `a` an `m x k` and `b` a `k x cols` column-major matrix.
pub(crate) fn gemm_nn(m: usize, k: usize, cols: usize, a: &[f64], b: &[f64], c: &mut [f64]) {
    debug_assert!(a.len() >= k * m && b.len() >= k * cols && c.len() >= m * cols);
    // SAFETY: as above.
    unsafe {
        matrixmultiply::dgemm(
            m, k, cols, 1.0,
            a.as_ptr(), 1, m as isize,
            b.as_ptr(), 1, k as isize,
            0.0,
            c.as_mut_ptr(), 1, m as isize,
        );
    }
}
