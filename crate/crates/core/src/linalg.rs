//! Small dense linear-algebra helpers for the covariate blocks.
//!
//! Covariate cross-product matrices are tiny (one row/column per covariate),
//! so a plain Cholesky factorization is used everywhere. It is hand-rolled
//! rather than delegated so that a failure can name the offending column.

use nalgebra::DMatrix;

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
///
/// On failure returns the zero-based index of the first column whose pivot is
/// not acceptably positive, which for Gram matrices identifies a column that
/// is linearly dependent on its predecessors.
pub fn cholesky_named(a: &DMatrix<f64>) -> Result<DMatrix<f64>, usize> {
    let m = a.nrows();
    assert_eq!(m, a.ncols());
    let max_diag = (0..m).map(|k| a[(k, k)].abs()).fold(0.0f64, f64::max);
    let floor = 1e-12 * max_diag.max(f64::MIN_POSITIVE);
    let mut l = DMatrix::zeros(m, m);
    for k in 0..m {
        let mut pivot = a[(k, k)];
        for j in 0..k {
            pivot -= l[(k, j)] * l[(k, j)];
        }
        if !(pivot > floor) {
            return Err(k);
        }
        let lkk = pivot.sqrt();
        l[(k, k)] = lkk;
        for i in (k + 1)..m {
            let mut v = a[(i, k)];
            for j in 0..k {
                v -= l[(i, j)] * l[(k, j)];
            }
            l[(i, k)] = v / lkk;
        }
    }
    Ok(l)
}

/// log det(A) from the lower Cholesky factor of A.
pub fn logdet_from_cholesky(l: &DMatrix<f64>) -> f64 {
    2.0 * (0..l.nrows()).map(|k| l[(k, k)].ln()).sum::<f64>()
}

/// Solves L x = b in place for lower-triangular L.
pub fn forward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let m = l.nrows();
    for i in 0..m {
        let mut v = b[i];
        for j in 0..i {
            v -= l[(i, j)] * b[j];
        }
        b[i] = v / l[(i, i)];
    }
}

/// Solves L' x = b in place for lower-triangular L.
pub fn backward_solve(l: &DMatrix<f64>, b: &mut [f64]) {
    let m = l.nrows();
    for i in (0..m).rev() {
        let mut v = b[i];
        for j in (i + 1)..m {
            v -= l[(j, i)] * b[j];
        }
        b[i] = v / l[(i, i)];
    }
}

/// Solves (L L') x = b given the lower Cholesky factor L.
pub fn cholesky_solve(l: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let mut x = b.to_vec();
    forward_solve(l, &mut x);
    backward_solve(l, &mut x);
    x
}

/// Solves (L L') X = B column by column.
pub fn cholesky_solve_matrix(l: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = b.clone();
    for mut col in out.column_iter_mut() {
        let mut x: Vec<f64> = col.iter().copied().collect();
        forward_solve(l, &mut x);
        backward_solve(l, &mut x);
        for (dst, src) in col.iter_mut().zip(&x) {
            *dst = *src;
        }
    }
    out
}

/// Explicit inverse (L L')^{-1}; only used for the small covariate blocks.
pub fn cholesky_inverse(l: &DMatrix<f64>) -> DMatrix<f64> {
    let m = l.nrows();
    cholesky_solve_matrix(l, &DMatrix::identity(m, m))
}

/// Dot product of a matrix column with a slice.
pub fn column_dot(a: &DMatrix<f64>, col: usize, v: &[f64]) -> f64 {
    a.column(col).iter().zip(v).map(|(x, y)| x * y).sum()
}

/// Adds `scale` times a matrix column into an accumulator slice.
pub fn column_axpy(a: &DMatrix<f64>, col: usize, scale: f64, acc: &mut [f64]) {
    for (dst, x) in acc.iter_mut().zip(a.column(col).iter()) {
        *dst += scale * x;
    }
}

/// A' v for a slice v.
pub fn tr_mul_vec(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    (0..a.ncols()).map(|j| column_dot(a, j, v)).collect()
}

/// A v for a slice v.
pub fn mul_vec(a: &DMatrix<f64>, v: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.nrows()];
    for j in 0..a.ncols() {
        column_axpy(a, j, v[j], &mut out);
    }
    out
}
