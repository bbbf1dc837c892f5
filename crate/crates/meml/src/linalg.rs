//! Small dense linear-algebra helpers on top of `nalgebra`.
//!
//! Everything here assumes symmetric matrices of modest dimension (d <= 64):
//! plain `DMatrix<f64>` storage, no sparsity, no blocking.

use nalgebra::{DMatrix, DVector};

/// Quadratic form `x' M x`.
pub fn quadratic_form(matrix: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    (matrix * x).dot(x)
}

/// Weighted norm `||x||_M = sqrt(x' M x)`, clamping tiny negative values
/// produced by rounding on near-singular `M`.
pub fn weighted_norm(matrix: &DMatrix<f64>, x: &DVector<f64>) -> f64 {
    quadratic_form(matrix, x).max(0.0).sqrt()
}

/// Applies the Sherman-Morrison identity in place:
/// given `inv = A^-1`, replaces it with `(A + u u')^-1`.
///
/// `A` must be symmetric positive definite, which keeps the denominator
/// `1 + u' A^-1 u` strictly positive.
pub fn sherman_morrison_update(inv: &mut DMatrix<f64>, u: &DVector<f64>) {
    let inv_u = &*inv * u;
    let denom = 1.0 + inv_u.dot(u);
    let scale = 1.0 / denom;
    let d = inv.nrows();
    for i in 0..d {
        for j in 0..d {
            inv[(i, j)] -= scale * inv_u[i] * inv_u[j];
        }
    }
    symmetrize(inv);
}

/// Averages a matrix with its transpose in place. Rank-one updates preserve
/// symmetry exactly in real arithmetic; this keeps floating-point drift from
/// accumulating an asymmetric part.
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let d = m.nrows();
    for i in 0..d {
        for j in (i + 1)..d {
            let avg = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = avg;
            m[(j, i)] = avg;
        }
    }
}

/// Direct inverse of a symmetric positive-definite matrix via Cholesky.
///
/// Panics if the matrix is not numerically positive definite; callers only
/// invert `lambda I + G` with `lambda > 0` and `G` PSD.
pub fn spd_inverse(m: &DMatrix<f64>) -> DMatrix<f64> {
    nalgebra::Cholesky::new(m.clone())
        .expect("matrix must be symmetric positive definite")
        .inverse()
}

/// Inverse square root `M^{-1/2}` of a symmetric positive-definite matrix,
/// via its eigendecomposition. Used when sampling inside ellipsoids.
pub fn symmetric_inverse_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = m.clone().symmetric_eigen();
    let mut scaled = eig.eigenvectors.clone();
    for (c, &value) in eig.eigenvalues.iter().enumerate() {
        let s = 1.0 / value.max(f64::MIN_POSITIVE).sqrt();
        for r in 0..scaled.nrows() {
            scaled[(r, c)] *= s;
        }
    }
    &scaled * eig.eigenvectors.transpose()
}

/// Smallest eigenvalue of a symmetric matrix.
pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    m.clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Largest absolute entry of `a - b`; the distance used by every inverse
/// consistency check in the crate.
pub fn max_abs_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}
