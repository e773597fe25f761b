//! Small dense complex Hermitian helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

pub fn real(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

/// `h h†`.
pub fn outer(h: &CVec) -> CMat {
    h * h.adjoint()
}

/// Real part of `x† A x`.
pub fn quad_form(a: &CMat, x: &CVec) -> f64 {
    let ax = a * x;
    x.dotc(&ax).re
}

/// `(A + A†)/2`, removes roundoff asymmetry before eigen-decompositions.
pub fn hermitian_part(a: &CMat) -> CMat {
    (a + a.adjoint()).scale(0.5)
}

/// Eigenvalues of a Hermitian matrix, ascending.
pub fn hermitian_eigenvalues(a: &CMat) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let eig = hermitian_part(a).symmetric_eigen();
    let mut vals: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    vals.sort_by(|x, y| x.total_cmp(y));
    vals
}

pub fn min_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigenvalues(a).first().copied().unwrap_or(0.0)
}

pub fn max_eigenvalue(a: &CMat) -> f64 {
    hermitian_eigenvalues(a).last().copied().unwrap_or(0.0)
}

/// Spectral norm of a Hermitian matrix (largest absolute eigenvalue).
pub fn hermitian_norm2(a: &CMat) -> f64 {
    hermitian_eigenvalues(a)
        .iter()
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Solves `A x = b` for Hermitian positive definite `A` by Cholesky.
pub fn hpd_solve(a: &CMat, b: &CVec) -> Option<CVec> {
    let chol = nalgebra::Cholesky::new(hermitian_part(a))?;
    Some(chol.solve(b))
}

/// Moore-Penrose pseudo-inverse of a Hermitian matrix, discarding eigenvalues
/// below `rel_cutoff * max|eig|`.
pub fn hermitian_pinv(a: &CMat, rel_cutoff: f64) -> CMat {
    let n = a.nrows();
    if n == 0 {
        return CMat::zeros(0, 0);
    }
    let eig = hermitian_part(a).symmetric_eigen();
    let top = eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let cutoff = rel_cutoff * top;
    let mut out = CMat::zeros(n, n);
    for (i, &val) in eig.eigenvalues.iter().enumerate() {
        if val.abs() > cutoff && val.abs() > 0.0 {
            let u = eig.eigenvectors.column(i);
            out += (u * u.adjoint()).scale(1.0 / val);
        }
    }
    out
}

/// Spectral radius of a real square matrix.
pub fn spectral_radius(a: &DMatrix<f64>) -> f64 {
    if a.nrows() == 0 {
        return 0.0;
    }
    a.complex_eigenvalues()
        .iter()
        .fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn frobenius(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Embeds `block` in the trailing corner of an `n x n` zero matrix.
pub fn embed_trailing(block: &CMat, n: usize) -> CMat {
    let off = n - block.nrows();
    let mut out = CMat::zeros(n, n);
    out.view_mut((off, off), (block.nrows(), block.ncols()))
        .copy_from(block);
    out
}
