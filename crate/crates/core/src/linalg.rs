//! Small dense linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, SymmetricEigen};

use crate::{CMatrix, CVector, Error, RMatrix, RVector, Result};

const EIG_EPS: f64 = 1e-15;
const EIG_MAX_ITER: usize = 10_000;

/// All eigenvalues of a real symmetric matrix, unsorted.
pub fn symmetric_eigenvalues(a: &RMatrix) -> Result<RVector> {
    SymmetricEigen::try_new(a.clone(), EIG_EPS, EIG_MAX_ITER)
        .map(|e| e.eigenvalues)
        .ok_or_else(|| Error::Eigen(format!("symmetric {}x{} did not converge", a.nrows(), a.ncols())))
}

/// All eigenvalues of a complex Hermitian matrix, unsorted.
pub fn hermitian_eigenvalues(a: &CMatrix) -> Result<RVector> {
    SymmetricEigen::try_new(a.clone(), EIG_EPS, EIG_MAX_ITER)
        .map(|e| e.eigenvalues)
        .ok_or_else(|| Error::Eigen(format!("hermitian {}x{} did not converge", a.nrows(), a.ncols())))
}

pub fn max_of(x: &RVector) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

pub fn min_of(x: &RVector) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

/// Non-zero spectrum of `U S Uᵀ` (real `U: n×k`, symmetric `S: k×k`) through
/// the `k × k` matrix `Λ^½ Wᵀ S W Λ^½`, where `UᵀU = W Λ Wᵀ`.
///
/// The returned values are the eigenvalues of `U S Uᵀ` on the column space of
/// `U`; the remaining `n - rank(U)` eigenvalues are zero.
pub fn low_rank_symmetric_spectrum(gram: &RMatrix, s: &RMatrix) -> Result<RVector> {
    let eig = SymmetricEigen::try_new(gram.clone(), EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::Eigen("gram matrix did not converge".into()))?;
    let k = gram.nrows();
    let sqrt_l = RVector::from_iterator(k, eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
    let ws = eig.eigenvectors.transpose() * s * &eig.eigenvectors;
    let b = RMatrix::from_fn(k, k, |i, j| sqrt_l[i] * ws[(i, j)] * sqrt_l[j]);
    symmetric_eigenvalues(&b)
}

/// Largest and smallest eigenvalue of the Hermitian `Σ c_i x_i x_iᴴ` of
/// dimension `dim`, without forming it when the rank is below `dim`.
pub fn low_rank_hermitian_extremes(vectors: &[CVector], coeffs: &[f64], dim: usize) -> Result<(f64, f64)> {
    assert_eq!(vectors.len(), coeffs.len());
    let r = vectors.len();
    if r == 0 {
        return Ok((0.0, 0.0));
    }
    if dim <= r {
        let mut k = CMatrix::zeros(dim, dim);
        for (x, &c) in vectors.iter().zip(coeffs) {
            k.gerc(crate::C64::from(c), x, x, crate::C64::from(1.0));
        }
        let ev = hermitian_eigenvalues(&k)?;
        return Ok((max_of(&ev), min_of(&ev)));
    }
    // Gram of the factors, eigen-decomposed, then the r×r core.
    let gram = CMatrix::from_fn(r, r, |i, j| vectors[i].dotc(&vectors[j]));
    let eig = SymmetricEigen::try_new(gram, EIG_EPS, EIG_MAX_ITER)
        .ok_or_else(|| Error::Eigen("factor gram did not converge".into()))?;
    let sqrt_l: Vec<f64> = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).collect();
    let w = &eig.eigenvectors;
    let c = CMatrix::from_diagonal(&CVector::from_iterator(r, coeffs.iter().map(|&c| crate::C64::from(c))));
    let core = w.adjoint() * c * w;
    let b = CMatrix::from_fn(r, r, |i, j| core[(i, j)] * (sqrt_l[i] * sqrt_l[j]));
    let ev = hermitian_eigenvalues(&b)?;
    // dim > r, so at least one eigenvalue of the full matrix is exactly zero.
    Ok((max_of(&ev).max(0.0), min_of(&ev).min(0.0)))
}

/// Solves `A x = b` for symmetric positive definite `A`.
pub fn spd_solve(a: RMatrix, b: &RVector) -> Option<RVector> {
    Cholesky::new(a).map(|c| c.solve(b))
}
