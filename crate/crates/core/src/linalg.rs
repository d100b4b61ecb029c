//! Small dense linear-algebra helpers over nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative asymmetry tolerated before a matrix is rejected as non-symmetric.
pub const SYMMETRY_TOL: f64 = 1e-12;

pub fn is_symmetric(m: &DMatrix<f64>, tol: f64) -> bool {
    if !m.is_square() {
        return false;
    }
    let scale = m.amax().max(1.0);
    (0..m.nrows()).all(|i| (0..i).all(|j| (m[(i, j)] - m[(j, i)]).abs() <= tol * scale))
}

/// (M + Mᵀ)/2
pub fn symmetrize(m: &mut DMatrix<f64>) {
    let n = m.nrows();
    for i in 0..n {
        for j in 0..i {
            let v = 0.5 * (m[(i, j)] + m[(j, i)]);
            m[(i, j)] = v;
            m[(j, i)] = v;
        }
    }
}

/// Cholesky factor of a symmetric positive definite matrix.
pub fn cholesky(m: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    if !m.is_square() {
        return Err(Error::Decomposition(format!(
            "matrix is {}x{}, not square",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::Decomposition("matrix has non-finite entries".into()));
    }
    if !is_symmetric(m, SYMMETRY_TOL) {
        return Err(Error::Decomposition("matrix is not symmetric".into()));
    }
    let chol = Cholesky::new(m.clone())
        .ok_or_else(|| Error::Decomposition("matrix is not positive definite".into()))?;
    if chol.l_dirty().diagonal().iter().any(|d| !(*d > 0.0)) {
        return Err(Error::Decomposition("matrix is not positive definite".into()));
    }
    Ok(chol)
}

pub fn logdet_spd(m: &DMatrix<f64>) -> Result<f64> {
    let chol = cholesky(m)?;
    Ok(2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>())
}

pub fn inverse_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let mut inv = cholesky(m)?.inverse();
    symmetrize(&mut inv);
    Ok(inv)
}

pub fn min_eigenvalue(m: &DMatrix<f64>) -> f64 {
    let mut sym = m.clone();
    symmetrize(&mut sym);
    sym.symmetric_eigenvalues().min()
}

/// aᵀ M a
pub fn quad_form(m: &DMatrix<f64>, a: &DVector<f64>) -> f64 {
    a.dot(&(m * a))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
