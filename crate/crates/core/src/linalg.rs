//! Small dense linear-algebra helpers over `nalgebra`.

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative singular-value cutoff used for numerical rank.
pub const RANK_TOL: f64 = 1e-10;

/// Numerical rank: singular values above `tol * sigma_max`.
pub fn numerical_rank(m: &DMatrix<f64>, tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    let sv = m.singular_values();
    let max = sv.iter().cloned().fold(0.0_f64, f64::max);
    if max == 0.0 {
        return 0;
    }
    sv.iter().filter(|&&s| s > tol * max).count()
}

pub fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues of the symmetric part of `m`, ascending.
pub fn sym_eigenvalues(m: &DMatrix<f64>) -> Vec<f64> {
    let mut ev: Vec<f64> = SymmetricEigen::new(symmetrize(m))
        .eigenvalues
        .iter()
        .cloned()
        .collect();
    ev.sort_by(|a, b| a.total_cmp(b));
    ev
}

pub fn min_max_eigenvalue(m: &DMatrix<f64>) -> (f64, f64) {
    let ev = sym_eigenvalues(m);
    (ev[0], ev[ev.len() - 1])
}

/// Largest absolute asymmetry relative to the largest absolute entry.
pub fn relative_asymmetry(m: &DMatrix<f64>) -> f64 {
    let scale = m.amax();
    if scale == 0.0 {
        return 0.0;
    }
    (m - m.transpose()).amax() / scale
}

/// `D m D` with `D = diag(m_ii^{-1/2})`, together with the diagonal of `D`.
///
/// Conditioning checks run on the scaled matrix so that covariates on very
/// different scales (an intercept next to calendar years, say) are not
/// mistaken for near-singularity.
pub fn equilibrate(m: &DMatrix<f64>) -> Option<(DMatrix<f64>, Vec<f64>)> {
    let d: Vec<f64> = (0..m.nrows()).map(|i| m[(i, i)]).collect();
    if d.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return None;
    }
    let d: Vec<f64> = d.iter().map(|v| 1.0 / v.sqrt()).collect();
    Some((
        DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] * d[r] * d[c]),
        d,
    ))
}

/// True iff the symmetric part of `m` is positive definite after equilibration.
pub fn is_positive_definite(m: &DMatrix<f64>) -> bool {
    match equilibrate(&symmetrize(m)) {
        Some((scaled, _)) => {
            let (lo, hi) = min_max_eigenvalue(&scaled);
            hi > 0.0 && lo > 1e-12 * hi
        }
        None => false,
    }
}

/// Inverse of a symmetric positive definite matrix via Cholesky of the
/// equilibrated matrix.
pub fn spd_inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let sym = symmetrize(m);
    if !is_positive_definite(&sym) {
        return Err(Error::NotPositiveDefinite);
    }
    let (scaled, d) = equilibrate(&sym).ok_or(Error::NotPositiveDefinite)?;
    let inv = scaled
        .cholesky()
        .ok_or(Error::NotPositiveDefinite)?
        .inverse();
    Ok(symmetrize(&DMatrix::from_fn(
        m.nrows(),
        m.ncols(),
        |r, c| inv[(r, c)] * d[r] * d[c],
    )))
}

/// General square inverse with a conditioning check on the column-scaled matrix.
pub fn inverse(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let norms: Vec<f64> = m.column_iter().map(|c| c.norm()).collect();
    if norms.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::SingularSystem);
    }
    let scaled = DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| m[(r, c)] / norms[c]);
    if numerical_rank(&scaled, RANK_TOL) < m.ncols() {
        return Err(Error::SingularSystem);
    }
    let inv = scaled.try_inverse().ok_or(Error::SingularSystem)?;
    // m = scaled * diag(norms), so m^-1 = diag(1/norms) * scaled^-1
    Ok(DMatrix::from_fn(m.nrows(), m.ncols(), |r, c| {
        inv[(r, c)] / norms[r]
    }))
}
