//! Moment matrices and limiting covariances of both estimators, plus the
//! numerical Löwner-order comparison between them.
//!
//! With `f_i` the density of group `i` at its `tau`-quantile:
//!
//! ```text
//! D0 = n^-1 sum n_i x_i x_i'
//! D1 = n^-1 sum n_i f_i x_i x_i'
//! D2 = n^-1 sum n_i f_i^2 x_i x_i'
//! cov_kb  = tau(1-tau) D1^-1 D0 D1^-1
//! cov_wls = tau(1-tau) D2^-1
//! ```
//!
//! `cov_kb - cov_wls` is positive semidefinite because
//! `D1 D0^-1 D1 = n^-1 A' P_B A <= n^-1 A'A = D2`, where `B = diag(sqrt n_i) X`,
//! `A = diag(sqrt n_i f_i) X` and `P_B` projects onto the columns of `B`.

use nalgebra::{DMatrix, DVector};

use crate::design::QuantileLevel;
use crate::error::{Error, Result};
use crate::linalg::{self, min_max_eigenvalue, spd_inverse, symmetrize};

#[derive(Debug, Clone, PartialEq)]
pub struct MomentMatrices {
    pub d0: DMatrix<f64>,
    pub d1: DMatrix<f64>,
    pub d2: DMatrix<f64>,
    pub n: usize,
}

pub fn moment_matrices(x: &DMatrix<f64>, counts: &[usize], f: &[f64]) -> Result<MomentMatrices> {
    let (k, p) = x.shape();
    if counts.len() != k || f.len() != k {
        return Err(Error::InvalidArgument(format!(
            "{} rows, {} counts, {} densities",
            k,
            counts.len(),
            f.len()
        )));
    }
    if f.iter().any(|v| !v.is_finite() || *v <= 0.0) {
        return Err(Error::InvalidArgument(
            "densities must be finite and positive".into(),
        ));
    }
    let n: usize = counts.iter().sum();
    if n == 0 {
        return Err(Error::Empty);
    }
    let mut d0 = DMatrix::zeros(p, p);
    let mut d1 = DMatrix::zeros(p, p);
    let mut d2 = DMatrix::zeros(p, p);
    for i in 0..k {
        let xi = x.row(i).transpose();
        let outer = &xi * xi.transpose();
        let w = counts[i] as f64 / n as f64;
        d0 += &outer * w;
        d1 += &outer * (w * f[i]);
        d2 += &outer * (w * f[i] * f[i]);
    }
    let m = MomentMatrices {
        d0: symmetrize(&d0),
        d1: symmetrize(&d1),
        d2: symmetrize(&d2),
        n,
    };
    if !linalg::is_positive_definite(&m.d0) || !linalg::is_positive_definite(&m.d2) {
        return Err(Error::NotPositiveDefinite);
    }
    Ok(m)
}

/// Limiting covariance `tau(1-tau) D1^-1 D0 D1^-1` of the check-loss estimator.
pub fn covariance_kb(m: &MomentMatrices, tau: QuantileLevel) -> Result<DMatrix<f64>> {
    let d1_inv = linalg::inverse(&m.d1)?;
    Ok(symmetrize(&(&d1_inv * &m.d0 * &d1_inv)) * tau.bernoulli_variance())
}

/// Limiting covariance `tau(1-tau) D2^-1` of the WLS estimator.
pub fn covariance_wls(m: &MomentMatrices, tau: QuantileLevel) -> Result<DMatrix<f64>> {
    let d2_inv = spd_inverse(&m.d2).map_err(|_| Error::SingularSystem)?;
    Ok(d2_inv * tau.bernoulli_variance())
}

/// `D2 - D1 D0^-1 D1`, symmetrized.
pub fn loewner_gap(m: &MomentMatrices) -> Result<DMatrix<f64>> {
    let d0_inv = spd_inverse(&m.d0)?;
    Ok(symmetrize(&(&m.d2 - &m.d1 * d0_inv * &m.d1)))
}

/// Smallest eigenvalue of [`loewner_gap`]; non-negative in exact arithmetic.
pub fn loewner_check(m: &MomentMatrices) -> Result<f64> {
    Ok(min_max_eigenvalue(&loewner_gap(m)?).0)
}

/// True iff every `(1, z_i)'` is an eigenvector of `c` to relative tolerance 1e-8.
///
/// For points in general position with `k >= p + 2` this holds only when
/// `c` is a multiple of the identity.
pub fn lemma1_probe(points: &[Vec<f64>], c: &DMatrix<f64>) -> bool {
    let dim = c.nrows();
    let cnorm = c.norm();
    points.iter().all(|z| {
        let v = DVector::from_iterator(dim, std::iter::once(1.0).chain(z.iter().cloned()));
        let cv = c * &v;
        // best eigenvalue estimate is the Rayleigh quotient
        let lambda = v.dot(&cv) / v.dot(&v);
        let resid = cv - &v * lambda;
        resid.norm() <= 1e-8 * cnorm.max(f64::MIN_POSITIVE) * v.norm()
    })
}

/// Both limiting covariances and their Löwner gap for a single design.
#[derive(Debug, Clone, PartialEq)]
pub struct AsymptoticReport {
    pub tau: QuantileLevel,
    pub moments: MomentMatrices,
    pub cov_kb: DMatrix<f64>,
    pub cov_wls: DMatrix<f64>,
    /// Smallest eigenvalue of `D2 - D1 D0^-1 D1`.
    pub loewner_gap_min_eig: f64,
    /// Smallest eigenvalue of `cov_kb - cov_wls`.
    pub covariance_gap_min_eig: f64,
    pub equal_sparsity: bool,
}

pub fn asymptotic_report(
    x: &DMatrix<f64>,
    counts: &[usize],
    f: &[f64],
    tau: QuantileLevel,
) -> Result<AsymptoticReport> {
    let moments = moment_matrices(x, counts, f)?;
    let cov_kb = covariance_kb(&moments, tau)?;
    let cov_wls = covariance_wls(&moments, tau)?;
    let loewner_gap_min_eig = loewner_check(&moments)?;
    let covariance_gap_min_eig = min_max_eigenvalue(&(&cov_kb - &cov_wls)).0;
    let equal_sparsity = f.iter().all(|v| *v == f[0]);
    Ok(AsymptoticReport {
        tau,
        moments,
        cov_kb,
        cov_wls,
        loewner_gap_min_eig,
        covariance_gap_min_eig,
        equal_sparsity,
    })
}
