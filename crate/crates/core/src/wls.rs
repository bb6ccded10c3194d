//! Weighted least squares fit of the linear quantile model to the vector of
//! conditional sample quantiles.

use nalgebra::{DMatrix, DVector};

use crate::design::{Method, QuantileFit, QuantileLevel, ReplicatedDesign};
use crate::error::{Error, Result};
use crate::linalg;
use crate::quantile::sample_quantile;
use crate::sparsity::{
    estimate_sparsity, weight_matrix, SparsityEstimates, SparsityMethod, VarianceForm,
    WeightMatrix, DEFAULT_ALPHA,
};

/// Conditional sample quantiles, one per covariate group.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileVector {
    pub tau: QuantileLevel,
    pub q_hat: Vec<f64>,
}

pub fn conditional_quantiles(
    design: &ReplicatedDesign,
    tau: QuantileLevel,
) -> Result<QuantileVector> {
    let q_hat = design
        .responses()
        .iter()
        .map(|y| sample_quantile(y, tau))
        .collect::<Result<Vec<_>>>()?;
    Ok(QuantileVector { tau, q_hat })
}

/// Solves `min sum_i (q_i - x_i'b)^2 / omega_i` by Householder QR of the
/// rescaled design `Omega^{-1/2} X`; covariance is `(X' Omega^{-1} X)^{-1}`.
pub fn wls_fit(
    design: &ReplicatedDesign,
    quantiles: &QuantileVector,
    weights: &WeightMatrix,
) -> Result<QuantileFit> {
    let k = design.k();
    if quantiles.q_hat.len() != k || weights.diag().len() != k {
        return Err(Error::InvalidArgument(format!(
            "{} groups, {} quantiles, {} weights",
            k,
            quantiles.q_hat.len(),
            weights.diag().len()
        )));
    }
    let p = design.dim();
    if k < p {
        return Err(Error::TooFewGroups {
            groups: k,
            params: p,
        });
    }
    let scale: Vec<f64> = weights.diag().iter().map(|w| 1.0 / w.sqrt()).collect();
    let a = DMatrix::from_fn(k, p, |i, j| design.rows()[i][j] * scale[i]);
    let b = DVector::from_fn(k, |i, _| quantiles.q_hat[i] * scale[i]);

    let qr = a.qr();
    let r = qr.r();
    let rmax = r.diagonal().amax();
    if rmax.is_nan() || rmax <= 0.0 || r.diagonal().iter().any(|d| d.abs() <= 1e-12 * rmax) {
        return Err(Error::SingularSystem);
    }
    let qtb = qr.q().transpose() * b;
    let beta = r
        .solve_upper_triangular(&qtb)
        .ok_or(Error::SingularSystem)?;
    let r_inv = r
        .solve_upper_triangular(&DMatrix::identity(p, p))
        .ok_or(Error::SingularSystem)?;
    let covariance = linalg::symmetrize(&(&r_inv * r_inv.transpose()));

    Ok(QuantileFit {
        tau: quantiles.tau,
        beta: beta.iter().cloned().collect(),
        covariance: Some(covariance),
        method: Method::Wls,
    })
}

/// Settings for the estimated-weight WLS fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WlsOptions {
    pub sparsity: SparsityMethod,
    pub alpha: f64,
    pub form: VarianceForm,
}

impl Default for WlsOptions {
    fn default() -> Self {
        Self {
            sparsity: SparsityMethod::SiddiquiHs,
            alpha: DEFAULT_ALPHA,
            form: VarianceForm::Squared,
        }
    }
}

/// A WLS fit together with the intermediate quantities it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct WlsFit {
    pub fit: QuantileFit,
    pub quantiles: QuantileVector,
    pub sparsity: SparsityEstimates,
    pub weights: WeightMatrix,
}

/// Conditional quantiles, sparsity estimates, variance weights, then [`wls_fit`].
pub fn wls_pipeline(
    design: &ReplicatedDesign,
    tau: QuantileLevel,
    opts: &WlsOptions,
) -> Result<WlsFit> {
    design.validate(true)?;
    let quantiles = conditional_quantiles(design, tau)?;
    let sparsity = estimate_sparsity(design, tau, opts.sparsity, opts.alpha)?;
    let weights = weight_matrix(design, tau, &sparsity, opts.form)?;
    let fit = wls_fit(design, &quantiles, &weights)?;
    Ok(WlsFit {
        fit,
        quantiles,
        sparsity,
        weights,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::normal;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tau(t: f64) -> QuantileLevel {
        QuantileLevel::new(t).unwrap()
    }

    fn line_design(xs: &[f64], ns: usize) -> ReplicatedDesign {
        let rows = xs.iter().map(|&x| vec![1.0, x]).collect();
        let responses = xs
            .iter()
            .map(|_| (0..ns).map(|j| j as f64).collect())
            .collect();
        ReplicatedDesign::new(rows, responses).unwrap()
    }

    fn qv(t: f64, q: &[f64]) -> QuantileVector {
        QuantileVector {
            tau: tau(t),
            q_hat: q.to_vec(),
        }
    }

    #[test]
    fn conditional_quantiles_two_groups() {
        let d = ReplicatedDesign::new(
            vec![vec![1.0, 0.0], vec![1.0, 1.0]],
            vec![vec![1.0, 2.0, 3.0], vec![10.0, 30.0, 20.0]],
        )
        .unwrap();
        assert_eq!(
            conditional_quantiles(&d, tau(0.5)).unwrap().q_hat,
            vec![2.0, 20.0]
        );
        let one = ReplicatedDesign::new(vec![vec![1.0]], vec![vec![4.0, 5.0]]).unwrap();
        assert_eq!(
            conditional_quantiles(&one, tau(0.5)).unwrap().q_hat.len(),
            1
        );
    }

    #[test]
    fn conditional_quantiles_large_normal_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mus = [-1.0, 0.5, 3.0];
        let t = tau(0.3);
        let responses: Vec<Vec<f64>> = mus
            .iter()
            .map(|m| {
                (0..100_000)
                    .map(|_| m + normal::quantile(rng.random_range(1e-12..1.0)))
                    .collect()
            })
            .collect();
        let d =
            ReplicatedDesign::new(mus.iter().map(|&m| vec![1.0, m]).collect(), responses).unwrap();
        let q = conditional_quantiles(&d, t).unwrap();
        for (qi, m) in q.q_hat.iter().zip(mus) {
            assert!((qi - (m + normal::quantile(0.3))).abs() < 0.02);
        }
    }

    #[test]
    fn saturated_design_interpolates() {
        let d = line_design(&[0.0, 1.0], 3);
        for w in [[1.0, 1.0], [0.01, 7.0], [3.0, 1e-4]] {
            let fit = wls_fit(
                &d,
                &qv(0.5, &[1.0, 1.5]),
                &WeightMatrix::new(w.to_vec()).unwrap(),
            )
            .unwrap();
            assert!((fit.beta[0] - 1.0).abs() < 1e-14);
            assert!((fit.beta[1] - 0.5).abs() < 1e-14);
        }
    }

    #[test]
    fn equal_weights_match_normal_equations() {
        let xs = [0.3, 1.1, 2.0, 2.2, 4.5];
        let q = [1.0, 1.9, 2.1, 3.3, 4.0];
        let d = line_design(&xs, 2);
        let fit = wls_fit(&d, &qv(0.5, &q), &WeightMatrix::new(vec![0.37; 5]).unwrap()).unwrap();
        // closed-form simple regression
        let n = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / n;
        let my = q.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(&q).map(|(x, y)| (x - mx) * (y - my)).sum();
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        let slope = sxy / sxx;
        assert!((fit.beta[1] - slope).abs() < 1e-12);
        assert!((fit.beta[0] - (my - slope * mx)).abs() < 1e-12);
    }

    #[test]
    fn weighted_residuals_orthogonal() {
        let xs = [0.5, 1.0, 2.5, 3.0, 7.0, 8.0];
        let q = [0.2, 1.7, 1.1, 3.9, 6.0, 9.5];
        let w = [0.3, 0.01, 2.0, 0.7, 1.5, 0.05];
        let d = line_design(&xs, 2);
        let fit = wls_fit(&d, &qv(0.4, &q), &WeightMatrix::new(w.to_vec()).unwrap()).unwrap();
        for col in 0..2 {
            let mut dot = 0.0;
            let mut mag = 0.0;
            for i in 0..6 {
                let xij = d.rows()[i][col];
                let r = q[i] - (fit.beta[0] + fit.beta[1] * xs[i]);
                dot += xij * r / w[i];
                mag += (xij * q[i] / w[i]).abs();
            }
            assert!(dot.abs() <= 1e-8 * mag, "{dot}");
        }
    }

    #[test]
    fn weight_scale_changes_only_covariance() {
        let d = line_design(&[0.0, 1.0, 3.0, 4.0], 2);
        let q = qv(0.6, &[0.0, 2.0, 2.5, 5.0]);
        let w = WeightMatrix::new(vec![1.0, 0.5, 2.0, 0.25]).unwrap();
        let a = wls_fit(&d, &q, &w).unwrap();
        let b = wls_fit(&d, &q, &w.scaled(9.0).unwrap()).unwrap();
        for j in 0..2 {
            assert!((a.beta[j] - b.beta[j]).abs() <= 1e-12 * (1.0 + a.beta[j].abs()));
        }
        let (ca, cb) = (a.covariance.unwrap(), b.covariance.unwrap());
        assert!((cb - ca * 9.0).amax() < 1e-12);
    }

    #[test]
    fn covariance_is_inverse_weighted_cross_product() {
        let xs = [0.0, 1.0, 2.0, 5.0];
        let w = [0.2, 0.4, 0.1, 1.0];
        let d = line_design(&xs, 2);
        let fit = wls_fit(
            &d,
            &qv(0.5, &[0.0, 1.0, 1.0, 3.0]),
            &WeightMatrix::new(w.to_vec()).unwrap(),
        )
        .unwrap();
        let x = d.design_matrix();
        let winv = DMatrix::from_diagonal(&DVector::from_iterator(4, w.iter().map(|v| 1.0 / v)));
        let xtwx = x.transpose() * winv * &x;
        let prod = xtwx * fit.covariance.as_ref().unwrap();
        assert!((prod - DMatrix::identity(2, 2)).amax() < 1e-12);
        let se = fit.std_errors();
        let c = fit.covariance.unwrap();
        assert_eq!(se[1], c[(1, 1)].sqrt());
    }

    #[test]
    fn collinear_design_is_singular() {
        let d = ReplicatedDesign::new(
            vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0]],
            vec![vec![0.0, 1.0]; 3],
        )
        .unwrap();
        let r = wls_fit(
            &d,
            &qv(0.5, &[1.0, 2.0, 3.0]),
            &WeightMatrix::new(vec![1.0; 3]).unwrap(),
        );
        assert_eq!(r, Err(Error::SingularSystem));
    }

    #[test]
    fn pipeline_requires_replicates() {
        let d = ReplicatedDesign::new(
            (0..5).map(|i| vec![1.0, i as f64]).collect(),
            vec![vec![1.0]; 5],
        )
        .unwrap();
        let r = wls_pipeline(&d, tau(0.5), &WlsOptions::default());
        assert_eq!(r, Err(Error::NoReplicates { group: 0, count: 1 }));
    }

    #[test]
    fn pipeline_affine_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        let rows: Vec<Vec<f64>> = (0..6).map(|i| vec![1.0, 0.5 + i as f64]).collect();
        let responses = rows
            .iter()
            .map(|x| {
                (0..60)
                    .map(|_| 1.0 + 0.5 * x[1] + x[1] * rng.random::<f64>())
                    .collect()
            })
            .collect();
        let d = ReplicatedDesign::new(rows, responses).unwrap();
        let (a, b) = (2.5, -7.0);
        let t = tau(0.35);
        let base = wls_pipeline(&d, t, &WlsOptions::default()).unwrap();
        let moved = wls_pipeline(
            &d.map_responses(|_, y| a * y + b),
            t,
            &WlsOptions::default(),
        )
        .unwrap();
        assert_eq!(base.sparsity.bandwidths, moved.sparsity.bandwidths);
        let expect = [a * base.fit.beta[0] + b, a * base.fit.beta[1]];
        for j in 0..2 {
            assert!((moved.fit.beta[j] - expect[j]).abs() <= 1e-10 * (1.0 + expect[j].abs()));
        }
    }

    #[test]
    fn pipeline_noiseless_line_with_degenerate_groups() {
        let rows: Vec<Vec<f64>> = (0..4).map(|i| vec![1.0, i as f64]).collect();
        let responses = rows.iter().map(|x| vec![2.0 + 3.0 * x[1]; 5]).collect();
        let d = ReplicatedDesign::new(rows, responses).unwrap();
        let fit = wls_pipeline(&d, tau(0.5), &WlsOptions::default()).unwrap();
        assert!(fit.sparsity.any_degenerate());
        assert!((fit.fit.beta[0] - 2.0).abs() < 1e-9);
        assert!((fit.fit.beta[1] - 3.0).abs() < 1e-9);
    }
}
