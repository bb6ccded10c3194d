//! Replicated covariate designs and the fitted-model record.
//!
//! A design has `k` distinct covariate rows `x_i` (intercept included
//! explicitly by the caller) and, for each, a vector of `n_i` replicate
//! responses. Rows are never inferred or modified here.

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::linalg::{self, RANK_TOL};

/// A quantile level strictly inside (0, 1).
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct QuantileLevel(f64);

impl QuantileLevel {
    pub fn new(tau: f64) -> Result<Self> {
        if tau.is_finite() && tau > 0.0 && tau < 1.0 {
            Ok(Self(tau))
        } else {
            Err(Error::InvalidTau(tau))
        }
    }

    #[inline]
    pub fn value(self) -> f64 {
        self.0
    }

    /// `tau * (1 - tau)`, the Bernoulli variance at this level.
    #[inline]
    pub fn bernoulli_variance(self) -> f64 {
        self.0 * (1.0 - self.0)
    }
}

impl fmt::Display for QuantileLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// k distinct covariate profiles, each with its replicate responses.
#[derive(Debug, Clone, PartialEq)]
pub struct ReplicatedDesign {
    rows: Vec<Vec<f64>>,
    responses: Vec<Vec<f64>>,
}

impl ReplicatedDesign {
    /// Builds a design, checking shape and finiteness. Identifiability is
    /// checked separately by [`ReplicatedDesign::validate`].
    pub fn new(rows: Vec<Vec<f64>>, responses: Vec<Vec<f64>>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Empty);
        }
        if rows.len() != responses.len() {
            return Err(Error::InvalidArgument(format!(
                "{} covariate rows but {} response groups",
                rows.len(),
                responses.len()
            )));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        for row in &rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "covariates" });
            }
        }
        for y in &responses {
            if y.is_empty() {
                return Err(Error::Empty);
            }
            if y.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { what: "responses" });
            }
        }
        Ok(Self { rows, responses })
    }

    /// Checks identifiability: `k >= p+1`, full column rank (singular values
    /// above 1e-10 of the largest) and, with `require_replicates`, `n_i >= 2`.
    pub fn validate(&self, require_replicates: bool) -> Result<&Self> {
        let k = self.k();
        let cols = self.dim();
        if k < cols {
            return Err(Error::TooFewGroups {
                groups: k,
                params: cols,
            });
        }
        let rank = linalg::numerical_rank(&self.design_matrix(), RANK_TOL);
        if rank < cols {
            return Err(Error::RankDeficient { rank, cols });
        }
        if require_replicates {
            if let Some((group, y)) = self.responses.iter().enumerate().find(|(_, y)| y.len() < 2) {
                return Err(Error::NoReplicates {
                    group,
                    count: y.len(),
                });
            }
        }
        Ok(self)
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn responses(&self) -> &[Vec<f64>] {
        &self.responses
    }

    /// Number of distinct covariate profiles.
    pub fn k(&self) -> usize {
        self.rows.len()
    }

    /// Coefficient dimension p+1.
    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }

    pub fn group_sizes(&self) -> Vec<usize> {
        self.responses.iter().map(Vec::len).collect()
    }

    pub fn total(&self) -> usize {
        self.responses.iter().map(Vec::len).sum()
    }

    /// The k x (p+1) matrix X with rows x_i'.
    pub fn design_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.k(), self.dim(), |i, j| self.rows[i][j])
    }

    /// Same covariates, responses replaced by `f(group, response)`.
    pub fn map_responses(&self, mut f: impl FnMut(usize, f64) -> f64) -> Self {
        let responses = self
            .responses
            .iter()
            .enumerate()
            .map(|(i, y)| y.iter().map(|&v| f(i, v)).collect())
            .collect();
        Self {
            rows: self.rows.clone(),
            responses,
        }
    }

    /// Long format: one `(x_i, y_ij)` pair per observation, group-major.
    pub fn to_long(&self) -> Vec<(Vec<f64>, f64)> {
        self.rows
            .iter()
            .zip(&self.responses)
            .flat_map(|(x, ys)| ys.iter().map(move |&y| (x.clone(), y)))
            .collect()
    }
}

/// Merges observations with bit-identical covariate vectors into groups.
///
/// Groups appear in first-appearance order and responses keep input order.
pub fn group_by_covariates(flat: &[(Vec<f64>, f64)]) -> Result<ReplicatedDesign> {
    if flat.is_empty() {
        return Err(Error::Empty);
    }
    let mut index: std::collections::HashMap<Vec<u64>, usize> = std::collections::HashMap::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut responses: Vec<Vec<f64>> = Vec::new();
    for (x, y) in flat {
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite { what: "covariates" });
        }
        if !y.is_finite() {
            return Err(Error::NonFinite { what: "responses" });
        }
        let key: Vec<u64> = x.iter().map(|v| v.to_bits()).collect();
        let g = *index.entry(key).or_insert_with(|| {
            rows.push(x.clone());
            responses.push(Vec::new());
            rows.len() - 1
        });
        responses[g].push(*y);
    }
    ReplicatedDesign::new(rows, responses)
}

/// Which estimator produced a fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Wls,
    Kb,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Wls => "wls",
            Method::Kb => "kb",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Coefficients of a fitted linear quantile model with their covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantileFit {
    pub tau: QuantileLevel,
    pub beta: Vec<f64>,
    /// Finite-sample covariance of `beta`; `None` when it could not be estimated.
    pub covariance: Option<DMatrix<f64>>,
    pub method: Method,
}

impl QuantileFit {
    /// `sqrt` of the covariance diagonal, NaN where no covariance is available.
    pub fn std_errors(&self) -> Vec<f64> {
        match &self.covariance {
            Some(c) => (0..c.nrows()).map(|j| c[(j, j)].max(0.0).sqrt()).collect(),
            None => vec![f64::NAN; self.beta.len()],
        }
    }
}
