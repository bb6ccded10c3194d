//! Linear quantile regression for designs with replicated covariate profiles.
//!
//! Two estimators of `q_Y(tau | x) = x'beta(tau)` are provided:
//!
//! * [`wls`]: weighted least squares of the conditional sample quantiles on
//!   the distinct covariate rows, weighted by estimated inverse quantile
//!   variances;
//! * [`kb`]: the check-loss (Koenker–Bassett) estimator over all
//!   observations, solved exactly by a simplex method.
//!
//! [`asymptotics`] compares their limiting covariances and [`sim`] runs the
//! Monte Carlo comparison.

pub mod asymptotics;
pub mod design;
pub mod error;
pub mod kb;
pub mod linalg;
pub mod normal;
pub mod quantile;
pub mod sim;
pub mod sparsity;
pub mod wls;

pub use design::{group_by_covariates, Method, QuantileFit, QuantileLevel, ReplicatedDesign};
pub use error::{Error, Result};
