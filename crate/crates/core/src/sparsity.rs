//! Sparsity `s(tau) = 1 / f(F^-1(tau))` estimation and quantile-variance weights.
//!
//! Two estimators are provided: the Siddiqui finite difference of sample
//! quantiles with the Gaussian-model Hall–Sheather bandwidth, and a
//! Gaussian-kernel density plug-in with Silverman's rule-of-thumb bandwidth.
//! Both floor their output at `1e-8 * range(y)` (or `1e-8` for a constant
//! sample) so that the derived weights stay finite.

use crate::design::{QuantileLevel, ReplicatedDesign};
use crate::error::{Error, Result};
use crate::normal;
use crate::quantile::{sorted_copy, sorted_quantile};

/// Confidence parameter of the Hall–Sheather rule.
pub const DEFAULT_ALPHA: f64 = 0.05;

const FLOOR_FACTOR: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum SparsityMethod {
    #[default]
    SiddiquiHs,
    KernelPlugin,
}

impl SparsityMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SparsityMethod::SiddiquiHs => "siddiqui",
            SparsityMethod::KernelPlugin => "kernel",
        }
    }
}

/// How the sparsity enters the quantile variance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum VarianceForm {
    /// `tau (1 - tau) s^2 / n_i`, the asymptotic variance of a sample quantile.
    #[default]
    Squared,
    /// `tau (1 - tau) s / n_i`, the literal simulation-section plug-in.
    Unsquared,
}

/// A single sparsity estimate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SparsityValue {
    pub value: f64,
    /// The bandwidth used (quantile-scale for Siddiqui, response-scale for the kernel).
    pub bandwidth: f64,
    /// The raw estimate was non-positive and the floor was returned instead.
    pub degenerate: bool,
}

/// Per-group sparsity estimates for one quantile level.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsityEstimates {
    pub tau: QuantileLevel,
    pub s_hat: Vec<f64>,
    pub bandwidths: Vec<f64>,
    pub degenerate: Vec<bool>,
    pub method: SparsityMethod,
}

impl SparsityEstimates {
    /// Density values `1 / s_i` at the conditional quantiles.
    pub fn densities(&self) -> Vec<f64> {
        self.s_hat.iter().map(|s| 1.0 / s).collect()
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

/// Diagonal of the quantile covariance `Omega`, entry i = `sigma_i^2(tau)`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    diag: Vec<f64>,
}

impl WeightMatrix {
    pub fn new(diag: Vec<f64>) -> Result<Self> {
        if diag.is_empty() {
            return Err(Error::Empty);
        }
        if diag.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(Error::InvalidArgument(
                "variances must be finite and positive".into(),
            ));
        }
        Ok(Self { diag })
    }

    pub fn diag(&self) -> &[f64] {
        &self.diag
    }

    /// Every variance multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.diag.iter().map(|v| v * c).collect())
    }
}

fn sparsity_floor(sorted: &[f64]) -> f64 {
    let range = sorted[sorted.len() - 1] - sorted[0];
    FLOOR_FACTOR * if range > 0.0 { range } else { 1.0 }
}

/// Unclamped Gaussian-model Hall–Sheather bandwidth
/// `n^{-1/3} z^{2/3} [1.5 phi(z_tau)^2 / (2 z_tau^2 + 1)]^{1/3}` with
/// `Phi(z) = 1 - alpha/2` and `z_tau = Phi^{-1}(tau)`.
pub fn hall_sheather_raw(n: usize, tau: QuantileLevel, alpha: f64) -> f64 {
    let z_alpha = normal::quantile(1.0 - alpha / 2.0);
    let z_tau = normal::quantile(tau.value());
    let phi = normal::pdf(z_tau);
    let shape = 1.5 * phi * phi / (2.0 * z_tau * z_tau + 1.0);
    (n as f64).powf(-1.0 / 3.0) * z_alpha.powf(2.0 / 3.0) * shape.cbrt()
}

/// Hall–Sheather bandwidth clamped so that `tau +- h` stays within
/// `[1/(2n), 1 - 1/(2n)]`, then floored at `1/(2n)` and capped at
/// `min(tau, 1 - tau)`.
pub fn hall_sheather_bandwidth(n: usize, tau: QuantileLevel, alpha: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::Empty);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "alpha {alpha} not in (0, 1)"
        )));
    }
    let t = tau.value();
    let edge = 0.5 / n as f64;
    let h = hall_sheather_raw(n, tau, alpha)
        .min(t - edge)
        .min(1.0 - edge - t);
    Ok(h.max(edge).min(t.min(1.0 - t)))
}

/// Finite-difference sparsity `[q(tau + h) - q(tau - h)] / (2h)`.
pub fn siddiqui_sparsity(y: &[f64], tau: QuantileLevel, h: f64) -> Result<SparsityValue> {
    check_sample(y)?;
    if !h.is_finite() || h <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "bandwidth {h} must be positive"
        )));
    }
    let sorted = sorted_copy(y);
    Ok(siddiqui_sorted(&sorted, tau, h))
}

fn siddiqui_sorted(sorted: &[f64], tau: QuantileLevel, h: f64) -> SparsityValue {
    let t = tau.value();
    let hi = sorted_quantile(sorted, (t + h).min(1.0));
    let lo = sorted_quantile(sorted, (t - h).max(0.0));
    floored((hi - lo) / (2.0 * h), sorted, h)
}

fn floored(raw: f64, sorted: &[f64], bandwidth: f64) -> SparsityValue {
    let floor = sparsity_floor(sorted);
    if raw > floor {
        SparsityValue {
            value: raw,
            bandwidth,
            degenerate: false,
        }
    } else {
        SparsityValue {
            value: floor,
            bandwidth,
            degenerate: raw <= 0.0,
        }
    }
}

fn check_sample(y: &[f64]) -> Result<()> {
    if y.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "sparsity estimation needs at least 2 observations, got {}",
            y.len()
        )));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "sample" });
    }
    Ok(())
}

/// Silverman's rule of thumb `0.9 min(sd, IQR/1.34) n^{-1/5}`; falls back to
/// whichever spread measure is positive.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    let sd = var.sqrt();
    let iqr = (sorted_quantile(sorted, 0.75) - sorted_quantile(sorted, 0.25)) / 1.34;
    let spread = match (sd > 0.0, iqr > 0.0) {
        (true, true) => sd.min(iqr),
        (true, false) => sd,
        (false, true) => iqr,
        (false, false) => 0.0,
    };
    0.9 * spread * n.powf(-0.2)
}

/// Reciprocal of a Gaussian-kernel density estimate at the sample quantile.
pub fn kernel_plugin_sparsity(y: &[f64], tau: QuantileLevel) -> Result<SparsityValue> {
    check_sample(y)?;
    let sorted = sorted_copy(y);
    Ok(kernel_sorted(&sorted, tau))
}

fn kernel_sorted(sorted: &[f64], tau: QuantileLevel) -> SparsityValue {
    let bw = silverman_bandwidth(sorted);
    if bw.is_nan() || bw <= 0.0 {
        return SparsityValue {
            value: sparsity_floor(sorted),
            bandwidth: 0.0,
            degenerate: true,
        };
    }
    let q = sorted_quantile(sorted, tau.value());
    let density = sorted
        .iter()
        .map(|v| normal::pdf((q - v) / bw))
        .sum::<f64>()
        / (sorted.len() as f64 * bw);
    floored(1.0 / density, sorted, bw)
}

/// Estimates the sparsity of every group of `design` at `tau`.
pub fn estimate_sparsity(
    design: &ReplicatedDesign,
    tau: QuantileLevel,
    method: SparsityMethod,
    alpha: f64,
) -> Result<SparsityEstimates> {
    let k = design.k();
    let mut s_hat = Vec::with_capacity(k);
    let mut bandwidths = Vec::with_capacity(k);
    let mut degenerate = Vec::with_capacity(k);
    for (group, y) in design.responses().iter().enumerate() {
        if y.len() < 2 {
            return Err(Error::NoReplicates {
                group,
                count: y.len(),
            });
        }
        let sorted = sorted_copy(y);
        let est = match method {
            SparsityMethod::SiddiquiHs => {
                let h = hall_sheather_bandwidth(y.len(), tau, alpha)?;
                siddiqui_sorted(&sorted, tau, h)
            }
            SparsityMethod::KernelPlugin => kernel_sorted(&sorted, tau),
        };
        s_hat.push(est.value);
        bandwidths.push(est.bandwidth);
        degenerate.push(est.degenerate);
    }
    Ok(SparsityEstimates {
        tau,
        s_hat,
        bandwidths,
        degenerate,
        method,
    })
}

/// Quantile variances `tau (1 - tau) s_i^2 / n_i` (or `s_i` for [`VarianceForm::Unsquared`]).
pub fn weight_matrix(
    design: &ReplicatedDesign,
    tau: QuantileLevel,
    s: &SparsityEstimates,
    form: VarianceForm,
) -> Result<WeightMatrix> {
    if s.s_hat.len() != design.k() {
        return Err(Error::InvalidArgument(format!(
            "{} sparsity values for {} groups",
            s.s_hat.len(),
            design.k()
        )));
    }
    let bv = tau.bernoulli_variance();
    let diag = s
        .s_hat
        .iter()
        .zip(design.group_sizes())
        .map(|(&si, ni)| {
            let spars = match form {
                VarianceForm::Squared => si * si,
                VarianceForm::Unsquared => si,
            };
            bv * spars / ni as f64
        })
        .collect();
    WeightMatrix::new(diag)
}
