//! Check loss and order-statistic sample quantiles.

use crate::design::QuantileLevel;
use crate::error::{Error, Result};

/// The check loss `rho_tau(u) = u * (tau - I(u < 0))`.
#[inline]
pub fn check_loss(u: f64, tau: QuantileLevel) -> f64 {
    let t = tau.value();
    if u < 0.0 {
        u * (t - 1.0)
    } else {
        u * t
    }
}

/// Total check loss of `y` around the constant `m`.
pub fn total_check_loss(y: &[f64], m: f64, tau: QuantileLevel) -> f64 {
    y.iter().map(|&v| check_loss(v - m, tau)).sum()
}

/// One-based order-statistic index of the smallest check-loss minimizer at
/// probability `p` in `[0, 1]`.
///
/// This is `ceil(n p)` clamped to `[1, n]`. When `n p` is within rounding
/// error of an integer it is treated as that integer, so e.g. `n = 100`,
/// `p = 0.3` selects the 30th order statistic.
pub fn order_index(n: usize, p: f64) -> usize {
    let np = n as f64 * p;
    let r = np.round();
    let idx = if (np - r).abs() <= 1e-9 * np.max(1.0) {
        r
    } else {
        np.ceil()
    };
    (idx as usize).clamp(1, n)
}

/// Quantile of an already ascending-sorted sample at probability `p` in `[0, 1]`.
///
/// Probabilities 0 and 1 map to the minimum and maximum.
pub fn sorted_quantile(sorted: &[f64], p: f64) -> f64 {
    sorted[order_index(sorted.len(), p) - 1]
}

pub fn sorted_copy(y: &[f64]) -> Vec<f64> {
    let mut s = y.to_vec();
    s.sort_by(|a, b| a.total_cmp(b));
    s
}

/// Smallest minimizer of `sum_j rho_tau(y_j - m)` over `m`.
pub fn sample_quantile(y: &[f64], tau: QuantileLevel) -> Result<f64> {
    if y.is_empty() {
        return Err(Error::Empty);
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite { what: "sample" });
    }
    let mut s = y.to_vec();
    let idx = order_index(s.len(), tau.value()) - 1;
    let (_, q, _) = s.select_nth_unstable_by(idx, |a, b| a.total_cmp(b));
    Ok(*q)
}
