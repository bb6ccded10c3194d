pub mod asymptotics;
pub mod fit;
pub mod simulate;

use std::str::FromStr;

use repqr_core::sparsity::{SparsityMethod, VarianceForm};
use repqr_core::QuantileLevel;

use crate::error::{CliError, Result};

/// Which estimators to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MethodSelector {
    Wls,
    Kb,
    #[default]
    Both,
}

impl MethodSelector {
    pub fn wls(self) -> bool {
        matches!(self, MethodSelector::Wls | MethodSelector::Both)
    }

    pub fn kb(self) -> bool {
        matches!(self, MethodSelector::Kb | MethodSelector::Both)
    }
}

impl FromStr for MethodSelector {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "wls" => Ok(MethodSelector::Wls),
            "kb" => Ok(MethodSelector::Kb),
            "both" => Ok(MethodSelector::Both),
            other => Err(format!("unknown method {other:?} (wls, kb, both)")),
        }
    }
}

pub fn parse_sparsity(s: &str) -> std::result::Result<SparsityMethod, String> {
    match s.to_ascii_lowercase().as_str() {
        "siddiqui" | "hs" => Ok(SparsityMethod::SiddiquiHs),
        "kernel" | "kde" => Ok(SparsityMethod::KernelPlugin),
        other => Err(format!(
            "unknown sparsity method {other:?} (siddiqui, kernel)"
        )),
    }
}

pub fn parse_variance_form(s: &str) -> std::result::Result<VarianceForm, String> {
    match s.to_ascii_lowercase().as_str() {
        "squared" => Ok(VarianceForm::Squared),
        "unsquared" => Ok(VarianceForm::Unsquared),
        other => Err(format!(
            "unknown variance form {other:?} (squared, unsquared)"
        )),
    }
}

pub(crate) fn levels(taus: &[f64]) -> Result<Vec<QuantileLevel>> {
    if taus.is_empty() {
        return Err(CliError::Validation(
            "at least one --tau is required".into(),
        ));
    }
    taus.iter()
        .map(|&t| QuantileLevel::new(t).map_err(CliError::from))
        .collect()
}
