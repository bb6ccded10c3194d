//! Command-line arguments.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use repqr_core::sim::{CovariateMode, EtaRule};
use repqr_core::sparsity::{SparsityMethod, VarianceForm, DEFAULT_ALPHA};
use repqr_core::wls::WlsOptions;

use crate::commands::asymptotics::{AsymptoticsConfig, AsymptoticsInput};
use crate::commands::fit::FitConfig;
use crate::commands::simulate::{parse_eta, SimulateConfig, DEFAULT_SEED};
use crate::commands::{parse_sparsity, parse_variance_form, MethodSelector};
use crate::input::ColumnSelector;
use crate::output::Format;

#[derive(Debug, Parser)]
#[command(
    name = "repqr",
    version,
    about = "Quantile regression for replicated covariate designs"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit WLS and/or check-loss quantile regressions to a data file.
    Fit(FitArgs),
    /// Monte Carlo MSE comparison of the two estimators.
    Simulate(SimulateArgs),
    /// Limiting covariances and their Löwner-order gap.
    Asymptotics(AsymptoticsArgs),
}

#[derive(Debug, Args)]
pub struct EstimatorArgs {
    /// Sparsity estimator: siddiqui (Hall–Sheather bandwidth) or kernel.
    #[arg(long, default_value = "siddiqui", value_parser = parse_sparsity)]
    pub sparsity: SparsityMethod,
    /// Hall–Sheather confidence parameter.
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    pub alpha: f64,
    /// Quantile variance built from s^2 (squared) or s (unsquared).
    #[arg(long, default_value = "squared", value_parser = parse_variance_form)]
    pub variance_form: VarianceForm,
}

impl EstimatorArgs {
    pub fn options(&self) -> WlsOptions {
        WlsOptions {
            sparsity: self.sparsity,
            alpha: self.alpha,
            form: self.variance_form,
        }
    }
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    #[arg(long, default_value = "csv")]
    pub format: Format,
    /// Write the table here instead of stdout.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    pub input: PathBuf,
    /// Covariate column (0-based index or header name).
    #[arg(long)]
    pub x: Option<ColumnSelector>,
    /// Response column (0-based index or header name).
    #[arg(long)]
    pub y: Option<ColumnSelector>,
    #[arg(long, required = true, num_args = 1.., action = clap::ArgAction::Append)]
    pub tau: Vec<f64>,
    #[arg(long, default_value = "both")]
    pub method: MethodSelector,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    /// Also write scatter points and fitted-line endpoints (csv) to this path.
    #[arg(long)]
    pub plot_data: Option<PathBuf>,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl FitArgs {
    pub fn config(&self) -> FitConfig {
        FitConfig {
            input: self.input.clone(),
            x: self.x.clone(),
            y: self.y.clone(),
            taus: self.tau.clone(),
            method: self.method,
            wls: self.estimator.options(),
        }
    }
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Run the full 120-scenario study grid.
    #[arg(long)]
    pub paper_grid: bool,
    #[arg(long, num_args = 1.., action = clap::ArgAction::Append)]
    pub tau: Vec<f64>,
    #[arg(long, num_args = 1.., action = clap::ArgAction::Append)]
    pub k: Vec<usize>,
    #[arg(long, num_args = 1.., action = clap::ArgAction::Append)]
    pub n0: Vec<usize>,
    /// Error scale rule: reciprocal (eta = 1/x) or unit (eta = 1).
    #[arg(long, num_args = 1.., action = clap::ArgAction::Append, value_parser = parse_eta)]
    pub eta: Vec<EtaRule>,
    #[arg(long, default_value_t = 1000)]
    pub reps: usize,
    #[arg(long, env = "REPQR_SEED", default_value_t = DEFAULT_SEED)]
    pub seed: u64,
    /// Worker threads (defaults to all cores).
    #[arg(long, env = "REPQR_WORKERS")]
    pub workers: Option<usize>,
    /// Draw new covariates in every replication.
    #[arg(long)]
    pub redraw_covariates: bool,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl SimulateArgs {
    pub fn config(&self) -> SimulateConfig {
        SimulateConfig {
            paper_grid: self.paper_grid,
            taus: self.tau.clone(),
            ks: self.k.clone(),
            n0s: self.n0.clone(),
            etas: self.eta.clone(),
            reps: self.reps,
            seed: self.seed,
            workers: self.workers,
            covariates: if self.redraw_covariates {
                CovariateMode::Redraw
            } else {
                CovariateMode::Fixed
            },
            wls: self.estimator.options(),
        }
    }
}

#[derive(Debug, Args)]
pub struct AsymptoticsArgs {
    /// Design file with columns x, n, f.
    #[arg(long, conflicts_with = "data", required_unless_present = "data")]
    pub design: Option<PathBuf>,
    /// Raw observation file; densities are estimated per covariate group.
    #[arg(long)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    pub x: Option<ColumnSelector>,
    #[arg(long)]
    pub y: Option<ColumnSelector>,
    #[arg(long, required = true, num_args = 1.., action = clap::ArgAction::Append)]
    pub tau: Vec<f64>,
    #[command(flatten)]
    pub estimator: EstimatorArgs,
    #[command(flatten)]
    pub output: OutputArgs,
}

impl AsymptoticsArgs {
    pub fn config(&self) -> AsymptoticsConfig {
        let input = match (&self.design, &self.data) {
            (Some(p), _) => AsymptoticsInput::Design(p.clone()),
            (None, Some(p)) => AsymptoticsInput::Data {
                path: p.clone(),
                x: self.x.clone(),
                y: self.y.clone(),
            },
            (None, None) => unreachable!("clap requires --design or --data"),
        };
        AsymptoticsConfig {
            input,
            taus: self.tau.clone(),
            wls: self.estimator.options(),
        }
    }
}
