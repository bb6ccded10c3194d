//! `simulate`: Monte Carlo MSE tables over a scenario grid.

use repqr_core::sim::{run_grid, CovariateMode, EtaRule, Grid, MseSummary, SimulationResult};
use repqr_core::wls::WlsOptions;

use super::levels;
use crate::error::{CliError, Result};
use crate::output::{Cell, OutputTable};

pub const DEFAULT_SEED: u64 = 12345;

#[derive(Debug, Clone)]
pub struct SimulateConfig {
    pub paper_grid: bool,
    pub taus: Vec<f64>,
    pub ks: Vec<usize>,
    pub n0s: Vec<usize>,
    pub etas: Vec<EtaRule>,
    pub reps: usize,
    pub seed: u64,
    /// Worker threads; `None` uses the global rayon pool.
    pub workers: Option<usize>,
    pub covariates: CovariateMode,
    pub wls: WlsOptions,
}

impl Default for SimulateConfig {
    fn default() -> Self {
        Self {
            paper_grid: false,
            taus: Vec::new(),
            ks: Vec::new(),
            n0s: Vec::new(),
            etas: Vec::new(),
            reps: 1000,
            seed: DEFAULT_SEED,
            workers: None,
            covariates: CovariateMode::Fixed,
            wls: WlsOptions::default(),
        }
    }
}

pub fn parse_eta(s: &str) -> std::result::Result<EtaRule, String> {
    match s.to_ascii_lowercase().as_str() {
        "reciprocal" | "inverse" => Ok(EtaRule::Reciprocal),
        "unit" | "one" => Ok(EtaRule::Unit),
        other => Err(format!("unknown eta rule {other:?} (reciprocal, unit)")),
    }
}

/// The grid described by `cfg`. Axes left empty fall back to the study grid.
pub fn build_grid(cfg: &SimulateConfig) -> Result<Grid> {
    if cfg.reps == 0 {
        return Err(CliError::Validation("--reps must be at least 1".into()));
    }
    let mut grid = Grid::study(cfg.reps, cfg.seed);
    grid.covariates = cfg.covariates;
    grid.wls = cfg.wls;
    if !cfg.paper_grid {
        if cfg.taus.is_empty() || cfg.ks.is_empty() || cfg.n0s.is_empty() {
            return Err(CliError::Validation(
                "give --tau, --k and --n0 (and optionally --eta), or use --paper-grid".into(),
            ));
        }
        grid.taus = levels(&cfg.taus)?;
        grid.ks = cfg.ks.clone();
        grid.n0s = cfg.n0s.clone();
        if !cfg.etas.is_empty() {
            grid.eta_rules = cfg.etas.clone();
        }
    }
    if grid.ks.iter().any(|&k| k < 2) || grid.n0s.iter().any(|&n| n < 2) {
        return Err(CliError::Validation(
            "--k and --n0 must be at least 2".into(),
        ));
    }
    Ok(grid)
}

pub fn cmd_simulate(cfg: &SimulateConfig) -> Result<Vec<SimulationResult>> {
    let grid = build_grid(cfg)?;
    match cfg.workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| CliError::Validation(format!("worker pool: {e}")))?
            .install(|| run_grid(&grid))
            .map_err(Into::into),
        None => run_grid(&grid).map_err(Into::into),
    }
}

/// One row per (scenario, estimator, coefficient).
pub fn results_table(results: &[SimulationResult]) -> OutputTable {
    let mut t = OutputTable::new(vec![
        "eta",
        "tau",
        "k",
        "n0",
        "reps",
        "seed",
        "estimator",
        "coefficient",
        "mse",
        "mc_se",
        "successes",
        "failures",
    ]);
    for r in results {
        let s = &r.scenario;
        for (name, summary) in [("wls", &r.wls), ("kb", &r.kb)] {
            push_summary(&mut t, r, name, summary, s.seed);
        }
    }
    t
}

fn push_summary(t: &mut OutputTable, r: &SimulationResult, name: &str, m: &MseSummary, seed: u64) {
    let s = &r.scenario;
    for c in 0..2 {
        t.push(vec![
            Cell::from(s.eta_rule.as_str()),
            Cell::from(s.tau.value()),
            Cell::from(s.k),
            Cell::from(s.n0),
            Cell::from(s.reps),
            Cell::from(seed),
            Cell::from(name),
            Cell::Text(format!("beta{c}")),
            Cell::from(m.mse[c]),
            Cell::from(m.std_error[c]),
            Cell::from(m.successes),
            Cell::from(m.failures),
        ]);
    }
}
