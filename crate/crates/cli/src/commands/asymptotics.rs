//! `asymptotics`: moment matrices, limiting covariances and the Löwner gap.
//!
//! Densities come either from a design file with columns `x`, `n`, `f`
//! (per-group density at the quantile), or are estimated from raw
//! observations as the reciprocal sparsity of each covariate group.

use std::path::PathBuf;

use nalgebra::DMatrix;
use repqr_core::asymptotics::{asymptotic_report, AsymptoticReport};
use repqr_core::sparsity::estimate_sparsity;
use repqr_core::wls::WlsOptions;

use super::fit::design_from_table;
use super::levels;
use crate::error::{CliError, Result};
use crate::input::{read_table, ColumnSelector, Table};
use crate::output::{Cell, OutputTable};

#[derive(Debug, Clone)]
pub enum AsymptoticsInput {
    /// Columns `x`, `n`, `f` (header names, else the first three columns).
    Design(PathBuf),
    /// Raw observations, grouped by x.
    Data {
        path: PathBuf,
        x: Option<ColumnSelector>,
        y: Option<ColumnSelector>,
    },
}

#[derive(Debug, Clone)]
pub struct AsymptoticsConfig {
    pub input: AsymptoticsInput,
    pub taus: Vec<f64>,
    pub wls: WlsOptions,
}

/// Rows `(1, x_i)`, counts and densities of a design table.
pub fn design_inputs(table: &Table) -> Result<(DMatrix<f64>, Vec<usize>, Vec<f64>)> {
    let col = |name: &str, fallback: usize| -> Result<usize> {
        match &table.header {
            Some(_) => table.resolve(&ColumnSelector::Name(name.into())),
            None => table.resolve(&ColumnSelector::Index(fallback)),
        }
    };
    let (xc, nc, fc) = (col("x", 0)?, col("n", 1)?, col("f", 2)?);
    let k = table.rows.len();
    let x = DMatrix::from_fn(k, 2, |i, j| if j == 0 { 1.0 } else { table.rows[i][xc] });
    let mut counts = Vec::with_capacity(k);
    for (row, line) in table.rows.iter().zip(&table.lines) {
        let n = row[nc];
        if !(n >= 1.0 && n.fract() == 0.0) {
            return Err(CliError::Parse {
                line: *line,
                message: format!("count {n} is not a positive integer"),
            });
        }
        counts.push(n as usize);
    }
    let f = table.column(fc);
    Ok((x, counts, f))
}

pub fn cmd_asymptotics(cfg: &AsymptoticsConfig) -> Result<Vec<AsymptoticReport>> {
    let taus = levels(&cfg.taus)?;
    match &cfg.input {
        AsymptoticsInput::Design(path) => {
            let (x, counts, f) = design_inputs(&read_table(path)?)?;
            taus.into_iter()
                .map(|t| Ok(asymptotic_report(&x, &counts, &f, t)?))
                .collect()
        }
        AsymptoticsInput::Data { path, x, y } => {
            let table = read_table(path)?;
            let (xc, yc) = table.xy_columns(x.as_ref(), y.as_ref())?;
            let design = design_from_table(&table, xc, yc)?;
            design.validate(true)?;
            taus.into_iter()
                .map(|t| {
                    let s = estimate_sparsity(&design, t, cfg.wls.sparsity, cfg.wls.alpha)?;
                    Ok(asymptotic_report(
                        &design.design_matrix(),
                        &design.group_sizes(),
                        &s.densities(),
                        t,
                    )?)
                })
                .collect()
        }
    }
}

pub fn report_table(reports: &[AsymptoticReport]) -> OutputTable {
    let mut t = OutputTable::new(vec!["tau", "quantity", "row", "col", "value"]);
    for r in reports {
        let tau = r.tau.value();
        let mats = [
            ("D0", &r.moments.d0),
            ("D1", &r.moments.d1),
            ("D2", &r.moments.d2),
            ("cov_kb", &r.cov_kb),
            ("cov_wls", &r.cov_wls),
        ];
        for (name, m) in mats {
            for i in 0..m.nrows() {
                for j in 0..m.ncols() {
                    t.push(vec![
                        Cell::from(tau),
                        Cell::from(name),
                        Cell::from(i),
                        Cell::from(j),
                        Cell::from(m[(i, j)]),
                    ]);
                }
            }
        }
        for (name, v) in [
            ("loewner_gap_min_eig", r.loewner_gap_min_eig),
            ("covariance_gap_min_eig", r.covariance_gap_min_eig),
            ("equal_sparsity", if r.equal_sparsity { 1.0 } else { 0.0 }),
            ("n", r.moments.n as f64),
        ] {
            t.push(vec![
                Cell::from(tau),
                Cell::from(name),
                Cell::Empty,
                Cell::Empty,
                Cell::from(v),
            ]);
        }
    }
    t
}
