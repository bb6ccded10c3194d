//! `fit`: both estimators on a two-column (x, y) data file.

use std::path::PathBuf;

use repqr_core::kb::kb_fit_design;
use repqr_core::sparsity::estimate_sparsity;
use repqr_core::wls::{wls_pipeline, WlsOptions};
use repqr_core::{group_by_covariates, Error as CoreError, QuantileFit, ReplicatedDesign};

use super::{levels, MethodSelector};
use crate::error::{CliError, Result};
use crate::input::{read_table, ColumnSelector, Table};
use crate::output::{Cell, OutputTable};

#[derive(Debug, Clone)]
pub struct FitConfig {
    pub input: PathBuf,
    pub x: Option<ColumnSelector>,
    pub y: Option<ColumnSelector>,
    pub taus: Vec<f64>,
    pub method: MethodSelector,
    pub wls: WlsOptions,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitRow {
    pub fit: QuantileFit,
    pub k: usize,
    pub n: usize,
}

impl FitRow {
    pub fn std_errors(&self) -> Vec<f64> {
        self.fit.std_errors()
    }
}

#[derive(Debug, Clone)]
pub struct FitReport {
    pub rows: Vec<FitRow>,
    pub observations: Vec<(f64, f64)>,
    pub x_range: (f64, f64),
}

/// Groups `(x, y)` pairs into a design with rows `(1, x)`.
pub fn design_from_table(table: &Table, xc: usize, yc: usize) -> Result<ReplicatedDesign> {
    let flat: Vec<(Vec<f64>, f64)> = table
        .rows
        .iter()
        .map(|r| (vec![1.0, r[xc]], r[yc]))
        .collect();
    Ok(group_by_covariates(&flat)?)
}

pub fn fit_table(table: &Table, cfg: &FitConfig) -> Result<FitReport> {
    let taus = levels(&cfg.taus)?;
    let (xc, yc) = table.xy_columns(cfg.x.as_ref(), cfg.y.as_ref())?;
    let design = design_from_table(table, xc, yc)?;
    design.validate(false)?;
    let replicated = design.group_sizes().iter().all(|&n| n >= 2);
    let (k, n) = (design.k(), design.total());

    let mut rows = Vec::new();
    for tau in taus {
        if cfg.method.wls() {
            let fit = wls_pipeline(&design, tau, &cfg.wls).map_err(|e| match e {
                CoreError::NoReplicates { group, count } => CliError::Validation(format!(
                    "covariate group {group} has {count} observation(s); WLS needs replicates \
                     in every group (use --method kb)"
                )),
                e => e.into(),
            })?;
            rows.push(FitRow { fit: fit.fit, k, n });
        }
        if cfg.method.kb() {
            let sparsity = if replicated {
                Some(estimate_sparsity(
                    &design,
                    tau,
                    cfg.wls.sparsity,
                    cfg.wls.alpha,
                )?)
            } else {
                None
            };
            let fit = kb_fit_design(&design, tau, sparsity.as_ref())?;
            rows.push(FitRow { fit, k, n });
        }
    }
    let observations: Vec<(f64, f64)> = table.rows.iter().map(|r| (r[xc], r[yc])).collect();
    let xs = observations.iter().map(|o| o.0);
    let x_range = (
        xs.clone().fold(f64::INFINITY, f64::min),
        xs.fold(f64::NEG_INFINITY, f64::max),
    );
    Ok(FitReport {
        rows,
        observations,
        x_range,
    })
}

pub fn cmd_fit(cfg: &FitConfig) -> Result<FitReport> {
    let table = read_table(&cfg.input)?;
    fit_table(&table, cfg)
}

impl FitReport {
    pub fn table(&self) -> OutputTable {
        let mut t = OutputTable::new(vec![
            "tau", "method", "beta0", "beta1", "se0", "se1", "k", "n",
        ]);
        for r in &self.rows {
            let se = r.std_errors();
            t.push(vec![
                Cell::from(r.fit.tau.value()),
                Cell::from(r.fit.method.as_str()),
                Cell::from(r.fit.beta[0]),
                Cell::from(r.fit.beta[1]),
                Cell::from(se[0]),
                Cell::from(se[1]),
                Cell::from(r.k),
                Cell::from(r.n),
            ]);
        }
        t
    }

    /// Scatter points plus the endpoints of every fitted line over the x range.
    pub fn plot_table(&self) -> OutputTable {
        let mut t = OutputTable::new(vec!["kind", "tau", "method", "x", "y"]);
        for &(x, y) in &self.observations {
            t.push(vec![
                Cell::from("point"),
                Cell::Empty,
                Cell::Empty,
                Cell::from(x),
                Cell::from(y),
            ]);
        }
        for r in &self.rows {
            for x in [self.x_range.0, self.x_range.1] {
                t.push(vec![
                    Cell::from("line"),
                    Cell::from(r.fit.tau.value()),
                    Cell::from(r.fit.method.as_str()),
                    Cell::from(x),
                    Cell::from(r.fit.beta[0] + r.fit.beta[1] * x),
                ]);
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::input::parse_table;
    use repqr_core::Method;

    fn cfg(taus: &[f64], method: MethodSelector) -> FitConfig {
        FitConfig {
            input: PathBuf::new(),
            x: None,
            y: None,
            taus: taus.to_vec(),
            method,
            wls: WlsOptions::default(),
        }
    }

    #[test]
    fn noiseless_line() {
        let mut text = String::from("x y\n");
        for x in 0..5 {
            for _ in 0..4 {
                text.push_str(&format!("{x} {}\n", 2 + 3 * x));
            }
        }
        let t = parse_table(&text).unwrap();
        let rep = fit_table(&t, &cfg(&[0.5], MethodSelector::Both)).unwrap();
        assert_eq!(rep.rows.len(), 2);
        for r in &rep.rows {
            assert!(
                (r.fit.beta[0] - 2.0).abs() < 1e-9 && (r.fit.beta[1] - 3.0).abs() < 1e-9,
                "{:?}",
                r.fit
            );
        }
        assert_eq!(rep.rows[0].fit.method, Method::Wls);
        assert_eq!((rep.rows[0].k, rep.rows[0].n), (5, 20));
    }

    #[test]
    fn singletons_need_kb() {
        let t = parse_table("1 1\n2 3\n3 2\n4 5\n").unwrap();
        let err = fit_table(&t, &cfg(&[0.5], MethodSelector::Both)).unwrap_err();
        assert!(err.to_string().contains("--method kb"));
        assert_eq!(err.exit_code(), 2);
        let rep = fit_table(&t, &cfg(&[0.5], MethodSelector::Kb)).unwrap();
        assert!(rep.rows[0].std_errors()[0].is_nan());
    }

    #[test]
    fn plot_rows() {
        let t = parse_table("0 1\n0 2\n1 3\n1 4\n2 4\n2 6\n").unwrap();
        let rep = fit_table(&t, &cfg(&[0.5, 0.9], MethodSelector::Wls)).unwrap();
        let p = rep.plot_table();
        assert_eq!(p.rows.len(), 6 + 2 * 2);
        assert_eq!(p.rows[6][0], Cell::from("line"));
        assert_eq!(p.rows[6][3], Cell::from(0.0));
        assert_eq!(p.rows[7][3], Cell::from(2.0));
    }
}
