//! Exact linear quantile regression by linear programming.
//!
//! The check-loss problem `min_b sum_j rho_tau(y_j - x_j'b)` is the LP
//!
//! ```text
//! min  tau 1'u + (1 - tau) 1'v   s.t.  X b + u - v = y,  u, v >= 0,  b free
//! ```
//!
//! A basis of this LP consists of the free coefficients `b`, together with
//! one of `u_j` / `v_j` for all but `p+1` observations. The remaining `p+1`
//! observations (the active set) have both slacks nonbasic, so `b`
//! interpolates them. The simplex below works directly on that
//! representation: entering candidates are the slacks of active
//! observations, the ratio test runs over the non-active residuals, and
//! Bland's lowest-index rule (variables ordered `u_1..u_n, v_1..v_n`) picks
//! both entering and leaving variables.

use nalgebra::{DMatrix, DVector};

use crate::asymptotics::{covariance_kb, moment_matrices};
use crate::design::{Method, QuantileFit, QuantileLevel, ReplicatedDesign};
use crate::error::{Error, Result};
use crate::quantile::{check_loss, sorted_copy, sorted_quantile};
use crate::sparsity::SparsityEstimates;

/// Observation-level check-loss problem with row-major covariates.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckLossProblem {
    x: Vec<f64>,
    y: Vec<f64>,
    dim: usize,
    tau: QuantileLevel,
}

impl CheckLossProblem {
    pub fn new(rows: &[Vec<f64>], y: Vec<f64>, tau: QuantileLevel) -> Result<Self> {
        if rows.is_empty() || rows.len() != y.len() {
            return Err(Error::InvalidArgument(format!(
                "{} covariate rows for {} responses",
                rows.len(),
                y.len()
            )));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: 0,
            });
        }
        let mut x = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            x.extend_from_slice(row);
        }
        if x.iter().chain(&y).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite {
                what: "check-loss problem",
            });
        }
        if y.len() < dim {
            return Err(Error::TooFewGroups {
                groups: y.len(),
                params: dim,
            });
        }
        Ok(Self { x, y, dim, tau })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn tau(&self) -> QuantileLevel {
        self.tau
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    #[inline]
    pub fn row(&self, j: usize) -> &[f64] {
        &self.x[j * self.dim..(j + 1) * self.dim]
    }

    /// `sum_j rho_tau(y_j - x_j'b)`.
    pub fn objective(&self, beta: &[f64]) -> f64 {
        (0..self.len())
            .map(|j| check_loss(self.y[j] - dot(self.row(j), beta), self.tau))
            .sum()
    }
}

/// Repeats row `i` of the design `n_i` times, paired with its responses in order.
pub fn flatten(design: &ReplicatedDesign, tau: QuantileLevel) -> Result<CheckLossProblem> {
    let mut rows = Vec::with_capacity(design.total());
    let mut y = Vec::with_capacity(design.total());
    for (x, ys) in design.rows().iter().zip(design.responses()) {
        for &v in ys {
            rows.push(x.clone());
            y.push(v);
        }
    }
    CheckLossProblem::new(&rows, y, tau)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Optimal vertex of the check-loss LP.
#[derive(Debug, Clone, PartialEq)]
pub struct KbSolution {
    pub beta: Vec<f64>,
    pub objective: f64,
    /// Observations interpolated by `beta`, one per coefficient.
    pub active: Vec<usize>,
    /// Dual value of each active observation, in `[tau - 1, tau]` at optimality.
    pub duals: Vec<f64>,
    pub pivots: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Status {
    Active,
    /// `u_j` basic, residual >= 0.
    Above,
    /// `v_j` basic, residual <= 0.
    Below,
}

struct Simplex<'a> {
    prob: &'a CheckLossProblem,
    active: Vec<usize>,
    status: Vec<Status>,
    beta: Vec<f64>,
    /// Inverse of the active-row matrix; column `s` moves only observation `active[s]`.
    binv: DMatrix<f64>,
    resid: Vec<f64>,
    pivots: usize,
    max_pivots: usize,
}

struct Edge {
    slot: usize,
    /// +1: `u` of the active observation enters (its residual grows), -1: `v` enters.
    sign: f64,
    rate: f64,
}

impl<'a> Simplex<'a> {
    fn new(prob: &'a CheckLossProblem, active: Vec<usize>) -> Result<Self> {
        let mut s = Simplex {
            prob,
            status: vec![Status::Above; prob.len()],
            beta: vec![0.0; prob.dim],
            binv: DMatrix::zeros(prob.dim, prob.dim),
            resid: vec![0.0; prob.len()],
            active,
            pivots: 0,
            max_pivots: 50 * prob.len(),
        };
        for &h in &s.active {
            s.status[h] = Status::Active;
        }
        s.refresh()?;
        for j in 0..prob.len() {
            if s.status[j] != Status::Active {
                s.status[j] = if s.resid[j] >= 0.0 {
                    Status::Above
                } else {
                    Status::Below
                };
            }
        }
        Ok(s)
    }

    /// Recomputes `binv`, `beta` and residuals from the active set.
    fn refresh(&mut self) -> Result<()> {
        let p = self.prob.dim;
        let xh = DMatrix::from_fn(p, p, |r, c| self.prob.row(self.active[r])[c]);
        self.binv = crate::linalg::inverse(&xh)?;
        let yh = DVector::from_fn(p, |r, _| self.prob.y[self.active[r]]);
        let beta = &self.binv * yh;
        self.beta = beta.iter().cloned().collect();
        for j in 0..self.prob.len() {
            self.resid[j] = self.prob.y[j] - dot(self.prob.row(j), &self.beta);
        }
        for &h in &self.active {
            self.resid[h] = 0.0;
        }
        Ok(())
    }

    fn gradient(&self) -> Vec<f64> {
        let t = self.prob.tau.value();
        let mut g = vec![0.0; self.prob.dim];
        for j in 0..self.prob.len() {
            let psi = match self.status[j] {
                Status::Active => continue,
                Status::Above => t,
                Status::Below => t - 1.0,
            };
            for (gc, xc) in g.iter_mut().zip(self.prob.row(j)) {
                *gc += psi * xc;
            }
        }
        g
    }

    /// `g' c_s` for every slot.
    fn slot_products(&self) -> Vec<f64> {
        let g = self.gradient();
        (0..self.prob.dim)
            .map(|s| (0..self.prob.dim).map(|r| g[r] * self.binv[(r, s)]).sum())
            .collect()
    }

    /// Candidate edges in Bland order with their objective rate per unit step.
    fn edges(&self) -> Vec<(usize, Edge)> {
        let t = self.prob.tau.value();
        let n = self.prob.len();
        let gc = self.slot_products();
        let mut out = Vec::with_capacity(2 * self.prob.dim);
        for (slot, &h) in self.active.iter().enumerate() {
            out.push((
                h,
                Edge {
                    slot,
                    sign: 1.0,
                    rate: t + gc[slot],
                },
            ));
            out.push((
                n + h,
                Edge {
                    slot,
                    sign: -1.0,
                    rate: (1.0 - t) - gc[slot],
                },
            ));
        }
        out.sort_by_key(|(idx, _)| *idx);
        out
    }

    fn tolerance(gc_scale: f64) -> f64 {
        1e-11 * (1.0 + gc_scale)
    }

    /// Coefficient direction of an edge: moving `t` raises the active residual by `sign * t`.
    fn direction(&self, e: &Edge) -> Vec<f64> {
        (0..self.prob.dim)
            .map(|r| -e.sign * self.binv[(r, e.slot)])
            .collect()
    }

    /// Bland ratio test; returns the blocking observation and the step length.
    fn ratio_test(&self, d: &[f64]) -> Option<(usize, f64)> {
        let n = self.prob.len();
        let dnorm = dot(d, d).sqrt();
        let mut best: Option<(usize, f64, usize)> = None;
        for j in 0..n {
            let row = self.prob.row(j);
            let mut xd = dot(row, d);
            // rows parallel to a kept active row give round-off, not a real pivot
            if xd.abs() <= 1e-12 * dot(row, row).sqrt() * dnorm {
                xd = 0.0;
            }
            let (step, var) = match self.status[j] {
                Status::Active => continue,
                Status::Above if xd > 0.0 => (self.resid[j].max(0.0) / xd, j),
                Status::Below if xd < 0.0 => (self.resid[j].min(0.0) / xd, n + j),
                _ => continue,
            };
            best = match best {
                None => Some((j, step, var)),
                Some((bj, bt, bv)) => {
                    let eps = 1e-13 * (1.0 + bt.abs());
                    if step < bt - eps || (step <= bt + eps && var < bv) {
                        Some((j, step, var))
                    } else {
                        Some((bj, bt, bv))
                    }
                }
            };
        }
        best.map(|(j, t, _)| (j, t))
    }

    fn pivot(&mut self, e: &Edge, entering_obs: usize) -> Result<()> {
        let leaving = self.active[e.slot];
        self.status[leaving] = if e.sign > 0.0 {
            Status::Above
        } else {
            Status::Below
        };
        self.status[entering_obs] = Status::Active;
        self.active[e.slot] = entering_obs;
        self.pivots += 1;
        if self.pivots > self.max_pivots {
            return Err(Error::MaxIterations(self.max_pivots));
        }
        self.refresh()
    }

    /// Primal simplex until no edge improves the objective.
    fn optimize(&mut self) -> Result<()> {
        loop {
            let gc_scale = self
                .slot_products()
                .iter()
                .fold(0.0_f64, |m, v| m.max(v.abs()));
            let tol = Self::tolerance(gc_scale);
            let Some((_, edge)) = self.edges().into_iter().find(|(_, e)| e.rate < -tol) else {
                return Ok(());
            };
            let d = self.direction(&edge);
            let (j, _) = self.ratio_test(&d).ok_or(Error::Unbounded)?;
            self.pivot(&edge, j)?;
        }
    }

    /// Walks zero-cost edges of the optimal face that lower the first
    /// coefficient. For an intercept-only model this yields the smallest
    /// minimizer, i.e. the order-statistic sample quantile.
    fn lower_first_coefficient(&mut self) -> Result<()> {
        let budget = self.pivots + self.prob.len() + 10;
        while self.pivots < budget {
            let gc_scale = self
                .slot_products()
                .iter()
                .fold(0.0_f64, |m, v| m.max(v.abs()));
            let tol = Self::tolerance(gc_scale);
            let mut chosen = None;
            for (_, e) in self.edges() {
                if e.rate.abs() > tol {
                    continue;
                }
                let d = self.direction(&e);
                let norm = d.iter().map(|v| v * v).sum::<f64>().sqrt();
                if d[0] < -1e-12 * norm {
                    if let Some((j, t)) = self.ratio_test(&d) {
                        if t > 0.0 {
                            chosen = Some((e, j));
                            break;
                        }
                    }
                }
            }
            let Some((e, j)) = chosen else { return Ok(()) };
            self.pivot(&e, j)?;
        }
        Ok(())
    }

    fn solution(&self) -> KbSolution {
        let gc = self.slot_products();
        KbSolution {
            beta: self.beta.clone(),
            objective: self.prob.objective(&self.beta),
            active: self.active.clone(),
            duals: gc.iter().map(|v| -v).collect(),
            pivots: self.pivots,
        }
    }
}

/// Picks a starting active set: the observations closest to the shifted
/// least-squares fit, skipping rows that are linearly dependent on those
/// already chosen.
fn starting_active_set(prob: &CheckLossProblem) -> Result<Vec<usize>> {
    let n = prob.len();
    let p = prob.dim;
    let x = DMatrix::from_fn(n, p, |r, c| prob.row(r)[c]);
    let y = DVector::from_column_slice(&prob.y);
    let ls = x
        .clone()
        .svd(true, true)
        .solve(&y, 1e-12)
        .map_err(|_| Error::SingularSystem)?;
    let resid: Vec<f64> = (0..n)
        .map(|j| prob.y[j] - dot(prob.row(j), ls.as_slice()))
        .collect();
    let shift = sorted_quantile(&sorted_copy(&resid), prob.tau.value());
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        (resid[a] - shift)
            .abs()
            .total_cmp(&(resid[b] - shift).abs())
            .then(a.cmp(&b))
    });

    let mut chosen = Vec::with_capacity(p);
    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p);
    for j in order {
        let row = prob.row(j);
        let norm = dot(row, row).sqrt();
        if norm == 0.0 {
            continue;
        }
        let mut v = row.to_vec();
        for b in &basis {
            let c = dot(&v, b);
            v.iter_mut().zip(b).for_each(|(vi, bi)| *vi -= c * bi);
        }
        let vn = dot(&v, &v).sqrt();
        if vn > 1e-9 * norm {
            v.iter_mut().for_each(|vi| *vi /= vn);
            basis.push(v);
            chosen.push(j);
            if chosen.len() == p {
                return Ok(chosen);
            }
        }
    }
    Err(Error::RankDeficient {
        rank: chosen.len(),
        cols: p,
    })
}

/// Solves the check-loss LP exactly.
pub fn solve(prob: &CheckLossProblem) -> Result<KbSolution> {
    let start = starting_active_set(prob)?;
    let mut simplex = Simplex::new(prob, start)?;
    simplex.optimize()?;
    simplex.lower_first_coefficient()?;
    Ok(simplex.solution())
}

/// The check-loss estimator without a covariance estimate.
pub fn kb_fit(prob: &CheckLossProblem) -> Result<QuantileFit> {
    let sol = solve(prob)?;
    Ok(QuantileFit {
        tau: prob.tau,
        beta: sol.beta,
        covariance: None,
        method: Method::Kb,
    })
}

/// Finite-sample sandwich `(tau(1-tau)/n) D1^{-1} D0 D1^{-1}` with `f_i = 1/s_i`.
pub fn kb_covariance(design: &ReplicatedDesign, s: &SparsityEstimates) -> Result<DMatrix<f64>> {
    if s.s_hat.len() != design.k() {
        return Err(Error::InvalidArgument(format!(
            "{} sparsity values for {} groups",
            s.s_hat.len(),
            design.k()
        )));
    }
    let m = moment_matrices(
        &design.design_matrix(),
        &design.group_sizes(),
        &s.densities(),
    )?;
    Ok(covariance_kb(&m, s.tau)? / design.total() as f64)
}

/// Fits the check-loss estimator on a grouped design, attaching the sandwich
/// covariance when sparsity estimates are supplied.
pub fn kb_fit_design(
    design: &ReplicatedDesign,
    tau: QuantileLevel,
    sparsity: Option<&SparsityEstimates>,
) -> Result<QuantileFit> {
    design.validate(false)?;
    let mut fit = kb_fit(&flatten(design, tau)?)?;
    if let Some(s) = sparsity {
        fit.covariance = Some(kb_covariance(design, s)?);
    }
    Ok(fit)
}
