//! Monte Carlo comparison of the WLS and check-loss estimators.
//!
//! Covariates `x_i ~ Gamma(shape 2, scale 0.5)`; responses
//! `Y_ij ~ N(mu_i, eta_i^2)` with `mu_i = b0 + b1 x_i - eta_i Phi^-1(tau)`, so
//! the conditional `tau`-quantile is exactly `b0 + b1 x_i`.
//!
//! Every random draw comes from a ChaCha8 stream addressed by
//! `(scenario seed, stream id)`: stream 0 holds the fixed covariates and
//! stream `r + 1` holds replication `r`. Results therefore do not depend on
//! how replications are scheduled across threads.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::design::{QuantileLevel, ReplicatedDesign};
use crate::error::{Error, Result};
use crate::kb::{flatten, kb_fit};
use crate::normal;
use crate::wls::{wls_pipeline, WlsOptions};

/// The random stream for `(seed, stream)`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform on the open interval (0, 1) from 53 random bits.
#[inline]
pub fn open_uniform(rng: &mut impl RngCore) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal by inversion: exactly one uniform per variate.
#[inline]
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    normal::quantile(open_uniform(rng))
}

/// Gamma(shape, scale) by Marsaglia–Tsang acceptance (no squeeze step).
/// Shapes below 1 use the `G(a + 1) U^{1/a}` boost.
pub fn gamma(rng: &mut impl RngCore, shape: f64, scale: f64) -> f64 {
    if shape < 1.0 {
        let u = open_uniform(rng);
        return gamma(rng, shape + 1.0, scale) * u.powf(1.0 / shape);
    }
    let d = shape - 1.0 / 3.0;
    let c = 1.0 / (9.0 * d).sqrt();
    loop {
        let z = standard_normal(rng);
        let v = 1.0 + c * z;
        if v <= 0.0 {
            continue;
        }
        let v = v * v * v;
        let u = open_uniform(rng);
        if u.ln() < 0.5 * z * z + d - d * v + d * v.ln() {
            return d * v * scale;
        }
    }
}

pub fn draw_covariates(
    k: usize,
    shape: f64,
    scale: f64,
    rng: &mut impl RngCore,
) -> Result<Vec<f64>> {
    if !(shape > 0.0 && scale > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma(shape {shape}, scale {scale})"
        )));
    }
    Ok((0..k).map(|_| gamma(rng, shape, scale)).collect())
}

/// Scale of the group-`i` errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EtaRule {
    /// `eta_i = 1 / x_i`: heteroscedastic, unequal densities at the quantile.
    Reciprocal,
    /// `eta_i = 1`: location shift, equal densities.
    Unit,
}

impl EtaRule {
    pub fn as_str(self) -> &'static str {
        match self {
            EtaRule::Reciprocal => "reciprocal",
            EtaRule::Unit => "unit",
        }
    }

    fn eta(self, x: f64) -> f64 {
        match self {
            EtaRule::Reciprocal => 1.0 / x,
            EtaRule::Unit => 1.0,
        }
    }
}

/// Normal responses whose conditional `tau`-quantile is `beta[0] + beta[1] x_i`.
pub fn draw_responses(
    x: &[f64],
    tau: QuantileLevel,
    beta: [f64; 2],
    eta_rule: EtaRule,
    n0: usize,
    rng: &mut impl RngCore,
) -> Result<ReplicatedDesign> {
    if eta_rule == EtaRule::Reciprocal {
        if let Some(index) = x.iter().position(|&v| v == 0.0) {
            return Err(Error::DegenerateCovariate { index });
        }
    }
    let z_tau = normal::quantile(tau.value());
    let responses = x
        .iter()
        .map(|&xi| {
            let eta = eta_rule.eta(xi);
            let mu = beta[0] + beta[1] * xi - eta * z_tau;
            (0..n0).map(|_| mu + eta * standard_normal(rng)).collect()
        })
        .collect();
    ReplicatedDesign::new(x.iter().map(|&xi| vec![1.0, xi]).collect(), responses)
}

/// Whether covariates stay fixed across replications.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum CovariateMode {
    #[default]
    Fixed,
    Redraw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub k: usize,
    pub n0: usize,
    pub tau: QuantileLevel,
    pub beta_true: [f64; 2],
    pub eta_rule: EtaRule,
    pub gamma_shape: f64,
    pub gamma_scale: f64,
    pub reps: usize,
    pub seed: u64,
    pub covariates: CovariateMode,
    pub wls: WlsOptions,
}

impl Scenario {
    /// A scenario with the study defaults: `beta = (1, 0.5)`, Gamma(2, 0.5) covariates.
    pub fn new(
        tau: QuantileLevel,
        k: usize,
        n0: usize,
        eta_rule: EtaRule,
        reps: usize,
        seed: u64,
    ) -> Self {
        Self {
            k,
            n0,
            tau,
            beta_true: [1.0, 0.5],
            eta_rule,
            gamma_shape: 2.0,
            gamma_scale: 0.5,
            reps,
            seed,
            covariates: CovariateMode::Fixed,
            wls: WlsOptions::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k < 2 || self.n0 < 2 || self.reps < 1 {
            return Err(Error::InvalidArgument(format!(
                "scenario needs k >= 2, n0 >= 2, reps >= 1 (got {}, {}, {})",
                self.k, self.n0, self.reps
            )));
        }
        Ok(())
    }

    /// The fixed covariates of this scenario (stream 0).
    pub fn fixed_covariates(&self) -> Result<Vec<f64>> {
        draw_covariates(
            self.k,
            self.gamma_shape,
            self.gamma_scale,
            &mut stream_rng(self.seed, 0),
        )
    }

    /// The simulated design of replication `r`.
    pub fn replication_design(&self, r: usize, fixed_x: &[f64]) -> Result<ReplicatedDesign> {
        let mut rng = stream_rng(self.seed, r as u64 + 1);
        let x = match self.covariates {
            CovariateMode::Fixed => fixed_x.to_vec(),
            CovariateMode::Redraw => {
                draw_covariates(self.k, self.gamma_shape, self.gamma_scale, &mut rng)?
            }
        };
        draw_responses(
            &x,
            self.tau,
            self.beta_true,
            self.eta_rule,
            self.n0,
            &mut rng,
        )
    }
}

/// Squared coefficient errors of one replication, `None` where the estimator failed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplicationOutcome {
    pub wls: Option<[f64; 2]>,
    pub kb: Option<[f64; 2]>,
}

pub fn run_replication(s: &Scenario, r: usize, fixed_x: &[f64]) -> ReplicationOutcome {
    let Ok(design) = s.replication_design(r, fixed_x) else {
        return ReplicationOutcome {
            wls: None,
            kb: None,
        };
    };
    let sq = |beta: &[f64]| {
        [
            (beta[0] - s.beta_true[0]).powi(2),
            (beta[1] - s.beta_true[1]).powi(2),
        ]
    };
    let wls = wls_pipeline(&design, s.tau, &s.wls)
        .ok()
        .map(|f| sq(&f.fit.beta));
    let kb = flatten(&design, s.tau)
        .and_then(|p| kb_fit(&p))
        .ok()
        .map(|f| sq(&f.beta));
    ReplicationOutcome { wls, kb }
}

/// Empirical MSE of one estimator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MseSummary {
    pub mse: [f64; 2],
    /// Monte Carlo standard error of each MSE entry.
    pub std_error: [f64; 2],
    pub successes: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationResult {
    pub scenario: Scenario,
    pub covariates: Vec<f64>,
    pub wls: MseSummary,
    pub kb: MseSummary,
}

/// Neumaier-compensated sum in iteration order.
fn compensated_sum(values: impl Iterator<Item = f64>) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

fn summarize(errors: &[Option<[f64; 2]>]) -> MseSummary {
    let ok: Vec<[f64; 2]> = errors.iter().flatten().copied().collect();
    let successes = ok.len();
    let failures = errors.len() - successes;
    let mut mse = [f64::NAN; 2];
    let mut std_error = [f64::NAN; 2];
    if successes > 0 {
        let n = successes as f64;
        for c in 0..2 {
            let mean = compensated_sum(ok.iter().map(|e| e[c])) / n;
            mse[c] = mean;
            std_error[c] = if successes > 1 {
                let var = compensated_sum(ok.iter().map(|e| (e[c] - mean).powi(2))) / (n - 1.0);
                (var / n).sqrt()
            } else {
                0.0
            };
        }
    }
    MseSummary {
        mse,
        std_error,
        successes,
        failures,
    }
}

/// Runs every replication of `s` on the current rayon pool and reduces in
/// replication order.
pub fn run_scenario(s: &Scenario) -> Result<SimulationResult> {
    s.validate()?;
    let covariates = s.fixed_covariates()?;
    let outcomes: Vec<ReplicationOutcome> = (0..s.reps)
        .into_par_iter()
        .map(|r| run_replication(s, r, &covariates))
        .collect();
    let wls: Vec<_> = outcomes.iter().map(|o| o.wls).collect();
    let kb: Vec<_> = outcomes.iter().map(|o| o.kb).collect();
    Ok(SimulationResult {
        scenario: s.clone(),
        covariates,
        wls: summarize(&wls),
        kb: summarize(&kb),
    })
}

/// SplitMix64 finalizer of `seed + index * golden gamma`.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    let mut z = seed.wrapping_add(index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Axes of a scenario grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub taus: Vec<QuantileLevel>,
    pub ks: Vec<usize>,
    pub n0s: Vec<usize>,
    pub eta_rules: Vec<EtaRule>,
    pub reps: usize,
    pub seed: u64,
    pub covariates: CovariateMode,
    pub wls: WlsOptions,
}

impl Grid {
    /// tau in {0.1, 0.3, 0.5, 0.7, 0.9}, k in {5, 10, 30}, n0 in {50, 100, 200, 500}, both eta rules.
    pub fn study(reps: usize, seed: u64) -> Self {
        Self {
            taus: [0.1, 0.3, 0.5, 0.7, 0.9]
                .iter()
                .map(|&t| QuantileLevel::new(t).unwrap())
                .collect(),
            ks: vec![5, 10, 30],
            n0s: vec![50, 100, 200, 500],
            eta_rules: vec![EtaRule::Reciprocal, EtaRule::Unit],
            reps,
            seed,
            covariates: CovariateMode::Fixed,
            wls: WlsOptions::default(),
        }
    }

    /// Scenarios in eta, tau, k, n0 order, each with a derived sub-seed.
    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut out = Vec::new();
        for &eta in &self.eta_rules {
            for &tau in &self.taus {
                for &k in &self.ks {
                    for &n0 in &self.n0s {
                        let seed = derive_seed(self.seed, out.len() as u64);
                        let mut s = Scenario::new(tau, k, n0, eta, self.reps, seed);
                        s.covariates = self.covariates;
                        s.wls = self.wls;
                        out.push(s);
                    }
                }
            }
        }
        out
    }
}

pub fn run_grid(grid: &Grid) -> Result<Vec<SimulationResult>> {
    if grid.taus.is_empty()
        || grid.ks.is_empty()
        || grid.n0s.is_empty()
        || grid.eta_rules.is_empty()
    {
        return Err(Error::InvalidArgument(
            "every grid axis needs at least one value".into(),
        ));
    }
    grid.scenarios().iter().map(run_scenario).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantile::sample_quantile;

    fn tau(t: f64) -> QuantileLevel {
        QuantileLevel::new(t).unwrap()
    }

    #[test]
    fn gamma_moments() {
        let mut rng = stream_rng(42, 0);
        let x = draw_covariates(1_000_000, 2.0, 0.5, &mut rng).unwrap();
        let n = x.len() as f64;
        let mean = x.iter().sum::<f64>() / n;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((mean - 1.0).abs() < 0.005, "{mean}");
        assert!((var - 0.5).abs() < 0.01, "{var}");
    }

    #[test]
    fn small_shape_gamma_mean() {
        let mut rng = stream_rng(43, 0);
        let x = draw_covariates(200_000, 0.5, 2.0, &mut rng).unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        assert!((mean - 1.0).abs() < 0.02, "{mean}");
    }

    #[test]
    fn streams_are_deterministic_and_distinct() {
        let a = draw_covariates(5, 2.0, 0.5, &mut stream_rng(7, 0)).unwrap();
        let b = draw_covariates(5, 2.0, 0.5, &mut stream_rng(7, 0)).unwrap();
        let c = draw_covariates(5, 2.0, 0.5, &mut stream_rng(7, 1)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn unit_rule_median_has_no_shift() {
        let x = [0.5, 1.0, 2.0];
        let d = draw_responses(
            &x,
            tau(0.5),
            [1.0, 0.5],
            EtaRule::Unit,
            200_001,
            &mut stream_rng(1, 1),
        )
        .unwrap();
        for (i, y) in d.responses().iter().enumerate() {
            let mean = y.iter().sum::<f64>() / y.len() as f64;
            assert!((mean - (1.0 + 0.5 * x[i])).abs() < 0.01);
        }
    }

    #[test]
    fn responses_have_target_quantile() {
        let x = [0.7, 1.9];
        let t = tau(0.1);
        let d = draw_responses(
            &x,
            t,
            [1.0, 0.5],
            EtaRule::Reciprocal,
            1_000_000,
            &mut stream_rng(2, 1),
        )
        .unwrap();
        for (i, y) in d.responses().iter().enumerate() {
            let q = sample_quantile(y, t).unwrap();
            assert!((q - (1.0 + 0.5 * x[i])).abs() < 0.01, "{q}");
        }
        let spread = |y: &Vec<f64>| {
            let m = y.iter().sum::<f64>() / y.len() as f64;
            y.iter().map(|v| (v - m).powi(2)).sum::<f64>() / y.len() as f64
        };
        assert!(spread(&d.responses()[1]) < spread(&d.responses()[0]));
    }

    #[test]
    fn zero_covariate_rejected_for_reciprocal() {
        let r = draw_responses(
            &[1.0, 0.0],
            tau(0.5),
            [1.0, 0.5],
            EtaRule::Reciprocal,
            3,
            &mut stream_rng(0, 0),
        );
        assert_eq!(r, Err(Error::DegenerateCovariate { index: 1 }));
    }

    #[test]
    fn single_replication_mse_is_squared_error() {
        let s = Scenario::new(tau(0.5), 5, 40, EtaRule::Reciprocal, 1, 99);
        let res = run_scenario(&s).unwrap();
        let x = s.fixed_covariates().unwrap();
        let one = run_replication(&s, 0, &x);
        assert_eq!(res.wls.mse, one.wls.unwrap());
        assert_eq!(res.kb.mse, one.kb.unwrap());
        assert_eq!(res.wls.successes + res.wls.failures, 1);
    }

    #[test]
    fn scenario_is_deterministic_across_pools() {
        let s = Scenario::new(tau(0.3), 5, 30, EtaRule::Reciprocal, 40, 5);
        let one = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| run_scenario(&s))
            .unwrap();
        let four = rayon::ThreadPoolBuilder::new()
            .num_threads(4)
            .build()
            .unwrap()
            .install(|| run_scenario(&s))
            .unwrap();
        assert_eq!(one, four);
    }

    #[test]
    fn redraw_mode_changes_covariates_per_replication() {
        let mut s = Scenario::new(tau(0.5), 4, 10, EtaRule::Unit, 3, 8);
        s.covariates = CovariateMode::Redraw;
        let fixed = s.fixed_covariates().unwrap();
        let a = s.replication_design(0, &fixed).unwrap();
        let b = s.replication_design(1, &fixed).unwrap();
        assert_ne!(a.rows(), b.rows());
    }

    #[test]
    fn study_grid_has_120_cells() {
        let g = Grid::study(10, 1);
        let sc = g.scenarios();
        assert_eq!(sc.len(), 120);
        let mut seeds: Vec<u64> = sc.iter().map(|s| s.seed).collect();
        seeds.sort_unstable();
        seeds.dedup();
        assert_eq!(seeds.len(), 120);
    }

    #[test]
    fn grid_rejects_empty_axis() {
        let mut g = Grid::study(1, 1);
        g.ks.clear();
        assert!(run_grid(&g).is_err());
    }

    #[test]
    fn compensated_sum_is_accurate() {
        let v = [1e16, 1.0, -1e16, 1.0];
        assert_eq!(compensated_sum(v.iter().cloned()), 2.0);
    }
}
