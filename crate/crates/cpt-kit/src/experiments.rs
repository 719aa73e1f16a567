//! Config-driven simulation suites.
//!
//! Null suites draw (X, Y, Z) with Y independent of X given Z and measure
//! the Type I error of both tests when the assumed model Q is misspecified
//! (nonlinear conditional means) or estimated (from unlabeled data, or by
//! reusing the test data). The power suite draws Y with a cX term and
//! measures rejection rates along a signal grid. The worst-case suite runs
//! the CRT with the adversarial indicator statistic 1{X in A(Z)} against an
//! exactly enumerated discrete model pair, and the trace suite records
//! chain mixing traces.
//!
//! Every suite is reproducible from (config, master seed): per-trial seeds
//! are derived from (seed, family, grid index, trial index, component), so
//! trials may run in parallel in any order.

use std::io::Write as IoWrite;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{fit_gaussian_linear, UnlabeledSet};
use crate::diagnostics::{chain_trace, product_tv_discrete, ChainTrace};
use crate::error::{Error, Result};
use crate::inference::{p_value, run_cpt_test, run_crt_test, Method, Statistic};
use crate::model::{
    ConditionalDensity, Covariate, Dataset, DiscreteTabularModel, GaussianLinearModel, Response,
};
use crate::num::Real;
use crate::sampler::{crt_draws, ChainConfig, ChainStream};
use crate::streams::{derive_seed, substream};

/// Simulation family.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    Quadratic,
    Cubic,
    Tanh,
    Unlabeled,
    Reuse,
    Power,
    Trace,
    WorstCase,
}

impl Family {
    fn id(self) -> u64 {
        match self {
            Family::Quadratic => 1,
            Family::Cubic => 2,
            Family::Tanh => 3,
            Family::Unlabeled => 4,
            Family::Reuse => 5,
            Family::Power => 6,
            Family::Trace => 7,
            Family::WorstCase => 8,
        }
    }
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Quadratic => "quadratic",
            Family::Cubic => "cubic",
            Family::Tanh => "tanh",
            Family::Unlabeled => "unlabeled",
            Family::Reuse => "reuse",
            Family::Power => "power",
            Family::Trace => "trace",
            Family::WorstCase => "worst_case",
        })
    }
}

// Seed components.
const PARAMS: u64 = 1;
const Z_NOISE: u64 = 2;
const X_NOISE: u64 = 3;
const Y_NOISE: u64 = 4;
const UNLABELED: u64 = 5;
const CPT_SEED: u64 = 6;
const CRT_SEED: u64 = 7;
const WC_DATA: u64 = 8;
const TRACE_CHAIN: u64 = 9;
const FIXED_PARAMS: u64 = 0xF1;

/// Trace-suite parameters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSpec {
    #[serde(default = "default_trace_chains")]
    pub chains: usize,
    #[serde(default = "default_trace_steps")]
    pub steps: u64,
}

fn default_trace_chains() -> usize {
    20
}

fn default_trace_steps() -> u64 {
    250
}

impl Default for TraceSpec {
    fn default() -> Self {
        TraceSpec { chains: default_trace_chains(), steps: default_trace_steps() }
    }
}

/// Worst-case suite parameters: two tabular models on a shared support,
/// keyed by a single covariate label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseSpec {
    #[serde(default = "default_support")]
    pub support: Vec<f64>,
    pub probs_star: Vec<f64>,
    pub probs_hat: Vec<f64>,
}

fn default_support() -> Vec<f64> {
    vec![0.0, 1.0]
}

/// Declarative description of one simulation suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub family: Family,
    /// Labeled sample size (ignored by the reuse family, whose grid sets it).
    #[serde(default = "default_n")]
    pub n: usize,
    /// Covariate dimension.
    #[serde(default = "default_p")]
    pub p: usize,
    /// Misspecification grid for quadratic/cubic/tanh.
    #[serde(default)]
    pub theta: Vec<f64>,
    /// Signal grid for the power family.
    #[serde(default)]
    pub c: Vec<f64>,
    /// Unlabeled-sample-size grid for the unlabeled family.
    #[serde(default)]
    pub n_unlabeled: Vec<usize>,
    /// Labeled-sample-size grid for the reuse family.
    #[serde(default)]
    pub n_labeled: Vec<usize>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    /// Chain settings; `chain.seed` is the master seed of the whole suite.
    #[serde(default = "default_chain")]
    pub chain: ChainConfig,
    #[serde(default)]
    pub statistic: Statistic,
    /// Redraw the parameter vectors a, b per trial (false) or hold them
    /// fixed across the suite (true).
    #[serde(default)]
    pub fixed_params: bool,
    #[serde(default)]
    pub trace: Option<TraceSpec>,
    #[serde(default)]
    pub worst_case: Option<WorstCaseSpec>,
}

fn default_n() -> usize {
    50
}

fn default_p() -> usize {
    20
}

fn default_trials() -> usize {
    1000
}

fn default_alpha() -> f64 {
    0.05
}

/// Desk-scale default: M = 100 copies (paper-scale 500 sits behind the
/// CLI `--full-scale` flag), S = 50.
fn default_chain() -> ChainConfig {
    ChainConfig::new(50, 100, 0)
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.trials < 1 {
            return Err(Error::InvalidConfig("trials must be >= 1".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::InvalidConfig("alpha must lie in (0, 1)".into()));
        }
        // The worst-case toy runs the CRT with an indicator statistic and is
        // meaningful at n = 1; every other suite permutes and needs n >= 2.
        let min_n = if self.family == Family::WorstCase { 1 } else { 2 };
        if self.n < min_n {
            return Err(Error::InvalidConfig(format!("n must be >= {min_n}")));
        }
        if self.p < 1 {
            return Err(Error::InvalidConfig("p must be >= 1".into()));
        }
        self.chain.validate()?;
        let need_grid = |name: &str, ok: bool| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "family {} needs a nonempty {name} grid",
                    self.family
                )))
            }
        };
        match self.family {
            Family::Quadratic | Family::Cubic | Family::Tanh => {
                need_grid("theta", !self.theta.is_empty())?
            }
            Family::Power => need_grid("c", !self.c.is_empty())?,
            Family::Unlabeled => need_grid("n_unlabeled", !self.n_unlabeled.is_empty())?,
            Family::Reuse => need_grid("n_labeled", !self.n_labeled.is_empty())?,
            Family::Trace => {}
            Family::WorstCase => {
                let spec = self.worst_case.as_ref().ok_or_else(|| {
                    Error::InvalidConfig("worst_case family needs a worst_case block".into())
                })?;
                if spec.probs_star.len() != spec.support.len()
                    || spec.probs_hat.len() != spec.support.len()
                {
                    return Err(Error::InvalidConfig(
                        "worst_case probability vectors must match the support".into(),
                    ));
                }
            }
        }
        if self.family == Family::WorstCase && self.n > 20 {
            return Err(Error::InvalidConfig(
                "worst_case n is capped by product enumeration".into(),
            ));
        }
        Ok(())
    }

    /// The grid this family sweeps, as plain numbers for reporting.
    pub fn grid_values(&self) -> Vec<f64> {
        match self.family {
            Family::Quadratic | Family::Cubic | Family::Tanh => self.theta.clone(),
            Family::Power => self.c.clone(),
            Family::Unlabeled => self.n_unlabeled.iter().map(|&v| v as f64).collect(),
            Family::Reuse => self.n_labeled.iter().map(|&v| v as f64).collect(),
            Family::Trace | Family::WorstCase => vec![0.0],
        }
    }

    fn params_stream(&self, grid_idx: usize, trial: u64) -> rand_chacha::ChaCha8Rng {
        let master = self.chain.seed;
        if self.fixed_params {
            substream(master, &[self.family.id(), FIXED_PARAMS, PARAMS])
        } else {
            substream(master, &[self.family.id(), grid_idx as u64, trial, PARAMS])
        }
    }

    fn component_stream(
        &self,
        grid_idx: usize,
        trial: u64,
        component: u64,
    ) -> rand_chacha::ChaCha8Rng {
        substream(
            self.chain.seed,
            &[self.family.id(), grid_idx as u64, trial, component],
        )
    }

    fn component_seed(&self, grid_idx: usize, trial: u64, component: u64) -> u64 {
        derive_seed(
            self.chain.seed,
            &[self.family.id(), grid_idx as u64, trial, component],
        )
    }
}

/// The true conditional law N(mu_i, sigma2) at each observed covariate row,
/// kept for KL/Pinsker diagnostics against the assumed model.
#[derive(Clone, Debug, PartialEq)]
pub struct TrueConditional {
    pub mu: Vec<f64>,
    pub sigma2: f64,
}

/// One null-setting trial: the data, the true conditional, and the assumed
/// (possibly fitted) model Q.
#[derive(Clone, Debug)]
pub struct NullDraw {
    pub dataset: Dataset<f64>,
    pub truth: TrueConditional,
    pub model: GaussianLinearModel<f64>,
    /// True when Q was fitted on the test data itself.
    pub refit_on_test: bool,
}

/// One alternative-setting trial with a correctly specified model.
#[derive(Clone, Debug)]
pub struct AltDraw {
    pub dataset: Dataset<f64>,
    pub model: GaussianLinearModel<f64>,
}

fn std_normal_vec(rng: &mut rand_chacha::ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| f64::std_normal(rng)).collect()
}

/// True conditional mean mu(t) at t = b'z for the nonlinear null families.
/// The tanh family takes a series branch below theta = 1e-6 to avoid 0/0.
fn null_mean(family: Family, theta: f64, t: f64) -> f64 {
    match family {
        Family::Quadratic => t + theta * t * t,
        Family::Cubic => t - theta * t * t * t,
        Family::Tanh => {
            if theta < 1e-6 {
                let u = theta * t;
                t * (1.0 - u * u / 3.0)
            } else {
                (theta * t).tanh() / theta
            }
        }
        _ => t,
    }
}

/// Generate one trial under the null: Z ~ N_p(0, I), X|Z ~ N(mu(b'Z), 1),
/// Y|X,Z ~ N(a'Z / p, 1) with a, b ~ N_p(0, I).
pub fn gen_null_data(cfg: &ExperimentConfig, grid_idx: usize, trial: u64) -> Result<NullDraw> {
    let grid = cfg.grid_values();
    let grid_value = *grid.get(grid_idx).ok_or_else(|| {
        Error::InvalidConfig(format!("grid index {grid_idx} out of range"))
    })?;
    let (theta, n) = match cfg.family {
        Family::Quadratic | Family::Cubic | Family::Tanh => (grid_value, cfg.n),
        Family::Unlabeled => (0.0, cfg.n),
        Family::Reuse => (0.0, grid_value as usize),
        other => {
            return Err(Error::InvalidConfig(format!(
                "gen_null_data does not handle family {other}"
            )))
        }
    };
    let p = cfg.p;

    let mut params = cfg.params_stream(grid_idx, trial);
    let a = std_normal_vec(&mut params, p);
    let b = std_normal_vec(&mut params, p);

    let mut z_rng = cfg.component_stream(grid_idx, trial, Z_NOISE);
    let z_rows: Vec<Vec<f64>> = (0..n).map(|_| std_normal_vec(&mut z_rng, p)).collect();

    let mut x_rng = cfg.component_stream(grid_idx, trial, X_NOISE);
    let mut mu_star = Vec::with_capacity(n);
    let mut x = Vec::with_capacity(n);
    for row in &z_rows {
        let t: f64 = row.iter().zip(&b).map(|(zi, bi)| zi * bi).sum();
        let mu = null_mean(cfg.family, theta, t);
        mu_star.push(mu);
        x.push(mu + f64::std_normal(&mut x_rng));
    }

    let mut y_rng = cfg.component_stream(grid_idx, trial, Y_NOISE);
    let y: Vec<f64> = z_rows
        .iter()
        .map(|row| {
            let az: f64 = row.iter().zip(&a).map(|(zi, ai)| zi * ai).sum();
            az / p as f64 + f64::std_normal(&mut y_rng)
        })
        .collect();

    let dataset = Dataset::from_matrix(x, Response::Real(y), z_rows)?;
    let (model, refit_on_test) = match cfg.family {
        Family::Unlabeled => {
            let big_n = cfg.n_unlabeled[grid_idx];
            let mut u_rng = cfg.component_stream(grid_idx, trial, UNLABELED);
            let uz: Vec<Vec<f64>> = (0..big_n).map(|_| std_normal_vec(&mut u_rng, p)).collect();
            let ux: Vec<f64> = uz
                .iter()
                .map(|row| {
                    let t: f64 = row.iter().zip(&b).map(|(zi, bi)| zi * bi).sum();
                    t + f64::std_normal(&mut u_rng)
                })
                .collect();
            (fit_gaussian_linear(&UnlabeledSet::new(ux, uz)?)?, false)
        }
        Family::Reuse => {
            let zx: Vec<Vec<f64>> = dataset
                .z()
                .iter()
                .map(|cov| match cov {
                    Covariate::Vector(v) => v.clone(),
                    _ => unreachable!("matrix dataset"),
                })
                .collect();
            (
                fit_gaussian_linear(&UnlabeledSet::new(dataset.x().to_vec(), zx)?)?,
                true,
            )
        }
        _ => (GaussianLinearModel::new(b, 1.0)?, false),
    };

    Ok(NullDraw {
        dataset,
        truth: TrueConditional { mu: mu_star, sigma2: 1.0 },
        model,
        refit_on_test,
    })
}

/// Generate one trial under the alternative: X|Z ~ N(b'Z, 1) exactly as the
/// assumed model, Y|X,Z ~ N(a'Z + cX, 1).
pub fn gen_alt_data(cfg: &ExperimentConfig, grid_idx: usize, trial: u64) -> Result<AltDraw> {
    if cfg.family != Family::Power {
        return Err(Error::InvalidConfig(format!(
            "gen_alt_data needs the power family, got {}",
            cfg.family
        )));
    }
    let c = *cfg.c.get(grid_idx).ok_or_else(|| {
        Error::InvalidConfig(format!("grid index {grid_idx} out of range"))
    })?;
    let (n, p) = (cfg.n, cfg.p);

    let mut params = cfg.params_stream(grid_idx, trial);
    let a = std_normal_vec(&mut params, p);
    let b = std_normal_vec(&mut params, p);

    let mut z_rng = cfg.component_stream(grid_idx, trial, Z_NOISE);
    let z_rows: Vec<Vec<f64>> = (0..n).map(|_| std_normal_vec(&mut z_rng, p)).collect();

    let mut x_rng = cfg.component_stream(grid_idx, trial, X_NOISE);
    let x: Vec<f64> = z_rows
        .iter()
        .map(|row| {
            let t: f64 = row.iter().zip(&b).map(|(zi, bi)| zi * bi).sum();
            t + f64::std_normal(&mut x_rng)
        })
        .collect();

    let mut y_rng = cfg.component_stream(grid_idx, trial, Y_NOISE);
    let y: Vec<f64> = z_rows
        .iter()
        .zip(&x)
        .map(|(row, &xi)| {
            let az: f64 = row.iter().zip(&a).map(|(zi, ai)| zi * ai).sum();
            az + c * xi + f64::std_normal(&mut y_rng)
        })
        .collect();

    Ok(AltDraw {
        dataset: Dataset::from_matrix(x, Response::Real(y), z_rows)?,
        model: GaussianLinearModel::new(b, 1.0)?,
    })
}

/// Aggregated rejection rates at one grid point for one method.
#[derive(Clone, Debug, PartialEq)]
pub struct SuiteRow {
    pub grid_value: f64,
    pub method: Method,
    pub rejection_rate: f64,
    /// Binomial standard error sqrt(r (1 - r) / trials).
    pub stderr: f64,
    pub trials: usize,
    /// Per-trial p-values, in trial order.
    pub pvalues: Vec<f64>,
}

/// A trial that failed, preserved alongside the aggregate results.
#[derive(Clone, Debug, PartialEq)]
pub struct TrialFailure {
    pub grid_value: f64,
    pub trial: u64,
    pub message: String,
}

#[derive(Clone, Debug)]
pub struct SuiteResult {
    pub family: Family,
    pub alpha: f64,
    pub rows: Vec<SuiteRow>,
    pub failures: Vec<TrialFailure>,
    pub warnings: Vec<String>,
}

impl SuiteResult {
    /// Emit as CSV with header `grid_value,method,rejection_rate,stderr,trials`.
    pub fn write_csv<W: IoWrite>(&self, mut out: W) -> Result<()> {
        writeln!(out, "grid_value,method,rejection_rate,stderr,trials")
            .map_err(|e| Error::InvalidData(e.to_string()))?;
        for row in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{}",
                row.grid_value, row.method, row.rejection_rate, row.stderr, row.trials
            )
            .map_err(|e| Error::InvalidData(e.to_string()))?;
        }
        Ok(())
    }

    pub fn row(&self, grid_value: f64, method: Method) -> Option<&SuiteRow> {
        self.rows
            .iter()
            .find(|r| r.grid_value == grid_value && r.method == method)
    }
}

fn binomial_stderr(rate: f64, trials: usize) -> f64 {
    (rate * (1.0 - rate) / trials as f64).sqrt()
}

/// Run both tests over the configured grid, tallying rejections at level
/// alpha. Trials run in parallel; failures are logged per trial and the
/// surviving trials still aggregate.
pub fn run_suite(cfg: &ExperimentConfig) -> Result<SuiteResult> {
    cfg.validate()?;
    match cfg.family {
        Family::Trace | Family::WorstCase => {
            return Err(Error::InvalidConfig(format!(
                "family {} does not produce rate rows; run its dedicated suite",
                cfg.family
            )))
        }
        _ => {}
    }

    let grid = cfg.grid_values();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for (grid_idx, &grid_value) in grid.iter().enumerate() {
        let outcomes: Vec<(u64, Result<(f64, f64)>)> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|trial| {
                let run = || -> Result<(f64, f64)> {
                    let (dataset, model) = match cfg.family {
                        Family::Power => {
                            let draw = gen_alt_data(cfg, grid_idx, trial)?;
                            (draw.dataset, draw.model)
                        }
                        _ => {
                            let draw = gen_null_data(cfg, grid_idx, trial)?;
                            (draw.dataset, draw.model)
                        }
                    };
                    let chain = ChainConfig::new(
                        cfg.chain.steps_s,
                        cfg.chain.copies_m,
                        cfg.component_seed(grid_idx, trial, CPT_SEED),
                    );
                    let cpt = run_cpt_test(&dataset, &model, cfg.statistic, &chain)?;
                    let crt = run_crt_test(
                        &dataset,
                        &model,
                        cfg.statistic,
                        cfg.chain.copies_m,
                        cfg.component_seed(grid_idx, trial, CRT_SEED),
                    )?;
                    Ok((cpt.p_value, crt.p_value))
                };
                (trial, run())
            })
            .collect();

        let mut p_cpt = Vec::new();
        let mut p_crt = Vec::new();
        for (trial, outcome) in outcomes {
            match outcome {
                Ok((a, b)) => {
                    p_cpt.push(a);
                    p_crt.push(b);
                }
                Err(e) => failures.push(TrialFailure {
                    grid_value,
                    trial,
                    message: e.to_string(),
                }),
            }
        }
        for (method, pvalues) in [(Method::Cpt, p_cpt), (Method::Crt, p_crt)] {
            let done = pvalues.len();
            if done == 0 {
                continue;
            }
            let rate = pvalues.iter().filter(|&&p| p <= cfg.alpha).count() as f64 / done as f64;
            rows.push(SuiteRow {
                grid_value,
                method,
                rejection_rate: rate,
                stderr: binomial_stderr(rate, done),
                trials: done,
                pvalues,
            });
        }
    }

    let mut warnings = Vec::new();
    if cfg.family == Family::Reuse {
        warnings.push(
            "model coefficients were refitted on the test data; exact validity is not covered"
                .to_string(),
        );
    }
    Ok(SuiteResult { family: cfg.family, alpha: cfg.alpha, rows, failures, warnings })
}

/// Worst-case CRT experiment report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorstCaseReport {
    /// Exact d_TV between the product laws.
    pub tv: f64,
    /// Assumed-model mass of the maximizing set A(Z).
    pub alpha0: f64,
    /// Test level alpha0 + 0.5 sqrt(log M / M).
    pub alpha_z: f64,
    pub rejection_rate: f64,
    /// rejection_rate - alpha_z.
    pub excess: f64,
    /// tv - 2.5 sqrt(log M / M).
    pub lower_bound: f64,
    /// tv + 3 binomial SEs.
    pub upper_bound: f64,
    pub lower_bound_satisfied: bool,
    pub upper_bound_satisfied: bool,
    pub stderr: f64,
    pub trials: usize,
    #[serde(rename = "M")]
    pub copies_m: usize,
    pub n: usize,
    pub seed: u64,
}

impl WorstCaseReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Run the CRT with the adversarial statistic 1{X in A(Z)} at level
/// alpha(Z) = Q^n(A) + 0.5 sqrt(log M / M), where A is the exact maximizing
/// set of the product TV between the true and assumed tabular models.
pub fn worst_case_crt_experiment(cfg: &ExperimentConfig) -> Result<WorstCaseReport> {
    cfg.validate()?;
    let spec = cfg.worst_case.as_ref().ok_or_else(|| {
        Error::InvalidConfig("worst_case family needs a worst_case block".into())
    })?;
    let star = DiscreteTabularModel::new(
        spec.support.clone(),
        std::collections::BTreeMap::from([("z".to_string(), spec.probs_star.clone())]),
    )?;
    let hat = DiscreteTabularModel::new(
        spec.support.clone(),
        std::collections::BTreeMap::from([("z".to_string(), spec.probs_hat.clone())]),
    )?;
    let n = cfg.n;
    let labels = vec!["z".to_string(); n];
    let product = product_tv_discrete(&star, &hat, &labels)?;

    let m = cfg.chain.copies_m;
    let slack = 0.5 * ((m as f64).ln() / m as f64).sqrt();
    let alpha0 = product.q_hat_mass;
    let alpha_z = alpha0 + slack;

    let covariates: Vec<Covariate<f64>> =
        labels.iter().map(|l| Covariate::label(l.clone())).collect();
    let to_indices = |values: &[f64]| -> Vec<usize> {
        values
            .iter()
            .map(|&v| star.support_index(v).expect("draws stay on the support"))
            .collect()
    };

    let rejected: usize = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| -> Result<usize> {
            let mut data_rng = cfg.component_stream(0, trial, WC_DATA);
            let observed: Vec<f64> = covariates
                .iter()
                .map(|z| star.sample(z, &mut data_rng))
                .collect::<Result<_>>()?;
            let t_obs = if product.contains(&to_indices(&observed)) { 1.0 } else { 0.0 };
            let copies = crt_draws(
                &covariates,
                &hat,
                m,
                cfg.component_seed(0, trial, CRT_SEED),
            )?;
            let t_copies: Vec<f64> = copies
                .iter()
                .map(|copy| if product.contains(&to_indices(copy)) { 1.0 } else { 0.0 })
                .collect();
            let p = p_value(t_obs, &t_copies)?;
            Ok((p <= alpha_z) as usize)
        })
        .try_reduce(|| 0, |a, b| Ok(a + b))?;

    let rate = rejected as f64 / cfg.trials as f64;
    let stderr = binomial_stderr(rate, cfg.trials);
    let excess = rate - alpha_z;
    let lower_bound = product.tv - 2.5 * ((m as f64).ln() / m as f64).sqrt();
    let upper_bound = product.tv + 3.0 * stderr;
    Ok(WorstCaseReport {
        tv: product.tv,
        alpha0,
        alpha_z,
        rejection_rate: rate,
        excess,
        lower_bound,
        upper_bound,
        lower_bound_satisfied: excess >= lower_bound,
        upper_bound_satisfied: excess <= upper_bound,
        stderr,
        trials: cfg.trials,
        copies_m: m,
        n,
        seed: cfg.chain.seed,
    })
}

/// Mixing traces: one strongly dependent dataset, several independent
/// chains from the observed assignment.
pub fn run_trace_suite(cfg: &ExperimentConfig) -> Result<Vec<ChainTrace<f64>>> {
    cfg.validate()?;
    let spec = cfg.trace.unwrap_or_default();
    let (n, p) = (cfg.n, cfg.p);

    let mut params = cfg.params_stream(0, 0);
    let _a = std_normal_vec(&mut params, p);
    let b = std_normal_vec(&mut params, p);
    let mut z_rng = cfg.component_stream(0, 0, Z_NOISE);
    let z_rows: Vec<Vec<f64>> = (0..n).map(|_| std_normal_vec(&mut z_rng, p)).collect();
    let mut x_rng = cfg.component_stream(0, 0, X_NOISE);
    let x: Vec<f64> = z_rows
        .iter()
        .map(|row| {
            let t: f64 = row.iter().zip(&b).map(|(zi, bi)| zi * bi).sum();
            t + f64::std_normal(&mut x_rng)
        })
        .collect();
    let z: Vec<Covariate<f64>> = z_rows.into_iter().map(Covariate::Vector).collect();
    let model = GaussianLinearModel::new(b, 1.0)?;

    (0..spec.chains as u64)
        .into_par_iter()
        .map(|chain| {
            let seed = derive_seed(cfg.chain.seed, &[cfg.family.id(), TRACE_CHAIN, chain]);
            chain_trace(&x, &z, &model, spec.steps, &ChainStream::new(seed, 0))
        })
        .collect()
}

/// Any suite's output, for dispatch by the CLI.
#[derive(Clone, Debug)]
pub enum ExperimentOutput {
    Rates(SuiteResult),
    Traces(Vec<ChainTrace<f64>>),
    WorstCase(WorstCaseReport),
}

/// Run whichever suite the config describes.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.family {
        Family::Trace => Ok(ExperimentOutput::Traces(run_trace_suite(cfg)?)),
        Family::WorstCase => Ok(ExperimentOutput::WorstCase(worst_case_crt_experiment(cfg)?)),
        _ => Ok(ExperimentOutput::Rates(run_suite(cfg)?)),
    }
}

/// Pool-adjacent-violators: the least-squares nondecreasing fit.
pub fn isotonic_fit(ys: &[f64]) -> Vec<f64> {
    #[derive(Clone, Copy)]
    struct Block {
        sum: f64,
        count: usize,
    }
    let mut blocks: Vec<Block> = Vec::with_capacity(ys.len());
    for &y in ys {
        blocks.push(Block { sum: y, count: 1 });
        while blocks.len() >= 2 {
            let last = blocks[blocks.len() - 1];
            let prev = blocks[blocks.len() - 2];
            if prev.sum / prev.count as f64 <= last.sum / last.count as f64 {
                break;
            }
            blocks.pop();
            let top = blocks.last_mut().expect("prev block");
            top.sum += last.sum;
            top.count += last.count;
        }
    }
    let mut out = Vec::with_capacity(ys.len());
    for b in blocks {
        let level = b.sum / b.count as f64;
        out.extend(std::iter::repeat_n(level, b.count));
    }
    out
}

/// Fraction of variance explained by the isotonic fit; 1 for a constant
/// series.
pub fn isotonic_r2(ys: &[f64]) -> f64 {
    let fit = isotonic_fit(ys);
    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
    let ss_tot: f64 = ys.iter().map(|y| (y - mean).powi(2)).sum();
    if ss_tot == 0.0 {
        return 1.0;
    }
    let ss_res: f64 = ys.iter().zip(&fit).map(|(y, f)| (y - f).powi(2)).sum();
    1.0 - ss_res / ss_tot
}
