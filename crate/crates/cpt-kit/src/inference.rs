//! Test statistics, the Monte Carlo p-value, and the CPT/CRT drivers.
//!
//! The p-value for an observed statistic T against copy statistics T^(m) is
//!
//! ```text
//! p = (1 + #{m: T^(m) >= T}) / (1 + M)
//! ```
//!
//! with ties counting against rejection. Correlations are sample Pearson
//! correlations (the n-1 normalizations cancel in the ratio).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ConditionalDensity, Covariate, Dataset, Response};
use crate::num::Real;
use crate::sampler::{crt_draws, exchangeable_draws, ChainConfig};

/// Which resampling scheme produced a result.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Method {
    #[serde(rename = "CPT")]
    Cpt,
    #[serde(rename = "CRT")]
    Crt,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Cpt => "CPT",
            Method::Crt => "CRT",
        })
    }
}

/// Test statistic selector.
///
/// The residual variants re-use the conditional model that generated the
/// copies; the drivers pass it in at evaluation time.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Statistic {
    /// |Corr(X, Y)| for a real-valued response.
    #[default]
    AbsCorr,
    /// |Corr(X - E[X|Z], Y)| for a real-valued response.
    ResidualCorr,
    /// max over levels of |Corr(X - E[X|Z], 1{Y = level})|.
    CategoricalMaxCorr,
}

impl Statistic {
    /// Evaluate on one (x, y, z) triple. Degenerate statistics (zero
    /// variance) evaluate to 0 rather than erroring, so that null-model
    /// ties produce conservative p-values inside the drivers.
    pub fn evaluate<R: Real, Mo: ConditionalDensity<R>>(
        &self,
        x: &[R],
        y: &Response<R>,
        z: &[Covariate<R>],
        model: &Mo,
    ) -> Result<R> {
        match self {
            Statistic::AbsCorr => {
                let y = y.as_real().ok_or_else(|| {
                    Error::InvalidData("abs_corr requires a real-valued response".into())
                })?;
                match abs_corr(x, y) {
                    Ok(v) => Ok(v),
                    Err(Error::DegenerateStatistic(_)) => Ok(R::zero()),
                    Err(e) => Err(e),
                }
            }
            Statistic::ResidualCorr => {
                let y = y.as_real().ok_or_else(|| {
                    Error::InvalidData("residual_corr requires a real-valued response".into())
                })?;
                residual_corr(x, y, z, model)
            }
            Statistic::CategoricalMaxCorr => {
                let labels = y.as_categorical().ok_or_else(|| {
                    Error::InvalidData(
                        "categorical_max_corr requires a categorical response".into(),
                    )
                })?;
                categorical_max_corr(x, labels, z, model)
            }
        }
    }
}

/// Sample Pearson correlation. Errors on zero variance in either argument.
pub fn pearson_corr<R: Real>(a: &[R], b: &[R]) -> Result<R> {
    if a.len() != b.len() {
        return Err(Error::InvalidData(format!(
            "correlation needs equal lengths, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    let n = a.len();
    if n < 2 {
        return Err(Error::TooFewObservations { n, min: 2 });
    }
    let count = R::of(n as f64);
    let mean_a = a.iter().copied().sum::<R>() / count;
    let mean_b = b.iter().copied().sum::<R>() / count;
    let mut saa = R::zero();
    let mut sbb = R::zero();
    let mut sab = R::zero();
    for (&ai, &bi) in a.iter().zip(b) {
        let da = ai - mean_a;
        let db = bi - mean_b;
        saa += da * da;
        sbb += db * db;
        sab += da * db;
    }
    if saa == R::zero() {
        return Err(Error::DegenerateStatistic("zero variance in first vector".into()));
    }
    if sbb == R::zero() {
        return Err(Error::DegenerateStatistic("zero variance in second vector".into()));
    }
    Ok(sab / (saa * sbb).sqrt())
}

/// Marginal absolute correlation |Corr(x, y)|, clamped into [0, 1].
pub fn abs_corr<R: Real>(x: &[R], y: &[R]) -> Result<R> {
    Ok(pearson_corr(x, y)?.abs().min(R::one()))
}

/// |Corr(R, Y)| where R_i = x_i - E[X | Z = z_i] under the model.
/// Zero variance in the residuals or the response evaluates to 0.
pub fn residual_corr<R: Real, Mo: ConditionalDensity<R>>(
    x: &[R],
    y: &[R],
    z: &[Covariate<R>],
    model: &Mo,
) -> Result<R> {
    let residuals = residuals(x, z, model)?;
    match pearson_corr(&residuals, y) {
        Ok(r) => Ok(r.abs().min(R::one())),
        Err(Error::DegenerateStatistic(_)) => Ok(R::zero()),
        Err(e) => Err(e),
    }
}

/// max over levels of |Corr(R, 1{y = level})|, skipping levels whose
/// indicator is constant; 0 when every level is skipped or the residuals
/// are constant.
pub fn categorical_max_corr<R: Real, Mo: ConditionalDensity<R>>(
    x: &[R],
    labels: &[String],
    z: &[Covariate<R>],
    model: &Mo,
) -> Result<R> {
    if labels.len() != x.len() {
        return Err(Error::InvalidData(format!(
            "response has {} entries for {} observations",
            labels.len(),
            x.len()
        )));
    }
    let residuals = residuals(x, z, model)?;
    let mut levels: Vec<&String> = labels.iter().collect();
    levels.sort();
    levels.dedup();

    let mut best = R::zero();
    let mut any = false;
    for level in levels {
        let indicator: Vec<R> = labels
            .iter()
            .map(|l| if l == level { R::one() } else { R::zero() })
            .collect();
        match pearson_corr(&residuals, &indicator) {
            Ok(r) => {
                any = true;
                best = best.max(r.abs().min(R::one()));
            }
            // Constant indicator or constant residuals: skip the level.
            Err(Error::DegenerateStatistic(_)) => {}
            Err(e) => return Err(e),
        }
    }
    Ok(if any { best } else { R::zero() })
}

fn residuals<R: Real, Mo: ConditionalDensity<R>>(
    x: &[R],
    z: &[Covariate<R>],
    model: &Mo,
) -> Result<Vec<R>> {
    if x.len() != z.len() {
        return Err(Error::InvalidData(format!(
            "x has {} entries but z has {}",
            x.len(),
            z.len()
        )));
    }
    x.iter()
        .zip(z)
        .map(|(&xi, zi)| Ok(xi - model.conditional_mean(zi)?))
        .collect()
}

/// Monte Carlo p-value: (1 + #{m: t_copies[m] >= t_observed}) / (1 + M).
pub fn p_value<R: Real>(t_observed: R, t_copies: &[R]) -> Result<R> {
    if t_copies.is_empty() {
        return Err(Error::EmptyCopies);
    }
    let count = t_copies.iter().filter(|&&t| t >= t_observed).count();
    Ok(R::of((1 + count) as f64) / R::of((1 + t_copies.len()) as f64))
}

/// Outcome of one CPT or CRT run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestResult<R> {
    pub method: Method,
    pub p_value: R,
    pub t_observed: R,
    #[serde(rename = "M")]
    pub copies_m: usize,
    /// Chain steps per copy; absent for the CRT.
    #[serde(rename = "S", skip_serializing_if = "Option::is_none", default)]
    pub steps_s: Option<u64>,
    pub seed: u64,
    /// Copy statistics; dropped from serialized output unless requested.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub t_copies: Option<Vec<R>>,
    #[serde(skip_serializing_if = "Vec::is_empty", default)]
    pub warnings: Vec<String>,
}

impl<R: Real> TestResult<R> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    /// Drop the per-copy statistics (the serialized default).
    pub fn without_copies(mut self) -> Self {
        self.t_copies = None;
        self
    }
}

fn check_testable<R: Real>(dataset: &Dataset<R>) -> Result<()> {
    if dataset.n() < 2 {
        return Err(Error::TooFewObservations { n: dataset.n(), min: 2 });
    }
    Ok(())
}

/// Run the conditional permutation test.
pub fn run_cpt_test<R, Mo>(
    dataset: &Dataset<R>,
    model: &Mo,
    statistic: Statistic,
    config: &ChainConfig,
) -> Result<TestResult<R>>
where
    R: Real,
    Mo: ConditionalDensity<R> + Sync,
{
    config.validate()?;
    check_testable(dataset)?;
    let t_observed = statistic.evaluate(dataset.x(), dataset.y(), dataset.z(), model)?;
    let perms = exchangeable_draws(dataset.x(), dataset.z(), model, config)?;
    let t_copies = perms
        .iter()
        .map(|perm| statistic.evaluate(&perm.apply(dataset.x()), dataset.y(), dataset.z(), model))
        .collect::<Result<Vec<R>>>()?;
    let p = p_value(t_observed, &t_copies)?;
    Ok(TestResult {
        method: Method::Cpt,
        p_value: p,
        t_observed,
        copies_m: config.copies_m,
        steps_s: Some(config.steps_s),
        seed: config.seed,
        t_copies: Some(t_copies),
        warnings: Vec::new(),
    })
}

/// Run the conditional randomization test.
pub fn run_crt_test<R, Mo>(
    dataset: &Dataset<R>,
    model: &Mo,
    statistic: Statistic,
    copies_m: usize,
    seed: u64,
) -> Result<TestResult<R>>
where
    R: Real,
    Mo: ConditionalDensity<R> + Sync,
{
    if copies_m < 1 {
        return Err(Error::InvalidConfig("M must be >= 1".into()));
    }
    check_testable(dataset)?;
    let t_observed = statistic.evaluate(dataset.x(), dataset.y(), dataset.z(), model)?;
    let copies = crt_draws(dataset.z(), model, copies_m, seed)?;
    let t_copies = copies
        .iter()
        .map(|copy| statistic.evaluate(copy, dataset.y(), dataset.z(), model))
        .collect::<Result<Vec<R>>>()?;
    let p = p_value(t_observed, &t_copies)?;
    Ok(TestResult {
        method: Method::Crt,
        p_value: p,
        t_observed,
        copies_m,
        steps_s: None,
        seed,
        t_copies: Some(t_copies),
        warnings: Vec::new(),
    })
}
