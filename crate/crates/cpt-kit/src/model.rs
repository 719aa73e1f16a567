//! Conditional models Q(·|z): log-density, conditional mean, and sampling.
//!
//! Three families are provided:
//!
//! * [`GaussianLinearModel`] — X|Z=z ~ N(bᵀz, σ²) over a numeric covariate
//!   vector;
//! * [`KernelGaussianModel`] — X|Z=z ~ N(μ̂(z), σ̂²(z)) where the mean and
//!   variance are Gaussian-kernel-weighted moments of training points
//!   grouped by a route label, with a circular time-of-day distance;
//! * [`DiscreteTabularModel`] — a finite table of probability vectors keyed
//!   by a covariate label, used as an exactly enumerable oracle.
//!
//! All density work is done in log space; densities are never exponentiated
//! outside stable logistic/softmax forms. Continuous families use Lebesgue
//! base measure, the tabular family counting measure on its support.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::num::Real;

/// Minutes in a day; time-of-day covariates live on `[0, 1440)`.
pub const MINUTES_PER_DAY: f64 = 1440.0;

/// Width of the kernel evaluation window in bandwidth units. Weights beyond
/// this distance are below 2e-22 and cannot move the first two moments at
/// the 1e-10 comparison tolerance.
const WINDOW_BANDWIDTHS: f64 = 10.0;

/// A single covariate value `z`, in whichever form a model understands.
#[derive(Clone, Debug, PartialEq)]
pub enum Covariate<R> {
    /// Numeric vector, for [`GaussianLinearModel`].
    Vector(Vec<R>),
    /// Route label plus time of day in minutes, for [`KernelGaussianModel`].
    RouteTime { route: String, time: R },
    /// Opaque label, for [`DiscreteTabularModel`].
    Label(String),
}

impl<R: Real> Covariate<R> {
    pub fn vector(v: Vec<R>) -> Self {
        Covariate::Vector(v)
    }

    pub fn route_time(route: impl Into<String>, time: R) -> Self {
        Covariate::RouteTime { route: route.into(), time }
    }

    pub fn label(l: impl Into<String>) -> Self {
        Covariate::Label(l.into())
    }

    fn is_finite(&self) -> bool {
        match self {
            Covariate::Vector(v) => v.iter().all(|c| c.is_finite()),
            Covariate::RouteTime { time, .. } => time.is_finite(),
            Covariate::Label(_) => true,
        }
    }
}

/// Response vector: real-valued or categorical with level labels.
#[derive(Clone, Debug, PartialEq)]
pub enum Response<R> {
    Real(Vec<R>),
    Categorical(Vec<String>),
}

impl<R: Real> Response<R> {
    pub fn len(&self) -> usize {
        match self {
            Response::Real(v) => v.len(),
            Response::Categorical(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn as_real(&self) -> Option<&[R]> {
        match self {
            Response::Real(v) => Some(v),
            Response::Categorical(_) => None,
        }
    }

    pub fn as_categorical(&self) -> Option<&[String]> {
        match self {
            Response::Categorical(v) => Some(v),
            Response::Real(_) => None,
        }
    }

    /// Distinct levels of a categorical response, sorted.
    pub fn levels(&self) -> Vec<String> {
        match self {
            Response::Real(_) => Vec::new(),
            Response::Categorical(v) => {
                let mut levels: Vec<String> = v.clone();
                levels.sort();
                levels.dedup();
                levels
            }
        }
    }
}

/// Observed triples (x, y, z) with consistent length.
#[derive(Clone, Debug, PartialEq)]
pub struct Dataset<R> {
    x: Vec<R>,
    y: Response<R>,
    z: Vec<Covariate<R>>,
}

impl<R: Real> Dataset<R> {
    pub fn new(x: Vec<R>, y: Response<R>, z: Vec<Covariate<R>>) -> Result<Self> {
        let n = x.len();
        if n == 0 {
            return Err(Error::InvalidData("empty dataset".into()));
        }
        if y.len() != n || z.len() != n {
            return Err(Error::InvalidData(format!(
                "inconsistent lengths: x={}, y={}, z={}",
                n,
                y.len(),
                z.len()
            )));
        }
        if !x.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidData("non-finite x entry".into()));
        }
        if let Response::Real(vals) = &y {
            if !vals.iter().all(|v| v.is_finite()) {
                return Err(Error::InvalidData("non-finite y entry".into()));
            }
        }
        if !z.iter().all(Covariate::is_finite) {
            return Err(Error::InvalidData("non-finite z entry".into()));
        }
        Ok(Dataset { x, y, z })
    }

    /// Build from a numeric covariate matrix given as rows of equal width.
    pub fn from_matrix(x: Vec<R>, y: Response<R>, z_rows: Vec<Vec<R>>) -> Result<Self> {
        let p = z_rows.first().map(Vec::len).unwrap_or(0);
        if p == 0 {
            return Err(Error::InvalidData("covariate matrix has no columns".into()));
        }
        if z_rows.iter().any(|r| r.len() != p) {
            return Err(Error::InvalidData("ragged covariate matrix".into()));
        }
        Dataset::new(x, y, z_rows.into_iter().map(Covariate::Vector).collect())
    }

    pub fn n(&self) -> usize {
        self.x.len()
    }

    pub fn x(&self) -> &[R] {
        &self.x
    }

    pub fn y(&self) -> &Response<R> {
        &self.y
    }

    pub fn z(&self) -> &[Covariate<R>] {
        &self.z
    }
}

/// Evaluable and sampleable conditional law of X given Z = z.
pub trait ConditionalDensity<R: Real> {
    /// log q(x|z) with respect to the family's base measure. Returns
    /// `-inf` where the density is exactly zero.
    fn log_density(&self, x: R, z: &Covariate<R>) -> Result<R>;

    /// E[X | Z = z].
    fn conditional_mean(&self, z: &Covariate<R>) -> Result<R>;

    /// One draw from Q(·|z), deterministic given the stream state.
    fn sample<G: Rng + ?Sized>(&self, z: &Covariate<R>, rng: &mut G) -> Result<R>;

    /// Per-row N(mu, var) parameters when the family is rowwise normal,
    /// letting chain loops skip repeated covariate work. None means the
    /// evaluator falls back to [`ConditionalDensity::log_density`].
    fn normal_row_params(&self, _z: &[Covariate<R>]) -> Result<Option<Vec<(R, R)>>> {
        Ok(None)
    }

    /// Bind this model to a fixed covariate sequence for repeated per-row
    /// log-density evaluation.
    fn bind_rows<'a>(&'a self, z: &'a [Covariate<R>]) -> Result<BoundRows<'a, R, Self>>
    where
        Self: Sized,
    {
        Ok(BoundRows { model: self, z, normal_params: self.normal_row_params(z)? })
    }
}

impl<R: Real, T: ConditionalDensity<R>> ConditionalDensity<R> for &T {
    fn log_density(&self, x: R, z: &Covariate<R>) -> Result<R> {
        (**self).log_density(x, z)
    }

    fn conditional_mean(&self, z: &Covariate<R>) -> Result<R> {
        (**self).conditional_mean(z)
    }

    fn sample<G: Rng + ?Sized>(&self, z: &Covariate<R>, rng: &mut G) -> Result<R> {
        (**self).sample(z, rng)
    }

    fn normal_row_params(&self, z: &[Covariate<R>]) -> Result<Option<Vec<(R, R)>>> {
        (**self).normal_row_params(z)
    }
}

/// A model bound to a fixed covariate sequence; see
/// [`ConditionalDensity::bind_rows`].
pub struct BoundRows<'a, R, Mo> {
    model: &'a Mo,
    z: &'a [Covariate<R>],
    normal_params: Option<Vec<(R, R)>>,
}

impl<'a, R: Real, Mo: ConditionalDensity<R>> BoundRows<'a, R, Mo> {
    pub fn len(&self) -> usize {
        self.z.len()
    }

    pub fn is_empty(&self) -> bool {
        self.z.is_empty()
    }

    /// log q(x | z_row).
    pub fn log_density(&self, row: usize, x: R) -> Result<R> {
        match &self.normal_params {
            Some(params) => {
                let (mean, var) = params[row];
                Ok(normal_log_density(x, mean, var))
            }
            None => self.model.log_density(x, &self.z[row]),
        }
    }
}

fn normal_log_density<R: Real>(x: R, mean: R, var: R) -> R {
    let half = R::of(0.5);
    let resid = x - mean;
    -half * (resid * resid / var) - half * (var.ln() + R::ln_two_pi())
}

// ---------------------------------------------------------------------------
// Gaussian linear family
// ---------------------------------------------------------------------------

/// X|Z=z ~ N(bᵀz, σ²).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianLinearModel<R> {
    b: Vec<R>,
    sigma2: R,
}

impl<R: Real> GaussianLinearModel<R> {
    pub fn new(b: Vec<R>, sigma2: R) -> Result<Self> {
        let model = GaussianLinearModel { b, sigma2 };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.b.iter().all(|c| c.is_finite()) {
            return Err(Error::InvalidModel("non-finite coefficient".into()));
        }
        if !(self.sigma2 > R::zero()) || !self.sigma2.is_finite() {
            return Err(Error::InvalidModel(format!(
                "sigma2 must be strictly positive, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    pub fn coefficients(&self) -> &[R] {
        &self.b
    }

    pub fn sigma2(&self) -> R {
        self.sigma2
    }

    fn mean(&self, z: &Covariate<R>) -> Result<R> {
        match z {
            Covariate::Vector(v) => {
                if v.len() != self.b.len() {
                    return Err(Error::DimensionMismatch {
                        expected: self.b.len(),
                        got: v.len(),
                    });
                }
                Ok(self.b.iter().zip(v).map(|(&c, &zi)| c * zi).sum())
            }
            Covariate::RouteTime { .. } => Err(Error::CovariateKind(
                "gaussian_linear expects a numeric vector, got route/time",
            )),
            Covariate::Label(_) => Err(Error::CovariateKind(
                "gaussian_linear expects a numeric vector, got label",
            )),
        }
    }
}

impl<R: Real> ConditionalDensity<R> for GaussianLinearModel<R> {
    fn log_density(&self, x: R, z: &Covariate<R>) -> Result<R> {
        Ok(normal_log_density(x, self.mean(z)?, self.sigma2))
    }

    fn conditional_mean(&self, z: &Covariate<R>) -> Result<R> {
        self.mean(z)
    }

    fn sample<G: Rng + ?Sized>(&self, z: &Covariate<R>, rng: &mut G) -> Result<R> {
        let mu = self.mean(z)?;
        Ok(mu + self.sigma2.sqrt() * R::std_normal(rng))
    }

    fn normal_row_params(&self, z: &[Covariate<R>]) -> Result<Option<Vec<(R, R)>>> {
        let params = z
            .iter()
            .map(|zi| Ok((self.mean(zi)?, self.sigma2)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(params))
    }
}

// ---------------------------------------------------------------------------
// Kernel Gaussian family (route label x time of day)
// ---------------------------------------------------------------------------

/// Kernel-weighted moments at one covariate value.
#[derive(Clone, Copy, Debug)]
pub struct KernelStats<R> {
    /// Weighted mean μ̂(z).
    pub mean: R,
    /// Weighted second moment minus μ̂², before clamping.
    pub raw_variance: R,
    /// `max(raw_variance, variance_floor)`.
    pub variance: R,
    /// Kernel mass N(z): the sum of all weights.
    pub mass: R,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct KernelGroup<R> {
    /// Times in minutes, ascending.
    times: Vec<R>,
    /// Training x values aligned with `times`.
    xs: Vec<R>,
}

/// X|Z=(route, t) ~ N(μ̂, σ̂²) with Gaussian-kernel weights over training
/// points that share the route; time distance is circular on the 24h clock.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelGaussianModel<R> {
    groups: BTreeMap<String, KernelGroup<R>>,
    bandwidth_h: R,
    variance_floor: R,
}

/// Shortest distance between two times of day on the circular 24h clock.
pub fn circular_minutes<R: Real>(a: R, b: R) -> R {
    let d = (a - b).abs();
    let day = R::of(MINUTES_PER_DAY);
    d.min(day - d)
}

impl<R: Real> KernelGaussianModel<R> {
    /// Build from per-route training points `(time_min, x)`.
    pub fn new(
        groups: BTreeMap<String, Vec<(R, R)>>,
        bandwidth_h: R,
        variance_floor: R,
    ) -> Result<Self> {
        let mut sorted = BTreeMap::new();
        for (route, mut points) in groups {
            points.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite times"));
            let (times, xs): (Vec<R>, Vec<R>) = points.into_iter().unzip();
            sorted.insert(route, KernelGroup { times, xs });
        }
        let model = KernelGaussianModel { groups: sorted, bandwidth_h, variance_floor };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth_h > R::zero()) || !self.bandwidth_h.is_finite() {
            return Err(Error::InvalidModel("bandwidth must be positive".into()));
        }
        if self.variance_floor < R::zero() || !self.variance_floor.is_finite() {
            return Err(Error::InvalidModel("variance floor must be >= 0".into()));
        }
        let day = R::of(MINUTES_PER_DAY);
        for (route, g) in &self.groups {
            if g.times.len() != g.xs.len() {
                return Err(Error::InvalidModel(format!("ragged group {route:?}")));
            }
            for (&t, &x) in g.times.iter().zip(&g.xs) {
                if !x.is_finite() {
                    return Err(Error::InvalidModel(format!(
                        "non-finite training x on route {route:?}"
                    )));
                }
                if !(t >= R::zero() && t < day) {
                    return Err(Error::InvalidModel(format!(
                        "time {t} outside [0, 1440) on route {route:?}"
                    )));
                }
            }
            if g.times.windows(2).any(|w| w[0] > w[1]) {
                return Err(Error::InvalidModel(format!("unsorted group {route:?}")));
            }
        }
        Ok(())
    }

    pub fn bandwidth(&self) -> R {
        self.bandwidth_h
    }

    pub fn variance_floor(&self) -> R {
        self.variance_floor
    }

    pub fn routes(&self) -> impl Iterator<Item = &str> {
        self.groups.keys().map(String::as_str)
    }

    fn destructure<'z>(&self, z: &'z Covariate<R>) -> Result<(&'z str, R)> {
        match z {
            Covariate::RouteTime { route, time } => Ok((route.as_str(), *time)),
            Covariate::Vector(_) => Err(Error::CovariateKind(
                "kernel_gaussian expects route/time, got numeric vector",
            )),
            Covariate::Label(_) => Err(Error::CovariateKind(
                "kernel_gaussian expects route/time, got label",
            )),
        }
    }

    fn accumulate(&self, g: &KernelGroup<R>, idx: std::ops::Range<usize>, time: R, acc: &mut [R; 3]) {
        let two_h2 = R::of(2.0) * self.bandwidth_h * self.bandwidth_h;
        for i in idx {
            let d = circular_minutes(g.times[i], time);
            let w = (-(d * d) / two_h2).exp();
            let x = g.xs[i];
            acc[0] += w;
            acc[1] += w * x;
            acc[2] += w * x * x;
        }
    }

    fn moments_full(&self, g: &KernelGroup<R>, time: R) -> [R; 3] {
        let mut acc = [R::zero(); 3];
        self.accumulate(g, 0..g.times.len(), time, &mut acc);
        acc
    }

    fn moments_windowed(&self, g: &KernelGroup<R>, time: R) -> [R; 3] {
        let w = self.bandwidth_h * R::of(WINDOW_BANDWIDTHS);
        let day = R::of(MINUTES_PER_DAY);
        if w + w >= day {
            return self.moments_full(g, time);
        }
        let mut acc = [R::zero(); 3];
        let mut segment = |lo: R, hi: R| {
            let start = g.times.partition_point(|&t| t < lo);
            let end = g.times.partition_point(|&t| t <= hi);
            self.accumulate(g, start..end, time, &mut acc);
        };
        let lo = time - w;
        let hi = time + w;
        if lo < R::zero() {
            segment(R::zero(), hi);
            segment(lo + day, day);
        } else if hi >= day {
            segment(lo, day);
            segment(R::zero(), hi - day);
        } else {
            segment(lo, hi);
        }
        acc
    }

    fn moments(&self, g: &KernelGroup<R>, time: R) -> [R; 3] {
        #[cfg(feature = "exact-kernel-sum")]
        {
            self.moments_full(g, time)
        }
        #[cfg(not(feature = "exact-kernel-sum"))]
        {
            self.moments_windowed(g, time)
        }
    }

    fn stats_from_moments(&self, acc: [R; 3], route: &str, time: R) -> Result<KernelStats<R>> {
        let [mass, m1, m2] = acc;
        if !(mass > R::zero()) {
            return Err(Error::ZeroEffectiveMass {
                route: route.to_string(),
                time: time.to_f64().unwrap_or(f64::NAN),
            });
        }
        let mean = m1 / mass;
        let raw_variance = m2 / mass - mean * mean;
        Ok(KernelStats {
            mean,
            raw_variance,
            variance: raw_variance.max(self.variance_floor),
            mass,
        })
    }

    /// Kernel moments at `z`, via the windowed fast path (or full summation
    /// when the `exact-kernel-sum` feature is enabled).
    pub fn stats(&self, z: &Covariate<R>) -> Result<KernelStats<R>> {
        let (route, time) = self.destructure(z)?;
        let g = self
            .groups
            .get(route)
            .ok_or_else(|| Error::UnknownRoute(route.to_string()))?;
        self.stats_from_moments(self.moments(g, time), route, time)
    }

    /// Reference path: exact summation over the full route group.
    pub fn stats_full_scan(&self, z: &Covariate<R>) -> Result<KernelStats<R>> {
        let (route, time) = self.destructure(z)?;
        let g = self
            .groups
            .get(route)
            .ok_or_else(|| Error::UnknownRoute(route.to_string()))?;
        self.stats_from_moments(self.moments_full(g, time), route, time)
    }

    /// Kernel mass N(z); zero when the route was never seen in training.
    pub fn effective_mass(&self, z: &Covariate<R>) -> Result<R> {
        let (route, time) = self.destructure(z)?;
        Ok(match self.groups.get(route) {
            None => R::zero(),
            Some(g) => self.moments(g, time)[0],
        })
    }
}

impl<R: Real> ConditionalDensity<R> for KernelGaussianModel<R> {
    fn log_density(&self, x: R, z: &Covariate<R>) -> Result<R> {
        let s = self.stats(z)?;
        Ok(normal_log_density(x, s.mean, s.variance))
    }

    fn conditional_mean(&self, z: &Covariate<R>) -> Result<R> {
        Ok(self.stats(z)?.mean)
    }

    fn sample<G: Rng + ?Sized>(&self, z: &Covariate<R>, rng: &mut G) -> Result<R> {
        let s = self.stats(z)?;
        Ok(s.mean + s.variance.sqrt() * R::std_normal(rng))
    }

    // Kernel moments are the expensive part of this family; chains bind
    // them once per covariate sequence.
    fn normal_row_params(&self, z: &[Covariate<R>]) -> Result<Option<Vec<(R, R)>>> {
        let params = z
            .iter()
            .map(|zi| {
                let s = self.stats(zi)?;
                Ok((s.mean, s.variance))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(Some(params))
    }
}

// ---------------------------------------------------------------------------
// Discrete tabular family
// ---------------------------------------------------------------------------

/// Finite support with one probability vector per covariate label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteTabularModel<R> {
    support: Vec<R>,
    probs: BTreeMap<String, Vec<R>>,
}

/// Probability vectors must sum to one within this tolerance.
pub const PROB_SUM_TOL: f64 = 1e-12;

impl<R: Real> DiscreteTabularModel<R> {
    pub fn new(support: Vec<R>, probs: BTreeMap<String, Vec<R>>) -> Result<Self> {
        let model = DiscreteTabularModel { support, probs };
        model.validate()?;
        Ok(model)
    }

    /// Convenience: Bernoulli-style two-point model on {0, 1} under a single
    /// label, with P(X = 1) = p1.
    pub fn bernoulli(label: impl Into<String>, p1: R) -> Result<Self> {
        let mut probs = BTreeMap::new();
        probs.insert(label.into(), vec![R::one() - p1, p1]);
        DiscreteTabularModel::new(vec![R::zero(), R::one()], probs)
    }

    pub fn validate(&self) -> Result<()> {
        if self.support.is_empty() {
            return Err(Error::InvalidModel("empty support".into()));
        }
        if !self.support.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidModel("non-finite support value".into()));
        }
        for w in self.support.windows(2) {
            if !(w[0] < w[1]) {
                return Err(Error::InvalidModel(
                    "support must be strictly increasing".into(),
                ));
            }
        }
        if self.probs.is_empty() {
            return Err(Error::InvalidModel("no probability rows".into()));
        }
        let tol = R::of(PROB_SUM_TOL);
        for (label, row) in &self.probs {
            if row.len() != self.support.len() {
                return Err(Error::InvalidModel(format!(
                    "row {label:?} has {} entries for support of {}",
                    row.len(),
                    self.support.len()
                )));
            }
            if row.iter().any(|&p| !(p >= R::zero()) || !p.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "row {label:?} has a negative or non-finite probability"
                )));
            }
            let sum: R = row.iter().copied().sum();
            if (sum - R::one()).abs() > tol {
                return Err(Error::InvalidModel(format!(
                    "row {label:?} sums to {sum}, not 1"
                )));
            }
        }
        Ok(())
    }

    pub fn support(&self) -> &[R] {
        &self.support
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.probs.keys().map(String::as_str)
    }

    pub fn row(&self, label: &str) -> Result<&[R]> {
        self.probs
            .get(label)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownLabel(label.to_string()))
    }

    fn row_for(&self, z: &Covariate<R>) -> Result<&[R]> {
        match z {
            Covariate::Label(l) => self.row(l),
            Covariate::Vector(_) => Err(Error::CovariateKind(
                "discrete_tabular expects a label, got numeric vector",
            )),
            Covariate::RouteTime { .. } => Err(Error::CovariateKind(
                "discrete_tabular expects a label, got route/time",
            )),
        }
    }

    /// Index of `x` in the support, by exact equality.
    pub fn support_index(&self, x: R) -> Option<usize> {
        self.support.iter().position(|&s| s == x)
    }
}

impl<R: Real> ConditionalDensity<R> for DiscreteTabularModel<R> {
    fn log_density(&self, x: R, z: &Covariate<R>) -> Result<R> {
        let row = self.row_for(z)?;
        Ok(match self.support_index(x) {
            // Counting measure: mass points only; elsewhere the density is 0.
            None => R::neg_infinity(),
            Some(k) => row[k].ln(),
        })
    }

    fn conditional_mean(&self, z: &Covariate<R>) -> Result<R> {
        let row = self.row_for(z)?;
        Ok(row.iter().zip(&self.support).map(|(&p, &s)| p * s).sum())
    }

    fn sample<G: Rng + ?Sized>(&self, z: &Covariate<R>, rng: &mut G) -> Result<R> {
        let row = self.row_for(z)?;
        let u = R::uniform(rng);
        let mut cum = R::zero();
        for (&p, &s) in row.iter().zip(&self.support) {
            cum += p;
            if u < cum {
                return Ok(s);
            }
        }
        // Guard against accumulated rounding: fall back to the last mass point.
        Ok(*self
            .support
            .iter()
            .zip(row)
            .rev()
            .find(|(_, &p)| p > R::zero())
            .map(|(s, _)| s)
            .unwrap_or(self.support.last().expect("nonempty support")))
    }
}

// ---------------------------------------------------------------------------
// Tagged union + JSON round trip
// ---------------------------------------------------------------------------

/// Any of the three concrete families, tagged for serialization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ConditionalModel<R> {
    GaussianLinear(GaussianLinearModel<R>),
    KernelGaussian(KernelGaussianModel<R>),
    DiscreteTabular(DiscreteTabularModel<R>),
}

impl<R: Real> ConditionalModel<R> {
    pub fn validate(&self) -> Result<()> {
        match self {
            ConditionalModel::GaussianLinear(m) => m.validate(),
            ConditionalModel::KernelGaussian(m) => m.validate(),
            ConditionalModel::DiscreteTabular(m) => m.validate(),
        }
    }

    /// Parse and validate a model from its JSON document.
    pub fn from_json(text: &str) -> Result<Self> {
        let model: ConditionalModel<R> = serde_json::from_str(text)?;
        model.validate()?;
        Ok(model)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ConditionalModel::GaussianLinear(_) => "gaussian_linear",
            ConditionalModel::KernelGaussian(_) => "kernel_gaussian",
            ConditionalModel::DiscreteTabular(_) => "discrete_tabular",
        }
    }
}

impl<R: Real> ConditionalDensity<R> for ConditionalModel<R> {
    fn log_density(&self, x: R, z: &Covariate<R>) -> Result<R> {
        match self {
            ConditionalModel::GaussianLinear(m) => m.log_density(x, z),
            ConditionalModel::KernelGaussian(m) => m.log_density(x, z),
            ConditionalModel::DiscreteTabular(m) => m.log_density(x, z),
        }
    }

    fn conditional_mean(&self, z: &Covariate<R>) -> Result<R> {
        match self {
            ConditionalModel::GaussianLinear(m) => m.conditional_mean(z),
            ConditionalModel::KernelGaussian(m) => m.conditional_mean(z),
            ConditionalModel::DiscreteTabular(m) => m.conditional_mean(z),
        }
    }

    fn sample<G: Rng + ?Sized>(&self, z: &Covariate<R>, rng: &mut G) -> Result<R> {
        match self {
            ConditionalModel::GaussianLinear(m) => m.sample(z, rng),
            ConditionalModel::KernelGaussian(m) => m.sample(z, rng),
            ConditionalModel::DiscreteTabular(m) => m.sample(z, rng),
        }
    }

    fn normal_row_params(&self, z: &[Covariate<R>]) -> Result<Option<Vec<(R, R)>>> {
        match self {
            ConditionalModel::GaussianLinear(m) => m.normal_row_params(z),
            ConditionalModel::KernelGaussian(m) => m.normal_row_params(z),
            ConditionalModel::DiscreteTabular(m) => m.normal_row_params(z),
        }
    }
}
