//! Robustness and mixing diagnostics.
//!
//! Robustness: the excess Type I error of both tests under a misspecified
//! model is bounded by the total variation distance between the true and
//! assumed product laws over the X vector. For Gaussian models that TV has
//! no closed form, so the diagnostic reports the Pinsker upper bound
//! `sqrt(KL/2)` from the per-observation KL sum; for discrete tabular
//! models the product-law TV is computed exactly by enumeration, which is
//! honest about what is a bound and what is a value.
//!
//! Mixing: chain traces record the assigned-vector log-likelihood and the
//! correlation with the observed data at every step; for n <= 4 the exact
//! one-step transition matrix of the pairwise sampler is assembled so its
//! detailed-balance and stationarity properties can be checked directly.

use std::collections::HashSet;
use std::io::Write;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::inference::pearson_corr;
use crate::model::{BoundRows, ConditionalDensity, Covariate, DiscreteTabularModel, GaussianLinearModel};
use crate::num::Real;
use crate::perm::Permutation;
use crate::sampler::{logistic, pairwise_step, swap_log_odds, ChainStream};

/// KL divergence between N(mu_star, s2_star) and N(mu_hat, s2_hat):
///
/// ```text
/// log(sigma_hat/sigma_star) + s2_star/(2 s2_hat) - 1/2
///   + (mu_hat - mu_star)^2 / (2 s2_hat)
/// ```
pub fn gaussian_kl<R: Real>(mu_star: R, s2_star: R, mu_hat: R, s2_hat: R) -> Result<R> {
    if !(s2_star > R::zero()) || !(s2_hat > R::zero()) {
        return Err(Error::InvalidData("variances must be strictly positive".into()));
    }
    let half = R::of(0.5);
    let dm = mu_hat - mu_star;
    Ok(half * (s2_hat / s2_star).ln() + s2_star / (R::of(2.0) * s2_hat) - half
        + dm * dm / (R::of(2.0) * s2_hat))
}

/// Pinsker bound sqrt(kl_sum / 2) on the total variation distance between
/// the product laws. Values above 1 are vacuous but returned as computed.
pub fn pinsker_tv_bound<R: Real>(kl_sum: R) -> Result<R> {
    if !(kl_sum >= R::zero()) {
        return Err(Error::InvalidData(format!("KL sum must be >= 0, got {kl_sum}")));
    }
    Ok((kl_sum / R::of(2.0)).sqrt())
}

/// Per-observation KL sum and Pinsker TV bound for two Gaussian linear
/// models evaluated at the observed covariate rows.
pub fn gaussian_linear_pinsker<R: Real>(
    star: &GaussianLinearModel<R>,
    hat: &GaussianLinearModel<R>,
    z: &[Covariate<R>],
) -> Result<(R, R)> {
    let mut kl_sum = R::zero();
    for zi in z {
        let mu_star = star.conditional_mean(zi)?;
        let mu_hat = hat.conditional_mean(zi)?;
        kl_sum += gaussian_kl(mu_star, star.sigma2(), mu_hat, hat.sigma2())?;
    }
    Ok((kl_sum, pinsker_tv_bound(kl_sum)?))
}

/// Total variation distance between two finite distributions, with the
/// maximizing event.
#[derive(Clone, Debug, PartialEq)]
pub struct TvResult<R> {
    /// 0.5 * sum_k |p_k - q_k|.
    pub tv: R,
    /// The maximizing set A = {k : p_k > q_k}.
    pub maximizing_set: Vec<usize>,
}

fn check_probability_vector<R: Real>(p: &[R]) -> Result<()> {
    if p.is_empty() {
        return Err(Error::InvalidData("empty probability vector".into()));
    }
    if p.iter().any(|&v| !(v >= R::zero()) || !v.is_finite()) {
        return Err(Error::InvalidData("negative or non-finite probability".into()));
    }
    let sum: R = p.iter().copied().sum();
    if (sum - R::one()).abs() > R::of(1e-9) {
        return Err(Error::InvalidData(format!("probabilities sum to {sum}, not 1")));
    }
    Ok(())
}

/// Exact TV between two probability vectors of equal length.
pub fn discrete_tv<R: Real>(p: &[R], q: &[R]) -> Result<TvResult<R>> {
    if p.len() != q.len() {
        return Err(Error::DimensionMismatch { expected: p.len(), got: q.len() });
    }
    check_probability_vector(p)?;
    check_probability_vector(q)?;
    let half = R::of(0.5);
    let mut tv = R::zero();
    let mut set = Vec::new();
    for (k, (&pk, &qk)) in p.iter().zip(q).enumerate() {
        tv += half * (pk - qk).abs();
        if pk > qk {
            set.push(k);
        }
    }
    Ok(TvResult { tv, maximizing_set: set })
}

/// Exact TV between two product laws over X^n, by outcome enumeration.
///
/// Outcomes are encoded in mixed radix over the shared support: outcome
/// `(i_0, .., i_{n-1})` has code `sum_r i_r * k^r` for support size k.
#[derive(Clone, Debug)]
pub struct ProductTv<R> {
    /// d_TV(Q*^n, Q^n), exactly.
    pub tv: R,
    /// Probability of the maximizing set under the true product law.
    pub q_star_mass: R,
    /// Probability of the maximizing set under the assumed product law.
    pub q_hat_mass: R,
    support_size: usize,
    rows: usize,
    a_codes: HashSet<u64>,
}

impl<R: Real> ProductTv<R> {
    /// Membership of an outcome (as support indices) in the maximizing set.
    pub fn contains(&self, outcome: &[usize]) -> bool {
        self.encode(outcome).is_some_and(|code| self.a_codes.contains(&code))
    }

    pub fn encode(&self, outcome: &[usize]) -> Option<u64> {
        if outcome.len() != self.rows || outcome.iter().any(|&i| i >= self.support_size) {
            return None;
        }
        let mut code = 0u64;
        for &i in outcome.iter().rev() {
            code = code * self.support_size as u64 + i as u64;
        }
        Some(code)
    }

    /// Codes of the maximizing set, sorted.
    pub fn maximizing_codes(&self) -> Vec<u64> {
        let mut codes: Vec<u64> = self.a_codes.iter().copied().collect();
        codes.sort_unstable();
        codes
    }
}

/// Enumeration cap for [`product_tv_discrete`]: support^n <= 2^20.
pub const PRODUCT_ENUMERATION_LIMIT: u64 = 1 << 20;

/// Exact TV between the product laws of two tabular models over the given
/// covariate labels, together with the maximizing set A(Z).
pub fn product_tv_discrete<R: Real>(
    model_star: &DiscreteTabularModel<R>,
    model_hat: &DiscreteTabularModel<R>,
    z_labels: &[String],
) -> Result<ProductTv<R>> {
    if model_star.support() != model_hat.support() {
        return Err(Error::InvalidModel(
            "product TV requires models on the same support".into(),
        ));
    }
    let k = model_star.support().len() as u64;
    let n = z_labels.len();
    if n == 0 {
        return Err(Error::InvalidData("no covariate labels".into()));
    }
    let mut outcomes = 1u64;
    for _ in 0..n {
        outcomes = outcomes
            .checked_mul(k)
            .filter(|&o| o <= PRODUCT_ENUMERATION_LIMIT)
            .ok_or_else(|| Error::EnumerationLimit {
                detail: format!(
                    "support^n = {k}^{n} exceeds {PRODUCT_ENUMERATION_LIMIT}"
                ),
            })?;
    }

    let star_rows: Vec<&[R]> = z_labels
        .iter()
        .map(|l| model_star.row(l))
        .collect::<Result<_>>()?;
    let hat_rows: Vec<&[R]> = z_labels
        .iter()
        .map(|l| model_hat.row(l))
        .collect::<Result<_>>()?;

    let half = R::of(0.5);
    let mut tv = R::zero();
    let mut q_star_mass = R::zero();
    let mut q_hat_mass = R::zero();
    let mut a_codes = HashSet::new();
    for code in 0..outcomes {
        let mut rest = code;
        let mut p_star = R::one();
        let mut p_hat = R::one();
        for row in 0..n {
            let digit = (rest % k) as usize;
            rest /= k;
            p_star = p_star * star_rows[row][digit];
            p_hat = p_hat * hat_rows[row][digit];
        }
        tv += half * (p_star - p_hat).abs();
        if p_star > p_hat {
            a_codes.insert(code);
            q_star_mass += p_star;
            q_hat_mass += p_hat;
        }
    }
    Ok(ProductTv {
        tv,
        q_star_mass,
        q_hat_mass,
        support_size: k as usize,
        rows: n,
        a_codes,
    })
}

/// Per-step trace of one pairwise chain started at the observed assignment.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainTrace<R> {
    /// sum_i log q(x_{pi(i)} | z_i) at steps 0..=S.
    pub loglik: Vec<R>,
    /// Corr(x, x_pi) at steps 0..=S; NaN when x has zero variance.
    pub corr_with_original: Vec<R>,
}

impl<R: Real> ChainTrace<R> {
    pub fn steps(&self) -> usize {
        self.loglik.len().saturating_sub(1)
    }

    /// Emit as CSV with header `step,loglik,corr`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "step,loglik,corr").map_err(|e| Error::InvalidData(e.to_string()))?;
        for (s, (ll, c)) in self.loglik.iter().zip(&self.corr_with_original).enumerate() {
            writeln!(out, "{s},{ll},{c}").map_err(|e| Error::InvalidData(e.to_string()))?;
        }
        Ok(())
    }
}

fn assigned_loglik<R: Real, Mo: ConditionalDensity<R>>(
    perm: &Permutation,
    x: &[R],
    bound: &BoundRows<'_, R, Mo>,
) -> Result<R> {
    let mut total = R::zero();
    for (i, &src) in perm.as_slice().iter().enumerate() {
        total += bound.log_density(i, x[src])?;
    }
    Ok(total)
}

/// Run the pairwise chain from the observed assignment for `steps` steps,
/// recording the log-likelihood and Corr(x, x_pi) at every step.
pub fn chain_trace<R: Real, Mo: ConditionalDensity<R>>(
    x: &[R],
    z: &[Covariate<R>],
    model: &Mo,
    steps: u64,
    stream: &ChainStream,
) -> Result<ChainTrace<R>> {
    let bound = model.bind_rows(z)?;
    let mut perm = Permutation::identity(x.len());
    let mut loglik = Vec::with_capacity(steps as usize + 1);
    let mut corr = Vec::with_capacity(steps as usize + 1);
    let record = |perm: &Permutation, loglik: &mut Vec<R>, corr: &mut Vec<R>| -> Result<()> {
        loglik.push(assigned_loglik(perm, x, &bound)?);
        let c = match pearson_corr(x, &perm.apply(x)) {
            Ok(c) => c,
            Err(Error::DegenerateStatistic(_)) => R::nan(),
            Err(e) => return Err(e),
        };
        corr.push(c);
        Ok(())
    };
    record(&perm, &mut loglik, &mut corr)?;
    for step in 1..=steps {
        perm = pairwise_step(&perm, x, z, model, stream, step)?;
        record(&perm, &mut loglik, &mut corr)?;
    }
    Ok(ChainTrace { loglik, corr_with_original: corr })
}

/// Lag-1 autocorrelation of a series; None when the series is too short or
/// has zero variance.
pub fn lag1_autocorrelation<R: Real>(series: &[R]) -> Option<R> {
    let n = series.len();
    if n < 3 {
        return None;
    }
    let count = R::of(n as f64);
    let mean = series.iter().copied().sum::<R>() / count;
    let mut denom = R::zero();
    for &v in series {
        let d = v - mean;
        denom += d * d;
    }
    if denom == R::zero() {
        return None;
    }
    let mut num = R::zero();
    for w in series.windows(2) {
        num += (w[0] - mean) * (w[1] - mean);
    }
    Some(num / denom)
}

/// Exact one-step transition kernel of the pairwise sampler over S_n.
#[derive(Clone, Debug)]
pub struct TransitionMatrix<R> {
    /// States in lexicographic order.
    pub states: Vec<Permutation>,
    /// Row-stochastic transition probabilities.
    pub probs: Vec<Vec<R>>,
}

impl<R: Real> TransitionMatrix<R> {
    pub fn index_of(&self, perm: &Permutation) -> Option<usize> {
        self.states.iter().position(|p| p == perm)
    }
}

/// Enumeration cap for [`transition_matrix`].
pub const TRANSITION_MATRIX_LIMIT: usize = 4;

/// All partitions of {0..n-1} into floor(n/2) disjoint pairs (one element
/// left unpaired when n is odd), the uniform partition family the sampler
/// draws from.
fn pair_partitions(n: usize) -> Vec<Vec<(usize, usize)>> {
    fn perfect(elems: &[usize]) -> Vec<Vec<(usize, usize)>> {
        if elems.len() < 2 {
            return vec![Vec::new()];
        }
        let first = elems[0];
        let mut out = Vec::new();
        for k in 1..elems.len() {
            let partner = elems[k];
            let rest: Vec<usize> = elems[1..]
                .iter()
                .copied()
                .filter(|&e| e != partner)
                .collect();
            for mut tail in perfect(&rest) {
                tail.insert(0, (first, partner));
                out.push(tail);
            }
        }
        out
    }

    let all: Vec<usize> = (0..n).collect();
    if n.is_multiple_of(2) {
        perfect(&all)
    } else {
        let mut out = Vec::new();
        for unpaired in 0..n {
            let rest: Vec<usize> = all.iter().copied().filter(|&e| e != unpaired).collect();
            out.extend(perfect(&rest));
        }
        out
    }
}

/// Assemble the exact transition matrix: the uniform average over pair
/// partitions of the product-of-independent-Bernoulli swap kernel.
/// Limited to n <= 4 (matrix size n! x n!).
pub fn transition_matrix<R: Real, Mo: ConditionalDensity<R>>(
    x: &[R],
    z: &[Covariate<R>],
    model: &Mo,
) -> Result<TransitionMatrix<R>> {
    use itertools::Itertools;

    let n = x.len();
    if z.len() != n {
        return Err(Error::InvalidData("x and z lengths differ".into()));
    }
    if n < 2 {
        return Err(Error::TooFewObservations { n, min: 2 });
    }
    if n > TRANSITION_MATRIX_LIMIT {
        return Err(Error::EnumerationLimit {
            detail: format!("n = {n} exceeds transition matrix limit {TRANSITION_MATRIX_LIMIT}"),
        });
    }

    let states: Vec<Permutation> = (0..n)
        .permutations(n)
        .map(|m| Permutation::from_vec(m).expect("valid permutation"))
        .collect();
    let index: std::collections::HashMap<Vec<usize>, usize> = states
        .iter()
        .enumerate()
        .map(|(i, p)| (p.as_slice().to_vec(), i))
        .collect();

    let partitions = pair_partitions(n);
    let partition_weight = R::one() / R::of(partitions.len() as f64);
    let mut probs = vec![vec![R::zero(); states.len()]; states.len()];

    for (si, state) in states.iter().enumerate() {
        let assigned = state.as_slice();
        for partition in &partitions {
            let betas: Vec<R> = partition
                .iter()
                .map(|&(i, j)| {
                    Ok(logistic(swap_log_odds(
                        model,
                        x[assigned[i]],
                        x[assigned[j]],
                        &z[i],
                        &z[j],
                    )?))
                })
                .collect::<Result<_>>()?;
            for subset in 0u32..(1 << partition.len()) {
                let mut prob = partition_weight;
                let mut target = state.clone();
                for (k, &(i, j)) in partition.iter().enumerate() {
                    if subset & (1 << k) != 0 {
                        prob = prob * betas[k];
                        target.swap(i, j);
                    } else {
                        prob = prob * (R::one() - betas[k]);
                    }
                }
                let ti = index[target.as_slice()];
                probs[si][ti] += prob;
            }
        }
    }
    Ok(TransitionMatrix { states, probs })
}

/// Stationary distribution of a small transition matrix, by repeated
/// squaring of the kernel (any row of P^(2^60)).
pub fn stationary_distribution<R: Real>(matrix: &TransitionMatrix<R>) -> Vec<R> {
    let n = matrix.states.len();
    let mut power = matrix.probs.clone();
    for _ in 0..60 {
        let mut next = vec![vec![R::zero(); n]; n];
        for r in 0..n {
            for k in 0..n {
                let prk = power[r][k];
                if prk == R::zero() {
                    continue;
                }
                for c in 0..n {
                    next[r][c] += prk * power[k][c];
                }
            }
        }
        power = next;
    }
    let row = &power[0];
    let total: R = row.iter().copied().sum();
    row.iter().map(|&v| v / total).collect()
}
