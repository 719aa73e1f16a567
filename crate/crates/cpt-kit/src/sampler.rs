//! Permutation samplers for the CPT, plus i.i.d. copy draws for the CRT.
//!
//! The target law over permutations π of the observed X values is
//!
//! ```text
//! P(π) ∝ q(x_{π(0)}|z_0) · q(x_{π(1)}|z_1) · ... · q(x_{π(n-1)}|z_{n-1})
//! ```
//!
//! Sampling is by a Markov chain whose step draws a uniformly random
//! partition of the indices into ⌊n/2⌋ disjoint pairs and then, independently
//! for each pair, swaps the assigned values with probability
//! `logistic(swap_log_odds)`. The chain is stationary for the target law from
//! any start, so initializing at the observed assignment yields exact draws
//! at any step count; the exchangeable scheme first walks S steps to a hub
//! state and then runs M independent chains of S steps from the hub.
//!
//! All randomness is drawn from keyed substreams, so results do not depend
//! on scheduling or thread count. The chain state is the permutation acting
//! on the observed X vector directly; no rank bookkeeping is materialized.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BoundRows, ConditionalDensity, Covariate};
use crate::num::Real;
use crate::perm::Permutation;
use crate::streams::substream;

/// Largest n for which the exact enumeration sampler will run (8! = 40320).
pub const EXACT_ENUMERATION_LIMIT: usize = 8;

/// Chain parameters shared by the CPT drivers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChainConfig {
    /// Steps per chain segment.
    #[serde(rename = "S", default = "default_steps")]
    pub steps_s: u64,
    /// Number of copies to draw.
    #[serde(rename = "M", default = "default_copies")]
    pub copies_m: usize,
    /// Master seed for every stream the run consumes.
    #[serde(default)]
    pub seed: u64,
}

fn default_steps() -> u64 {
    50
}

fn default_copies() -> usize {
    500
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { steps_s: default_steps(), copies_m: default_copies(), seed: 0 }
    }
}

impl ChainConfig {
    pub fn new(steps_s: u64, copies_m: usize, seed: u64) -> Self {
        ChainConfig { steps_s, copies_m, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.steps_s < 1 {
            return Err(Error::InvalidConfig("S must be >= 1".into()));
        }
        if self.copies_m < 1 {
            return Err(Error::InvalidConfig("M must be >= 1".into()));
        }
        Ok(())
    }
}

/// Keyed stream of randomness for one chain.
///
/// `scope` distinguishes chains run under the same master seed (the hub
/// chain uses scope 0, copy m uses scope m). Partition draws and per-pair
/// swap decisions are further keyed by step and pair index, making the
/// decisions independent of evaluation order.
#[derive(Clone, Copy, Debug)]
pub struct ChainStream {
    seed: u64,
    scope: u64,
}

const PARTITION_WORD: u64 = u64::MAX;
const CRT_WORD: u64 = 0x4352_5400;

impl ChainStream {
    pub fn new(seed: u64, scope: u64) -> Self {
        ChainStream { seed, scope }
    }

    fn partition_rng(&self, step: u64) -> ChaCha8Rng {
        substream(self.seed, &[self.scope, step, PARTITION_WORD])
    }

    fn decision_rng(&self, step: u64, pair: u64) -> ChaCha8Rng {
        substream(self.seed, &[self.scope, step, pair])
    }
}

/// Numerically stable logistic function 1/(1+e^{-t}).
pub fn logistic<R: Real>(t: R) -> R {
    if t >= R::zero() {
        R::one() / (R::one() + (-t).exp())
    } else {
        let e = t.exp();
        e / (R::one() + e)
    }
}

/// Log odds of swapping the values xi (at zi) and xj (at zj):
///
/// ```text
/// log[q(xj|zi) q(xi|zj)] - log[q(xi|zi) q(xj|zj)]
/// ```
///
/// Antisymmetric under exchanging xi and xj. Returns ±∞ when exactly one
/// side has zero density, and 0 when both do (or when xi == xj, where the
/// swap is a no-op).
pub fn swap_log_odds<R: Real, Mo: ConditionalDensity<R>>(
    model: &Mo,
    xi: R,
    xj: R,
    zi: &Covariate<R>,
    zj: &Covariate<R>,
) -> Result<R> {
    if xi == xj {
        return Ok(R::zero());
    }
    let swapped = model.log_density(xj, zi)? + model.log_density(xi, zj)?;
    let current = model.log_density(xi, zi)? + model.log_density(xj, zj)?;
    if swapped == R::neg_infinity() && current == R::neg_infinity() {
        return Ok(R::zero());
    }
    Ok(swapped - current)
}

/// `swap_log_odds` against a bound covariate sequence (rows i and j).
fn swap_log_odds_rows<R: Real, Mo: ConditionalDensity<R>>(
    bound: &BoundRows<'_, R, Mo>,
    xi: R,
    xj: R,
    i: usize,
    j: usize,
) -> Result<R> {
    if xi == xj {
        return Ok(R::zero());
    }
    let swapped = bound.log_density(i, xj)? + bound.log_density(j, xi)?;
    let current = bound.log_density(i, xi)? + bound.log_density(j, xj)?;
    if swapped == R::neg_infinity() && current == R::neg_infinity() {
        return Ok(R::zero());
    }
    Ok(swapped - current)
}

fn check_rows<R: Real>(x: &[R], z: &[Covariate<R>]) -> Result<usize> {
    if x.len() != z.len() {
        return Err(Error::InvalidData(format!(
            "x has {} entries but z has {}",
            x.len(),
            z.len()
        )));
    }
    Ok(x.len())
}

/// One step of the parallelized pairwise chain.
///
/// Draws a uniformly random partition of `{0..n-1}` into ⌊n/2⌋ disjoint
/// pairs (one index stays unpaired when n is odd), then for each pair
/// independently swaps the currently assigned values with probability
/// `logistic(swap_log_odds)`.
pub fn pairwise_step<R: Real, Mo: ConditionalDensity<R>>(
    perm: &Permutation,
    x: &[R],
    z: &[Covariate<R>],
    model: &Mo,
    stream: &ChainStream,
    step: u64,
) -> Result<Permutation> {
    check_chain_inputs(perm, x, z)?;
    pairwise_step_bound(perm, x, &model.bind_rows(z)?, stream, step)
}

fn check_chain_inputs<R: Real>(perm: &Permutation, x: &[R], z: &[Covariate<R>]) -> Result<usize> {
    let n = check_rows(x, z)?;
    if n < 2 {
        return Err(Error::TooFewObservations { n, min: 2 });
    }
    if perm.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: perm.len() });
    }
    Ok(n)
}

pub(crate) fn pairwise_step_bound<R: Real, Mo: ConditionalDensity<R>>(
    perm: &Permutation,
    x: &[R],
    bound: &BoundRows<'_, R, Mo>,
    stream: &ChainStream,
    step: u64,
) -> Result<Permutation> {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut stream.partition_rng(step));

    let assigned = perm.as_slice();
    let mut next = perm.clone();
    for k in 0..n / 2 {
        let i = order[2 * k];
        let j = order[2 * k + 1];
        // Pairs are disjoint, so every decision sees the start-of-step state.
        let odds = swap_log_odds_rows(bound, x[assigned[i]], x[assigned[j]], i, j)?;
        let accept = logistic(odds);
        let u = R::uniform(&mut stream.decision_rng(step, k as u64));
        if u < accept {
            next.swap(i, j);
        }
    }
    Ok(next)
}

/// Compose `steps_s` pairwise steps; `steps_s = 0` returns the start state.
pub fn run_chain<R: Real, Mo: ConditionalDensity<R>>(
    perm0: &Permutation,
    x: &[R],
    z: &[Covariate<R>],
    model: &Mo,
    steps_s: u64,
    stream: &ChainStream,
) -> Result<Permutation> {
    if steps_s == 0 {
        return Ok(perm0.clone());
    }
    check_chain_inputs(perm0, x, z)?;
    let bound = model.bind_rows(z)?;
    run_chain_bound(perm0, x, &bound, steps_s, stream)
}

pub(crate) fn run_chain_bound<R: Real, Mo: ConditionalDensity<R>>(
    perm0: &Permutation,
    x: &[R],
    bound: &BoundRows<'_, R, Mo>,
    steps_s: u64,
    stream: &ChainStream,
) -> Result<Permutation> {
    let mut perm = perm0.clone();
    for step in 1..=steps_s {
        perm = pairwise_step_bound(&perm, x, bound, stream, step)?;
    }
    Ok(perm)
}

/// Hub state plus the M copies drawn from it.
#[derive(Clone, Debug)]
pub struct ExchangeableDraws {
    pub hub: Permutation,
    pub copies: Vec<Permutation>,
}

/// Exchangeable multi-draw sampler.
///
/// Runs one chain of S steps from the observed assignment (the identity
/// permutation) to reach the hub state, then M independent chains of S
/// steps each from the hub. Each chain segment consumes an independent
/// keyed substream, so the copies may be generated in parallel.
pub fn exchangeable_draws_detailed<R, Mo>(
    x: &[R],
    z: &[Covariate<R>],
    model: &Mo,
    config: &ChainConfig,
) -> Result<ExchangeableDraws>
where
    R: Real,
    Mo: ConditionalDensity<R> + Sync,
{
    let n = check_rows(x, z)?;
    if n < 2 {
        return Err(Error::TooFewObservations { n, min: 2 });
    }
    let bound = model.bind_rows(z)?;
    let hub = run_chain_bound(
        &Permutation::identity(n),
        x,
        &bound,
        config.steps_s,
        &ChainStream::new(config.seed, 0),
    )?;
    let copies = (1..=config.copies_m as u64)
        .into_par_iter()
        .map(|m| {
            run_chain_bound(&hub, x, &bound, config.steps_s, &ChainStream::new(config.seed, m))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ExchangeableDraws { hub, copies })
}

/// The M exchangeable permutation draws (see [`exchangeable_draws_detailed`]).
pub fn exchangeable_draws<R, Mo>(
    x: &[R],
    z: &[Covariate<R>],
    model: &Mo,
    config: &ChainConfig,
) -> Result<Vec<Permutation>>
where
    R: Real,
    Mo: ConditionalDensity<R> + Sync,
{
    Ok(exchangeable_draws_detailed(x, z, model, config)?.copies)
}

/// The exact permutation law for small n, by full enumeration.
#[derive(Clone, Debug)]
pub struct CptDistribution<R> {
    perms: Vec<Permutation>,
    log_weights: Vec<R>,
    probs: Vec<R>,
}

impl<R: Real> CptDistribution<R> {
    /// Permutations in lexicographic order.
    pub fn perms(&self) -> &[Permutation] {
        &self.perms
    }

    pub fn probs(&self) -> &[R] {
        &self.probs
    }

    pub fn log_weights(&self) -> &[R] {
        &self.log_weights
    }

    pub fn prob_of(&self, perm: &Permutation) -> Option<R> {
        self.perms.iter().position(|p| p == perm).map(|i| self.probs[i])
    }

    /// One draw by inverse CDF over the enumerated table.
    pub fn sample<G: Rng + ?Sized>(&self, rng: &mut G) -> Permutation {
        let u = R::uniform(rng);
        let mut cum = R::zero();
        for (perm, &p) in self.perms.iter().zip(&self.probs) {
            cum += p;
            if u < cum {
                return perm.clone();
            }
        }
        self.perms.last().expect("nonempty state space").clone()
    }
}

/// Enumerate S_n and normalize the log-weights Σ_i log q(x_{π(i)}|z_i) by
/// stable softmax. Limited to n ≤ 8.
pub fn exact_cpt_distribution<R: Real, Mo: ConditionalDensity<R>>(
    x: &[R],
    z: &[Covariate<R>],
    model: &Mo,
) -> Result<CptDistribution<R>> {
    use itertools::Itertools;

    let n = check_rows(x, z)?;
    if n == 0 {
        return Err(Error::InvalidData("empty data".into()));
    }
    if n > EXACT_ENUMERATION_LIMIT {
        return Err(Error::EnumerationLimit {
            detail: format!("n = {n} exceeds exact sampler limit {EXACT_ENUMERATION_LIMIT}"),
        });
    }

    let bound = model.bind_rows(z)?;
    let mut perms = Vec::new();
    let mut log_weights = Vec::new();
    for mapping in (0..n).permutations(n) {
        let mut lw = R::zero();
        for (i, &src) in mapping.iter().enumerate() {
            lw += bound.log_density(i, x[src])?;
        }
        perms.push(Permutation::from_vec(mapping).expect("valid permutation"));
        log_weights.push(lw);
    }

    let max = log_weights
        .iter()
        .copied()
        .fold(R::neg_infinity(), R::max);
    if max == R::neg_infinity() {
        return Err(Error::InvalidData(
            "every permutation has zero density under the model".into(),
        ));
    }
    let weights: Vec<R> = log_weights.iter().map(|&lw| (lw - max).exp()).collect();
    let total: R = weights.iter().copied().sum();
    let probs = weights.iter().map(|&w| w / total).collect();
    Ok(CptDistribution { perms, log_weights, probs })
}

/// One exact draw from the permutation law (n ≤ 8).
pub fn exact_cpt_sampler<R: Real, Mo: ConditionalDensity<R>, G: Rng + ?Sized>(
    x: &[R],
    z: &[Covariate<R>],
    model: &Mo,
    rng: &mut G,
) -> Result<Permutation> {
    Ok(exact_cpt_distribution(x, z, model)?.sample(rng))
}

/// M independent CRT copies; entry i of each copy is drawn from Q(·|z_i).
///
/// Copies are keyed by index, so the output is identical however the loop
/// is scheduled.
pub fn crt_draws<R, Mo>(
    z: &[Covariate<R>],
    model: &Mo,
    copies_m: usize,
    seed: u64,
) -> Result<Vec<Vec<R>>>
where
    R: Real,
    Mo: ConditionalDensity<R> + Sync,
{
    (0..copies_m as u64)
        .into_par_iter()
        .map(|m| {
            let mut rng = substream(seed, &[CRT_WORD, m]);
            z.iter().map(|zi| model.sample(zi, &mut rng)).collect::<Result<Vec<R>>>()
        })
        .collect()
}
