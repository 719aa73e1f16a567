//! Conditional independence testing for H0: X ⊥ Y | Z.
//!
//! The crate implements two resampling tests built on an estimate Q(·|z) of
//! the conditional law of X given Z:
//!
//! * the **conditional randomization test (CRT)**, which draws fresh copies
//!   of the X vector from Q(·|Z);
//! * the **conditional permutation test (CPT)**, which redistributes the
//!   observed X values over the observations by sampling permutations with
//!   probability proportional to the product conditional density.
//!
//! The CPT permutation law is sampled with a parallelized pairwise Markov
//! chain and an exchangeable multi-draw scheme, with an exact enumeration
//! sampler for small n. Supporting modules provide test statistics and
//! Monte Carlo p-values, robustness and mixing diagnostics, model fitting
//! from data, and a config-driven simulation harness.
//!
//! The numeric core is generic over the scalar type via [`num::Real`]
//! (`f32` or `f64`); the aliases at the crate root fix `f64`, which is what
//! the CLI and the experiment harness use.

// Comparisons are written in negated form (`!(x > 0)`) where NaN must fail
// the check; `x <= 0` would accept it.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
// Small dense linear algebra reads better with explicit index loops.
#![allow(clippy::needless_range_loop)]
#![allow(clippy::enum_variant_names)]

pub mod data;
pub mod diagnostics;
pub mod error;
pub mod experiments;
pub mod inference;
pub mod model;
pub mod num;
pub mod perm;
pub mod sampler;
pub mod streams;

pub use error::{Error, Result};
pub use inference::Method;
pub use num::Real;
pub use perm::Permutation;
pub use sampler::{ChainConfig, ChainStream};

/// Double-precision aliases for the generic core types.
pub type Covariate = model::Covariate<f64>;
pub type Response = model::Response<f64>;
pub type Dataset = model::Dataset<f64>;
pub type GaussianLinearModel = model::GaussianLinearModel<f64>;
pub type KernelGaussianModel = model::KernelGaussianModel<f64>;
pub type DiscreteTabularModel = model::DiscreteTabularModel<f64>;
pub type ConditionalModel = model::ConditionalModel<f64>;
pub type TestResult = inference::TestResult<f64>;
pub type ChainTrace = diagnostics::ChainTrace<f64>;
pub type UnlabeledSet = data::UnlabeledSet<f64>;
pub type RideRecord = data::RideRecord<f64>;
