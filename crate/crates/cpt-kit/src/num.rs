//! Scalar abstraction for the numeric core.
//!
//! Everything that does floating-point work is generic over [`Real`], which
//! is implemented for `f32` and `f64`. The crate root exposes `f64` aliases
//! for the common case; `f32` exists mostly to keep the algorithms honest
//! about precision assumptions.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::AddAssign;

use num_traits::{Float, FromPrimitive, ToPrimitive};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::de::DeserializeOwned;
use serde::Serialize;

/// ln(2π), used by the normal log-density.
pub const LN_TWO_PI: f64 = 1.8378770664093453;

/// Floating-point scalar usable throughout the crate.
pub trait Real:
    Float
    + FromPrimitive
    + ToPrimitive
    + AddAssign
    + Sum
    + Debug
    + Display
    + Serialize
    + DeserializeOwned
    + Send
    + Sync
    + 'static
{
    /// Uniform draw from `[0, 1)`.
    fn uniform<G: Rng + ?Sized>(rng: &mut G) -> Self;

    /// Standard normal draw.
    fn std_normal<G: Rng + ?Sized>(rng: &mut G) -> Self;

    /// Conversion from `f64` for constants and tolerances. Lossy for `f32`.
    fn of(v: f64) -> Self;

    fn ln_two_pi() -> Self {
        Self::of(LN_TWO_PI)
    }
}

impl Real for f64 {
    fn uniform<G: Rng + ?Sized>(rng: &mut G) -> Self {
        rng.gen()
    }

    fn std_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
        rng.sample(StandardNormal)
    }

    fn of(v: f64) -> Self {
        v
    }
}

impl Real for f32 {
    fn uniform<G: Rng + ?Sized>(rng: &mut G) -> Self {
        rng.gen()
    }

    fn std_normal<G: Rng + ?Sized>(rng: &mut G) -> Self {
        rng.sample(StandardNormal)
    }

    fn of(v: f64) -> Self {
        v as f32
    }
}
