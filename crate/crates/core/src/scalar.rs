//! Numeric abstraction shared by the similarity and agreement code.
//!
//! Scores are generic over [`Scalar`] so the same routines run in `f32`,
//! `f64`, or exact rational arithmetic. Cosine similarity needs a square
//! root and is therefore bounded on [`num_traits::Float`] instead.

use std::fmt::Debug;

use num_bigint::BigInt;
use num_rational::{BigRational, Ratio};
use num_traits::{Num, ToPrimitive};

/// An ordered field element that can be built from counts.
pub trait Scalar: Num + Clone + PartialOrd + Debug + Send + Sync + 'static {
    fn from_count(n: usize) -> Self;

    /// Lossy conversion used for reporting.
    fn to_f64_lossy(&self) -> f64;

    fn two() -> Self {
        Self::one() + Self::one()
    }
}

impl Scalar for f32 {
    fn from_count(n: usize) -> Self {
        n as f32
    }
    fn to_f64_lossy(&self) -> f64 {
        f64::from(*self)
    }
}

impl Scalar for f64 {
    fn from_count(n: usize) -> Self {
        n as f64
    }
    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Scalar for Ratio<i64> {
    fn from_count(n: usize) -> Self {
        Ratio::from_integer(i64::try_from(n).expect("count fits in i64"))
    }
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for BigRational {
    fn from_count(n: usize) -> Self {
        Ratio::from_integer(BigInt::from(n))
    }
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

/// Floating point scalar: the subset of [`Scalar`] that has `sqrt`.
pub trait Real: Scalar + num_traits::Float {}
impl Real for f32 {}
impl Real for f64 {}
