//! Scalar abstraction for the numeric core.
//!
//! Everything numerical in this crate (distributions, clustering, learners,
//! estimators) is generic over [`Scalar`], so the same code runs in `f32`
//! or `f64`. The experiment harness and all file formats are pinned to
//! `f64` through the [`crate::Real`] alias.

use num_traits::{Float, FromPrimitive, NumCast};

/// Floating-point scalar: `f32` or `f64`.
pub trait Scalar:
    Float + FromPrimitive + NumCast + std::fmt::Debug + std::fmt::Display + Send + Sync + 'static
{
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Convert an `f64` constant into the working scalar type.
#[inline]
pub fn c<T: Scalar>(v: f64) -> T {
    T::from(v).expect("f64 constant representable in scalar type")
}

/// Convert the working scalar into `f64` (for reports, serialization, RNG weights).
#[inline]
pub fn to_f64<T: Scalar>(v: T) -> f64 {
    v.to_f64().expect("scalar convertible to f64")
}
