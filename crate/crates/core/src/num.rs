//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! Prices, delays, data volumes and forecaster weights are all expressed in
//! a generic `S: Scalar`, so the same code runs in `f32` or `f64`.

use std::fmt::{Debug, Display, LowerExp};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};

pub trait Scalar:
    'static
    + Float
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
{
    /// Lossy conversion from an `f64` literal.
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("f64 literal representable in scalar type")
    }

    fn from_count(v: u64) -> Self {
        Self::from_u64(v).expect("count representable in scalar type")
    }

    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Exact bit-level key for grouping equal scalars.
pub(crate) fn bits_key<S: Scalar>(v: S) -> (u64, i16, i8) {
    v.integer_decode()
}
