//! Scalar abstraction: all numerics are generic over a floating type.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_rational::Rational64;
use num_traits::{Float, FromPrimitive};

/// Floating scalar used throughout the crate: `f32` or `f64`.
pub trait Real:
    Float + FromPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from an `f64` constant.
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable")
    }

    /// Value of an exact rational weight, e.g. `1 - m/2`.
    fn of_rational(r: Rational64) -> Self {
        Self::of(*r.numer() as f64 / *r.denom() as f64)
    }

    /// Value of a small integer.
    fn of_int(n: i64) -> Self {
        Self::of(n as f64)
    }

    /// Lossy conversion to `f64` (for reporting and serialization).
    fn as_f64(self) -> f64 {
        self.to_f64().expect("scalar representable as f64")
    }
}

impl Real for f32 {}
impl Real for f64 {}
