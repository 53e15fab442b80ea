//! Scalar abstraction: all core numerics are generic over `f32`/`f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, ToPrimitive};

/// Floating-point scalar the numeric kernels are written against.
pub trait Scalar:
    Float + FromPrimitive + ToPrimitive + Sum + Debug + Display + Send + Sync + 'static
{
    /// Lossy conversion from `f64`; never fails for finite built-in floats.
    fn from_f64_c(v: f64) -> Self {
        Self::from_f64(v).expect("f64 -> scalar conversion")
    }

    /// Lossy conversion to `f64`.
    fn to_f64_c(self) -> f64 {
        self.to_f64().expect("scalar -> f64 conversion")
    }

    fn from_usize_c(v: usize) -> Self {
        Self::from_usize(v).expect("usize -> scalar conversion")
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

/// Shorthand used throughout the numeric code.
#[inline]
pub fn sc<S: Scalar>(v: f64) -> S {
    S::from_f64_c(v)
}
