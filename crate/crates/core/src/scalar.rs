//! Scalar abstraction shared by the map, orbit and flow code.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating point scalar the map arithmetic is generic over (`f32` or `f64`).
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar.
    #[inline]
    fn lit(v: f64) -> Self {
        Self::from_f64(v).expect("finite literal")
    }

    #[inline]
    fn half() -> Self {
        Self::lit(0.5)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Reduces `x` to `[-1/2, 1/2]` modulo one. Exact in floating point.
#[inline]
pub fn frac_centered<T: Real>(x: T) -> T {
    x - x.round()
}

/// `sin(2πx)` with the argument reduced mod 1 before scaling by 2π, so the
/// result keeps full accuracy for coordinates far from the origin.
#[inline]
pub fn sin_turns<T: Real>(x: T) -> T {
    (T::TAU() * frac_centered(x)).sin()
}

/// `cos(2πx)`, reduced like [`sin_turns`].
#[inline]
pub fn cos_turns<T: Real>(x: T) -> T {
    (T::TAU() * frac_centered(x)).cos()
}
