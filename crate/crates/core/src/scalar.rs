//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive};

/// Real scalar the library is generic over: `f32` or `f64`.
pub trait Real:
    Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

impl<T> Real for T where
    T: Float + FloatConst + FromPrimitive + Debug + Display + Default + Send + Sync + 'static
{
}

/// Converts an `f64` constant into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("constant representable in scalar type")
}

/// Converts `T` into `f64` for reporting.
#[inline]
pub fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// Number of significant decimal digits carried by `T`.
pub fn significant_digits<T: Real>() -> T {
    -T::epsilon().log10()
}

/// Scales a tolerance quoted for `f64` to the precision of `T`.
///
/// For `f64` this is the identity; coarser types get the tolerance inflated by
/// the square root of the epsilon ratio, never below the quoted value.
pub fn tolerance<T: Real>(f64_tol: f64) -> T {
    let ratio = to_f64(T::epsilon()) / f64::EPSILON;
    lit(f64_tol * ratio.sqrt().max(1.0))
}

/// Largest modulus an orbit may reach before products of coordinates overflow.
pub fn escape_radius<T: Real>() -> T {
    T::max_value().sqrt().sqrt()
}
