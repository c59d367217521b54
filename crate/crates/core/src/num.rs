//! Scalar abstraction shared by the numerical modules.

use nalgebra as na;
use num_traits as nt;

pub use num_complex::Complex;

/// Real floating-point scalar (`f32` or `f64`) usable for dense complex
/// linear algebra.
pub trait Real:
    Copy + nt::FloatConst + nt::FromPrimitive + nt::ToPrimitive + na::RealField + Send + Sync
{
    /// Converts an `f64` literal into the scalar type.
    #[inline]
    fn lit(value: f64) -> Self {
        <Self as nt::FromPrimitive>::from_f64(value).expect("f64 literal representable")
    }

    /// Machine epsilon of the scalar, as `f64`.
    const EPSILON: f64;

    /// `value` raised to a floor of `1000·ε`, so that tolerances chosen for
    /// `f64` stay meaningful in single precision.
    #[inline]
    fn tol(value: f64) -> Self {
        Self::lit(value.max(1e3 * Self::EPSILON))
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        nt::ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl Real for f32 {
    const EPSILON: f64 = f32::EPSILON as f64;
}

impl Real for f64 {
    const EPSILON: f64 = f64::EPSILON;
}

/// `2^k` in any numeric type with a one.
pub(crate) fn pow2<T: nt::Num + Copy>(k: u32) -> T {
    let two = T::one() + T::one();
    (0..k).fold(T::one(), |acc, _| acc * two)
}

#[inline]
pub(crate) fn c<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub(crate) fn re<T: Real>(value: T) -> Complex<T> {
    Complex::new(value, T::zero())
}
