//! Scalar abstraction shared by both engines.
//!
//! Everything numeric in the crate is generic over [`Real`], implemented for
//! `f32` and `f64`. The tolerances used throughout the test-suite assume
//! `f64`; `f32` is supported for memory-bound exploratory runs.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

/// Floating-point type usable as the real scalar of the simulator.
pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Default + Debug + Display + Sum + Send + Sync + 'static
{
    /// Converts an `f64` literal into `Self`.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable in scalar type")
    }

    /// Converts `usize` counts (occupation numbers, factorial arguments).
    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("count representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Machine epsilon of the type, used to scale convergence thresholds.
    #[inline]
    fn eps() -> Self {
        <Self as Float>::epsilon()
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Complex amplitude over a [`Real`] scalar.
pub type Cx<T> = Complex<T>;

#[inline]
pub fn cx<T: Real>(re: T, im: T) -> Cx<T> {
    Complex::new(re, im)
}

#[inline]
pub fn re<T: Real>(re: T) -> Cx<T> {
    Complex::new(re, T::zero())
}

/// `-i`, the Schrödinger-equation prefactor.
#[inline]
pub fn minus_i<T: Real>() -> Cx<T> {
    Complex::new(T::zero(), -T::one())
}
