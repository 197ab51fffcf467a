//! Scalar abstraction shared by the numerical core.
//!
//! Everything in [`crate::countlaw`], [`crate::ecf`], [`crate::estimator`] and
//! [`crate::adaptive`] is generic over [`Real`], which is implemented for `f32`
//! and `f64`. Tolerances quoted in `f64` terms are widened to a small multiple of
//! machine epsilon when the scalar cannot represent them.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, ToPrimitive};

pub trait Real:
    Float + FloatConst + FromPrimitive + ToPrimitive + Sum + Debug + Display + Default + Send + Sync + 'static
{
    /// Converts an `f64` constant into this scalar.
    #[inline]
    fn of(x: f64) -> Self {
        Self::from_f64(x).expect("f64 constant representable in scalar type")
    }

    /// `x` as a tolerance, but never below `16 * epsilon`.
    #[inline]
    fn tol(x: f64) -> Self {
        Self::of(x).max(Self::epsilon() * Self::of(16.0))
    }

    #[inline]
    fn of_usize(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable in scalar type")
    }

    #[inline]
    fn f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// `e^{i theta}`.
#[inline]
pub(crate) fn cis<T: Real>(theta: T) -> Complex<T> {
    let (s, c) = theta.sin_cos();
    Complex::new(c, s)
}

/// Powers `e^{i j step}` for `j = 0..count`, resynchronised against the exact value
/// every [`RESYNC`] steps so that the rounding drift of the recurrence stays bounded.
pub(crate) fn cis_powers<T: Real>(step: T, count: usize) -> Vec<Complex<T>> {
    let mut out = Vec::with_capacity(count);
    let rot = cis(step);
    let mut w = Complex::new(T::one(), T::zero());
    for j in 0..count {
        if j % RESYNC == 0 {
            w = cis(step * T::of_usize(j));
        }
        out.push(w);
        w = w * rot;
    }
    out
}

pub(crate) const RESYNC: usize = 32;
