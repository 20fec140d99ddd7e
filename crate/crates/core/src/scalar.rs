//! Floating-point scalar abstraction.
//!
//! Every model in this crate is written against [`Scalar`] so the same code
//! runs in `f64` (the reference precision, all accuracy contracts are stated
//! for it) and `f32` (cheap exploratory sweeps).

use std::fmt::{Debug, Display, LowerExp};

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

/// floating point: f32 or f64
pub trait Scalar:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Default
    + Debug
    + Display
    + LowerExp
    + Send
    + Sync
    + 'static
{
    /// Complementary error function.
    fn erfc(self) -> Self;

    /// One draw from N(0, 1).
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self;

    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        // from_f64 never fails for f32/f64 (it rounds or saturates to inf)
        Self::from_f64(x).unwrap()
    }

    /// Lossy conversion to `f64` for reporting.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap()
    }

    /// Converts a count or index.
    #[inline]
    fn from_count(k: usize) -> Self {
        Self::from_usize(k).unwrap()
    }
}

impl Scalar for f64 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfc(self)
    }

    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

impl Scalar for f32 {
    #[inline]
    fn erfc(self) -> Self {
        libm::erfcf(self)
    }

    #[inline]
    fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> Self {
        StandardNormal.sample(rng)
    }
}

/// Upper-tail probability of the standard normal, `Q(x) = P(N(0,1) > x)`.
#[inline]
pub fn q_function<T: Scalar>(x: T) -> T {
    if x.is_nan() {
        return x;
    }
    T::lit(0.5) * (x * T::FRAC_1_SQRT_2()).erfc()
}

/// Standard normal CDF.
#[inline]
pub fn normal_cdf<T: Scalar>(x: T) -> T {
    q_function(-x)
}

/// Standard normal density.
#[inline]
pub fn normal_pdf<T: Scalar>(x: T) -> T {
    let inv_sqrt_2pi = T::FRAC_1_SQRT_2() * T::FRAC_2_SQRT_PI() * T::lit(0.5);
    inv_sqrt_2pi * (-(x * x) * T::lit(0.5)).exp()
}

/// Binary entropy in bits with `0 log 0 = 0`.
pub fn binary_entropy<T: Scalar>(p: T) -> T {
    if p <= T::zero() || p >= T::one() {
        return T::zero();
    }
    let one_minus = T::one() - p;
    -(p * p.log2() + one_minus * one_minus.log2())
}
