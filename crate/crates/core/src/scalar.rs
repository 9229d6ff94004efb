//! Scalar abstractions.
//!
//! Numerical code is written against [`Real`], which `f32` and `f64` satisfy.
//! Closed-form constants that are rational for rational input are written
//! against [`Field`], which additionally admits [`Rational`].

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, Num, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point scalar: `f32` or `f64`.
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
}

impl Real for f32 {}
impl Real for f64 {}

/// Exact or floating field used by closed-form constant formulas.
pub trait Field: Num + Clone + FromPrimitive + PartialOrd + Debug {}

impl<T> Field for T where T: Num + Clone + FromPrimitive + PartialOrd + Debug {}

/// Exact rational arithmetic for closed forms.
pub type Rational = num_rational::Ratio<i64>;

/// Converts an `f64` literal into `T`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::from_f64(x).expect("literal representable in scalar type")
}

/// `num / den` in any field.
#[inline]
pub fn frac<F: Field>(num: i64, den: i64) -> F {
    F::from_i64(num).expect("integer representable")
        / F::from_i64(den).expect("integer representable")
}

#[inline]
pub(crate) fn to_f64<T: Real>(x: T) -> f64 {
    x.to_f64().unwrap_or(f64::NAN)
}

/// The coefficient `n(n-4)/4` of the classical Rellich inequality in
/// dimension three, `-3/4`. Every use of this constant goes through here.
pub fn rellich_coefficient<F: Field>() -> F {
    let n: i64 = 3;
    frac(n * (n - 4), 4)
}

/// Critical value of the radial symbol, `z(z+1)` at `z = 1/2`: `3/4`.
pub fn critical_symbol<F: Field>() -> F {
    F::zero() - rellich_coefficient::<F>()
}
