//! Scalar abstraction shared by every numeric routine in the crate.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FromPrimitive, NumAssign, ToPrimitive};
use serde::de::DeserializeOwned;
use serde::Serialize;

/// Floating point type the solvers are written against: `f32` or `f64`.
pub trait Scalar:
    Float
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + Serialize
    + DeserializeOwned
    + 'static
{
    /// Converts an `f64` literal. Every `f64` is representable (possibly rounded) in
    /// the supported types, so this never fails.
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal fits the scalar type")
    }

    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }

    /// Absolute slack used when comparing two values that should be equal up to
    /// accumulated rounding: `max(floor, 64 * machine epsilon)`.
    fn slack(floor: f64) -> Self {
        Self::lit(floor).max(Self::epsilon() * Self::lit(64.0))
    }
}

impl Scalar for f32 {}
impl Scalar for f64 {}

pub(crate) fn from_usize<T: Scalar>(n: usize) -> T {
    T::from_usize(n).expect("usize fits the scalar type")
}

/// True when `v` is a probability vector: nonnegative, finite, sums to 1 within `tol`.
pub fn is_distribution<T: Scalar>(v: &[T], tol: T) -> bool {
    !v.is_empty()
        && v.iter().all(|p| p.is_finite() && *p >= -tol)
        && (v.iter().copied().sum::<T>() - T::one()).abs() <= tol
}

/// Numerically stable softmax of `scale * values`.
pub fn softmax<T: Scalar>(values: &[T], scale: T) -> Vec<T> {
    let max = values
        .iter()
        .map(|v| *v * scale)
        .fold(T::neg_infinity(), T::max);
    let exps: Vec<T> = values.iter().map(|v| (*v * scale - max).exp()).collect();
    let total: T = exps.iter().copied().sum();
    exps.into_iter().map(|e| e / total).collect()
}
