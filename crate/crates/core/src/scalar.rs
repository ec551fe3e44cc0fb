//! Scalar abstraction for the analytic layer.
//!
//! Closed-form moment functions, trawl values, series tails and limit-law
//! descriptors are written once over [`Scalar`], so they can be evaluated in
//! `f32`, `f64`, or any other float type implementing the num-traits stack.
//! Quantities that only need field arithmetic (the asymptotic constants) are
//! generic over [`Field`] and therefore also work with exact rationals.

use std::fmt::{Debug, Display};

use num_traits::{Float, FloatConst, FromPrimitive, Num, NumAssignOps, ToPrimitive};

/// Floating point scalar used by the analytic routines.
pub trait Scalar:
    Float + FloatConst + FromPrimitive + ToPrimitive + NumAssignOps + Debug + Display + Send + Sync + 'static
{
    /// Converts an `f64` literal. Panics only if the literal is not representable at all.
    #[inline]
    fn lit(x: f64) -> Self {
        <Self as FromPrimitive>::from_f64(x).expect("literal representable in scalar type")
    }

    #[inline]
    fn from_index(j: u64) -> Self {
        <Self as FromPrimitive>::from_u64(j).expect("index representable in scalar type")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        ToPrimitive::to_f64(&self).unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where
    T: Float + FloatConst + FromPrimitive + ToPrimitive + NumAssignOps + Debug + Display + Send + Sync + 'static
{
}

/// Ordered field: enough structure for the rational-valued constants.
pub trait Field: Num + PartialOrd + Clone + Debug {}

impl<T> Field for T where T: Num + PartialOrd + Clone + Debug {}
