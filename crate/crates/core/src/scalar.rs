//! Floating-point abstraction shared by every analytic routine.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst};

/// Real scalar the allocation formulas are evaluated in.
///
/// Implemented for `f32` and `f64`. Tolerances quoted throughout the crate
/// (1e-9, 1e-12) assume `f64`; `f32` instantiations are useful for quick
/// sweeps but only reach single-precision accuracy.
pub trait Scalar: Float + FloatConst + Debug + Display + Sum + Send + Sync + 'static {
    /// Converts an `f64` literal into this scalar.
    fn lit(v: f64) -> Self;

    /// Converts a count (workers, rows) into this scalar.
    fn count(n: u64) -> Self;

    fn to_f64_lossy(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn lit(v: f64) -> Self {
        v as f32
    }

    #[inline]
    fn count(n: u64) -> Self {
        n as f32
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn lit(v: f64) -> Self {
        v
    }

    #[inline]
    fn count(n: u64) -> Self {
        n as f64
    }

    #[inline]
    fn to_f64_lossy(self) -> f64 {
        self
    }
}
