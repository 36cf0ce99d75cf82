//! Scalar abstraction shared by every numeric routine in the crate.
//!
//! The matrix, generator, composition and divergence code is written once
//! against [`Scalar`] and instantiated for `f32`, `f64` and the
//! double-double [`TwoFloat`]. Simulation and data ingestion stay in `f64`
//! because they deal with wall-clock times read from files.

use std::fmt::{Debug, Display};

use num_traits::{Float, FromPrimitive, ToPrimitive};
use twofloat::TwoFloat;

/// Real floating-point type usable throughout the crate: `f32`, `f64` or `TwoFloat`.
pub trait Scalar: Float + FromPrimitive + ToPrimitive + Debug + Display + Default + Send + Sync + 'static {
    /// Short name used in diagnostics.
    const NAME: &'static str;

    /// Converts an `f64` literal. Every implementor represents all finite `f64` values.
    fn lit(value: f64) -> Self;

    /// Lossy conversion to `f64`.
    fn as_f64(self) -> f64;

    /// A tolerance of `base` in `f64` terms, widened to what this type can resolve.
    fn tol(base: f64) -> Self {
        let resolvable = 1.0e3 * Self::epsilon().as_f64();
        Self::lit(base.max(resolvable))
    }
}

impl Scalar for f64 {
    const NAME: &'static str = "f64";

    fn lit(value: f64) -> Self {
        value
    }

    fn as_f64(self) -> f64 {
        self
    }
}

impl Scalar for f32 {
    const NAME: &'static str = "f32";

    fn lit(value: f64) -> Self {
        value as f32
    }

    fn as_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for TwoFloat {
    const NAME: &'static str = "twofloat";

    fn lit(value: f64) -> Self {
        TwoFloat::from(value)
    }

    fn as_f64(self) -> f64 {
        self.into()
    }
}

/// Sums an iterator of scalars.
pub(crate) fn sum<T: Scalar>(values: impl IntoIterator<Item = T>) -> T {
    values.into_iter().fold(T::zero(), |acc, v| acc + v)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tolerance_widens_for_single_precision() {
        assert_eq!(f64::tol(1e-9), 1e-9);
        assert!(f32::tol(1e-9) > 1e-5);
        assert_eq!(TwoFloat::tol(1e-9).as_f64(), 1e-9);
    }

    #[test]
    fn literals_round_trip() {
        assert_eq!(TwoFloat::lit(0.1).as_f64(), 0.1);
        assert_eq!(f32::lit(0.5).as_f64(), 0.5);
    }
}
