//! Numeric traits the similarity and metric code is generic over.
//!
//! Everything that only needs field arithmetic (BIS and its aggregates,
//! precision/recall/AP, quartile interpolation) is written against
//! [`Scalar`], so it runs on `f32`, `f64` and exact rationals alike.
//! Discounted gain needs a logarithm and is therefore bound by [`Real`].

use std::fmt::Debug;

use num_traits::{Float, FromPrimitive, Num, ToPrimitive};

/// A number type usable for similarity scores and metric values.
pub trait Scalar: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {
    /// Converts a cardinality into the scalar type.
    ///
    /// Panics if the count is not representable, which for the supported
    /// types only happens far beyond any realistic collection size.
    fn from_count(n: usize) -> Self {
        Self::from_usize(n).expect("count not representable in scalar type")
    }

    /// Lossy conversion used for reporting.
    fn to_f64_lossy(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl<T> Scalar for T where T: Num + Copy + PartialOrd + FromPrimitive + ToPrimitive + Debug + Send + Sync + 'static {}

/// Floating point scalar (`f32` or `f64`).
pub trait Real: Scalar + Float {}

impl<T: Scalar + Float> Real for T {}

#[cfg(test)]
mod tests {
    use super::*;
    use num_rational::Rational64;

    fn third<S: Scalar>() -> S {
        S::one() / S::from_count(3)
    }

    #[test]
    fn rational_is_a_scalar() {
        let t: Rational64 = third();
        assert_eq!(t * Rational64::from_integer(3), Rational64::from_integer(1));
    }

    #[test]
    fn floats_are_scalars() {
        assert!((third::<f64>() - 1.0 / 3.0).abs() < 1e-15);
        assert!((third::<f32>() - 1.0 / 3.0).abs() < 1e-6);
        assert_eq!(f64::from_count(7), 7.0);
    }
}
