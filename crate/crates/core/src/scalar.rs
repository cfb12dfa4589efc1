//! Scalar abstraction for certificate constants.
//!
//! Certificates are computed with [`crate::Exact`] (arbitrary precision
//! rationals); the same code runs over `f64`/`f32` for quick cross-checks.

use std::fmt::{Debug, Display};

use num_bigint::BigInt;
use num_rational::{BigRational, Rational64};
use num_traits::{FromPrimitive, Num, ToPrimitive};

pub trait Scalar:
    Num + FromPrimitive + Clone + PartialOrd + Debug + Display + Send + Sync + 'static
{
    fn from_count(n: usize) -> Self {
        <Self as FromPrimitive>::from_usize(n).expect("usize fits the scalar type")
    }

    fn from_int(n: i64) -> Self {
        <Self as FromPrimitive>::from_i64(n).expect("i64 fits the scalar type")
    }

    fn ratio(num: i64, den: i64) -> Self {
        Self::from_int(num) / Self::from_int(den)
    }

    /// Smallest integer not below `self`.
    fn ceil_int(&self) -> i64;

    fn to_f64_lossy(&self) -> f64;

    fn max_of(self, other: Self) -> Self {
        if other > self {
            other
        } else {
            self
        }
    }
}

impl Scalar for f64 {
    fn ceil_int(&self) -> i64 {
        self.ceil() as i64
    }
    fn to_f64_lossy(&self) -> f64 {
        *self
    }
}

impl Scalar for f32 {
    fn ceil_int(&self) -> i64 {
        self.ceil() as i64
    }
    fn to_f64_lossy(&self) -> f64 {
        *self as f64
    }
}

impl Scalar for BigRational {
    fn ceil_int(&self) -> i64 {
        self.ceil().to_integer().to_i64().expect("ceil fits in i64")
    }
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
    fn from_int(n: i64) -> Self {
        BigRational::from_integer(BigInt::from(n))
    }
}

impl Scalar for Rational64 {
    fn ceil_int(&self) -> i64 {
        self.ceil().to_integer()
    }
    fn to_f64_lossy(&self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ceil_agrees_across_scalars() {
        assert_eq!(BigRational::ratio(7, 2).ceil_int(), 4);
        assert_eq!(Rational64::ratio(-7, 2).ceil_int(), -3);
        assert_eq!(3.5f64.ceil_int(), 4);
        assert_eq!(BigRational::from_int(3).ceil_int(), 3);
    }

    #[test]
    fn max_of_picks_larger() {
        assert_eq!(
            BigRational::ratio(1, 2).max_of(BigRational::ratio(2, 3)),
            BigRational::ratio(2, 3)
        );
        assert_eq!(2.0f64.max_of(1.0), 2.0);
    }
}
