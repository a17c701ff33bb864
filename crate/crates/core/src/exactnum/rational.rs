use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};

use super::field::Field;

/// Context for the rational numbers; there is only one.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct RationalField;

impl Field for BigRational {
    type Ctx = RationalField;

    fn ctx(&self) -> RationalField {
        RationalField
    }

    fn zero_in(_: &RationalField) -> Self {
        BigRational::zero()
    }

    fn one_in(_: &RationalField) -> Self {
        BigRational::one()
    }

    fn from_i64(_: &RationalField, v: i64) -> Self {
        BigRational::from_integer(BigInt::from(v))
    }

    fn from_bigint(_: &RationalField, v: &BigInt) -> Self {
        BigRational::from_integer(v.clone())
    }

    fn is_zero(&self) -> bool {
        Zero::is_zero(self)
    }

    fn inverse(&self) -> Option<Self> {
        if Zero::is_zero(self) {
            None
        } else {
            Some(self.recip())
        }
    }
}

/// Shorthand for `p/q` as a rational.
pub fn ratio(p: i64, q: i64) -> BigRational {
    BigRational::new(BigInt::from(p), BigInt::from(q))
}
