use std::fmt::Debug;
use std::hash::Hash;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;

/// Scalar type of an exact field.
///
/// Finite-field moduli are chosen at runtime, so constants are produced from a
/// context value (`Ctx`) rather than from a context-free `zero()`. Rationals use
/// the unit context [`RationalField`](super::RationalField).
pub trait Field:
    Clone
    + PartialEq
    + Eq
    + Hash
    + Debug
    + Send
    + Sync
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
{
    type Ctx: Clone + Debug + PartialEq + Send + Sync;

    fn ctx(&self) -> Self::Ctx;
    fn zero_in(ctx: &Self::Ctx) -> Self;
    fn one_in(ctx: &Self::Ctx) -> Self;
    fn from_i64(ctx: &Self::Ctx, v: i64) -> Self;
    fn from_bigint(ctx: &Self::Ctx, v: &BigInt) -> Self;
    fn is_zero(&self) -> bool;
    /// Multiplicative inverse, `None` for zero.
    fn inverse(&self) -> Option<Self>;

    fn is_one(&self) -> bool {
        *self == Self::one_in(&self.ctx())
    }

    fn pow(&self, mut e: u64) -> Self {
        let mut base = self.clone();
        let mut acc = Self::one_in(&self.ctx());
        while e > 0 {
            if e & 1 == 1 {
                acc = acc * base.clone();
            }
            base = base.clone() * base;
            e >>= 1;
        }
        acc
    }
}

/// A field whose elements can be listed and drawn at random.
pub trait FiniteField: Field + Copy {
    fn order(ctx: &Self::Ctx) -> u64;
    /// Element with canonical index `idx` (`0 <= idx < order`).
    fn from_index(ctx: &Self::Ctx, idx: u64) -> Self;
    fn index(&self) -> u64;
}

/// Coefficient types that reduce into any exact field.
pub trait ExactCoeff:
    Clone + Debug + PartialEq + Send + Sync + num_traits::Num + num_traits::Signed
{
    fn to_field<F: Field>(&self, ctx: &F::Ctx) -> F;
}

impl ExactCoeff for BigInt {
    fn to_field<F: Field>(&self, ctx: &F::Ctx) -> F {
        F::from_bigint(ctx, self)
    }
}

impl ExactCoeff for i64 {
    fn to_field<F: Field>(&self, ctx: &F::Ctx) -> F {
        F::from_i64(ctx, *self)
    }
}

impl ExactCoeff for num_rational::BigRational {
    fn to_field<F: Field>(&self, ctx: &F::Ctx) -> F {
        F::from_bigint(ctx, self.numer()) / F::from_bigint(ctx, self.denom())
    }
}
