//! Exact arithmetic: rationals, finite fields, dense matrices, polynomials.

mod field;
mod gf;
mod matrix;
mod poly;
mod rational;
mod rng;

pub use field::{ExactCoeff, Field, FiniteField};
pub use gf::{default_modulus, is_irreducible, is_prime, FieldError, FieldSpec, Gf, GfField};
pub use matrix::{normalize_projective, DenseMatrix, MatrixError};
pub use poly::{poly_det, MultiPoly, PolyError, DEFAULT_TERM_CAP};
pub use rational::{ratio, RationalField};
pub use rng::SeededRng;

/// Matrix over the rationals.
pub type QMatrix = DenseMatrix<num_rational::BigRational>;
