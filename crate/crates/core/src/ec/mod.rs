//! Prime-field and elliptic-curve arithmetic.
//!
//! Everything here works on [`num_bigint::BigUint`] values; constant-time
//! behaviour at the machine level is not a goal. The derivation code
//! models side-channel exposure at the level of operation sequences.

mod curve;
mod field;

pub use curve::{CurveParams, CurvePoint};
pub(crate) use field::to_fixed_be;
pub use field::{mod_exp, random_below, BlindingState, FieldElement, Legendre, PrimeField};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EcError {
    #[error("modulus must be an odd prime greater than 2")]
    InvalidModulus,
    #[error("square root requires p = 3 mod 4")]
    UnsupportedModulus,
    #[error("value is not a quadratic residue")]
    NonResidue,
    #[error("element has no inverse")]
    NotInvertible,
    #[error("blinding constants have the wrong quadratic character")]
    InvalidBlinding,
    #[error("invalid curve: {0}")]
    InvalidCurve(&'static str),
    #[error("unknown curve {0:?}")]
    UnknownCurve(String),
    #[error("malformed encoding: {0}")]
    Encoding(&'static str),
    #[error("random number generator failure")]
    Rng,
}
