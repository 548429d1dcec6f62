//! Arithmetic in a prime field `GF(p)` backed by arbitrary-precision integers.

use std::fmt;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::{One, Zero};
use rand::RngCore;

use super::EcError;

/// An element of `GF(p)`. Always kept reduced, `0 <= value < p`.
///
/// Elements do not carry their modulus; arithmetic goes through the
/// [`PrimeField`] that produced them.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct FieldElement(BigUint);

impl FieldElement {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn into_value(self) -> BigUint {
        self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }

    /// Least significant bit of the canonical representative.
    pub fn is_odd(&self) -> bool {
        self.0.is_odd()
    }
}

impl fmt::Debug for FieldElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fe(0x{})", self.0.to_str_radix(16))
    }
}

/// Quadratic character of a field element.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Legendre {
    NonResidue,
    Zero,
    Residue,
}

impl Legendre {
    pub fn as_i8(self) -> i8 {
        match self {
            Legendre::NonResidue => -1,
            Legendre::Zero => 0,
            Legendre::Residue => 1,
        }
    }

    fn flipped(self) -> Legendre {
        match self {
            Legendre::NonResidue => Legendre::Residue,
            Legendre::Zero => Legendre::Zero,
            Legendre::Residue => Legendre::NonResidue,
        }
    }
}

/// The prime field `GF(p)` together with the exponents the Legendre symbol
/// and the square root need.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PrimeField {
    p: BigUint,
    legendre_exp: BigUint,
    sqrt_exp: Option<BigUint>,
    bits: u64,
}

impl PrimeField {
    /// `p` must be an odd prime. Primality itself is not checked.
    pub fn new(p: BigUint) -> Result<Self, EcError> {
        if p < BigUint::from(3u32) || p.is_even() {
            return Err(EcError::InvalidModulus);
        }
        let legendre_exp = (&p - 1u32) >> 1;
        let sqrt_exp = if (&p % 4u32) == BigUint::from(3u32) { Some((&p + 1u32) >> 2) } else { None };
        let bits = p.bits();
        Ok(PrimeField { p, legendre_exp, sqrt_exp, bits })
    }

    pub fn modulus(&self) -> &BigUint {
        &self.p
    }

    /// Bit length of `p`.
    pub fn bits(&self) -> u64 {
        self.bits
    }

    /// Length in bytes of a fixed-width big-endian element encoding.
    pub fn byte_len(&self) -> usize {
        self.bits.div_ceil(8) as usize
    }

    /// Reduces an arbitrary integer into the field.
    pub fn element(&self, v: BigUint) -> FieldElement {
        if v < self.p {
            FieldElement(v)
        } else {
            FieldElement(v % &self.p)
        }
    }

    pub fn from_u64(&self, v: u64) -> FieldElement {
        self.element(BigUint::from(v))
    }

    /// Accepts `v` only when it is already a canonical representative.
    pub fn checked_element(&self, v: BigUint) -> Option<FieldElement> {
        (v < self.p).then_some(FieldElement(v))
    }

    pub fn zero(&self) -> FieldElement {
        FieldElement(BigUint::zero())
    }

    pub fn one(&self) -> FieldElement {
        FieldElement(BigUint::one())
    }

    pub fn add(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        let s = &a.0 + &b.0;
        if s >= self.p {
            FieldElement(s - &self.p)
        } else {
            FieldElement(s)
        }
    }

    pub fn sub(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        if a.0 >= b.0 {
            FieldElement(&a.0 - &b.0)
        } else {
            FieldElement(&self.p - &b.0 + &a.0)
        }
    }

    pub fn neg(&self, a: &FieldElement) -> FieldElement {
        if a.0.is_zero() {
            a.clone()
        } else {
            FieldElement(&self.p - &a.0)
        }
    }

    pub fn mul(&self, a: &FieldElement, b: &FieldElement) -> FieldElement {
        FieldElement((&a.0 * &b.0) % &self.p)
    }

    pub fn square(&self, a: &FieldElement) -> FieldElement {
        self.mul(a, a)
    }

    pub fn double(&self, a: &FieldElement) -> FieldElement {
        self.add(a, a)
    }

    pub fn mul_small(&self, a: &FieldElement, k: u32) -> FieldElement {
        FieldElement((&a.0 * k) % &self.p)
    }

    /// `base^exponent mod p`.
    pub fn pow(&self, base: &FieldElement, exponent: &BigUint) -> FieldElement {
        FieldElement(base.0.modpow(exponent, &self.p))
    }

    pub fn invert(&self, a: &FieldElement) -> Result<FieldElement, EcError> {
        a.0.modinv(&self.p).map(FieldElement).ok_or(EcError::NotInvertible)
    }

    /// Euler's criterion: `x^((p-1)/2)` mapped onto {-1, 0, +1}.
    ///
    /// Runtime depends on the operand, which is why the derivation loop
    /// goes through [`PrimeField::legendre_blinded`].
    pub fn legendre_naive(&self, x: &FieldElement) -> Legendre {
        if x.is_zero() {
            return Legendre::Zero;
        }
        let e = x.0.modpow(&self.legendre_exp, &self.p);
        if e.is_one() {
            Legendre::Residue
        } else {
            Legendre::NonResidue
        }
    }

    /// Legendre symbol of `x` computed on a masked operand.
    ///
    /// A fresh `r` is drawn per call and the symbol of `x * r^2 * c` is
    /// evaluated, where `c` is the session residue when `r` is odd and the
    /// session non-residue otherwise. The sign is then corrected for `c`.
    pub fn legendre_blinded<R: RngCore + ?Sized>(
        &self,
        x: &FieldElement,
        blind: &BlindingState,
        rng: &mut R,
    ) -> Result<Legendre, EcError> {
        let r = self.random_nonzero(rng)?;
        let masked = self.mul(&self.square(&r), x);
        if r.is_odd() {
            Ok(self.legendre_naive(&self.mul(&masked, &blind.qr)))
        } else {
            Ok(self.legendre_naive(&self.mul(&masked, &blind.qnr)).flipped())
        }
    }

    /// Square root for `p = 3 mod 4`: `x^((p+1)/4)`.
    ///
    /// Returns one of the two roots; callers pick the other with
    /// [`PrimeField::neg`] according to their parity rule.
    pub fn sqrt(&self, x: &FieldElement) -> Result<FieldElement, EcError> {
        let exp = self.sqrt_exp.as_ref().ok_or(EcError::UnsupportedModulus)?;
        let s = self.pow(x, exp);
        if self.square(&s) == *x {
            Ok(s)
        } else {
            Err(EcError::NonResidue)
        }
    }

    /// Uniform element of `[1, p)`.
    pub fn random_nonzero<R: RngCore + ?Sized>(&self, rng: &mut R) -> Result<FieldElement, EcError> {
        let bound = &self.p - 1u32;
        Ok(FieldElement(random_below(&bound, rng)? + 1u32))
    }

    /// Fixed-width big-endian encoding.
    pub fn to_bytes(&self, a: &FieldElement) -> Vec<u8> {
        to_fixed_be(&a.0, self.byte_len())
    }

    /// Decodes a fixed-width big-endian value, rejecting non-canonical input.
    pub fn from_bytes(&self, bytes: &[u8]) -> Result<FieldElement, EcError> {
        if bytes.len() != self.byte_len() {
            return Err(EcError::Encoding("field element length"));
        }
        self.checked_element(BigUint::from_bytes_be(bytes)).ok_or(EcError::Encoding("field element out of range"))
    }
}

/// Per-session blinding constants for the masked residuosity test.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlindingState {
    qr: FieldElement,
    qnr: FieldElement,
}

impl BlindingState {
    /// Samples candidates until one residue and one non-residue are found.
    ///
    /// Returns the state and the number of random draws consumed.
    pub fn generate<R: RngCore + ?Sized>(field: &PrimeField, rng: &mut R) -> Result<(Self, u32), EcError> {
        let mut draws = 0;
        let mut qr = None;
        let mut qnr = None;
        while qr.is_none() || qnr.is_none() {
            let c = field.random_nonzero(rng)?;
            draws += 1;
            match field.legendre_naive(&c) {
                Legendre::Residue if qr.is_none() => qr = Some(c),
                Legendre::NonResidue if qnr.is_none() => qnr = Some(c),
                _ => {}
            }
        }
        Ok((BlindingState { qr: qr.unwrap(), qnr: qnr.unwrap() }, draws))
    }

    /// Builds a state from known constants after checking their characters.
    pub fn from_parts(field: &PrimeField, qr: FieldElement, qnr: FieldElement) -> Result<Self, EcError> {
        if field.legendre_naive(&qr) != Legendre::Residue || field.legendre_naive(&qnr) != Legendre::NonResidue {
            return Err(EcError::InvalidBlinding);
        }
        Ok(BlindingState { qr, qnr })
    }

    pub fn qr(&self) -> &FieldElement {
        &self.qr
    }

    pub fn qnr(&self) -> &FieldElement {
        &self.qnr
    }
}

/// Standalone `base^exponent mod p`.
pub fn mod_exp(base: &BigUint, exponent: &BigUint, p: &BigUint) -> BigUint {
    base.modpow(exponent, p)
}

/// Rejection-samples a uniform integer in `[0, bound)`.
pub fn random_below<R: RngCore + ?Sized>(bound: &BigUint, rng: &mut R) -> Result<BigUint, EcError> {
    if bound.is_zero() {
        return Err(EcError::InvalidModulus);
    }
    let bits = bound.bits();
    let len = bits.div_ceil(8) as usize;
    let excess = (len as u64 * 8 - bits) as u32;
    let mut buf = vec![0u8; len];
    loop {
        rng.try_fill_bytes(&mut buf).map_err(|_| EcError::Rng)?;
        buf[0] &= 0xffu8 >> excess;
        let v = BigUint::from_bytes_be(&buf);
        if &v < bound {
            return Ok(v);
        }
    }
}

pub(crate) fn to_fixed_be(v: &BigUint, len: usize) -> Vec<u8> {
    let raw = v.to_bytes_be();
    let mut out = vec![0u8; len.saturating_sub(raw.len())];
    if raw.len() > len {
        out.extend_from_slice(&raw[raw.len() - len..]);
    } else {
        out.extend_from_slice(&raw);
    }
    out
}
