//! Short-Weierstrass curves `y^2 = x^3 + ax + b` over a prime field.

use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use num_traits::Zero;

use super::field::{FieldElement, PrimeField};
use super::EcError;

/// A point in affine coordinates, or the point at infinity.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum CurvePoint {
    Infinity,
    Affine { x: FieldElement, y: FieldElement },
}

impl CurvePoint {
    pub fn is_infinity(&self) -> bool {
        matches!(self, CurvePoint::Infinity)
    }

    pub fn x(&self) -> Option<&FieldElement> {
        match self {
            CurvePoint::Infinity => None,
            CurvePoint::Affine { x, .. } => Some(x),
        }
    }

    pub fn y(&self) -> Option<&FieldElement> {
        match self {
            CurvePoint::Infinity => None,
            CurvePoint::Affine { y, .. } => Some(y),
        }
    }
}

/// Domain parameters of a prime-order curve.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CurveParams {
    name: String,
    field: PrimeField,
    a: FieldElement,
    b: FieldElement,
    generator: CurvePoint,
    order: BigUint,
    cofactor: u32,
}

// Jacobian coordinates, x = X/Z^2, y = Y/Z^3. Z = 0 encodes infinity.
#[derive(Clone)]
struct Jacobian {
    x: FieldElement,
    y: FieldElement,
    z: FieldElement,
}

impl CurveParams {
    /// Builds and validates a cofactor-1 curve. The generator must satisfy
    /// the curve equation and `order * G` must be the point at infinity.
    pub fn new(
        name: impl Into<String>,
        p: BigUint,
        a: BigUint,
        b: BigUint,
        generator: (BigUint, BigUint),
        order: BigUint,
    ) -> Result<Self, EcError> {
        let field = PrimeField::new(p)?;
        let a = field.element(a);
        let b = field.element(b);
        let gx = field.checked_element(generator.0).ok_or(EcError::InvalidCurve("generator x"))?;
        let gy = field.checked_element(generator.1).ok_or(EcError::InvalidCurve("generator y"))?;
        let curve = CurveParams {
            name: name.into(),
            field,
            a,
            b,
            generator: CurvePoint::Affine { x: gx, y: gy },
            order,
            cofactor: 1,
        };
        let disc = {
            let f = &curve.field;
            let a3 = f.mul(&f.square(&curve.a), &curve.a);
            let b2 = f.square(&curve.b);
            f.add(&f.mul_small(&a3, 4), &f.mul_small(&b2, 27))
        };
        if disc.is_zero() {
            return Err(EcError::InvalidCurve("singular curve"));
        }
        if !curve.is_on_curve(&curve.generator) {
            return Err(EcError::InvalidCurve("generator not on curve"));
        }
        if !curve.scalar_mul(&curve.order, &curve.generator).is_infinity() {
            return Err(EcError::InvalidCurve("generator order"));
        }
        Ok(curve)
    }

    /// NIST P-256 (IKE group 19).
    pub fn p256() -> Arc<CurveParams> {
        static CURVE: OnceLock<Arc<CurveParams>> = OnceLock::new();
        CURVE
            .get_or_init(|| {
                Arc::new(
                    CurveParams::new(
                        "P-256",
                        hex_int("ffffffff00000001000000000000000000000000ffffffffffffffffffffffff"),
                        hex_int("ffffffff00000001000000000000000000000000fffffffffffffffffffffffc"),
                        hex_int("5ac635d8aa3a93e7b3ebbd55769886bc651d06b0cc53b0f63bce3c3e27d2604b"),
                        (
                            hex_int("6b17d1f2e12c4247f8bce6e563a440f277037d812deb33a0f4a13945d898c296"),
                            hex_int("4fe342e2fe1a7f9b8ee7eb4a7c0f9e162bce33576b315ececbb6406837bf51f5"),
                        ),
                        hex_int("ffffffff00000000ffffffffffffffffbce6faada7179e84f3b9cac2fc632551"),
                    )
                    .expect("P-256 parameters"),
                )
            })
            .clone()
    }

    /// NIST P-384 (IKE group 20).
    pub fn p384() -> Arc<CurveParams> {
        static CURVE: OnceLock<Arc<CurveParams>> = OnceLock::new();
        CURVE
            .get_or_init(|| {
                Arc::new(
                    CurveParams::new(
                        "P-384",
                        hex_int(concat!(
                            "fffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffe",
                            "ffffffff0000000000000000ffffffff"
                        )),
                        hex_int(concat!(
                            "fffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffffe",
                            "ffffffff0000000000000000fffffffc"
                        )),
                        hex_int(concat!(
                            "b3312fa7e23ee7e4988e056be3f82d19181d9c6efe8141120314088f5013875a",
                            "c656398d8a2ed19d2a85c8edd3ec2aef"
                        )),
                        (
                            hex_int(concat!(
                                "aa87ca22be8b05378eb1c71ef320ad746e1d3b628ba79b9859f741e082542a38",
                                "5502f25dbf55296c3a545e3872760ab7"
                            )),
                            hex_int(concat!(
                                "3617de4a96262c6f5d9e98bf9292dc29f8f41dbd289a147ce9da3113b5f0b8c0",
                                "0a60b1ce1d7e819d7a431d7c90ea0e5f"
                            )),
                        ),
                        hex_int(concat!(
                            "ffffffffffffffffffffffffffffffffffffffffffffffffc7634d81f4372ddf",
                            "581a0db248b0a77aecec196accc52973"
                        )),
                    )
                    .expect("P-384 parameters"),
                )
            })
            .clone()
    }

    /// `y^2 = x^3 + x + 6` over GF(11): 13 points, cyclic, generator (2, 7).
    /// Small enough to enumerate; used for exhaustive checks.
    pub fn toy11() -> Arc<CurveParams> {
        static CURVE: OnceLock<Arc<CurveParams>> = OnceLock::new();
        CURVE
            .get_or_init(|| {
                Arc::new(
                    CurveParams::new(
                        "toy-11",
                        BigUint::from(11u32),
                        BigUint::from(1u32),
                        BigUint::from(6u32),
                        (BigUint::from(2u32), BigUint::from(7u32)),
                        BigUint::from(13u32),
                    )
                    .expect("toy curve parameters"),
                )
            })
            .clone()
    }

    /// Looks up a curve by registry name.
    pub fn named(name: &str) -> Result<Arc<CurveParams>, EcError> {
        match name.to_ascii_uppercase().as_str() {
            "P-256" | "P256" | "SECP256R1" | "19" => Ok(Self::p256()),
            "P-384" | "P384" | "SECP384R1" | "20" => Ok(Self::p384()),
            "TOY-11" => Ok(Self::toy11()),
            _ => Err(EcError::UnknownCurve(name.to_string())),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn field(&self) -> &PrimeField {
        &self.field
    }

    pub fn p(&self) -> &BigUint {
        self.field.modulus()
    }

    pub fn a(&self) -> &FieldElement {
        &self.a
    }

    pub fn b(&self) -> &FieldElement {
        &self.b
    }

    pub fn generator(&self) -> &CurvePoint {
        &self.generator
    }

    pub fn order(&self) -> &BigUint {
        &self.order
    }

    pub fn cofactor(&self) -> u32 {
        self.cofactor
    }

    /// Byte length of scalars and coordinates in the wire encoding.
    pub fn byte_len(&self) -> usize {
        self.field.byte_len()
    }

    pub fn scalar_byte_len(&self) -> usize {
        self.order.bits().div_ceil(8) as usize
    }

    /// Right-hand side of the curve equation, `x^3 + ax + b`.
    pub fn rhs(&self, x: &FieldElement) -> FieldElement {
        let f = &self.field;
        let x3 = f.mul(&f.square(x), x);
        f.add(&f.add(&x3, &f.mul(&self.a, x)), &self.b)
    }

    pub fn is_on_curve(&self, p: &CurvePoint) -> bool {
        match p {
            CurvePoint::Infinity => true,
            CurvePoint::Affine { x, y } => self.field.square(y) == self.rhs(x),
        }
    }

    /// Lifts an x-coordinate to the point whose y has the requested parity.
    pub fn point_from_x(&self, x: &FieldElement, odd_y: bool) -> Result<CurvePoint, EcError> {
        let y = self.field.sqrt(&self.rhs(x))?;
        let y = if y.is_odd() == odd_y { y } else { self.field.neg(&y) };
        Ok(CurvePoint::Affine { x: x.clone(), y })
    }

    pub fn negate(&self, p: &CurvePoint) -> CurvePoint {
        match p {
            CurvePoint::Infinity => CurvePoint::Infinity,
            CurvePoint::Affine { x, y } => CurvePoint::Affine { x: x.clone(), y: self.field.neg(y) },
        }
    }

    /// Affine group law.
    pub fn add(&self, p1: &CurvePoint, p2: &CurvePoint) -> CurvePoint {
        let f = &self.field;
        let (x1, y1, x2, y2) = match (p1, p2) {
            (CurvePoint::Infinity, q) | (q, CurvePoint::Infinity) => return q.clone(),
            (CurvePoint::Affine { x: x1, y: y1 }, CurvePoint::Affine { x: x2, y: y2 }) => (x1, y1, x2, y2),
        };
        let lambda = if x1 == x2 {
            if y1 != y2 || y1.is_zero() {
                return CurvePoint::Infinity;
            }
            let num = f.add(&f.mul_small(&f.square(x1), 3), &self.a);
            let den = f.double(y1);
            f.mul(&num, &f.invert(&den).expect("nonzero"))
        } else {
            let num = f.sub(y2, y1);
            let den = f.sub(x2, x1);
            f.mul(&num, &f.invert(&den).expect("nonzero"))
        };
        let x3 = f.sub(&f.sub(&f.square(&lambda), x1), x2);
        let y3 = f.sub(&f.mul(&lambda, &f.sub(x1, &x3)), y1);
        CurvePoint::Affine { x: x3, y: y3 }
    }

    pub fn double(&self, p: &CurvePoint) -> CurvePoint {
        self.add(p, p)
    }

    /// `k * P` for any non-negative `k`; the scalar is reduced mod the
    /// group order first. Works in Jacobian coordinates internally and
    /// returns an affine point.
    pub fn scalar_mul(&self, k: &BigUint, p: &CurvePoint) -> CurvePoint {
        let (x, y) = match p {
            CurvePoint::Infinity => return CurvePoint::Infinity,
            CurvePoint::Affine { x, y } => (x, y),
        };
        let k = if k >= &self.order && !self.order.is_zero() { k % &self.order } else { k.clone() };
        if k.is_zero() {
            return CurvePoint::Infinity;
        }
        let base = Jacobian { x: x.clone(), y: y.clone(), z: self.field.one() };
        let mut acc: Option<Jacobian> = None;
        for i in (0..k.bits()).rev() {
            if let Some(a) = acc.take() {
                acc = self.jac_double(&a);
            }
            if k.bit(i) {
                acc = match acc {
                    None => Some(base.clone()),
                    Some(a) => self.jac_add(&a, &base),
                };
            }
        }
        self.to_affine(acc)
    }

    fn to_affine(&self, p: Option<Jacobian>) -> CurvePoint {
        let f = &self.field;
        match p {
            None => CurvePoint::Infinity,
            Some(p) => {
                let zinv = f.invert(&p.z).expect("nonzero z");
                let zinv2 = f.square(&zinv);
                let zinv3 = f.mul(&zinv2, &zinv);
                CurvePoint::Affine { x: f.mul(&p.x, &zinv2), y: f.mul(&p.y, &zinv3) }
            }
        }
    }

    fn jac_double(&self, p: &Jacobian) -> Option<Jacobian> {
        let f = &self.field;
        if p.y.is_zero() {
            return None;
        }
        let xx = f.square(&p.x);
        let yy = f.square(&p.y);
        let yyyy = f.square(&yy);
        let zz = f.square(&p.z);
        let s = f.double(&f.sub(&f.sub(&f.square(&f.add(&p.x, &yy)), &xx), &yyyy));
        let m = f.add(&f.mul_small(&xx, 3), &f.mul(&self.a, &f.square(&zz)));
        let x3 = f.sub(&f.square(&m), &f.double(&s));
        let y3 = f.sub(&f.mul(&m, &f.sub(&s, &x3)), &f.mul_small(&yyyy, 8));
        let z3 = f.sub(&f.sub(&f.square(&f.add(&p.y, &p.z)), &yy), &zz);
        Some(Jacobian { x: x3, y: y3, z: z3 })
    }

    fn jac_add(&self, p: &Jacobian, q: &Jacobian) -> Option<Jacobian> {
        let f = &self.field;
        let z1z1 = f.square(&p.z);
        let z2z2 = f.square(&q.z);
        let u1 = f.mul(&p.x, &z2z2);
        let u2 = f.mul(&q.x, &z1z1);
        let s1 = f.mul(&f.mul(&p.y, &q.z), &z2z2);
        let s2 = f.mul(&f.mul(&q.y, &p.z), &z1z1);
        let h = f.sub(&u2, &u1);
        let r = f.double(&f.sub(&s2, &s1));
        if h.is_zero() {
            return if r.is_zero() { self.jac_double(p) } else { None };
        }
        let i = f.square(&f.double(&h));
        let j = f.mul(&h, &i);
        let v = f.mul(&u1, &i);
        let x3 = f.sub(&f.sub(&f.square(&r), &j), &f.double(&v));
        let y3 = f.sub(&f.mul(&r, &f.sub(&v, &x3)), &f.double(&f.mul(&s1, &j)));
        let z3 = f.mul(&f.sub(&f.sub(&f.square(&f.add(&p.z, &q.z)), &z1z1), &z2z2), &h);
        Some(Jacobian { x: x3, y: y3, z: z3 })
    }

    /// Uncompressed SEC1 encoding `0x04 || x || y`.
    pub fn encode_point(&self, p: &CurvePoint) -> Result<Vec<u8>, EcError> {
        match p {
            CurvePoint::Infinity => Err(EcError::Encoding("point at infinity")),
            CurvePoint::Affine { x, y } => {
                let mut out = Vec::with_capacity(1 + 2 * self.byte_len());
                out.push(0x04);
                out.extend(self.field.to_bytes(x));
                out.extend(self.field.to_bytes(y));
                Ok(out)
            }
        }
    }

    /// Decodes an uncompressed point. Does not check the curve equation;
    /// callers validate with [`CurveParams::is_on_curve`].
    pub fn decode_point(&self, bytes: &[u8]) -> Result<CurvePoint, EcError> {
        let n = self.byte_len();
        if bytes.len() != 1 + 2 * n || bytes[0] != 0x04 {
            return Err(EcError::Encoding("uncompressed point"));
        }
        let x = self.field.from_bytes(&bytes[1..1 + n])?;
        let y = self.field.from_bytes(&bytes[1 + n..])?;
        Ok(CurvePoint::Affine { x, y })
    }
}

fn hex_int(s: &str) -> BigUint {
    BigUint::parse_bytes(s.as_bytes(), 16).expect("hex constant")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pt(c: &CurveParams, x: u64, y: u64) -> CurvePoint {
        CurvePoint::Affine { x: c.field().from_u64(x), y: c.field().from_u64(y) }
    }

    fn toy_points(c: &CurveParams) -> Vec<CurvePoint> {
        let mut pts = vec![CurvePoint::Infinity];
        for x in 0..11u64 {
            for y in 0..11u64 {
                let p = pt(c, x, y);
                if c.is_on_curve(&p) {
                    pts.push(p);
                }
            }
        }
        pts
    }

    // Brute-force addition by discrete log w.r.t. the generator: in a
    // cyclic group of order 13, iP + jP = ((i + j) mod 13) P.
    #[test]
    fn toy_group_law_matches_exhaustive_table() {
        let c = CurveParams::toy11();
        let pts = toy_points(&c);
        assert_eq!(pts.len(), 13);
        let mut multiples = vec![CurvePoint::Infinity];
        for i in 1..13 {
            multiples.push(c.add(&multiples[i - 1], c.generator()));
        }
        for p in &pts {
            assert!(multiples.contains(p));
        }
        for i in 0..13 {
            for j in 0..13 {
                assert_eq!(c.add(&multiples[i], &multiples[j]), multiples[(i + j) % 13]);
            }
            assert_eq!(c.scalar_mul(&BigUint::from(i), c.generator()), multiples[i]);
            assert_eq!(c.add(&multiples[i], &c.negate(&multiples[i])), CurvePoint::Infinity);
        }
    }

    #[test]
    fn named_curves_validate() {
        for name in ["P-256", "P-384", "toy-11"] {
            let c = CurveParams::named(name).unwrap();
            assert_eq!(c.cofactor(), 1);
            assert!(c.is_on_curve(c.generator()));
            assert!(c.scalar_mul(&BigUint::zero(), c.generator()).is_infinity());
            assert!(c.scalar_mul(c.order(), c.generator()).is_infinity());
        }
        assert!(CurveParams::named("brainpool").is_err());
        assert_eq!(CurveParams::p256().byte_len(), 32);
        assert_eq!(CurveParams::p384().byte_len(), 48);
    }

    #[test]
    fn jacobian_ladder_agrees_with_affine_on_p256() {
        let c = CurveParams::p256();
        let g = c.generator();
        let mut acc = CurvePoint::Infinity;
        for k in 0u32..40 {
            assert_eq!(c.scalar_mul(&BigUint::from(k), g), acc);
            acc = c.add(&acc, g);
        }
        let q_minus_one = c.order() - 1u32;
        assert_eq!(c.scalar_mul(&q_minus_one, g), c.negate(g));
    }

    #[test]
    fn rejects_bad_generator() {
        let r = CurveParams::new(
            "bad",
            BigUint::from(11u32),
            BigUint::from(1u32),
            BigUint::from(6u32),
            (BigUint::from(2u32), BigUint::from(5u32)),
            BigUint::from(13u32),
        );
        assert!(matches!(r, Err(EcError::InvalidCurve(_))));
    }

    #[test]
    fn point_encoding_round_trip() {
        let c = CurveParams::p256();
        let g = c.generator();
        let enc = c.encode_point(g).unwrap();
        assert_eq!(enc.len(), 65);
        assert_eq!(&c.decode_point(&enc).unwrap(), g);
        assert!(c.encode_point(&CurvePoint::Infinity).is_err());
        assert!(c.decode_point(&enc[1..]).is_err());
    }

    #[test]
    fn point_from_x_respects_parity() {
        let c = CurveParams::toy11();
        let x = c.field().from_u64(2);
        let odd = c.point_from_x(&x, true).unwrap();
        let even = c.point_from_x(&x, false).unwrap();
        assert!(odd.y().unwrap().is_odd());
        assert!(!even.y().unwrap().is_odd());
        assert_eq!(c.negate(&odd), even);
        // x = 0: rhs = 6, a non-residue mod 11.
        assert_eq!(c.point_from_x(&c.field().zero(), true), Err(EcError::NonResidue));
    }
}
