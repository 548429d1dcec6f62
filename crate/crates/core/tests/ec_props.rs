use dragonlab_core::ec::{BlindingState, CurveParams, CurvePoint, Legendre};
use num_bigint::BigUint;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn scalar() -> impl Strategy<Value = BigUint> {
    proptest::collection::vec(any::<u8>(), 32).prop_map(|b| BigUint::from_bytes_be(&b))
}

#[test]
fn residue_fraction_is_one_half() {
    let curve = CurveParams::p256();
    let f = curve.field();
    let mut rng = ChaCha20Rng::seed_from_u64(11);
    let n = 10_000;
    let residues =
        (0..n).filter(|_| f.legendre_naive(&f.random_nonzero(&mut rng).unwrap()) == Legendre::Residue).count();
    let frac = residues as f64 / n as f64;
    assert!((frac - 0.5).abs() < 0.02, "{frac}");
}

#[test]
fn blinded_agrees_with_naive_on_p256() {
    let curve = CurveParams::p256();
    let f = curve.field();
    let mut rng = ChaCha20Rng::seed_from_u64(12);
    let (blind, _) = BlindingState::generate(f, &mut rng).unwrap();
    for _ in 0..1000 {
        let x = f.random_nonzero(&mut rng).unwrap();
        assert_eq!(f.legendre_blinded(&x, &blind, &mut rng).unwrap(), f.legendre_naive(&x));
    }
    assert_eq!(f.legendre_blinded(&f.zero(), &blind, &mut rng).unwrap(), Legendre::Zero);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn sqrt_of_square(v in scalar()) {
        let curve = CurveParams::p256();
        let f = curve.field();
        let x = f.element(v);
        let sq = f.square(&x);
        let r = f.sqrt(&sq).unwrap();
        prop_assert!(r == x || r == f.neg(&x));
    }

    #[test]
    fn legendre_is_multiplicative(a in scalar(), b in scalar()) {
        let curve = CurveParams::p256();
        let f = curve.field();
        let (a, b) = (f.element(a), f.element(b));
        let lhs = f.legendre_naive(&f.mul(&a, &b)).as_i8();
        prop_assert_eq!(lhs, f.legendre_naive(&a).as_i8() * f.legendre_naive(&b).as_i8());
    }

    #[test]
    fn scalar_mul_distributes(a in scalar(), b in scalar()) {
        let curve = CurveParams::p256();
        let g = curve.generator();
        let sum = curve.add(&curve.scalar_mul(&a, g), &curve.scalar_mul(&b, g));
        prop_assert_eq!(curve.scalar_mul(&(a + b), g), sum);
    }

    #[test]
    fn point_encoding_round_trips(k in scalar()) {
        let curve = CurveParams::p256();
        let p = curve.scalar_mul(&k, curve.generator());
        prop_assume!(!p.is_infinity());
        prop_assert!(curve.is_on_curve(&p));
        let bytes = curve.encode_point(&p).unwrap();
        prop_assert_eq!(curve.decode_point(&bytes).unwrap(), p);
    }

    #[test]
    fn point_from_x_lies_on_curve(v in scalar(), odd in any::<bool>()) {
        let curve = CurveParams::p256();
        let f = curve.field();
        let x = f.element(v);
        match curve.point_from_x(&x, odd) {
            Ok(p) => {
                prop_assert!(curve.is_on_curve(&p));
                prop_assert_eq!(p.y().unwrap().is_odd(), odd);
            }
            Err(_) => prop_assert_ne!(f.legendre_naive(&curve.rhs(&x)), Legendre::Residue),
        }
    }
}

#[test]
fn order_annihilates_generator() {
    let curve = CurveParams::p256();
    assert_eq!(curve.scalar_mul(curve.order(), curve.generator()), CurvePoint::Infinity);
}
