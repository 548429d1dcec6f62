use dragonlab_core::derive::{derive_pwe, DerivationContext, Mode, NullSink, Profile};
use dragonlab_core::ec::{CurveParams, CurvePoint};
use dragonlab_core::handshake::{run_handshake, CommitFrame, HandshakeError, HandshakeOptions, Outcome, Party, Stage};
use dragonlab_core::kdf::kdf_sha256;
use dragonlab_core::Identity;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

type Tamper = Box<dyn Fn(&mut CommitFrame)>;

fn pair(rng: &mut ChaCha20Rng) -> (Identity, Identity) {
    (Identity::random_mac(rng), Identity::random_mac(rng))
}

fn parties(pw: &str) -> (Party, Party, CurvePoint) {
    let a: Identity = "0A0000000001".parse().unwrap();
    let b: Identity = "0A0000000002".parse().unwrap();
    let ctx = DerivationContext::from_profile(&Profile::IWD_SAE, a.clone(), b.clone(), None, pw, Mode::Hardened);
    let pwe = derive_pwe(&ctx, &mut ChaCha20Rng::seed_from_u64(0), &mut NullSink).unwrap().element.unwrap();
    let curve = CurveParams::p256();
    (
        Party::new(curve.clone(), a.clone(), b.clone(), pwe.clone(), "SAE-KCK-MK"),
        Party::new(curve, b, a, pwe.clone(), "SAE-KCK-MK"),
        pwe,
    )
}

#[test]
fn matched_and_mismatched_runs() {
    let mut rng = ChaCha20Rng::seed_from_u64(31);
    for i in 0..30 {
        let (a, b) = pair(&mut rng);
        let pw: Vec<u8> = (0..12).map(|_| rng.gen_range(b'a'..=b'z')).collect();
        let profile = Profile::ALL[i % 3];
        let ok = run_handshake(&pw, &pw, &a, &b, &profile, &HandshakeOptions::default(), &mut rng).unwrap();
        assert!(ok.succeeded());
        assert!(ok.mk_a.is_some());
        assert_eq!(ok.mk_a, ok.mk_b);
        assert_eq!(ok.kck_a, ok.kck_b);
        let mut other = pw.clone();
        other[0] ^= 1;
        let bad = run_handshake(&pw, &other, &a, &b, &profile, &HandshakeOptions::default(), &mut rng).unwrap();
        assert!(matches!(bad.outcome, Outcome::Failure { stage: Stage::Confirm, .. }));
    }
}

#[test]
fn shared_secret_matches_independent_computation() {
    let curve = CurveParams::p256();
    let q = curve.order().clone();
    let (mut a, mut b, pwe) = parties("hunter2");
    let (ra, ma) = (BigUint::from(0x1234_5678u64), BigUint::from(0x9abc_def0u64));
    let (rb, mb) = (BigUint::from(0x0fed_cba9u64), BigUint::from(0x8765_4321u64));
    let fa = a.commit_with_secrets(ra.clone(), ma.clone()).unwrap();
    let fb = b.commit_with_secrets(rb.clone(), mb.clone()).unwrap();
    let xa = a.process_commit(fb).unwrap();
    let xb = b.process_commit(fa).unwrap();
    assert_eq!(xa, xb);

    let k = curve.scalar_mul(&((&ra * &rb) % &q), &pwe);
    let x = curve.field().to_bytes(k.x().unwrap());
    assert_eq!(xa, x);

    let sum = (ra + ma + rb + mb) % &q;
    let mut ctx = sum.to_bytes_be();
    while ctx.len() < 32 {
        ctx.insert(0, 0);
    }
    let keys = kdf_sha256(&x, b"SAE-KCK-MK", &ctx, 512);
    assert_eq!(a.kck().unwrap().as_slice(), &keys[..32]);
    assert_eq!(a.mk().unwrap().as_slice(), &keys[32..]);
    assert_eq!(b.mk(), a.mk());
}

#[test]
fn commit_validation_aborts() {
    let curve = CurveParams::p256();
    let mut rng = ChaCha20Rng::seed_from_u64(32);
    let cases: Vec<Tamper> = vec![
        Box::new(|f| f.scalar = BigUint::from(1u32)),
        Box::new(|f| f.scalar = CurveParams::p256().order() + 1u32),
        Box::new(|f| {
            let fld = CurveParams::p256().field().clone();
            f.element = CurvePoint::Affine { x: fld.from_u64(4), y: fld.from_u64(7) };
        }),
        Box::new(|f| f.element = CurvePoint::Infinity),
    ];
    for (i, tamper) in cases.iter().enumerate() {
        let (mut a, mut b, _) = parties("pw");
        a.make_commit(&mut rng).unwrap();
        let mut fb = b.make_commit(&mut rng).unwrap();
        tamper(&mut fb);
        let err = a.process_commit(fb).unwrap_err();
        let expected_scalar = i < 2;
        assert_eq!(matches!(err, HandshakeError::OutOfBoundsScalar), expected_scalar, "{err}");
        assert_eq!(matches!(err, HandshakeError::ElementNotOnGroup), !expected_scalar, "{err}");
    }
    let off_curve = [&[0u8; 32][..], &[4u8], &[1u8; 64][..]].concat();
    let (mut a, _, _) = parties("pw");
    a.make_commit(&mut rng).unwrap();
    let mut frame = CommitFrame::decode(&curve, &off_curve).unwrap();
    frame.scalar = BigUint::from(5u32);
    assert!(matches!(a.process_commit(frame), Err(HandshakeError::ElementNotOnGroup)));
}
