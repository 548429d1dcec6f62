//! Commit/confirm exchange between two parties sharing a password element.

use std::collections::VecDeque;
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::Zero;
use rand::RngCore;
use serde::Serialize;
use subtle::ConstantTimeEq;

use crate::derive::{derive_pwe, DerivationContext, DeriveError, Mode, NullSink, Profile, Variant};
use crate::ec::{random_below, to_fixed_be, CurveParams, CurvePoint, EcError};
use crate::identity::Identity;
use crate::kdf::{hmac_sha256, kdf_sha256};

pub const KEY_LEN: usize = 32;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CommitFrame {
    pub scalar: BigUint,
    pub element: CurvePoint,
}

impl CommitFrame {
    /// Fixed-width big-endian scalar followed by the uncompressed element.
    pub fn encode(&self, curve: &CurveParams) -> Result<Vec<u8>, EcError> {
        if self.scalar.bits() > 8 * curve.scalar_byte_len() as u64 {
            return Err(EcError::Encoding("scalar too wide"));
        }
        let mut out = to_fixed_be(&self.scalar, curve.scalar_byte_len());
        out.extend(curve.encode_point(&self.element)?);
        Ok(out)
    }

    pub fn decode(curve: &CurveParams, bytes: &[u8]) -> Result<Self, EcError> {
        let n = curve.scalar_byte_len();
        if bytes.len() < n {
            return Err(EcError::Encoding("commit frame too short"));
        }
        Ok(CommitFrame { scalar: BigUint::from_bytes_be(&bytes[..n]), element: curve.decode_point(&bytes[n..])? })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ConfirmFrame {
    pub tag: [u8; KEY_LEN],
}

impl ConfirmFrame {
    pub fn decode(bytes: &[u8]) -> Result<Self, EcError> {
        let tag = bytes.try_into().map_err(|_| EcError::Encoding("confirm tag length"))?;
        Ok(ConfirmFrame { tag })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Init,
    Committed,
    Confirmed,
    Failed,
}

#[derive(Debug, thiserror::Error)]
pub enum HandshakeError {
    #[error("peer commit scalar outside [2, q)")]
    OutOfBoundsScalar,
    #[error("peer commit element is not a group member")]
    ElementNotOnGroup,
    #[error("peer reflected our own commit")]
    ReflectedCommit,
    #[error("shared secret is the point at infinity")]
    DegenerateSecret,
    #[error("operation not allowed in phase {0:?}")]
    WrongPhase(Phase),
    #[error("password element could not be derived")]
    PasswordElementNotFound,
    #[error(transparent)]
    Ec(#[from] EcError),
    #[error(transparent)]
    Derive(#[from] DeriveError),
}

/// One side of the exchange.
pub struct Party {
    curve: Arc<CurveParams>,
    identity: Identity,
    peer: Identity,
    pwe: CurvePoint,
    key_label: String,
    r: BigUint,
    m: BigUint,
    own_commit: Option<CommitFrame>,
    peer_commit: Option<CommitFrame>,
    kck: Option<[u8; KEY_LEN]>,
    mk: Option<[u8; KEY_LEN]>,
    phase: Phase,
}

impl Party {
    pub fn new(
        curve: Arc<CurveParams>,
        identity: Identity,
        peer: Identity,
        pwe: CurvePoint,
        key_label: impl Into<String>,
    ) -> Self {
        Party {
            curve,
            identity,
            peer,
            pwe,
            key_label: key_label.into(),
            r: BigUint::zero(),
            m: BigUint::zero(),
            own_commit: None,
            peer_commit: None,
            kck: None,
            mk: None,
            phase: Phase::Init,
        }
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn identity(&self) -> &Identity {
        &self.identity
    }

    pub fn kck(&self) -> Option<&[u8; KEY_LEN]> {
        self.kck.as_ref()
    }

    pub fn mk(&self) -> Option<&[u8; KEY_LEN]> {
        self.mk.as_ref()
    }

    /// Draws `r, m` in `[2, q)` and returns `(r + m mod q, -m P)`.
    /// Redraws if the scalar would fall below 2.
    pub fn make_commit<R: RngCore + ?Sized>(&mut self, rng: &mut R) -> Result<CommitFrame, HandshakeError> {
        self.expect_phase(Phase::Init)?;
        let q = self.curve.order();
        let span = q - 2u32;
        loop {
            let r = random_below(&span, rng)? + 2u32;
            let m = random_below(&span, rng)? + 2u32;
            if (&r + &m) % q >= BigUint::from(2u32) {
                return self.commit_with_secrets(r, m);
            }
        }
    }

    /// Commits with caller-chosen secrets. Intended for tests.
    pub fn commit_with_secrets(&mut self, r: BigUint, m: BigUint) -> Result<CommitFrame, HandshakeError> {
        self.expect_phase(Phase::Init)?;
        let q = self.curve.order();
        let scalar = (&r + &m) % q;
        let element = self.curve.negate(&self.curve.scalar_mul(&m, &self.pwe));
        let frame = CommitFrame { scalar, element };
        self.r = r;
        self.m = m;
        self.own_commit = Some(frame.clone());
        self.phase = Phase::Committed;
        Ok(frame)
    }

    /// Validates the peer commit and derives `kck || mk`. Returns the
    /// x-coordinate of the shared secret.
    pub fn process_commit(&mut self, frame: CommitFrame) -> Result<Vec<u8>, HandshakeError> {
        self.expect_phase(Phase::Committed)?;
        let res = self.process_commit_inner(frame);
        if res.is_err() {
            self.fail();
        }
        res
    }

    fn process_commit_inner(&mut self, frame: CommitFrame) -> Result<Vec<u8>, HandshakeError> {
        let curve = &self.curve;
        let q = curve.order();
        if frame.scalar < BigUint::from(2u32) || &frame.scalar >= q {
            return Err(HandshakeError::OutOfBoundsScalar);
        }
        if frame.element.is_infinity() || !curve.is_on_curve(&frame.element) {
            return Err(HandshakeError::ElementNotOnGroup);
        }
        let own = self.own_commit.as_ref().expect("committed");
        if *own == frame {
            return Err(HandshakeError::ReflectedCommit);
        }
        let k = curve.scalar_mul(&self.r, &curve.add(&curve.scalar_mul(&frame.scalar, &self.pwe), &frame.element));
        let x = k.x().ok_or(HandshakeError::DegenerateSecret)?;
        let x_bytes = curve.field().to_bytes(x);
        let context = to_fixed_be(&((&own.scalar + &frame.scalar) % q), curve.scalar_byte_len());
        let keys = kdf_sha256(&x_bytes, self.key_label.as_bytes(), &context, (16 * KEY_LEN) as u16);
        self.kck = Some(keys[..KEY_LEN].try_into().unwrap());
        self.mk = Some(keys[KEY_LEN..].try_into().unwrap());
        self.peer_commit = Some(frame);
        Ok(x_bytes)
    }

    /// Canonical transcript: both `(identity, commit)` pairs, smaller
    /// identity first, every field length-prefixed.
    fn transcript(&self) -> Result<Vec<u8>, HandshakeError> {
        let own = self.own_commit.as_ref().ok_or(HandshakeError::WrongPhase(self.phase))?;
        let peer = self.peer_commit.as_ref().ok_or(HandshakeError::WrongPhase(self.phase))?;
        let mut parts =
            [(self.identity.encode(), own.encode(&self.curve)?), (self.peer.encode(), peer.encode(&self.curve)?)];
        parts.sort();
        let mut out = Vec::new();
        for (id, commit) in parts.iter() {
            for field in [id, commit] {
                out.extend_from_slice(&(field.len() as u32).to_be_bytes());
                out.extend_from_slice(field);
            }
        }
        Ok(out)
    }

    fn tag_for(&self, sender: &Identity) -> Result<[u8; KEY_LEN], HandshakeError> {
        let kck = self.kck.ok_or(HandshakeError::WrongPhase(self.phase))?;
        Ok(hmac_sha256(&kck, &[&sender.encode(), &self.transcript()?]))
    }

    pub fn make_confirm(&self) -> Result<ConfirmFrame, HandshakeError> {
        self.expect_phase(Phase::Committed)?;
        Ok(ConfirmFrame { tag: self.tag_for(&self.identity)? })
    }

    /// Checks the peer tag in constant time. A mismatch moves the party to
    /// [`Phase::Failed`] for good.
    pub fn verify_confirm(&mut self, frame: &ConfirmFrame) -> Result<bool, HandshakeError> {
        self.expect_phase(Phase::Committed)?;
        let expected = self.tag_for(&self.peer)?;
        let ok: bool = expected.ct_eq(&frame.tag).into();
        if ok {
            self.phase = Phase::Confirmed;
        } else {
            self.fail();
        }
        Ok(ok)
    }

    fn fail(&mut self) {
        self.phase = Phase::Failed;
        self.kck = None;
        self.mk = None;
    }

    fn expect_phase(&self, want: Phase) -> Result<(), HandshakeError> {
        if self.phase == want {
            Ok(())
        } else {
            Err(HandshakeError::WrongPhase(self.phase))
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Message {
    Commit(Vec<u8>),
    Confirm(Vec<u8>),
}

/// Ordered, reliable in-process duplex link.
#[derive(Debug, Default)]
pub struct Duplex {
    to_b: VecDeque<Message>,
    to_a: VecDeque<Message>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum End {
    A,
    B,
}

impl Duplex {
    pub fn send(&mut self, from: End, msg: Message) {
        match from {
            End::A => self.to_b.push_back(msg),
            End::B => self.to_a.push_back(msg),
        }
    }

    pub fn recv(&mut self, at: End) -> Option<Message> {
        match at {
            End::A => self.to_a.pop_front(),
            End::B => self.to_b.pop_front(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Derivation,
    Commit,
    Confirm,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum Outcome {
    Success,
    Failure { stage: Stage, reason: String },
}

#[derive(Clone, Debug, Serialize)]
pub struct HandshakeReport {
    pub outcome: Outcome,
    #[serde(serialize_with = "ser_key")]
    pub mk_a: Option<[u8; KEY_LEN]>,
    #[serde(serialize_with = "ser_key")]
    pub mk_b: Option<[u8; KEY_LEN]>,
    #[serde(serialize_with = "ser_key")]
    pub kck_a: Option<[u8; KEY_LEN]>,
    #[serde(serialize_with = "ser_key")]
    pub kck_b: Option<[u8; KEY_LEN]>,
}

fn ser_key<S: serde::Serializer>(k: &Option<[u8; KEY_LEN]>, s: S) -> Result<S::Ok, S::Error> {
    match k {
        Some(k) => s.serialize_some(&hex::encode(k)),
        None => s.serialize_none(),
    }
}

impl HandshakeReport {
    pub fn succeeded(&self) -> bool {
        self.outcome == Outcome::Success
    }

    fn failure(stage: Stage, reason: impl ToString) -> Self {
        HandshakeReport {
            outcome: Outcome::Failure { stage, reason: reason.to_string() },
            mk_a: None,
            mk_b: None,
            kck_a: None,
            kck_b: None,
        }
    }
}

#[derive(Clone, Debug)]
pub struct HandshakeOptions {
    pub mode: Mode,
    /// Which side puts its commit on the wire first.
    pub first: End,
}

impl Default for HandshakeOptions {
    fn default() -> Self {
        HandshakeOptions { mode: Mode::Hardened, first: End::A }
    }
}

/// Runs a full exchange between A (password `pw_a`) and B (`pw_b`).
///
/// For EAP-pwd profiles B acts as server and draws the session token.
pub fn run_handshake<R: RngCore + ?Sized>(
    pw_a: &[u8],
    pw_b: &[u8],
    id_a: &Identity,
    id_b: &Identity,
    profile: &Profile,
    opts: &HandshakeOptions,
    rng: &mut R,
) -> Result<HandshakeReport, HandshakeError> {
    let curve = profile.curve_params();
    let token = match profile.variant {
        Variant::Sae => None,
        Variant::EapPwd => {
            let mut t = [0u8; 4];
            rng.try_fill_bytes(&mut t).map_err(|_| EcError::Rng)?;
            Some(t)
        }
    };
    let mut derive = |pw: &[u8]| -> Result<Option<CurvePoint>, HandshakeError> {
        let ctx = DerivationContext::from_profile(profile, id_a.clone(), id_b.clone(), token, pw, opts.mode);
        Ok(derive_pwe(&ctx, rng, &mut NullSink)?.element)
    };
    let (Some(pwe_a), Some(pwe_b)) = (derive(pw_a)?, derive(pw_b)?) else {
        return Ok(HandshakeReport::failure(Stage::Derivation, HandshakeError::PasswordElementNotFound));
    };

    let mut a = Party::new(curve.clone(), id_a.clone(), id_b.clone(), pwe_a, profile.key_label);
    let mut b = Party::new(curve.clone(), id_b.clone(), id_a.clone(), pwe_b, profile.key_label);
    let mut link = Duplex::default();

    let order = match opts.first {
        End::A => [End::A, End::B],
        End::B => [End::B, End::A],
    };
    for end in order {
        let party = if end == End::A { &mut a } else { &mut b };
        let frame = party.make_commit(rng)?;
        link.send(end, Message::Commit(frame.encode(&curve)?));
    }
    for end in order {
        let party = if end == End::A { &mut a } else { &mut b };
        let Some(Message::Commit(bytes)) = link.recv(end) else {
            return Ok(HandshakeReport::failure(Stage::Commit, "expected commit"));
        };
        let frame = match CommitFrame::decode(&curve, &bytes) {
            Ok(f) => f,
            Err(e) => return Ok(HandshakeReport::failure(Stage::Commit, e)),
        };
        if let Err(e) = party.process_commit(frame) {
            return Ok(HandshakeReport::failure(Stage::Commit, e));
        }
    }
    for end in order {
        let party = if end == End::A { &a } else { &b };
        link.send(end, Message::Confirm(party.make_confirm()?.tag.to_vec()));
    }
    let mut all_ok = true;
    for end in order {
        let party = if end == End::A { &mut a } else { &mut b };
        let Some(Message::Confirm(bytes)) = link.recv(end) else {
            return Ok(HandshakeReport::failure(Stage::Confirm, "expected confirm"));
        };
        let frame = ConfirmFrame::decode(&bytes)?;
        all_ok &= party.verify_confirm(&frame)?;
    }
    if !all_ok {
        return Ok(HandshakeReport::failure(Stage::Confirm, "confirm tag mismatch"));
    }
    Ok(HandshakeReport {
        outcome: Outcome::Success,
        mk_a: a.mk().copied(),
        mk_b: b.mk().copied(),
        kck_a: a.kck().copied(),
        kck_b: b.kck().copied(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn ids() -> (Identity, Identity) {
        ("020000000001".parse().unwrap(), "020000000002".parse().unwrap())
    }

    fn parties() -> (Party, Party) {
        let curve = CurveParams::p256();
        let (a, b) = ids();
        let ctx =
            DerivationContext::from_profile(&Profile::IWD_SAE, a.clone(), b.clone(), None, "pw", Mode::Vulnerable);
        let pwe = derive_pwe(&ctx, &mut ChaCha20Rng::seed_from_u64(0), &mut NullSink).unwrap().element.unwrap();
        (
            Party::new(curve.clone(), a.clone(), b.clone(), pwe.clone(), "SAE-KCK-MK"),
            Party::new(curve, b, a, pwe, "SAE-KCK-MK"),
        )
    }

    #[test]
    fn forced_secrets() {
        let (mut a, _) = parties();
        let curve = CurveParams::p256();
        let f = a.commit_with_secrets(2u32.into(), 3u32.into()).unwrap();
        assert_eq!(f.scalar, BigUint::from(5u32));
        assert_eq!(f.element, curve.scalar_mul(&3u32.into(), &curve.negate(&a.pwe)));
        assert!(curve.is_on_curve(&f.element));
    }

    #[test]
    fn shared_secret_matches() {
        let (mut a, mut b) = parties();
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let fa = a.make_commit(&mut rng).unwrap();
        let fb = b.make_commit(&mut rng).unwrap();
        let xa = a.process_commit(fb).unwrap();
        let xb = b.process_commit(fa).unwrap();
        assert_eq!(xa, xb);
        assert_eq!(a.kck(), b.kck());
        let ca = a.make_confirm().unwrap();
        let cb = b.make_confirm().unwrap();
        assert_ne!(ca, cb);
        assert!(a.verify_confirm(&cb).unwrap());
        assert!(b.verify_confirm(&ca).unwrap());
        assert_eq!(a.phase(), Phase::Confirmed);
    }

    #[test]
    fn rejects_bad_scalar_and_point() {
        let curve = CurveParams::p256();
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        for s in [0u32, 1] {
            let (mut a, mut b) = parties();
            a.make_commit(&mut rng).unwrap();
            let mut fb = b.make_commit(&mut rng).unwrap();
            fb.scalar = s.into();
            assert!(matches!(a.process_commit(fb), Err(HandshakeError::OutOfBoundsScalar)));
            assert_eq!(a.phase(), Phase::Failed);
            assert!(matches!(a.make_confirm(), Err(HandshakeError::WrongPhase(Phase::Failed))));
        }
        let (mut a, mut b) = parties();
        a.make_commit(&mut rng).unwrap();
        let mut fb = b.make_commit(&mut rng).unwrap();
        fb.scalar = curve.order().clone();
        assert!(matches!(a.process_commit(fb.clone()), Err(HandshakeError::OutOfBoundsScalar)));

        let (mut a, _) = parties();
        a.make_commit(&mut rng).unwrap();
        let f = curve.field();
        fb.scalar = 5u32.into();
        fb.element = CurvePoint::Affine { x: f.from_u64(1), y: f.from_u64(1) };
        assert!(matches!(a.process_commit(fb.clone()), Err(HandshakeError::ElementNotOnGroup)));

        let (mut a, _) = parties();
        a.make_commit(&mut rng).unwrap();
        fb.element = CurvePoint::Infinity;
        assert!(matches!(a.process_commit(fb), Err(HandshakeError::ElementNotOnGroup)));
    }

    #[test]
    fn reflection_rejected() {
        let (mut a, _) = parties();
        let f = a.make_commit(&mut ChaCha20Rng::seed_from_u64(3)).unwrap();
        assert!(matches!(a.process_commit(f), Err(HandshakeError::ReflectedCommit)));
    }

    #[test]
    fn tampered_transcript_fails() {
        let (mut a, mut b) = parties();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let fa = a.make_commit(&mut rng).unwrap();
        let fb = b.make_commit(&mut rng).unwrap();
        a.process_commit(fb).unwrap();
        // B sees a commit whose element was swapped for a different valid point.
        let curve = CurveParams::p256();
        let tampered = CommitFrame { scalar: fa.scalar.clone(), element: curve.double(&fa.element) };
        b.process_commit(tampered).unwrap();
        let cb = b.make_confirm().unwrap();
        assert!(!a.verify_confirm(&cb).unwrap());
        assert_eq!(a.phase(), Phase::Failed);
    }

    #[test]
    fn wire_round_trip() {
        let (mut a, _) = parties();
        let curve = CurveParams::p256();
        let f = a.make_commit(&mut ChaCha20Rng::seed_from_u64(5)).unwrap();
        let bytes = f.encode(&curve).unwrap();
        assert_eq!(bytes.len(), 32 + 65);
        assert_eq!(CommitFrame::decode(&curve, &bytes).unwrap(), f);
    }

    #[test]
    fn full_runs() {
        let (a, b) = ids();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        for profile in Profile::ALL {
            let ok = run_handshake(b"pw", b"pw", &a, &b, &profile, &HandshakeOptions::default(), &mut rng).unwrap();
            assert!(ok.succeeded(), "{profile}");
            assert_eq!(ok.mk_a, ok.mk_b);
            let bad = run_handshake(b"pw", b"px", &a, &b, &profile, &HandshakeOptions::default(), &mut rng).unwrap();
            assert!(matches!(bad.outcome, Outcome::Failure { stage: Stage::Confirm, .. }));
        }
        let opts = HandshakeOptions { mode: Mode::Vulnerable, first: End::B };
        let r = run_handshake(b"pw", b"pw", &a, &b, &Profile::IWD_SAE, &opts, &mut rng).unwrap();
        assert!(r.succeeded());
    }
}
