//! Hunting-and-pecking password-element derivation.
//!
//! Both the SAE and EAP-pwd seed layouts are supported, each in a branching
//! (vulnerable) and a branch-free (hardened) execution mode. Every run
//! reports its steps to an [`EventSink`], which is what the trace simulator
//! consumes.

mod events;
mod pwe;
mod scan;

use std::fmt;
use std::sync::Arc;

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::ec::{to_fixed_be, CurveParams, CurvePoint, EcError, Legendre};
use crate::identity::Identity;
use crate::kdf::{hmac_sha256, kdf_sha256, DIGEST_LEN};

pub use events::{Event, EventKind, EventSink, NullSink};
pub use pwe::{derive_pwe, first_success, operation_trace_fingerprint};
pub use scan::{scan_high_iteration, ScanHit};

pub const SAE_LABEL: &[u8] = b"SAE Hunting and Pecking";
pub const EAP_PWD_LABEL: &[u8] = b"EAP-pwd Hunting And Pecking";

/// Hard upper bound on the counter, which is hashed as a single byte.
pub const COUNTER_CEILING: u32 = 255;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    Sae,
    EapPwd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Vulnerable,
    Hardened,
}

impl std::str::FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "vulnerable" => Ok(Mode::Vulnerable),
            "hardened" => Ok(Mode::Hardened),
            _ => Err(format!("unknown mode `{s}` (expected vulnerable or hardened)")),
        }
    }
}

/// Named parameter set for a deployment.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Profile {
    pub name: &'static str,
    pub variant: Variant,
    /// Iteration cap. For vulnerable EAP-pwd the loop instead runs until
    /// success or [`COUNTER_CEILING`].
    pub k_max: u32,
    pub curve: &'static str,
    /// Label used when expanding the shared secret into `kck || mk`.
    pub key_label: &'static str,
}

impl Profile {
    pub const IWD_SAE: Profile =
        Profile { name: "iwd-sae", variant: Variant::Sae, k_max: 20, curve: "P-256", key_label: "SAE-KCK-MK" };
    pub const RFC7664_SAE: Profile =
        Profile { name: "rfc7664-sae", variant: Variant::Sae, k_max: 40, curve: "P-256", key_label: "SAE-KCK-MK" };
    pub const EAP_PWD: Profile =
        Profile { name: "eap-pwd", variant: Variant::EapPwd, k_max: 40, curve: "P-256", key_label: "SAE-KCK-MK" };

    pub const ALL: [Profile; 3] = [Self::IWD_SAE, Self::RFC7664_SAE, Self::EAP_PWD];

    pub fn named(name: &str) -> Option<Profile> {
        Self::ALL.into_iter().find(|p| p.name.eq_ignore_ascii_case(name))
    }

    pub fn curve_params(&self) -> Arc<CurveParams> {
        CurveParams::named(self.curve).expect("profile curves are built in")
    }

    /// Iterations a vulnerable run may execute before giving up.
    pub fn search_limit(&self) -> u32 {
        match self.variant {
            Variant::Sae => self.k_max,
            Variant::EapPwd => COUNTER_CEILING,
        }
    }
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum DeriveError {
    #[error("invalid derivation context: {0}")]
    InvalidContext(&'static str),
    #[error(transparent)]
    Ec(#[from] EcError),
}

/// Everything one derivation depends on.
#[derive(Clone)]
pub struct DerivationContext {
    pub variant: Variant,
    pub id_a: Identity,
    pub id_b: Identity,
    /// Server session token; present exactly for EAP-pwd.
    pub token: Option<[u8; 4]>,
    pub password: Vec<u8>,
    pub curve: Arc<CurveParams>,
    pub k_max: u32,
    pub mode: Mode,
}

impl fmt::Debug for DerivationContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DerivationContext")
            .field("variant", &self.variant)
            .field("id_a", &self.id_a)
            .field("id_b", &self.id_b)
            .field("token", &self.token.map(hex::encode))
            .field("password_len", &self.password.len())
            .field("curve", &self.curve.name())
            .field("k_max", &self.k_max)
            .field("mode", &self.mode)
            .finish()
    }
}

impl DerivationContext {
    pub fn sae(
        curve: Arc<CurveParams>,
        id_a: Identity,
        id_b: Identity,
        password: impl Into<Vec<u8>>,
        k_max: u32,
        mode: Mode,
    ) -> Self {
        DerivationContext {
            variant: Variant::Sae,
            id_a,
            id_b,
            token: None,
            password: password.into(),
            curve,
            k_max,
            mode,
        }
    }

    /// `id_a` is the peer (client), `id_b` the server.
    pub fn eap_pwd(
        curve: Arc<CurveParams>,
        id_a: Identity,
        id_b: Identity,
        token: [u8; 4],
        password: impl Into<Vec<u8>>,
        k_max: u32,
        mode: Mode,
    ) -> Self {
        DerivationContext {
            variant: Variant::EapPwd,
            id_a,
            id_b,
            token: Some(token),
            password: password.into(),
            curve,
            k_max,
            mode,
        }
    }

    /// Context from a named profile. `token` is required for EAP-pwd and
    /// ignored for SAE.
    pub fn from_profile(
        profile: &Profile,
        id_a: Identity,
        id_b: Identity,
        token: Option<[u8; 4]>,
        password: impl Into<Vec<u8>>,
        mode: Mode,
    ) -> Self {
        DerivationContext {
            variant: profile.variant,
            id_a,
            id_b,
            token: match profile.variant {
                Variant::Sae => None,
                Variant::EapPwd => token,
            },
            password: password.into(),
            curve: profile.curve_params(),
            k_max: profile.k_max,
            mode,
        }
    }

    pub fn with_password(&self, password: impl Into<Vec<u8>>) -> Self {
        DerivationContext { password: password.into(), ..self.clone() }
    }

    pub fn with_mode(&self, mode: Mode) -> Self {
        DerivationContext { mode, ..self.clone() }
    }

    pub fn validate(&self) -> Result<(), DeriveError> {
        if self.k_max < 1 {
            return Err(DeriveError::InvalidContext("k_max must be at least 1"));
        }
        if self.k_max > COUNTER_CEILING {
            return Err(DeriveError::InvalidContext("k_max exceeds the one-byte counter"));
        }
        match (self.variant, self.token) {
            (Variant::Sae, Some(_)) => Err(DeriveError::InvalidContext("SAE takes no token")),
            (Variant::EapPwd, None) => Err(DeriveError::InvalidContext("EAP-pwd requires a token")),
            _ => Ok(()),
        }
    }

    /// Iterations the vulnerable loop may run.
    pub fn search_limit(&self) -> u32 {
        match (self.variant, self.mode) {
            (Variant::EapPwd, Mode::Vulnerable) => COUNTER_CEILING,
            _ => self.k_max,
        }
    }

    fn label(&self) -> &'static [u8] {
        match self.variant {
            Variant::Sae => SAE_LABEL,
            Variant::EapPwd => EAP_PWD_LABEL,
        }
    }

    /// Seed for `password` at `counter`. Split from [`seed_and_value`] so
    /// the SAE dummy iterations can hash a substitute string.
    fn seed_for(&self, password: &[u8], counter: u32) -> [u8; DIGEST_LEN] {
        let c = [counter as u8];
        match self.variant {
            Variant::Sae => {
                let (hi, lo) = if self.id_a >= self.id_b { (&self.id_a, &self.id_b) } else { (&self.id_b, &self.id_a) };
                let mut key = hi.encode();
                key.extend_from_slice(&lo.encode());
                hmac_sha256(&key, &[password, &c])
            }
            Variant::EapPwd => {
                let token = self.token.unwrap_or_default();
                hmac_sha256(&[0u8; DIGEST_LEN], &[&token, &self.id_a.encode(), &self.id_b.encode(), password, &c])
            }
        }
    }

    fn candidate(&self, password: &[u8], counter: u32) -> Candidate {
        let seed = self.seed_for(password, counter);
        let field = self.curve.field();
        let p_bytes = to_fixed_be(field.modulus(), field.byte_len());
        let bits = field.bits() as u16;
        let value = BigUint::from_bytes_be(&kdf_sha256(&seed, self.label(), &p_bytes, bits));
        let parity = seed[DIGEST_LEN - 1] & 1 == 1;
        Candidate { seed, value, parity }
    }
}

/// Output of one loop iteration's hashing step.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Candidate {
    pub seed: [u8; DIGEST_LEN],
    /// Candidate x-coordinate, not reduced; values `>= p` fail the iteration.
    pub value: BigUint,
    /// Parity wanted for the y-coordinate.
    pub parity: bool,
}

impl Candidate {
    pub fn in_range(&self, curve: &CurveParams) -> bool {
        &self.value < curve.p()
    }
}

/// Seed, candidate and parity bit for `counter` under the context password.
pub fn seed_and_value(ctx: &DerivationContext, counter: u32) -> Result<Candidate, DeriveError> {
    if !(1..=COUNTER_CEILING).contains(&counter) {
        return Err(DeriveError::InvalidContext("counter must be in 1..=255"));
    }
    Ok(ctx.candidate(&ctx.password, counter))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct IterationRecord {
    pub counter: u32,
    /// Whether the candidate was below p.
    pub in_range: bool,
    /// Residuosity of `x^3 + ax + b`; absent when the test was skipped.
    pub qr: Option<i8>,
    pub first_success: bool,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DerivationResult {
    pub element: Option<CurvePoint>,
    /// 1-based iteration of the first success; `None` if none was found.
    pub success_iteration: Option<u32>,
    pub iterations_executed: u32,
    pub outcome_log: Vec<IterationRecord>,
    pub blinding_draws: u32,
}

impl DerivationResult {
    pub fn found(&self) -> bool {
        self.success_iteration.is_some()
    }
}

pub(crate) fn legendre_code(l: Legendre) -> i8 {
    l.as_i8()
}
