//! Synthetic spy-process observations of derivation runs.
//!
//! A sample is what a Flush+Reload spy sees during one key exchange: hits on
//! a synchronization clock (the per-iteration KDF) and on the random-number
//! routine, each with its delay since the last observed clock hit. Noise is
//! drawn from a [`NoiseModel`].

mod format;
mod noise;
mod simulate;

use serde::{Deserialize, Serialize};

use crate::derive::Variant;
use crate::identity::Identity;

pub use format::{
    parse_answers, parse_trace_jsonl, parse_trace_text, serialize_answers, serialize_trace_jsonl, serialize_trace_text,
    Answer, FormatError,
};
pub use noise::{DelayDist, NoiseError, NoiseModel};
pub use simulate::{sample_from_events, simulate_sample, simulate_trace, synthetic_events, SimulateError};

pub const SYNC_CLOCK_LABEL: &str = "kdf_sha256";
pub const RANDOM_CALL_LABEL: &str = "l_getrandom";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeLabel {
    SyncClock,
    RandomCall,
}

impl ProbeLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            ProbeLabel::SyncClock => SYNC_CLOCK_LABEL,
            ProbeLabel::RandomCall => RANDOM_CALL_LABEL,
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            SYNC_CLOCK_LABEL => Some(ProbeLabel::SyncClock),
            RANDOM_CALL_LABEL => Some(ProbeLabel::RandomCall),
            _ => None,
        }
    }
}

/// One probe hit: label, cycles since the last observed clock hit (or since
/// the capture epoch before the first one), and reload latency.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ProbeEvent {
    pub label: ProbeLabel,
    pub delta: u64,
    pub latency: u32,
}

impl ProbeEvent {
    pub fn clock(delta: u64, latency: u32) -> Self {
        ProbeEvent { label: ProbeLabel::SyncClock, delta, latency }
    }

    pub fn random(delta: u64, latency: u32) -> Self {
        ProbeEvent { label: ProbeLabel::RandomCall, delta, latency }
    }
}

/// Events observed during one key exchange.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Sample {
    pub events: Vec<ProbeEvent>,
}

/// Samples sharing one password and identity pair.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub id: String,
    pub id_a: Option<Identity>,
    pub id_b: Option<Identity>,
    /// EAP-pwd session token, when known.
    pub token: Option<[u8; 4]>,
    pub samples: Vec<Sample>,
    /// Simulator-only; never serialized into the attacker view.
    pub ground_truth: Option<u32>,
}

impl Trace {
    pub fn new(id: impl Into<String>) -> Self {
        Trace { id: id.into(), id_a: None, id_b: None, token: None, samples: Vec::new(), ground_truth: None }
    }
}

/// How derivation steps map onto probe hits.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChannelShape {
    /// Clock hits per loop iteration.
    pub clocks_per_iter: u32,
    /// Random draws of the qr/qnr setup visible before the loop.
    pub preamble_len: u32,
}

impl ChannelShape {
    pub const SAE: ChannelShape = ChannelShape { clocks_per_iter: 3, preamble_len: 5 };
    pub const EAP_PWD: ChannelShape = ChannelShape { clocks_per_iter: 3, preamble_len: 5 };

    pub fn for_variant(v: Variant) -> Self {
        match v {
            Variant::Sae => Self::SAE,
            Variant::EapPwd => Self::EAP_PWD,
        }
    }
}
