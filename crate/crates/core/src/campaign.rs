//! End-to-end attack run: simulate captures, interpret them, prune a dictionary.

use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::attack::{display_password, prune_dictionary, Leak};
use crate::derive::{DerivationContext, Mode, Profile, Variant};
use crate::identity::Identity;
use crate::parallel::map_shards;
use crate::parser::{interpret_trace, ParserConfig, TraceReport};
use crate::seed::{indexed_stream, stream};
use crate::sidechannel::{simulate_trace, ChannelShape, NoiseModel, SimulateError, Trace};

#[derive(Clone, Debug)]
pub struct CampaignConfig {
    pub profile: Profile,
    pub planted: Vec<u8>,
    pub identities: usize,
    pub samples_per_identity: usize,
    pub noise: NoiseModel,
    pub parser: ParserConfig,
    pub seed: u64,
    pub shards: usize,
    /// Fraction of unusable traces above which the report carries a warning.
    pub max_unusable_fraction: f64,
}

impl CampaignConfig {
    pub fn new(profile: Profile, planted: impl Into<Vec<u8>>, identities: usize, samples_per_identity: usize) -> Self {
        CampaignConfig {
            profile,
            planted: planted.into(),
            identities,
            samples_per_identity,
            noise: NoiseModel::shipped(),
            parser: ParserConfig { max_iterations: profile.k_max, ..ParserConfig::default() },
            seed: 0,
            shards: crate::parallel::default_shards(),
            max_unusable_fraction: 0.5,
        }
    }

    pub fn validate(&self) -> Result<(), CampaignError> {
        if self.identities == 0 {
            return Err(CampaignError::Config("at least one identity is required".into()));
        }
        if self.samples_per_identity == 0 {
            return Err(CampaignError::Config("samples per identity must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.max_unusable_fraction) {
            return Err(CampaignError::Config("max unusable fraction must lie in [0, 1]".into()));
        }
        self.noise.validate().map_err(|e| CampaignError::Config(e.to_string()))?;
        self.parser.validate().map_err(CampaignError::Config)
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error("invalid campaign configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Simulate(#[from] SimulateError),
}

#[derive(Clone, Debug, Serialize)]
pub struct CampaignTrace {
    #[serde(flatten)]
    pub report: TraceReport,
    pub truth_k: Option<u32>,
    pub consistent: bool,
}

#[derive(Clone, Debug, Default, Serialize)]
pub struct CampaignTotals {
    pub traces: usize,
    pub samples: usize,
    pub usable_traces: usize,
    pub leaks: usize,
    /// Leaks that contradict the simulator's ground truth.
    pub wrong_leaks: usize,
    /// Sessions skipped because derivation found no element.
    pub derivation_failures: usize,
    #[serde(skip)]
    pub elapsed_secs: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CampaignReport {
    pub profile: String,
    pub seed: u64,
    pub dictionary_size: usize,
    pub planted: String,
    pub traces: Vec<CampaignTrace>,
    pub leaks: Vec<Leak>,
    pub survivors: Vec<String>,
    pub eliminated_per_leak: Vec<u64>,
    pub success: bool,
    pub totals: CampaignTotals,
    pub warnings: Vec<String>,
}

struct Session {
    id: String,
    id_a: Identity,
    id_b: Identity,
    token: Option<[u8; 4]>,
    samples: usize,
    index: u64,
}

fn sessions(cfg: &CampaignConfig) -> Vec<Session> {
    let mut rng = stream(cfg.seed, "campaign/identities");
    let ap = Identity::random_mac(&mut rng);
    let mut out = Vec::new();
    for i in 0..cfg.identities {
        let client = Identity::random_mac(&mut rng);
        match cfg.profile.variant {
            Variant::Sae => out.push(Session {
                id: format!("id{i:04}"),
                id_a: client,
                id_b: ap.clone(),
                token: None,
                samples: cfg.samples_per_identity,
                index: out.len() as u64,
            }),
            Variant::EapPwd => {
                for j in 0..cfg.samples_per_identity {
                    out.push(Session {
                        id: format!("id{i:04}-s{j:02}"),
                        id_a: client.clone(),
                        id_b: ap.clone(),
                        token: Some(rng.gen()),
                        samples: 1,
                        index: out.len() as u64,
                    });
                }
            }
        }
    }
    out
}

/// Runs a full campaign against `dictionary`. The planted password is
/// appended when the dictionary lacks it.
pub fn run_campaign(cfg: &CampaignConfig, dictionary: &[Vec<u8>]) -> Result<CampaignReport, CampaignError> {
    cfg.validate()?;
    let start = Instant::now();
    let shape = ChannelShape::for_variant(cfg.profile.variant);
    let sessions = sessions(cfg);
    let simulated: Vec<Result<Option<Trace>, SimulateError>> = map_shards(&sessions, cfg.shards, |chunk| {
        chunk
            .iter()
            .map(|s| {
                let ctx = DerivationContext::from_profile(
                    &cfg.profile,
                    s.id_a.clone(),
                    s.id_b.clone(),
                    s.token,
                    cfg.planted.clone(),
                    Mode::Vulnerable,
                );
                let mut rng = indexed_stream(cfg.seed, "campaign/session", s.index);
                match simulate_trace(s.id.clone(), &ctx, s.samples, &shape, &cfg.noise, &mut rng) {
                    Ok(t) => Ok(Some(t)),
                    Err(SimulateError::NotFound) => Ok(None),
                    Err(e) => Err(e),
                }
            })
            .collect::<Vec<_>>()
    })
    .into_iter()
    .flatten()
    .collect();

    let mut totals = CampaignTotals::default();
    let mut traces = Vec::new();
    let mut leaks = Vec::new();
    for (session, sim) in sessions.iter().zip(simulated) {
        let Some(trace) = sim? else {
            totals.derivation_failures += 1;
            totals.samples += session.samples;
            continue;
        };
        let report = interpret_trace(&trace, &cfg.parser);
        totals.traces += 1;
        totals.samples += trace.samples.len();
        let truth = trace.ground_truth;
        let consistent = truth.is_some_and(|k| report.outcome.is_consistent_with(k));
        if report.outcome.is_usable() {
            totals.usable_traces += 1;
        }
        if let Some(leak) = report.outcome.to_leak(&trace) {
            if !consistent {
                totals.wrong_leaks += 1;
            }
            leaks.push(leak);
        }
        traces.push(CampaignTrace { report, truth_k: truth, consistent });
    }
    totals.leaks = leaks.len();

    let mut dict = dictionary.to_vec();
    if !dict.contains(&cfg.planted) {
        dict.push(cfg.planted.clone());
    }
    let mut warnings = Vec::new();
    let attempted = totals.traces.max(1);
    let unusable = (totals.traces - totals.usable_traces) as f64 / attempted as f64;
    if unusable > cfg.max_unusable_fraction {
        warnings.push(format!(
            "{} of {} traces were unusable, above the configured ceiling of {}",
            totals.traces - totals.usable_traces,
            totals.traces,
            cfg.max_unusable_fraction
        ));
    }
    let (survivors, eliminated_per_leak) = match prune_dictionary(&dict, &leaks, &cfg.profile, cfg.shards) {
        Ok(r) => (r.survivors, r.eliminated_per_leak),
        Err(_) => {
            warnings.push("no leaks extracted; dictionary left unpruned".into());
            (dict.clone(), Vec::new())
        }
    };
    let success = survivors.len() == 1 && survivors[0] == cfg.planted;
    totals.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(CampaignReport {
        profile: cfg.profile.name.to_string(),
        seed: cfg.seed,
        dictionary_size: dict.len(),
        planted: display_password(&cfg.planted),
        traces,
        leaks,
        survivors: survivors.iter().map(|p| display_password(p)).collect(),
        eliminated_per_leak,
        success,
        totals,
        warnings,
    })
}

/// Reproducible printable dictionary of `size` distinct passwords.
pub fn synthetic_dictionary(size: usize, seed: u64) -> Vec<Vec<u8>> {
    const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz0123456789";
    let mut rng = stream(seed, "dictionary");
    let mut seen = std::collections::HashSet::with_capacity(size);
    let mut out = Vec::with_capacity(size);
    while out.len() < size {
        let len = rng.gen_range(8..=14);
        let pw: Vec<u8> = (0..len).map(|_| ALPHABET[rng.gen_range(0..ALPHABET.len())]).collect();
        if seen.insert(pw.clone()) {
            out.push(pw);
        }
    }
    out
}
