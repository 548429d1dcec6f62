//! Timing of branching vs branch-free derivation and fingerprint constancy.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Instant;

use rand::Rng;
use serde::Serialize;

use crate::derive::{derive_pwe, operation_trace_fingerprint, DerivationContext, DeriveError, Mode, NullSink, Profile};
use crate::identity::Identity;
use crate::seed::stream;

pub const MIN_RUNS: usize = 100;

#[derive(Clone, Debug, Serialize)]
pub struct TimingStats {
    pub mean_ns: f64,
    pub median_ns: f64,
}

impl TimingStats {
    fn of(v: &[f64]) -> Self {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        let n = s.len();
        let median = if n % 2 == 1 { s[n / 2] } else { (s[n / 2 - 1] + s[n / 2]) / 2.0 };
        TimingStats { mean_ns: s.iter().sum::<f64>() / n as f64, median_ns: median }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct IterationTiming {
    pub success_iteration: u32,
    pub runs: usize,
    pub mean_ns: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MitigationReport {
    pub profile: String,
    pub runs: usize,
    pub vulnerable: TimingStats,
    pub hardened: TimingStats,
    pub mean_ratio: f64,
    pub median_ratio: f64,
    /// Both modes returned the same element for every password.
    pub elements_agree: bool,
    pub distinct_hardened_fingerprints: usize,
    pub fingerprints_constant: bool,
    /// Vulnerable timing grouped by the iteration that succeeded.
    pub vulnerable_by_iteration: Vec<IterationTiming>,
}

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error("at least {MIN_RUNS} runs are required, got {0}")]
    TooFewRuns(usize),
    #[error(transparent)]
    Derive(#[from] DeriveError),
}

/// Times both modes over `runs` random passwords with fixed identities.
///
/// Runs alternate between modes so drift affects both equally.
pub fn bench_mitigation(profile: &Profile, runs: usize, seed: u64) -> Result<MitigationReport, BenchError> {
    if runs < MIN_RUNS {
        return Err(BenchError::TooFewRuns(runs));
    }
    let mut rng = stream(seed, "bench/inputs");
    let id_a = Identity::random_mac(&mut rng);
    let id_b = Identity::random_mac(&mut rng);
    let token: [u8; 4] = rng.gen();
    let base = DerivationContext::from_profile(profile, id_a, id_b, Some(token), Vec::new(), Mode::Vulnerable);
    let mut blind_rng = stream(seed, "bench/blinding");
    let mut vuln = Vec::with_capacity(runs);
    let mut hard = Vec::with_capacity(runs);
    let mut by_k: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
    let mut fingerprints = BTreeSet::new();
    let mut agree = true;
    for i in 0..runs {
        let len = rng.gen_range(8..=16);
        let pw: Vec<u8> = (0..len).map(|_| rng.gen_range(b'!'..=b'~')).collect();
        let v_ctx = base.with_password(pw);
        let h_ctx = v_ctx.with_mode(Mode::Hardened);
        let (v, h) = if i % 2 == 0 {
            let v = timed(&v_ctx, &mut blind_rng)?;
            (v, timed(&h_ctx, &mut blind_rng)?)
        } else {
            let h = timed(&h_ctx, &mut blind_rng)?;
            (timed(&v_ctx, &mut blind_rng)?, h)
        };
        agree &= v.1.element == h.1.element;
        if let Some(k) = v.1.success_iteration {
            by_k.entry(k).or_default().push(v.0);
        }
        vuln.push(v.0);
        hard.push(h.0);
        fingerprints.insert(operation_trace_fingerprint(&h_ctx, &mut blind_rng)?);
    }
    let vulnerable = TimingStats::of(&vuln);
    let hardened = TimingStats::of(&hard);
    Ok(MitigationReport {
        profile: profile.name.to_string(),
        runs,
        mean_ratio: hardened.mean_ns / vulnerable.mean_ns,
        median_ratio: hardened.median_ns / vulnerable.median_ns,
        vulnerable,
        hardened,
        elements_agree: agree,
        distinct_hardened_fingerprints: fingerprints.len(),
        fingerprints_constant: fingerprints.len() == 1,
        vulnerable_by_iteration: by_k
            .into_iter()
            .map(|(k, v)| IterationTiming {
                success_iteration: k,
                runs: v.len(),
                mean_ns: v.iter().sum::<f64>() / v.len() as f64,
            })
            .collect(),
    })
}

fn timed<R: rand::RngCore>(
    ctx: &DerivationContext,
    rng: &mut R,
) -> Result<(f64, crate::derive::DerivationResult), DeriveError> {
    let t = Instant::now();
    let r = derive_pwe(ctx, rng, &mut NullSink)?;
    Ok((t.elapsed().as_nanos() as f64, r))
}
