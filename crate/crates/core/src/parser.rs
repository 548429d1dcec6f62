//! Attacker-side trace interpretation.
//!
//! Samples are filtered for structural sanity, each surviving sample is
//! turned into a per-iteration score vector (sum of `RandomCall` delays per
//! iteration, stopping at the first long delay), and the vectors of a trace
//! are summed into a decision.

use serde::{Deserialize, Serialize};

use crate::attack::Leak;
use crate::sidechannel::{ProbeLabel, Sample, Trace};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ParserConfig {
    /// A `RandomCall` delay above this ends the sample.
    pub long_delay_threshold: u64,
    pub min_well_formed_events: usize,
    /// Top score must reach this multiple of the runner-up for an exact answer.
    pub decision_margin: f64,
    pub max_iterations: u32,
    /// Leading `RandomCall` events expected before the loop.
    pub preamble_len: usize,
    /// Clock deltas at or below this never open an iteration.
    pub refractory_floor: u64,
    /// Refractory window as a fraction of the median inter-iteration delta.
    pub refractory_fraction: f64,
}

impl Default for ParserConfig {
    fn default() -> Self {
        ParserConfig {
            long_delay_threshold: 1500,
            min_well_formed_events: 8,
            decision_margin: 2.0,
            max_iterations: 20,
            preamble_len: 5,
            refractory_floor: 500,
            refractory_fraction: 1.0 / 3.0,
        }
    }
}

impl ParserConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.long_delay_threshold == 0 {
            return Err("long_delay_threshold must be positive".into());
        }
        if self.decision_margin.is_nan() || self.decision_margin < 1.0 {
            return Err("decision_margin must be at least 1".into());
        }
        if self.max_iterations == 0 {
            return Err("max_iterations must be positive".into());
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum WarningReason {
    NoUsableSamples,
    NoSignal,
    Ambiguous,
    OutOfRange,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ParseOutcome {
    Exact {
        k: u32,
        scores: Vec<f64>,
    },
    /// More than `k_min` iterations; the two adjacent `candidates` tied.
    LowerBound {
        k_min: u32,
        candidates: [u32; 2],
    },
    Warning {
        reason: WarningReason,
    },
}

impl ParseOutcome {
    pub fn is_usable(&self) -> bool {
        !matches!(self, ParseOutcome::Warning { .. })
    }

    /// Whether the fact this outcome asserts holds for `truth`.
    pub fn is_consistent_with(&self, truth: u32) -> bool {
        match self {
            ParseOutcome::Exact { k, .. } => *k == truth,
            ParseOutcome::LowerBound { k_min, .. } => truth > *k_min,
            ParseOutcome::Warning { .. } => false,
        }
    }

    /// Leak for dictionary pruning, if this outcome asserts anything.
    pub fn to_leak(&self, trace: &Trace) -> Option<Leak> {
        let (id_a, id_b) = (trace.id_a.clone()?, trace.id_b.clone()?);
        let mut leak = match self {
            ParseOutcome::Exact { k, .. } => Leak::exact(id_a, id_b, *k),
            ParseOutcome::LowerBound { k_min, .. } if *k_min > 0 => Leak::at_least(id_a, id_b, *k_min),
            _ => return None,
        };
        leak.token = trace.token;
        Some(leak)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceReport {
    pub trace_id: String,
    #[serde(flatten)]
    pub outcome: ParseOutcome,
    pub samples_total: usize,
    pub samples_used: usize,
}

fn leading_randoms(s: &Sample) -> usize {
    s.events.iter().take_while(|e| e.label == ProbeLabel::RandomCall).count()
}

/// Structural check: preamble present, a clock, a loop draw, enough events.
pub fn is_well_formed(s: &Sample, cfg: &ParserConfig) -> bool {
    let pre = leading_randoms(s);
    let loop_events = &s.events[pre..];
    s.events.len() >= cfg.min_well_formed_events
        && pre >= cfg.preamble_len
        && loop_events.iter().any(|e| e.label == ProbeLabel::SyncClock)
        && loop_events.iter().any(|e| e.label == ProbeLabel::RandomCall)
}

pub fn filter_samples<'a>(samples: &'a [Sample], cfg: &ParserConfig) -> Vec<&'a Sample> {
    samples.iter().filter(|s| is_well_formed(s, cfg)).collect()
}

/// Clock deltas at or below the returned window continue the current iteration.
fn refractory_window(s: &Sample, cfg: &ParserConfig) -> u64 {
    let mut deltas: Vec<u64> = s
        .events
        .iter()
        .filter(|e| e.label == ProbeLabel::SyncClock)
        .skip(1)
        .map(|e| e.delta)
        .filter(|&d| d > cfg.refractory_floor)
        .collect();
    if deltas.is_empty() {
        return cfg.refractory_floor;
    }
    deltas.sort_unstable();
    let median = deltas[deltas.len() / 2] as f64;
    ((median * cfg.refractory_fraction) as u64).max(cfg.refractory_floor)
}

/// Iteration index (1-based) assigned to every loop event; `0` for the preamble.
fn iteration_indices(s: &Sample, cfg: &ParserConfig) -> Vec<u32> {
    let window = refractory_window(s, cfg);
    let mut iter = 0u32;
    s.events
        .iter()
        .map(|e| {
            if e.label == ProbeLabel::SyncClock && (iter == 0 || e.delta > window) {
                iter += 1;
            }
            iter
        })
        .collect()
}

/// Per-iteration delay scores; index 0 is iteration 1.
pub fn score_sample(s: &Sample, cfg: &ParserConfig) -> Vec<f64> {
    let mut scores: Vec<f64> = Vec::new();
    for (e, it) in s.events.iter().zip(iteration_indices(s, cfg)) {
        if it == 0 || e.label != ProbeLabel::RandomCall {
            continue;
        }
        let i = it as usize - 1;
        if scores.len() <= i {
            scores.resize(i + 1, 0.0);
        }
        scores[i] += e.delta as f64;
        if e.delta > cfg.long_delay_threshold {
            break;
        }
    }
    scores
}

/// Number of loop iterations visible in `s`. With an early-exit loop this is
/// the success iteration.
pub fn count_iterations(s: &Sample, cfg: &ParserConfig) -> u32 {
    iteration_indices(s, cfg).last().copied().unwrap_or(0)
}

/// Sums the scores of the well-formed samples and decides.
pub fn interpret_trace(trace: &Trace, cfg: &ParserConfig) -> TraceReport {
    let used = filter_samples(&trace.samples, cfg);
    let mut total: Vec<f64> = Vec::new();
    for s in &used {
        let v = score_sample(s, cfg);
        if total.len() < v.len() {
            total.resize(v.len(), 0.0);
        }
        for (t, x) in total.iter_mut().zip(v) {
            *t += x;
        }
    }
    let outcome = if used.is_empty() {
        ParseOutcome::Warning { reason: WarningReason::NoUsableSamples }
    } else {
        decide(&total, cfg)
    };
    TraceReport { trace_id: trace.id.clone(), outcome, samples_total: trace.samples.len(), samples_used: used.len() }
}

fn decide(scores: &[f64], cfg: &ParserConfig) -> ParseOutcome {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Highest score first; earlier iteration wins exact ties.
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let at = |r: usize| order.get(r).map(|&i| scores[i]).unwrap_or(0.0);
    let (top, second, third) = (at(0), at(1), at(2));
    if top <= 0.0 {
        return ParseOutcome::Warning { reason: WarningReason::NoSignal };
    }
    let m = cfg.decision_margin;
    let outcome = if top >= m * second {
        ParseOutcome::Exact { k: order[0] as u32 + 1, scores: scores.to_vec() }
    } else if order[0].abs_diff(order[1]) == 1 && top + second >= m * third {
        let j = order[0].min(order[1]) as u32 + 1;
        ParseOutcome::LowerBound { k_min: j - 1, candidates: [j, j + 1] }
    } else {
        return ParseOutcome::Warning { reason: WarningReason::Ambiguous };
    };
    let hi = match &outcome {
        ParseOutcome::Exact { k, .. } => *k,
        ParseOutcome::LowerBound { candidates, .. } => candidates[1],
        ParseOutcome::Warning { .. } => 0,
    };
    if hi > cfg.max_iterations {
        return ParseOutcome::Warning { reason: WarningReason::OutOfRange };
    }
    outcome
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sidechannel::ProbeEvent;

    fn sample(events: &[(bool, u64)]) -> Sample {
        Sample {
            events: events
                .iter()
                .map(|&(clock, d)| if clock { ProbeEvent::clock(d, 80) } else { ProbeEvent::random(d, 90) })
                .collect(),
        }
    }

    fn pre() -> Vec<(bool, u64)> {
        vec![(false, 5_000_000); 5]
    }

    #[test]
    fn filter_rules() {
        let cfg = ParserConfig::default();
        assert!(!is_well_formed(&Sample::default(), &cfg));
        let mut ok = pre();
        ok.extend([(true, 5_004_000), (false, 100), (true, 4000), (false, 3900)]);
        assert!(is_well_formed(&sample(&ok), &cfg));
        let mut no_rand = pre();
        no_rand.extend([(true, 1), (true, 4000), (true, 4000)]);
        assert!(!is_well_formed(&sample(&no_rand), &cfg));
        let no_pre = [(true, 1), (false, 100), (true, 4000), (false, 3900), (true, 1), (true, 1), (true, 1), (true, 1)];
        assert!(!is_well_formed(&sample(&no_pre), &cfg));
    }

    #[test]
    fn refractory_collapse() {
        let cfg = ParserConfig::default();
        let mut ev = pre();
        ev.extend([
            (true, 5_004_000),
            (true, 300),
            (true, 320),
            (false, 120),
            (true, 4000),
            (true, 310),
            (false, 3900),
        ]);
        let v = score_sample(&sample(&ev), &cfg);
        assert_eq!(v, vec![120.0, 3900.0]);
    }

    #[test]
    fn decisions() {
        let cfg = ParserConfig::default();
        assert!(matches!(decide(&[100.0, 4000.0, 100.0], &cfg), ParseOutcome::Exact { k: 2, .. }));
        assert_eq!(
            decide(&[0.0, 0.0, 0.0, 0.0, 3000.0, 2900.0, 100.0], &cfg),
            ParseOutcome::LowerBound { k_min: 4, candidates: [5, 6] }
        );
        assert_eq!(decide(&[3000.0, 0.0, 2900.0], &cfg), ParseOutcome::Warning { reason: WarningReason::Ambiguous });
        assert_eq!(decide(&[0.0, 0.0], &cfg), ParseOutcome::Warning { reason: WarningReason::NoSignal });
        assert_eq!(decide(&[], &cfg), ParseOutcome::Warning { reason: WarningReason::NoSignal });
        let mut far = vec![0.0; 25];
        far[22] = 4000.0;
        assert_eq!(decide(&far, &cfg), ParseOutcome::Warning { reason: WarningReason::OutOfRange });
    }

    #[test]
    fn consistency() {
        let e = ParseOutcome::Exact { k: 3, scores: vec![] };
        assert!(e.is_consistent_with(3));
        assert!(!e.is_consistent_with(4));
        let l = ParseOutcome::LowerBound { k_min: 4, candidates: [5, 6] };
        assert!(l.is_consistent_with(5) && l.is_consistent_with(9) && !l.is_consistent_with(4));
    }
}
