use rand::Rng;

use super::noise::latency;
use super::{ChannelShape, NoiseModel, ProbeEvent, ProbeLabel, Sample, Trace};
use crate::derive::{derive_pwe, DerivationContext, DeriveError, Event, Mode, Variant};

#[derive(Debug, thiserror::Error)]
pub enum SimulateError {
    #[error("derivation found no element within the iteration cap; no leak is defined")]
    NotFound,
    #[error("EAP-pwd sessions use a fresh token each time, so a trace holds exactly one sample")]
    EapSampleCount,
    #[error("a trace needs at least one sample")]
    NoSamples,
    #[error(transparent)]
    Derive(#[from] DeriveError),
    #[error(transparent)]
    Noise(#[from] super::NoiseError),
}

/// Event stream of a vulnerable run that first succeeds at `truth_k`
/// (`None`: never). SAE runs all `k_max` iterations, EAP-pwd stops at the
/// success.
pub fn synthetic_events(truth_k: Option<u32>, variant: Variant, k_max: u32) -> Vec<Event> {
    let n = match (variant, truth_k) {
        (Variant::EapPwd, Some(k)) => k,
        _ => k_max,
    };
    let mut ev = vec![Event::BlindingSetup { draws: 2 }];
    for counter in 1..=n {
        ev.extend([Event::IterationStart { counter }, Event::KdfCall { counter }, Event::RandomCall, Event::QrTest]);
        if truth_k == Some(counter) {
            ev.push(Event::SuccessBlock { counter });
            if variant == Variant::Sae {
                ev.push(Event::RandomCall);
            }
        }
    }
    ev
}

/// One noisy sample for a run succeeding at `truth_k`.
pub fn simulate_sample<R: Rng + ?Sized>(
    truth_k: u32,
    variant: Variant,
    k_max: u32,
    shape: &ChannelShape,
    noise: &NoiseModel,
    rng: &mut R,
) -> Sample {
    sample_from_events(&synthetic_events(Some(truth_k), variant, k_max), shape, noise, rng)
}

#[derive(Default)]
struct IterPlan {
    blinding: bool,
    success: bool,
}

/// Renders a derivation event stream as the spy would observe it.
///
/// Each iteration opens with `clocks_per_iter` clock hits; its blinding
/// draw follows the last hit after a short delay and a success block adds
/// a long-delayed draw. Deltas count from the last clock hit the spy
/// actually caught.
pub fn sample_from_events<R: Rng + ?Sized>(
    events: &[Event],
    shape: &ChannelShape,
    noise: &NoiseModel,
    rng: &mut R,
) -> Sample {
    let mut preamble = false;
    let mut iters: Vec<IterPlan> = Vec::new();
    let mut after_success = false;
    for e in events {
        match e {
            Event::BlindingSetup { .. } => preamble = true,
            Event::IterationStart { .. } => {
                iters.push(IterPlan::default());
                after_success = false;
            }
            Event::RandomCall if !after_success => {
                if let Some(it) = iters.last_mut() {
                    it.blinding = true;
                }
            }
            Event::SuccessBlock { .. } => {
                if let Some(it) = iters.last_mut() {
                    it.success = true;
                }
                after_success = true;
            }
            _ => {}
        }
    }

    let hit = |rng: &mut R, miss: f64| miss == 0.0 || rng.gen::<f64>() >= miss;
    let chance = |rng: &mut R, p: f64| p > 0.0 && rng.gen::<f64>() < p;
    // (time, label, is_preamble)
    let mut timeline: Vec<(f64, ProbeLabel, bool)> = Vec::new();
    let mut t = 5_400_000.0 + if noise.is_noiseless() { 30_000.0 } else { rng.gen_range(0.0..60_000.0) };
    if preamble {
        for j in 0..shape.preamble_len {
            if j > 0 {
                t += noise.iteration_cycles.sample(rng);
            }
            timeline.push((t, ProbeLabel::RandomCall, true));
        }
    }
    let mut start = t + noise.iteration_cycles.sample(rng);
    for it in &iters {
        let mut h = start;
        let mut latest = start;
        for c in 0..shape.clocks_per_iter.max(1) {
            if c > 0 {
                h += noise.clock_gap.sample(rng);
            }
            if hit(rng, noise.clock_miss_prob) {
                timeline.push((h, ProbeLabel::SyncClock, false));
            }
        }
        latest = latest.max(h);
        let dur = noise.iteration_cycles.sample(rng);
        if it.blinding && hit(rng, noise.randomcall_miss_prob) {
            let at = h + noise.short_delay.sample(rng);
            timeline.push((at, ProbeLabel::RandomCall, false));
            latest = latest.max(at);
        }
        if it.success && hit(rng, noise.randomcall_miss_prob) {
            let at = h + noise.long_delay.sample(rng);
            timeline.push((at, ProbeLabel::RandomCall, false));
            latest = latest.max(at);
        }
        if chance(rng, noise.spurious_long_delay_prob) {
            let at = h + noise.long_delay.sample(rng);
            timeline.push((at, ProbeLabel::RandomCall, false));
            latest = latest.max(at);
        }
        if chance(rng, noise.spurious_clock_prob) {
            let at = start + rng.gen_range(0.35..0.9) * dur;
            timeline.push((at, ProbeLabel::SyncClock, false));
            latest = latest.max(at);
        }
        start = (start + dur).max(latest + 60.0);
    }
    timeline.sort_by(|a, b| a.0.total_cmp(&b.0));

    if chance(rng, noise.malformed_sample_prob) {
        corrupt(&mut timeline, shape, rng);
    }

    let mut last_clock = 0.0;
    let events = timeline
        .into_iter()
        .map(|(time, label, _)| {
            let delta = (time - last_clock).round().max(0.0) as u64;
            match label {
                ProbeLabel::SyncClock => {
                    last_clock = time;
                    ProbeEvent::clock(delta, latency(rng, 84.0))
                }
                ProbeLabel::RandomCall => ProbeEvent::random(delta, latency(rng, 90.0)),
            }
        })
        .collect();
    Sample { events }
}

/// Applies one structural defect of the kind that makes a capture unusable.
fn corrupt<R: Rng + ?Sized>(timeline: &mut Vec<(f64, ProbeLabel, bool)>, shape: &ChannelShape, rng: &mut R) {
    match rng.gen_range(0..4) {
        0 => timeline.retain(|e| !e.2),
        1 => timeline.retain(|e| e.1 != ProbeLabel::SyncClock),
        2 => timeline.retain(|e| e.1 != ProbeLabel::RandomCall || e.2),
        _ => timeline.truncate(shape.preamble_len as usize + rng.gen_range(0..3)),
    }
}

/// Derives the ground truth for `ctx` and renders `n_samples` captures.
pub fn simulate_trace<R: Rng + ?Sized>(
    id: impl Into<String>,
    ctx: &DerivationContext,
    n_samples: usize,
    shape: &ChannelShape,
    noise: &NoiseModel,
    rng: &mut R,
) -> Result<Trace, SimulateError> {
    noise.validate()?;
    if n_samples == 0 {
        return Err(SimulateError::NoSamples);
    }
    if ctx.variant == Variant::EapPwd && n_samples != 1 {
        return Err(SimulateError::EapSampleCount);
    }
    let mut events = Vec::new();
    let result = derive_pwe(&ctx.with_mode(Mode::Vulnerable), rng, &mut events)?;
    let truth = result.success_iteration.ok_or(SimulateError::NotFound)?;
    let samples = (0..n_samples).map(|_| sample_from_events(&events, shape, noise, rng)).collect();
    Ok(Trace {
        id: id.into(),
        id_a: Some(ctx.id_a.clone()),
        id_b: Some(ctx.id_b.clone()),
        token: ctx.token,
        samples,
        ground_truth: Some(truth),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn zero_sample(k: u32) -> Sample {
        simulate_sample(
            k,
            Variant::Sae,
            20,
            &ChannelShape::SAE,
            &NoiseModel::zero(),
            &mut ChaCha20Rng::seed_from_u64(1),
        )
    }

    #[test]
    fn noiseless_structure() {
        let s = zero_sample(4);
        let ev = &s.events;
        assert!(ev[..5].iter().all(|e| e.label == ProbeLabel::RandomCall && e.delta > 5_000_000));
        let clocks = ev.iter().filter(|e| e.label == ProbeLabel::SyncClock).count();
        assert_eq!(clocks, 20 * ChannelShape::SAE.clocks_per_iter as usize);
        let long: Vec<usize> = ev
            .iter()
            .enumerate()
            .filter(|(i, e)| *i >= 5 && e.label == ProbeLabel::RandomCall && e.delta > 1500)
            .map(|(i, _)| i)
            .collect();
        assert_eq!(long.len(), 1);
        let iter_of_long = ev[..long[0]].iter().filter(|e| e.label == ProbeLabel::SyncClock).count();
        assert_eq!(iter_of_long, 4 * ChannelShape::SAE.clocks_per_iter as usize);
    }

    #[test]
    fn eap_stops_at_truth() {
        let s = simulate_sample(
            3,
            Variant::EapPwd,
            40,
            &ChannelShape::EAP_PWD,
            &NoiseModel::zero(),
            &mut ChaCha20Rng::seed_from_u64(2),
        );
        let clocks = s.events.iter().filter(|e| e.label == ProbeLabel::SyncClock).count();
        assert_eq!(clocks, 3 * ChannelShape::EAP_PWD.clocks_per_iter as usize);
    }

    #[test]
    fn deterministic() {
        let n = NoiseModel::shipped();
        let a = simulate_sample(5, Variant::Sae, 20, &ChannelShape::SAE, &n, &mut ChaCha20Rng::seed_from_u64(9));
        let b = simulate_sample(5, Variant::Sae, 20, &ChannelShape::SAE, &n, &mut ChaCha20Rng::seed_from_u64(9));
        assert_eq!(a, b);
    }

    #[test]
    fn hardened_run_has_no_long_delay() {
        let mut ev = synthetic_events(Some(3), Variant::Sae, 20);
        ev.retain(|e| !matches!(e, Event::SuccessBlock { .. }));
        let s = sample_from_events(&ev, &ChannelShape::SAE, &NoiseModel::zero(), &mut ChaCha20Rng::seed_from_u64(3));
        assert!(s.events[5..].iter().all(|e| e.label == ProbeLabel::SyncClock || e.delta < 1500));
    }
}
