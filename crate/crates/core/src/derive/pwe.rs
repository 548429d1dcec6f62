use rand::RngCore;
use subtle::{Choice, ConditionallySelectable};

use super::{
    legendre_code, DerivationContext, DerivationResult, DeriveError, Event, EventKind, EventSink, IterationRecord,
    Mode, Variant,
};
use crate::ec::{to_fixed_be, BlindingState, Legendre};

/// Runs hunting-and-pecking for `ctx`, reporting every step to `sink`.
///
/// The element depends only on the context; `rng` feeds blinding and the
/// SAE dummy strings, so any generator gives the same element.
pub fn derive_pwe<R, S>(ctx: &DerivationContext, rng: &mut R, sink: &mut S) -> Result<DerivationResult, DeriveError>
where
    R: RngCore + ?Sized,
    S: EventSink + ?Sized,
{
    ctx.validate()?;
    let field = ctx.curve.field();
    let (blind, draws) = BlindingState::generate(field, rng)?;
    sink.record(Event::BlindingSetup { draws });
    match ctx.mode {
        Mode::Vulnerable => vulnerable(ctx, &blind, draws, rng, sink),
        Mode::Hardened => hardened(ctx, &blind, draws, rng, sink),
    }
}

fn vulnerable<R, S>(
    ctx: &DerivationContext,
    blind: &BlindingState,
    draws: u32,
    rng: &mut R,
    sink: &mut S,
) -> Result<DerivationResult, DeriveError>
where
    R: RngCore + ?Sized,
    S: EventSink + ?Sized,
{
    let curve = &ctx.curve;
    let field = curve.field();
    let limit = ctx.search_limit();
    let mut base = ctx.password.clone();
    let mut found: Option<(crate::ec::FieldElement, bool, u32)> = None;
    let mut log = Vec::new();
    let mut executed = 0;

    for counter in 1..=limit {
        executed = counter;
        sink.record(Event::IterationStart { counter });
        sink.record(Event::KdfCall { counter });
        let cand = ctx.candidate(&base, counter);
        let mut record = IterationRecord { counter, in_range: false, qr: None, first_success: false };
        if cand.in_range(curve) {
            record.in_range = true;
            let x = field.element(cand.value);
            sink.record(Event::RandomCall);
            let l = field.legendre_blinded(&curve.rhs(&x), blind, rng)?;
            sink.record(Event::QrTest);
            record.qr = Some(legendre_code(l));
            if l == Legendre::Residue && found.is_none() {
                record.first_success = true;
                sink.record(Event::SuccessBlock { counter });
                found = Some((x, cand.parity, counter));
                if ctx.variant == Variant::EapPwd {
                    log.push(record);
                    break;
                }
                sink.record(Event::RandomCall);
                base = vec![0u8; ctx.password.len()];
                rng.try_fill_bytes(&mut base).map_err(|_| crate::ec::EcError::Rng)?;
            }
        }
        log.push(record);
    }

    let (element, success_iteration) = match found {
        Some((x, parity, k)) => (Some(curve.point_from_x(&x, parity)?), Some(k)),
        None => (None, None),
    };
    Ok(DerivationResult {
        element,
        success_iteration,
        iterations_executed: executed,
        outcome_log: log,
        blinding_draws: draws,
    })
}

fn hardened<R, S>(
    ctx: &DerivationContext,
    blind: &BlindingState,
    draws: u32,
    rng: &mut R,
    sink: &mut S,
) -> Result<DerivationResult, DeriveError>
where
    R: RngCore + ?Sized,
    S: EventSink + ?Sized,
{
    let curve = &ctx.curve;
    let field = curve.field();
    let len = field.byte_len();
    let mut saved_x = vec![0u8; len];
    let mut saved_parity = 0u8;
    let mut saved_counter = 0u32;
    let mut found = Choice::from(0);
    let mut log = Vec::with_capacity(ctx.k_max as usize);

    for counter in 1..=ctx.k_max {
        sink.record(Event::IterationStart { counter });
        sink.record(Event::KdfCall { counter });
        let cand = ctx.candidate(&ctx.password, counter);
        let in_range = Choice::from(cand.in_range(curve) as u8);
        let x_bytes = to_fixed_be(&(&cand.value % curve.p()), len);
        let x = field.element(cand.value);
        sink.record(Event::RandomCall);
        let l = field.legendre_blinded(&curve.rhs(&x), blind, rng)?;
        sink.record(Event::QrTest);
        let is_residue = in_range & Choice::from((l == Legendre::Residue) as u8);
        let take = !found & is_residue;
        for (s, c) in saved_x.iter_mut().zip(&x_bytes) {
            s.conditional_assign(c, take);
        }
        saved_parity.conditional_assign(&(cand.parity as u8), take);
        saved_counter.conditional_assign(&counter, take);
        found |= is_residue;
        log.push(IterationRecord {
            counter,
            in_range: bool::from(in_range),
            qr: Some(legendre_code(l)),
            first_success: bool::from(take),
        });
    }

    let (element, success_iteration) = if bool::from(found) {
        let x = field.from_bytes(&saved_x)?;
        (Some(curve.point_from_x(&x, saved_parity == 1)?), Some(saved_counter))
    } else {
        (None, None)
    };
    Ok(DerivationResult {
        element,
        success_iteration,
        iterations_executed: ctx.k_max,
        outcome_log: log,
        blinding_draws: draws,
    })
}

/// Event kinds emitted by one run of [`derive_pwe`].
pub fn operation_trace_fingerprint<R: RngCore + ?Sized>(
    ctx: &DerivationContext,
    rng: &mut R,
) -> Result<Vec<EventKind>, DeriveError> {
    let mut events = Vec::new();
    derive_pwe(ctx, rng, &mut events)?;
    Ok(events.iter().map(Event::kind).collect())
}

/// First successful iteration within `limit`, computed the way an offline
/// attacker would: unblinded, no events, stopping at the first residue.
pub fn first_success(ctx: &DerivationContext, limit: u32) -> Option<u32> {
    let curve = &ctx.curve;
    let field = curve.field();
    let limit = limit.min(super::COUNTER_CEILING);
    (1..=limit).find(|&counter| {
        let cand = ctx.candidate(&ctx.password, counter);
        cand.in_range(curve) && field.legendre_naive(&curve.rhs(&field.element(cand.value))) == Legendre::Residue
    })
}

#[cfg(test)]
mod tests {
    use super::super::*;
    use super::*;
    use crate::ec::CurveParams;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn ids() -> (Identity, Identity) {
        ("E2F754FE22D1".parse().unwrap(), "9203835A576B".parse().unwrap())
    }

    fn sae(pw: &str, mode: Mode) -> DerivationContext {
        let (a, b) = ids();
        DerivationContext::sae(CurveParams::p256(), a, b, pw.as_bytes(), 20, mode)
    }

    fn run(ctx: &DerivationContext) -> (DerivationResult, Vec<Event>) {
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let mut ev = Vec::new();
        let r = derive_pwe(ctx, &mut rng, &mut ev).unwrap();
        (r, ev)
    }

    #[test]
    fn modes_agree() {
        for pw in ["superpassword", "hunter2", "correct horse"] {
            let (v, _) = run(&sae(pw, Mode::Vulnerable));
            let (h, _) = run(&sae(pw, Mode::Hardened));
            assert_eq!(v.element, h.element);
            assert_eq!(v.success_iteration, h.success_iteration);
            assert!(ctx_curve().is_on_curve(v.element.as_ref().unwrap()));
        }
    }

    fn ctx_curve() -> std::sync::Arc<CurveParams> {
        CurveParams::p256()
    }

    #[test]
    fn sae_is_symmetric() {
        let (a, b) = ids();
        let c1 = DerivationContext::sae(ctx_curve(), a.clone(), b.clone(), "pw", 20, Mode::Vulnerable);
        let c2 = DerivationContext::sae(ctx_curve(), b, a, "pw", 20, Mode::Vulnerable);
        assert_eq!(run(&c1).0.element, run(&c2).0.element);
        assert_eq!(seed_and_value(&c1, 3).unwrap(), seed_and_value(&c2, 3).unwrap());
    }

    #[test]
    fn vulnerable_sae_runs_all_iterations() {
        let (r, ev) = run(&sae("superpassword", Mode::Vulnerable));
        assert_eq!(r.iterations_executed, 20);
        assert_eq!(r.outcome_log.len(), 20);
        let k = r.success_iteration.unwrap();
        let pos: Vec<_> = ev
            .iter()
            .filter_map(|e| match e {
                Event::SuccessBlock { counter } => Some(*counter),
                _ => None,
            })
            .collect();
        assert_eq!(pos, vec![k]);
        assert_eq!(r.outcome_log.iter().filter(|o| o.first_success).count(), 1);
    }

    #[test]
    fn result_ignores_rng() {
        let ctx = sae("superpassword", Mode::Vulnerable);
        let a = derive_pwe(&ctx, &mut ChaCha20Rng::seed_from_u64(1), &mut NullSink).unwrap();
        let b = derive_pwe(&ctx, &mut ChaCha20Rng::seed_from_u64(2), &mut NullSink).unwrap();
        assert_eq!(a.element, b.element);
        assert_eq!(first_success(&ctx, 20), a.success_iteration);
    }

    #[test]
    fn eap_exits_early() {
        let (a, b) = ids();
        let ctx = DerivationContext::eap_pwd(ctx_curve(), a, b, [1, 2, 3, 4], "pw", 40, Mode::Vulnerable);
        let (r, ev) = run(&ctx);
        let k = r.success_iteration.unwrap();
        assert_eq!(r.iterations_executed, k);
        let starts = ev.iter().filter(|e| e.kind() == EventKind::IterationStart).count();
        assert_eq!(starts as u32, k);
        let (h, _) = run(&ctx.with_mode(Mode::Hardened));
        assert_eq!(h.element, r.element);
        assert_eq!(h.iterations_executed, 40);
    }

    #[test]
    fn hardened_fingerprint_is_constant() {
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        let f1 = operation_trace_fingerprint(&sae("a", Mode::Hardened), &mut rng).unwrap();
        let f2 = operation_trace_fingerprint(&sae("completely different", Mode::Hardened), &mut rng).unwrap();
        assert_eq!(f1, f2);
        assert_eq!(f1.len(), 1 + 20 * 4);
    }

    #[test]
    fn context_validation() {
        let mut c = sae("x", Mode::Vulnerable);
        c.k_max = 0;
        assert!(c.validate().is_err());
        c.k_max = 256;
        assert!(c.validate().is_err());
        let mut c = sae("x", Mode::Vulnerable);
        c.token = Some([0; 4]);
        assert!(c.validate().is_err());
        c.variant = Variant::EapPwd;
        assert!(c.validate().is_ok());
        c.token = None;
        assert!(c.validate().is_err());
        assert!(seed_and_value(&sae("x", Mode::Vulnerable), 0).is_err());
    }

    #[test]
    fn not_found_on_tiny_cap() {
        // Search the first password whose first iteration fails.
        let ctx =
            (0..64).map(|i| sae(&format!("pw{i}"), Mode::Vulnerable)).find(|c| first_success(c, 1).is_none()).unwrap();
        let mut capped = ctx.clone();
        capped.k_max = 1;
        let (r, _) = run(&capped);
        assert_eq!(r.success_iteration, None);
        assert_eq!(r.element, None);
        let (h, _) = run(&capped.with_mode(Mode::Hardened));
        assert_eq!(h.success_iteration, None);
    }
}
