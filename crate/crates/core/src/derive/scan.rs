use serde::Serialize;

use super::{first_success, DerivationContext, COUNTER_CEILING};
use crate::parallel::map_shards;

/// A dictionary entry that needs more than the scan threshold.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ScanHit {
    pub password: Vec<u8>,
    /// Iterations required; `None` if not found within the counter ceiling.
    pub iterations: Option<u32>,
}

/// Returns every entry of `dictionary` whose derivation under the identities
/// of `template` needs more than `threshold` iterations, in dictionary order.
pub fn scan_high_iteration(
    template: &DerivationContext,
    dictionary: &[Vec<u8>],
    threshold: u32,
    shards: usize,
) -> Vec<ScanHit> {
    map_shards(dictionary, shards, |chunk| {
        let mut hits = Vec::new();
        for pw in chunk {
            let ctx = template.with_password(pw.clone());
            if threshold > 0 && first_success(&ctx, threshold).is_some() {
                continue;
            }
            hits.push(ScanHit { password: pw.clone(), iterations: first_success(&ctx, COUNTER_CEILING) });
        }
        hits
    })
    .into_iter()
    .flatten()
    .collect()
}
