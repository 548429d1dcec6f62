use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::derive::{first_success, DerivationContext, Mode, Profile};
use crate::identity::Identity;
use crate::parallel::map_shards;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LeakKind {
    /// Derivation succeeds exactly at iteration `k`.
    Exact,
    /// Derivation needs more than `k` iterations.
    AtLeast,
}

/// Observed iteration fact for one identity pair (and token, for EAP-pwd).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Leak {
    #[serde(rename = "idA")]
    pub id_a: Identity,
    #[serde(rename = "idB")]
    pub id_b: Identity,
    #[serde(default, skip_serializing_if = "Option::is_none", with = "token_hex")]
    pub token: Option<[u8; 4]>,
    pub k: u32,
    pub kind: LeakKind,
}

mod token_hex {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(t: &Option<[u8; 4]>, s: S) -> Result<S::Ok, S::Error> {
        match t {
            Some(t) => s.serialize_str(&hex::encode(t)),
            None => s.serialize_none(),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Option<[u8; 4]>, D::Error> {
        let Some(s) = Option::<String>::deserialize(d)? else {
            return Ok(None);
        };
        let v = hex::decode(&s).map_err(serde::de::Error::custom)?;
        let t: [u8; 4] = v.try_into().map_err(|_| serde::de::Error::custom("token must be 4 bytes"))?;
        Ok(Some(t))
    }
}

impl Leak {
    pub fn exact(id_a: Identity, id_b: Identity, k: u32) -> Self {
        Leak { id_a, id_b, token: None, k, kind: LeakKind::Exact }
    }

    pub fn at_least(id_a: Identity, id_b: Identity, k: u32) -> Self {
        Leak { id_a, id_b, token: None, k, kind: LeakKind::AtLeast }
    }

    fn context(&self, profile: &Profile) -> DerivationContext {
        DerivationContext::from_profile(
            profile,
            self.id_a.clone(),
            self.id_b.clone(),
            Some(self.token.unwrap_or_default()),
            Vec::new(),
            Mode::Vulnerable,
        )
    }

    /// Whether `ctx` (carrying the candidate password) agrees with the leak.
    fn admits(&self, ctx: &DerivationContext) -> bool {
        match self.kind {
            LeakKind::Exact => first_success(ctx, self.k) == Some(self.k),
            LeakKind::AtLeast => first_success(ctx, self.k).is_none(),
        }
    }
}

#[derive(Debug, thiserror::Error, PartialEq, Eq)]
pub enum PruneError {
    #[error("at least one leak is required")]
    NoLeaks,
}

#[derive(Clone, Debug, Serialize)]
pub struct PruneReport {
    pub input_size: u64,
    #[serde(serialize_with = "ser_passwords")]
    pub survivors: Vec<Vec<u8>>,
    /// Passwords removed by each leak, counting only first mismatches.
    pub eliminated_per_leak: Vec<u64>,
    #[serde(skip)]
    pub elapsed_secs: f64,
}

fn ser_passwords<S: serde::Serializer>(v: &[Vec<u8>], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(v.iter().map(|p| display_password(p)))
}

/// UTF-8 passwords as-is, anything else as `hex:<digits>`.
pub fn display_password(p: &[u8]) -> String {
    match std::str::from_utf8(p) {
        Ok(s) if !s.starts_with("hex:") => s.to_string(),
        _ => format!("hex:{}", hex::encode(p)),
    }
}

impl PruneReport {
    fn merge(mut self, other: PruneReport) -> PruneReport {
        self.input_size += other.input_size;
        self.survivors.extend(other.survivors);
        for (a, b) in self.eliminated_per_leak.iter_mut().zip(other.eliminated_per_leak) {
            *a += b;
        }
        self
    }
}

/// Keeps the passwords consistent with every leak, in dictionary order.
///
/// Each password is checked against the leaks in order and dropped at the
/// first mismatch. The dictionary is split into `shards` contiguous pieces
/// processed independently.
pub fn prune_dictionary(
    dictionary: &[Vec<u8>],
    leaks: &[Leak],
    profile: &Profile,
    shards: usize,
) -> Result<PruneReport, PruneError> {
    if leaks.is_empty() {
        return Err(PruneError::NoLeaks);
    }
    let start = Instant::now();
    let contexts: Vec<DerivationContext> = leaks.iter().map(|l| l.context(profile)).collect();
    let parts = map_shards(dictionary, shards, |chunk| {
        let mut report = PruneReport {
            input_size: chunk.len() as u64,
            survivors: Vec::new(),
            eliminated_per_leak: vec![0; leaks.len()],
            elapsed_secs: 0.0,
        };
        let mut ctxs = contexts.clone();
        'next: for pw in chunk {
            for (i, (leak, ctx)) in leaks.iter().zip(ctxs.iter_mut()).enumerate() {
                ctx.password.clone_from(pw);
                if !leak.admits(ctx) {
                    report.eliminated_per_leak[i] += 1;
                    continue 'next;
                }
            }
            report.survivors.push(pw.clone());
        }
        report
    });
    let mut report = parts.into_iter().reduce(PruneReport::merge).expect("at least one shard");
    report.elapsed_secs = start.elapsed().as_secs_f64();
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn leak_json_shape() {
        let l = Leak::exact("E2F754FE22D1".parse().unwrap(), "9203835A576B".parse().unwrap(), 4);
        let j = serde_json::to_string(&l).unwrap();
        assert_eq!(j, r#"{"idA":"E2F754FE22D1","idB":"9203835A576B","k":4,"kind":"exact"}"#);
        assert_eq!(serde_json::from_str::<Leak>(&j).unwrap(), l);
        let with_token = r#"{"idA":"a","idB":"b","token":"01020304","k":2,"kind":"at_least"}"#;
        let t: Leak = serde_json::from_str(with_token).unwrap();
        assert_eq!(t.token, Some([1, 2, 3, 4]));
        assert_eq!(t.kind, LeakKind::AtLeast);
    }

    #[test]
    fn no_leaks_is_an_error() {
        assert_eq!(prune_dictionary(&[b"a".to_vec()], &[], &Profile::IWD_SAE, 1).unwrap_err(), PruneError::NoLeaks);
    }

    #[test]
    fn empty_dictionary() {
        let l = Leak::exact("020000000001".parse().unwrap(), "020000000002".parse().unwrap(), 1);
        let r = prune_dictionary(&[], &[l], &Profile::IWD_SAE, 4).unwrap();
        assert_eq!(r.input_size, 0);
        assert!(r.survivors.is_empty());
    }

    #[test]
    fn password_display() {
        assert_eq!(display_password(b"abc"), "abc");
        assert_eq!(display_password(&[0xff]), "hex:ff");
        assert_eq!(display_password(b"hex:41"), "hex:6865783a3431");
    }
}
