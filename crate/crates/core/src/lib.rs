//! Dragonfly password-element derivation and the cache-leak attack around it.
//!
//! The crate covers the hunting-and-pecking conversion used by WPA3-SAE and
//! EAP-pwd (branching and branch-free), the commit/confirm handshake, a
//! synthetic Flush+Reload trace generator, the trace interpreter that turns
//! traces into iteration leaks, and offline dictionary partitioning with
//! its closed-form cost model.

pub mod attack;
pub mod bench;
pub mod calibrate;
pub mod campaign;
pub mod derive;
pub mod ec;
pub mod handshake;
pub mod identity;
pub mod kdf;
pub mod parallel;
pub mod parser;
pub mod seed;
pub mod sidechannel;

pub use identity::Identity;
