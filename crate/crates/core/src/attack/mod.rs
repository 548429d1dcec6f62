//! Offline dictionary partitioning from iteration leaks and its cost model.

pub mod binomial;
mod model;
mod prune;

pub use model::{
    at_least_d, p_success, pruned_within, traces_expected_with, traces_required_with, AttackModel, IterationLaw,
    PlanRow,
};
pub use prune::{display_password, prune_dictionary, Leak, LeakKind, PruneError, PruneReport};
