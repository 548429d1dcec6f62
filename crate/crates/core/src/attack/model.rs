use num_bigint::BigUint;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};

use super::binomial::upper_tail;
use crate::ec::CurveParams;

/// How `Pr[X = k]` is evaluated.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum IterationLaw {
    /// `p_s^k`. Coincides with the geometric law at `p_s = 1/2`.
    #[default]
    Power,
    /// `(1 - p_s)^(k-1) p_s`.
    Geometric,
}

/// Per-iteration success probability `q / (2p)` for a prime-order curve.
pub fn p_success(curve: &CurveParams) -> f64 {
    ratio(curve.order(), &(curve.p() * 2u32))
}

fn ratio(num: &BigUint, den: &BigUint) -> f64 {
    // Scale both to 64 significant bits before converting.
    let shift = den.bits().saturating_sub(64);
    let n = (num >> shift).to_f64().unwrap_or(f64::NAN);
    let d = (den >> shift).to_f64().unwrap_or(f64::NAN);
    n / d
}

/// Closed-form cost model for iteration-leak dictionary partitioning.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AttackModel {
    pub p_s: f64,
    pub k_max: u32,
    #[serde(default)]
    pub law: IterationLaw,
}

impl Default for AttackModel {
    fn default() -> Self {
        AttackModel { p_s: 0.5, k_max: 20, law: IterationLaw::Power }
    }
}

impl AttackModel {
    pub fn new(p_s: f64, k_max: u32, law: IterationLaw) -> Result<Self, String> {
        if !(p_s > 0.0 && p_s < 1.0) {
            return Err(format!("p_s must lie in (0, 1), got {p_s}"));
        }
        if k_max < 1 {
            return Err("k_max must be at least 1".into());
        }
        Ok(AttackModel { p_s, k_max, law })
    }

    pub fn pr_iteration(&self, k: u32) -> f64 {
        if k == 0 {
            return 0.0;
        }
        match self.law {
            IterationLaw::Power => self.p_s.powi(k as i32),
            IterationLaw::Geometric => (1.0 - self.p_s).powi(k as i32 - 1) * self.p_s,
        }
    }

    /// Probability that one trace eliminates a random wrong password:
    /// `sum_i Pr[X = i] (1 - Pr[X = i])` over `i = 1..=k_max`.
    pub fn pr_pruned_by_one_trace(&self) -> f64 {
        (1..=self.k_max)
            .map(|i| {
                let p = self.pr_iteration(i);
                p * (1.0 - p)
            })
            .sum()
    }

    /// Probability that a wrong password is eliminated by at most `n` traces.
    pub fn pr_pruned_within(&self, n: u32) -> f64 {
        pruned_within(self.pr_pruned_by_one_trace(), n)
    }

    /// `P[Z_n >= d]` where `Z_n ~ Bin(L, p_{y_n})` counts eliminated
    /// passwords among `L` after `n` traces.
    pub fn pr_at_least_d_pruned(&self, l: u64, d: u64, n: u32) -> f64 {
        at_least_d(self.pr_pruned_by_one_trace(), l, d, n)
    }

    /// Smallest `n` with `P[Z_n >= d] >= target`.
    pub fn traces_required(&self, l: u64, d: u64, target: f64) -> u32 {
        traces_required_with(self.pr_pruned_by_one_trace(), l, d, target)
    }

    /// Smallest `n` with expected survivors `L (1 - P1)^n <= 1`.
    pub fn traces_expected(&self, l: u64) -> u32 {
        traces_expected_with(self.pr_pruned_by_one_trace(), l)
    }

    /// Per-trace pass probability of a wrong password when a trace reveals
    /// only the first iteration's outcome.
    pub fn baseline_pass_probability(&self) -> f64 {
        self.p_s * self.p_s + (1.0 - self.p_s) * (1.0 - self.p_s)
    }

    pub fn baseline_traces_required(&self, l: u64, d: u64, target: f64) -> u32 {
        traces_required_with(1.0 - self.baseline_pass_probability(), l, d, target)
    }

    pub fn baseline_traces_expected(&self, l: u64) -> u32 {
        traces_expected_with(1.0 - self.baseline_pass_probability(), l)
    }

    pub fn plan_row(&self, l: u64, target: f64) -> PlanRow {
        PlanRow {
            dictionary_size: l,
            leak_traces: self.traces_required(l, l, target),
            leak_traces_expected: self.traces_expected(l),
            baseline_traces: self.baseline_traces_required(l, l, target),
            baseline_traces_expected: self.baseline_traces_expected(l),
        }
    }
}

/// One line of an attack plan.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct PlanRow {
    pub dictionary_size: u64,
    /// Traces for all `L` wrong passwords to be eliminated with the target probability.
    pub leak_traces: u32,
    /// Traces for the expected number of survivors to drop to one.
    pub leak_traces_expected: u32,
    pub baseline_traces: u32,
    pub baseline_traces_expected: u32,
}

/// `1 - (1 - p1)^n`, and `(1 - p1)^n` alongside it without cancellation.
fn pruned_within_pair(p1: f64, n: u32) -> (f64, f64) {
    let ln_stay = n as f64 * (-p1).ln_1p();
    (-ln_stay.exp_m1(), ln_stay.exp())
}

pub fn pruned_within(p1: f64, n: u32) -> f64 {
    pruned_within_pair(p1, n).0
}

pub fn at_least_d(p1: f64, l: u64, d: u64, n: u32) -> f64 {
    let (p, q) = pruned_within_pair(p1, n);
    upper_tail(d, l, p, q)
}

const MAX_TRACES: u32 = 100_000;

pub fn traces_required_with(p1: f64, l: u64, d: u64, target: f64) -> u32 {
    if d == 0 || target <= 0.0 {
        return 0;
    }
    // P[Z_n >= d] is nondecreasing in n, so bisect on it.
    let ok = |n: u32| at_least_d(p1, l, d, n) >= target;
    let mut hi = 1;
    while !ok(hi) {
        if hi >= MAX_TRACES {
            return MAX_TRACES;
        }
        hi *= 2;
    }
    let mut lo = hi / 2;
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if ok(mid) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    hi
}

pub fn traces_expected_with(p1: f64, l: u64) -> u32 {
    if l <= 1 {
        return 0;
    }
    ((l as f64).ln() / -(-p1).ln_1p()).ceil() as u32
}
