use rand::Rng;
use rand_distr::{Distribution, LogNormal, Normal};
use serde::{Deserialize, Serialize};
use statrs::distribution::ContinuousCDF;

/// Log-normal cycle count: `ln X ~ N(ln median, dispersion^2)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DelayDist {
    pub median: f64,
    pub dispersion: f64,
}

impl DelayDist {
    pub const fn new(median: f64, dispersion: f64) -> Self {
        DelayDist { median, dispersion }
    }

    pub const fn fixed(median: f64) -> Self {
        DelayDist { median, dispersion: 0.0 }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.dispersion == 0.0 {
            return self.median;
        }
        LogNormal::new(self.median.ln(), self.dispersion).expect("validated dispersion").sample(rng)
    }

    /// Value at cumulative probability `u` in (0, 1).
    pub fn quantile(&self, u: f64) -> f64 {
        self.median * (self.dispersion * probit(u)).exp()
    }

    fn validate(&self, name: &str) -> Result<(), NoiseError> {
        if !(self.median.is_finite() && self.median > 0.0) {
            return Err(NoiseError(format!("{name}.median must be positive")));
        }
        if !(self.dispersion.is_finite() && self.dispersion >= 0.0) {
            return Err(NoiseError(format!("{name}.dispersion must be non-negative")));
        }
        Ok(())
    }
}

fn probit(p: f64) -> f64 {
    statrs::distribution::Normal::standard().inverse_cdf(p)
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("invalid noise model: {0}")]
pub struct NoiseError(pub String);

/// Stochastic imperfections of the spy process.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    /// Each synchronization-clock hit is lost with this probability.
    pub clock_miss_prob: f64,
    /// Each loop `RandomCall` (blinding or success-specific) is lost.
    pub randomcall_miss_prob: f64,
    /// Per iteration, an unrelated long-delayed `RandomCall` shows up.
    pub spurious_long_delay_prob: f64,
    /// Per iteration, an extra clock hit appears mid-iteration.
    pub spurious_clock_prob: f64,
    /// Per sample, one structural corruption is applied.
    pub malformed_sample_prob: f64,
    /// Delay from the clock to the blinding draw.
    pub short_delay: DelayDist,
    /// Delay from the clock to the slowed success-specific draw.
    pub long_delay: DelayDist,
    /// Length of one loop iteration.
    pub iteration_cycles: DelayDist,
    /// Gap between repeated clock hits inside one iteration.
    pub clock_gap: DelayDist,
}

impl NoiseModel {
    /// Perfect observation with constant timings.
    pub fn zero() -> Self {
        NoiseModel {
            clock_miss_prob: 0.0,
            randomcall_miss_prob: 0.0,
            spurious_long_delay_prob: 0.0,
            spurious_clock_prob: 0.0,
            malformed_sample_prob: 0.0,
            short_delay: DelayDist::fixed(150.0),
            long_delay: DelayDist::fixed(3900.0),
            iteration_cycles: DelayDist::fixed(4000.0),
            clock_gap: DelayDist::fixed(350.0),
        }
    }

    /// The calibrated model shipped with the crate.
    pub fn shipped() -> Self {
        serde_json::from_str(include_str!("../../data/default_noise.json")).expect("shipped noise model parses")
    }

    pub fn validate(&self) -> Result<(), NoiseError> {
        for (name, p) in [
            ("clock_miss_prob", self.clock_miss_prob),
            ("randomcall_miss_prob", self.randomcall_miss_prob),
            ("spurious_long_delay_prob", self.spurious_long_delay_prob),
            ("spurious_clock_prob", self.spurious_clock_prob),
            ("malformed_sample_prob", self.malformed_sample_prob),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return Err(NoiseError(format!("{name} must lie in [0, 1], got {p}")));
            }
        }
        self.short_delay.validate("short_delay")?;
        self.long_delay.validate("long_delay")?;
        self.iteration_cycles.validate("iteration_cycles")?;
        self.clock_gap.validate("clock_gap")?;
        let dominated = (1..1000).all(|i| {
            let u = i as f64 / 1000.0;
            self.long_delay.quantile(u) >= self.short_delay.quantile(u)
        });
        if !dominated {
            return Err(NoiseError("long_delay must stochastically dominate short_delay".into()));
        }
        Ok(())
    }

    /// Whether every probability is zero.
    pub fn is_noiseless(&self) -> bool {
        self.clock_miss_prob == 0.0
            && self.randomcall_miss_prob == 0.0
            && self.spurious_long_delay_prob == 0.0
            && self.spurious_clock_prob == 0.0
            && self.malformed_sample_prob == 0.0
    }
}

impl Default for NoiseModel {
    fn default() -> Self {
        Self::shipped()
    }
}

/// Probe reload latency in cycles, carried for format fidelity only.
pub(crate) fn latency<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u32 {
    let n = Normal::new(mean, 3.0).expect("finite");
    n.sample(rng).round().clamp(60.0, 140.0) as u32
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn probit_symmetry() {
        assert!(probit(0.5).abs() < 1e-12);
        assert!((probit(0.975) - 1.959964).abs() < 1e-5);
        assert!((probit(0.01) + 2.326348).abs() < 1e-5);
    }

    #[test]
    fn validation() {
        assert!(NoiseModel::zero().validate().is_ok());
        assert!(NoiseModel::shipped().validate().is_ok());
        let mut m = NoiseModel::zero();
        m.clock_miss_prob = 1.5;
        assert!(m.validate().is_err());
        let mut m = NoiseModel::zero();
        m.long_delay = DelayDist::fixed(100.0);
        assert!(m.validate().is_err());
        let mut m = NoiseModel::zero();
        m.long_delay = DelayDist::new(3900.0, 3.0);
        assert!(m.validate().is_err());
    }

    #[test]
    fn json_round_trip() {
        let m = NoiseModel::shipped();
        let s = serde_json::to_string(&m).unwrap();
        assert_eq!(serde_json::from_str::<NoiseModel>(&s).unwrap(), m);
    }
}
