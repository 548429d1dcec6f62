//! Parser reliability measurement and noise-model fitting.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::derive::Variant;
use crate::parser::{count_iterations, interpret_trace, is_well_formed, ParserConfig};
use crate::seed::indexed_stream;
use crate::sidechannel::{simulate_sample, ChannelShape, DelayDist, NoiseModel, Trace};

/// Parser performance at one samples-per-trace setting.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Reliability {
    pub samples_per_trace: usize,
    /// Fraction of traces the parser answered (exact or lower bound).
    pub usable: f64,
    /// Fraction of answered traces whose answer holds.
    pub accuracy: f64,
    pub traces: usize,
}

/// Single-sample guess quality for an early-exit loop.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleShot {
    /// Fraction of sessions whose capture passed the structural filter.
    pub usable: f64,
    /// Among usable sessions, guess equals the true iteration.
    pub exact: f64,
    /// Among usable sessions, the true iteration is the guess or the next one.
    pub within_next: f64,
    pub sessions: usize,
}

/// Success iteration of a random password: `Pr[k] = 2^-k`, restricted to `1..=k_max`.
pub fn draw_iteration<R: Rng + ?Sized>(rng: &mut R, k_max: u32) -> u32 {
    loop {
        let k = 1 + rng.gen::<u64>().trailing_ones();
        if k <= k_max {
            return k;
        }
    }
}

pub fn measure_reliability(
    noise: &NoiseModel,
    shape: &ChannelShape,
    cfg: &ParserConfig,
    samples_per_trace: usize,
    traces: usize,
    seed: u64,
) -> Reliability {
    let k_max = cfg.max_iterations;
    let mut usable = 0;
    let mut correct = 0;
    for i in 0..traces {
        let mut rng = indexed_stream(seed, "reliability", i as u64);
        let k = draw_iteration(&mut rng, k_max);
        let mut t = Trace::new(format!("r{i}"));
        t.samples =
            (0..samples_per_trace).map(|_| simulate_sample(k, Variant::Sae, k_max, shape, noise, &mut rng)).collect();
        let out = interpret_trace(&t, cfg).outcome;
        if out.is_usable() {
            usable += 1;
            correct += out.is_consistent_with(k) as usize;
        }
    }
    Reliability {
        samples_per_trace,
        usable: usable as f64 / traces as f64,
        accuracy: if usable == 0 { 0.0 } else { correct as f64 / usable as f64 },
        traces,
    }
}

/// Guesses the iteration from one early-exit sample per session by counting
/// the iterations it shows. Captures rejected by the structural filter get
/// no guess, as in the multi-sample pipeline.
pub fn measure_single_shot(
    noise: &NoiseModel,
    shape: &ChannelShape,
    cfg: &ParserConfig,
    sessions: usize,
    seed: u64,
) -> SingleShot {
    let mut usable = 0;
    let mut exact = 0;
    let mut soft = 0;
    for i in 0..sessions {
        let mut rng = indexed_stream(seed, "single-shot", i as u64);
        let k = draw_iteration(&mut rng, 40);
        let s = simulate_sample(k, Variant::EapPwd, 40, shape, noise, &mut rng);
        if !is_well_formed(&s, cfg) {
            continue;
        }
        usable += 1;
        let g = count_iterations(&s, cfg);
        exact += (g == k) as usize;
        soft += (g == k || g + 1 == k) as usize;
    }
    let denom = usable.max(1) as f64;
    SingleShot {
        usable: usable as f64 / sessions as f64,
        exact: exact as f64 / denom,
        within_next: soft as f64 / denom,
        sessions,
    }
}

/// Desired value of one metric.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Around(f64),
    AtLeast(f64),
}

impl Target {
    /// Shortfall or deviation, zero when met exactly.
    pub fn miss(&self, x: f64) -> f64 {
        match *self {
            Target::Around(t) => x - t,
            Target::AtLeast(t) => (x - t).min(0.0),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityTarget {
    pub samples_per_trace: usize,
    pub usable: Target,
    pub accuracy: Target,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SingleShotTarget {
    pub exact: Target,
    pub within_next: Target,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTargets {
    pub reliability: Vec<ReliabilityTarget>,
    pub single_shot: Option<SingleShotTarget>,
}

impl CalibrationTargets {
    /// Field measurements for iwd (1, 5 and 10 samples per trace) and the
    /// single-measurement EAP-pwd figures.
    pub fn reference() -> Self {
        use Target::*;
        CalibrationTargets {
            reliability: vec![
                ReliabilityTarget { samples_per_trace: 1, usable: Around(0.705), accuracy: Around(0.66) },
                ReliabilityTarget { samples_per_trace: 5, usable: Around(0.77), accuracy: AtLeast(0.93) },
                ReliabilityTarget { samples_per_trace: 10, usable: Around(0.88), accuracy: AtLeast(0.99) },
            ],
            single_shot: Some(SingleShotTarget { exact: Around(0.93), within_next: Around(0.99) }),
        }
    }

    /// Every trace usable and correct.
    pub fn perfect() -> Self {
        use Target::*;
        CalibrationTargets {
            reliability: [1, 5, 10]
                .into_iter()
                .map(|s| ReliabilityTarget { samples_per_trace: s, usable: Around(1.0), accuracy: Around(1.0) })
                .collect(),
            single_shot: Some(SingleShotTarget { exact: Around(1.0), within_next: Around(1.0) }),
        }
    }
}

/// Inclusive range searched for one parameter; `lo == hi` pins it.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub lo: f64,
    pub hi: f64,
}

impl Range {
    pub const fn fixed(v: f64) -> Self {
        Range { lo: v, hi: v }
    }

    pub const fn new(lo: f64, hi: f64) -> Self {
        Range { lo, hi }
    }

    fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.lo == self.hi {
            self.lo
        } else {
            rng.gen_range(self.lo..=self.hi)
        }
    }

    fn clamp(&self, v: f64) -> f64 {
        v.clamp(self.lo, self.hi)
    }
}

/// Parameter ranges explored by [`calibrate`]. Delay medians stay fixed at
/// the base model's values; dispersions and probabilities are searched.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SearchSpace {
    pub base: NoiseModel,
    pub clock_miss_prob: Range,
    pub randomcall_miss_prob: Range,
    pub spurious_long_delay_prob: Range,
    pub spurious_clock_prob: Range,
    pub malformed_sample_prob: Range,
    pub short_dispersion: Range,
    pub long_dispersion: Range,
    pub iteration_dispersion: Range,
}

const DIMS: usize = 8;

impl SearchSpace {
    pub fn wide() -> Self {
        SearchSpace {
            base: NoiseModel::shipped(),
            clock_miss_prob: Range::new(0.0, 0.5),
            randomcall_miss_prob: Range::new(0.0, 0.5),
            spurious_long_delay_prob: Range::new(0.0, 0.35),
            spurious_clock_prob: Range::new(0.0, 0.01),
            malformed_sample_prob: Range::new(0.0, 0.45),
            short_dispersion: Range::new(0.1, 1.0),
            long_dispersion: Range::new(0.05, 0.4),
            iteration_dispersion: Range::new(0.02, 0.3),
        }
    }

    /// Only the zero-noise model.
    pub fn noiseless() -> Self {
        let z = Range::fixed(0.0);
        SearchSpace {
            base: NoiseModel::zero(),
            clock_miss_prob: z,
            randomcall_miss_prob: z,
            spurious_long_delay_prob: z,
            spurious_clock_prob: z,
            malformed_sample_prob: z,
            short_dispersion: z,
            long_dispersion: z,
            iteration_dispersion: z,
        }
    }

    fn ranges(&self) -> [Range; DIMS] {
        [
            self.clock_miss_prob,
            self.randomcall_miss_prob,
            self.spurious_long_delay_prob,
            self.spurious_clock_prob,
            self.malformed_sample_prob,
            self.short_dispersion,
            self.long_dispersion,
            self.iteration_dispersion,
        ]
    }

    fn build(&self, x: &[f64; DIMS]) -> NoiseModel {
        let mut m = self.base.clone();
        m.clock_miss_prob = x[0];
        m.randomcall_miss_prob = x[1];
        m.spurious_long_delay_prob = x[2];
        m.spurious_clock_prob = x[3];
        m.malformed_sample_prob = x[4];
        m.short_delay = DelayDist::new(m.short_delay.median, x[5]);
        m.long_delay = DelayDist::new(m.long_delay.median, x[6]);
        m.iteration_cycles = DelayDist::new(m.iteration_cycles.median, x[7]);
        m
    }

    fn coords(&self, m: &NoiseModel) -> [f64; DIMS] {
        let r = self.ranges();
        let raw = [
            m.clock_miss_prob,
            m.randomcall_miss_prob,
            m.spurious_long_delay_prob,
            m.spurious_clock_prob,
            m.malformed_sample_prob,
            m.short_delay.dispersion,
            m.long_delay.dispersion,
            m.iteration_cycles.dispersion,
        ];
        std::array::from_fn(|i| r[i].clamp(raw[i]))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrateOptions {
    pub shape: ChannelShape,
    pub single_shot_shape: ChannelShape,
    pub parser: ParserConfig,
    /// Random candidates drawn before local refinement.
    pub random_candidates: usize,
    /// Coordinate-search sweeps after the random phase.
    pub refine_rounds: usize,
    /// Traces (or sessions) simulated per metric evaluation.
    pub traces_per_point: usize,
    pub seed: u64,
}

impl Default for CalibrateOptions {
    fn default() -> Self {
        CalibrateOptions {
            shape: ChannelShape::SAE,
            single_shot_shape: ChannelShape::EAP_PWD,
            parser: ParserConfig::default(),
            random_candidates: 200,
            refine_rounds: 4,
            traces_per_point: 1000,
            seed: 0,
        }
    }
}

/// Metrics of one model and their deviation from the targets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub reliability: Vec<Reliability>,
    pub single_shot: Option<SingleShot>,
    /// Root of the summed squared misses.
    pub distance: f64,
    /// Largest single miss, in absolute fraction.
    pub worst_miss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub model: NoiseModel,
    pub evaluation: Evaluation,
    pub candidates_evaluated: usize,
}

/// Measures `noise` against `targets` with common random numbers.
pub fn evaluate(noise: &NoiseModel, targets: &CalibrationTargets, opts: &CalibrateOptions) -> Evaluation {
    let mut misses = Vec::new();
    let reliability: Vec<Reliability> = targets
        .reliability
        .iter()
        .map(|t| {
            let r = measure_reliability(
                noise,
                &opts.shape,
                &opts.parser,
                t.samples_per_trace,
                opts.traces_per_point,
                opts.seed,
            );
            misses.push(t.usable.miss(r.usable));
            misses.push(t.accuracy.miss(r.accuracy));
            r
        })
        .collect();
    let single_shot = targets.single_shot.map(|t| {
        let s = measure_single_shot(noise, &opts.single_shot_shape, &opts.parser, opts.traces_per_point, opts.seed);
        misses.push(t.exact.miss(s.exact));
        misses.push(t.within_next.miss(s.within_next));
        s
    });
    Evaluation {
        reliability,
        single_shot,
        distance: misses.iter().map(|m| m * m).sum::<f64>().sqrt(),
        worst_miss: misses.iter().fold(0.0, |a: f64, m| a.max(m.abs())),
    }
}

/// Fits a noise model to `targets`: seeded random search over `space`,
/// then coordinate search with shrinking steps around the best point.
/// Always returns the best model found, with its distances.
pub fn calibrate(space: &SearchSpace, targets: &CalibrationTargets, opts: &CalibrateOptions) -> CalibrationResult {
    let ranges = space.ranges();
    let mut rng = crate::seed::stream(opts.seed, "calibrate");
    let mut evaluated = 1;
    let mut best_x = space.coords(&space.base);
    let mut best = evaluate(&space.build(&best_x), targets, opts);
    for _ in 0..opts.random_candidates {
        let x: [f64; DIMS] = std::array::from_fn(|i| ranges[i].draw(&mut rng));
        let m = space.build(&x);
        if m.validate().is_err() {
            continue;
        }
        let e = evaluate(&m, targets, opts);
        evaluated += 1;
        if e.distance < best.distance {
            best = e;
            best_x = x;
        }
    }
    let mut step: [f64; DIMS] = std::array::from_fn(|i| (ranges[i].hi - ranges[i].lo) / 8.0);
    for _ in 0..opts.refine_rounds {
        for d in 0..DIMS {
            if step[d] == 0.0 {
                continue;
            }
            for dir in [-1.0, 1.0] {
                let mut x = best_x;
                x[d] = ranges[d].clamp(x[d] + dir * step[d]);
                if x[d] == best_x[d] {
                    continue;
                }
                let m = space.build(&x);
                if m.validate().is_err() {
                    continue;
                }
                let e = evaluate(&m, targets, opts);
                evaluated += 1;
                if e.distance < best.distance {
                    best = e;
                    best_x = x;
                }
            }
        }
        for s in step.iter_mut() {
            *s /= 2.0;
        }
    }
    CalibrationResult { model: space.build(&best_x), evaluation: best, candidates_evaluated: evaluated }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn iteration_law() {
        let mut rng = crate::seed::stream(1, "law");
        let n = 20_000;
        let ones = (0..n).filter(|_| draw_iteration(&mut rng, 20) == 1).count();
        assert!((ones as f64 / n as f64 - 0.5).abs() < 0.02);
        assert!((0..1000).all(|_| draw_iteration(&mut rng, 3) <= 3));
    }

    #[test]
    fn targets_miss() {
        assert_eq!(Target::AtLeast(0.9).miss(0.95), 0.0);
        assert!((Target::AtLeast(0.9).miss(0.85) + 0.05).abs() < 1e-12);
        assert!((Target::Around(0.7).miss(0.75) - 0.05).abs() < 1e-12);
    }

    #[test]
    fn noiseless_calibration_is_perfect() {
        let opts =
            CalibrateOptions { random_candidates: 2, refine_rounds: 1, traces_per_point: 100, ..Default::default() };
        let r = calibrate(&SearchSpace::noiseless(), &CalibrationTargets::perfect(), &opts);
        assert!(r.model.is_noiseless());
        assert_eq!(r.evaluation.distance, 0.0);
        for p in &r.evaluation.reliability {
            assert_eq!((p.usable, p.accuracy), (1.0, 1.0));
        }
    }
}
