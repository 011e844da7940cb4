//! Exact event-driven simulation of the level process.
//!
//! Every path starts at level 0 (inside `Z_p`). Path `i` of an ensemble with
//! base seed `s` draws from a ChaCha8 stream seeded with [`path_seed`]`(s, i)`,
//! so results do not depend on how paths are spread over threads.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{ModelParams, NormChainGenerator};

/// Seed of path `index` in an ensemble (SplitMix64 finalizer over both).
pub fn path_seed(base: u64, index: u64) -> u64 {
    let mut z = base ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Neumaier-compensated running sum.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if !t.is_finite() {
            self.sum = t;
            self.comp = 0.0;
            return;
        }
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// One holding interval `[start, end)` at `level`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment {
    pub level: usize,
    pub start: f64,
    pub end: f64,
}

/// Lazily generated path; an infinite iterator of holding intervals.
///
/// An absorbing level yields one segment ending at infinity.
#[derive(Debug, Clone)]
pub struct Walker<'a> {
    gen: &'a NormChainGenerator,
    rng: ChaCha8Rng,
    level: usize,
    clock: CompensatedSum,
}

impl<'a> Walker<'a> {
    pub fn new(gen: &'a NormChainGenerator, seed: u64) -> Self {
        Self { gen, rng: ChaCha8Rng::seed_from_u64(seed), level: 0, clock: CompensatedSum::default() }
    }
}

impl Iterator for Walker<'_> {
    type Item = Segment;

    #[inline]
    fn next(&mut self) -> Option<Segment> {
        let row = self.gen.row(self.level);
        let rate = row.exit_rate();
        let start = self.clock.value();
        let level = self.level;
        if rate > 0.0 {
            let e: f64 = self.rng.sample(Exp1);
            self.clock.add(e / rate);
            self.level = row.select(self.rng.random::<f64>());
        } else {
            self.clock.add(f64::INFINITY);
        }
        Some(Segment { level, start, end: self.clock.value() })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Event {
    pub level: usize,
    pub holding: f64,
}

/// A stored path. The final holding runs past the horizon (or is infinite
/// at an absorbing level).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub params: ModelParams,
    pub horizon: f64,
    pub seed: u64,
    pub events: Vec<Event>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryFunctionals {
    /// Time spent in `Z_p` (level 0) on `[0, t]`.
    pub sojourn: f64,
    /// `t - sojourn`.
    pub complement_sojourn: f64,
    /// End of the first excursion out of `Z_p`, if it ended by `t`.
    pub first_return: Option<f64>,
    pub returned: bool,
    /// Number of level-0 intervals begun by `t`, the initial one included.
    pub visits_to_zero: u64,
    pub max_level: usize,
}

fn check_horizon(h: f64) -> Result<()> {
    if h >= 0.0 && h.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("horizon must be finite and >= 0, got {h}")))
    }
}

/// Simulates one path on `[0, horizon]`.
pub fn sample_path(gen: &NormChainGenerator, horizon: f64, seed: u64) -> Result<Trajectory> {
    check_horizon(horizon)?;
    let mut events = Vec::new();
    for seg in Walker::new(gen, seed) {
        events.push(Event { level: seg.level, holding: seg.end - seg.start });
        if seg.end > horizon {
            break;
        }
    }
    Ok(Trajectory { params: *gen.params(), horizon, seed, events })
}

fn segments(events: &[Event]) -> impl Iterator<Item = Segment> + '_ {
    let mut clock = CompensatedSum::default();
    events.iter().map(move |e| {
        let start = clock.value();
        clock.add(e.holding);
        Segment { level: e.level, start, end: clock.value() }
    })
}

/// Accumulates path functionals over segments up to a time `t`.
#[derive(Debug, Clone, Copy)]
struct Accumulator {
    t: f64,
    sojourn: CompensatedSum,
    first_return: Option<f64>,
    left_zero: bool,
    visits: u64,
    max_level: usize,
}

impl Accumulator {
    fn new(t: f64) -> Self {
        Self { t, sojourn: CompensatedSum::default(), first_return: None, left_zero: false, visits: 0, max_level: 0 }
    }

    /// Returns false once the segment starts after `t`.
    fn push(&mut self, seg: Segment) -> bool {
        if seg.start > self.t {
            return false;
        }
        self.max_level = self.max_level.max(seg.level);
        if seg.level == 0 {
            self.visits += 1;
            if self.left_zero && self.first_return.is_none() {
                self.first_return = Some(seg.start);
            }
            self.sojourn.add(seg.end.min(self.t) - seg.start);
        } else {
            self.left_zero = true;
        }
        seg.end < self.t
    }

    fn finish(self) -> TrajectoryFunctionals {
        let sojourn = self.sojourn.value().clamp(0.0, self.t);
        TrajectoryFunctionals {
            sojourn,
            complement_sojourn: self.t - sojourn,
            first_return: self.first_return,
            returned: self.first_return.is_some(),
            visits_to_zero: self.visits,
            max_level: self.max_level,
        }
    }
}

/// Functionals of a stored path at time `t <= horizon`.
pub fn functionals(traj: &Trajectory, t: f64) -> Result<TrajectoryFunctionals> {
    if !(t >= 0.0 && t <= traj.horizon) {
        return Err(Error::invalid(format!("t = {t} lies outside [0, {}]", traj.horizon)));
    }
    let mut acc = Accumulator::new(t);
    for seg in segments(&traj.events) {
        if !acc.push(seg) {
            break;
        }
    }
    Ok(acc.finish())
}

/// Time spent in `Z_p` during `[t_a, t_a + t]`.
pub fn sojourn_increment(traj: &Trajectory, t_a: f64, t: f64) -> Result<f64> {
    if !(t_a >= 0.0 && t >= 0.0) {
        return Err(Error::invalid("t_a and t must be nonnegative"));
    }
    if t_a + t > traj.horizon {
        return Err(Error::invalid(format!("t_a + t = {} exceeds the horizon {}", t_a + t, traj.horizon)));
    }
    let late = functionals(traj, t_a + t)?.sojourn;
    let early = functionals(traj, t_a)?.sojourn;
    Ok((late - early).clamp(0.0, t))
}

/// Streams a path and returns its functionals at `horizon` without storing it.
pub fn path_functionals(gen: &NormChainGenerator, horizon: f64, seed: u64) -> Result<TrajectoryFunctionals> {
    check_horizon(horizon)?;
    let mut acc = Accumulator::new(horizon);
    for seg in Walker::new(gen, seed) {
        if !acc.push(seg) {
            break;
        }
    }
    Ok(acc.finish())
}

/// Sojourn times at each of the nondecreasing `times`, in one pass.
pub fn sojourns_at(gen: &NormChainGenerator, seed: u64, times: &[f64]) -> Vec<f64> {
    debug_assert!(times.windows(2).all(|w| w[0] <= w[1]));
    let mut out = Vec::with_capacity(times.len());
    let mut done = CompensatedSum::default();
    let mut next = 0;
    for seg in Walker::new(gen, seed) {
        while next < times.len() && times[next] <= seg.end {
            let partial = if seg.level == 0 { (times[next] - seg.start).max(0.0) } else { 0.0 };
            out.push((done.value() + partial).min(times[next]));
            next += 1;
        }
        if next == times.len() {
            break;
        }
        if seg.level == 0 {
            done.add(seg.end - seg.start);
        }
    }
    out
}

/// Level occupied at each of the nondecreasing `times`.
pub fn levels_at(gen: &NormChainGenerator, seed: u64, times: &[f64]) -> Vec<usize> {
    let mut out = Vec::with_capacity(times.len());
    let mut next = 0;
    for seg in Walker::new(gen, seed) {
        while next < times.len() && times[next] < seg.end {
            out.push(seg.level);
            next += 1;
        }
        if next == times.len() {
            break;
        }
    }
    out
}

/// First return time to `Z_p`, or `None` if the first excursion is still
/// running at `horizon`.
pub fn first_return_time(gen: &NormChainGenerator, seed: u64, horizon: f64) -> Option<f64> {
    let mut walker = Walker::new(gen, seed);
    let first = walker.next()?;
    if first.end > horizon {
        return None;
    }
    walker.find(|seg| seg.level == 0 || seg.start > horizon).filter(|seg| seg.level == 0 && seg.start <= horizon).map(|seg| seg.start)
}

/// Per-path record of an ensemble run.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathRecord {
    pub seed: u64,
    pub horizon: f64,
    pub functionals: TrajectoryFunctionals,
}

/// Simulates `n_paths` paths in parallel; output order is by path index.
pub fn simulate_ensemble(gen: &NormChainGenerator, horizon: f64, n_paths: usize, base_seed: u64) -> Result<Vec<PathRecord>> {
    check_horizon(horizon)?;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let seed = path_seed(base_seed, i);
            Ok(PathRecord { seed, horizon, functionals: path_functionals(gen, horizon, seed)? })
        })
        .collect()
}
