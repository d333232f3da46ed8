//! Simulated systems under learning.
//!
//! A [`SystemHandle`] hides a target machine behind an input- or output-noise
//! channel, counts every symbol it executes and can swap the target at a
//! scheduled test index. [`execute_repeated`] layers majority voting over any
//! [`System`].

use std::collections::{HashMap, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::SulError;
use crate::mealy::MealyMachine;
use crate::word::{Observation, Sym, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    None,
    Input,
    Output,
}

impl NoiseKind {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseKind::None => "none",
            NoiseKind::Input => "input",
            NoiseKind::Output => "output",
        }
    }
}

/// Per-symbol noise. Corrupted symbols are redrawn uniformly over the whole
/// alphabet, so the visible corruption rate is `level * (n - 1) / n`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub kind: NoiseKind,
    pub level: f64,
    pub seed: u64,
}

impl NoiseSpec {
    pub fn new(kind: NoiseKind, level: f64, seed: u64) -> Result<Self, SulError> {
        if !(0.0..=1.0).contains(&level) {
            return Err(SulError::InvalidNoise(level));
        }
        Ok(Self { kind, level, seed })
    }

    pub fn none() -> Self {
        Self {
            kind: NoiseKind::None,
            level: 0.0,
            seed: 0,
        }
    }

    /// Probability that a symbol observed through this channel differs from
    /// the true one, for an alphabet of `alphabet` symbols.
    pub fn effective_rate(&self, alphabet: usize) -> f64 {
        self.level * (alphabet as f64 - 1.0) / alphabet as f64
    }
}

/// Counters kept by every system.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct SulStats {
    pub tests: u64,
    pub resets: u64,
    pub symbols: u64,
}

/// Anything that can run a test word from its initial state.
pub trait System {
    /// Resets, feeds `input` and reports `(input, observed output)`.
    fn execute(&mut self, input: &[Sym]) -> Result<Observation, SulError>;

    fn stats(&self) -> SulStats;
}

impl<S: System + ?Sized> System for &mut S {
    fn execute(&mut self, input: &[Sym]) -> Result<Observation, SulError> {
        (**self).execute(input)
    }

    fn stats(&self) -> SulStats {
        (**self).stats()
    }
}

impl<S: System + ?Sized> System for Box<S> {
    fn execute(&mut self, input: &[Sym]) -> Result<Observation, SulError> {
        (**self).execute(input)
    }

    fn stats(&self) -> SulStats {
        (**self).stats()
    }
}

/// A hidden Mealy machine behind a noise channel.
#[derive(Debug, Clone)]
pub struct SystemHandle {
    target: MealyMachine,
    noise: NoiseSpec,
    rng: ChaCha8Rng,
    stats: SulStats,
    mutations: VecDeque<(u64, MealyMachine)>,
    budget: Option<u64>,
}

impl SystemHandle {
    pub fn new(target: MealyMachine, noise: NoiseSpec) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(noise.seed),
            target,
            noise,
            stats: SulStats::default(),
            mutations: VecDeque::new(),
            budget: None,
        }
    }

    /// Replaces the target by `replacement` from test `at_test` (0-based) on.
    /// Entries must be given in increasing test order.
    pub fn with_mutation(mut self, at_test: u64, replacement: MealyMachine) -> Self {
        self.mutations.push_back((at_test, replacement));
        self
    }

    /// Refuses to start a test once `budget` symbols have been spent. A run
    /// can therefore overshoot by at most one test word.
    pub fn with_budget(mut self, budget: u64) -> Self {
        self.budget = Some(budget);
        self
    }

    pub fn target(&self) -> &MealyMachine {
        &self.target
    }

    pub fn noise(&self) -> &NoiseSpec {
        &self.noise
    }

    /// The machine the system behaves as after every scheduled mutation.
    pub fn final_target(&self) -> &MealyMachine {
        self.mutations.back().map_or(&self.target, |(_, m)| m)
    }
}

impl System for SystemHandle {
    fn execute(&mut self, input: &[Sym]) -> Result<Observation, SulError> {
        if let Some(budget) = self.budget {
            if self.stats.symbols >= budget {
                return Err(SulError::BudgetExhausted { budget });
            }
        }
        while self.mutations.front().is_some_and(|(at, _)| *at <= self.stats.tests) {
            let (_, m) = self.mutations.pop_front().expect("checked");
            self.target = m;
        }
        self.stats.tests += 1;
        self.stats.resets += 1;
        self.stats.symbols += input.len() as u64;

        let m = &self.target;
        let n_in = m.inputs().len();
        let n_out = m.outputs().len();
        let p = self.noise.level;
        let mut q = m.initial();
        let mut out = Vec::with_capacity(input.len());
        for &a in input {
            let fed = if self.noise.kind == NoiseKind::Input && p > 0.0 && self.rng.gen::<f64>() < p {
                self.rng.gen_range(0..n_in) as Sym
            } else {
                a
            };
            let (next, mut o) = m.step(q, fed);
            if self.noise.kind == NoiseKind::Output && p > 0.0 && self.rng.gen::<f64>() < p {
                o = self.rng.gen_range(0..n_out) as Sym;
            }
            out.push(o);
            q = next;
        }
        Ok(Observation::new(input.to_vec(), out).expect("one output per input"))
    }

    fn stats(&self) -> SulStats {
        self.stats
    }
}

/// Majority voting over repeated executions of one query.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RepeatsPolicy {
    pub min_repeats: u32,
    pub max_repeats: u32,
    pub threshold: f64,
}

impl RepeatsPolicy {
    pub const DEFAULT_THRESHOLD: f64 = 0.8;

    pub fn new(min_repeats: u32, max_repeats: u32, threshold: f64) -> Result<Self, SulError> {
        if min_repeats == 0 || min_repeats > max_repeats {
            return Err(SulError::InvalidPolicy(format!(
                "need 1 <= min_repeats <= max_repeats, got ({min_repeats}, {max_repeats})"
            )));
        }
        if !(threshold > 0.5 && threshold <= 1.0) {
            return Err(SulError::InvalidPolicy(format!(
                "agreement threshold {threshold} outside (0.5, 1]"
            )));
        }
        Ok(Self {
            min_repeats,
            max_repeats,
            threshold,
        })
    }

    pub fn pair(min_repeats: u32, max_repeats: u32) -> Result<Self, SulError> {
        Self::new(min_repeats, max_repeats, Self::DEFAULT_THRESHOLD)
    }

    /// `(1, 1)`: every query runs once.
    pub fn single() -> Self {
        Self {
            min_repeats: 1,
            max_repeats: 1,
            threshold: 1.0,
        }
    }
}

/// Runs `input` at least `min_repeats` times and returns the first answer
/// reaching the agreement threshold; failing that, the plurality answer
/// after `max_repeats` runs (ties go to the lexicographically least word).
pub fn execute_repeated<S: System + ?Sized>(
    system: &mut S,
    input: &[Sym],
    policy: &RepeatsPolicy,
) -> Result<Observation, SulError> {
    let mut tally: HashMap<Word, u32> = HashMap::new();
    for n in 1..=policy.max_repeats {
        let obs = system.execute(input)?;
        let (_, output) = obs.into_parts();
        *tally.entry(output).or_insert(0) += 1;
        if n >= policy.min_repeats {
            let best = *tally.values().max().expect("non-empty");
            if best as f64 >= policy.threshold * n as f64 - 1e-9 {
                return Ok(pick(tally, input));
            }
        }
    }
    Ok(pick(tally, input))
}

fn pick(tally: HashMap<Word, u32>, input: &[Sym]) -> Observation {
    let (output, _) = tally
        .into_iter()
        .max_by(|(w1, c1), (w2, c2)| c1.cmp(c2).then_with(|| w2.cmp(w1)))
        .expect("at least one execution");
    Observation::new(input.to_vec(), output).expect("outputs keep length")
}
