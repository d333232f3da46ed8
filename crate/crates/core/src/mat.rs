//! The classic MAT baseline: a learner over a write-once membership cache,
//! majority-voted queries, and the same equivalence sampler as the
//! conflict-aware stack. Any contradiction between the cache and a fresh
//! answer ends the run.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::ceal::Outcome;
use crate::error::SulError;
use crate::learner::{trim_counterexample, AbortReason, Interrupt, Learner, LearnerOracle};
use crate::mealy::MealyMachine;
use crate::reviser::{Event, EventKind, EventLog};
use crate::sampler::{SamplerParams, TestSampler};
use crate::sul::{execute_repeated, RepeatsPolicy, System};
use crate::word::{Observation, Sym, Word};

/// A fresh answer contradicts the cache at `position` (1-based).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
#[error("cache conflict at position {position}")]
pub struct CacheConflict {
    pub position: usize,
}

/// Prefix-closed trie from input words to output words. Entries are never
/// revised.
#[derive(Debug, Clone)]
pub struct MatCache {
    // per node: (input, output, child), sorted by input
    nodes: Vec<Vec<(Sym, Sym, u32)>>,
}

impl Default for MatCache {
    fn default() -> Self {
        Self::new()
    }
}

impl MatCache {
    pub fn new() -> Self {
        Self {
            nodes: vec![Vec::new()],
        }
    }

    fn edge(&self, node: u32, a: Sym) -> Option<(Sym, u32)> {
        let edges = &self.nodes[node as usize];
        edges
            .binary_search_by_key(&a, |e| e.0)
            .ok()
            .map(|ix| (edges[ix].1, edges[ix].2))
    }

    pub fn lookup(&self, input: &[Sym]) -> Option<Word> {
        let mut node = 0;
        let mut out = Vec::with_capacity(input.len());
        for &a in input {
            let (o, child) = self.edge(node, a)?;
            out.push(o);
            node = child;
        }
        Some(out)
    }

    /// Stores `obs`. On a contradiction nothing is written.
    pub fn insert(&mut self, obs: &Observation) -> Result<(), CacheConflict> {
        let mut node = 0;
        let mut k = 0;
        for (&a, &o) in obs.input().iter().zip(obs.output()) {
            match self.edge(node, a) {
                Some((stored, child)) => {
                    if stored != o {
                        return Err(CacheConflict { position: k + 1 });
                    }
                    node = child;
                    k += 1;
                }
                None => break,
            }
        }
        for (&a, &o) in obs.input()[k..].iter().zip(&obs.output()[k..]) {
            self.nodes.push(Vec::new());
            let child = (self.nodes.len() - 1) as u32;
            let edges = &mut self.nodes[node as usize];
            let at = edges.partition_point(|e| e.0 < a);
            edges.insert(at, (a, o, child));
            node = child;
        }
        Ok(())
    }

    /// Number of trie nodes, root included.
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.len() == 1
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MatError {
    #[error(transparent)]
    Conflict(#[from] CacheConflict),
    #[error(transparent)]
    System(#[from] SulError),
}

/// Cached, majority-voted membership query.
pub fn mat_mq<S: System + ?Sized>(
    cache: &mut MatCache,
    system: &mut S,
    input: &[Sym],
    policy: &RepeatsPolicy,
) -> Result<Word, MatError> {
    if let Some(out) = cache.lookup(input) {
        return Ok(out);
    }
    let obs = execute_repeated(system, input, policy)?;
    cache.insert(&obs)?;
    Ok(obs.into_parts().1)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MatStats {
    pub system_tests: u64,
    pub mq_tests: u64,
    pub eq_tests: u64,
    pub mq_symbols: u64,
    pub eq_symbols: u64,
    pub cache_hits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MatConfig {
    pub policy: RepeatsPolicy,
    pub sampler: SamplerParams,
    pub survive_budget: u32,
    pub sampler_seed: u64,
}

/// Teacher of the classic loop: cache plus sampled equivalence testing.
pub struct MatTeacher<S: System> {
    cache: MatCache,
    system: S,
    config: MatConfig,
    rng: ChaCha8Rng,
    stats: MatStats,
    events: EventLog,
}

fn interrupt(e: MatError) -> Interrupt {
    Interrupt::Abort(match e {
        MatError::Conflict(_) => AbortReason::CacheConflict,
        MatError::System(SulError::BudgetExhausted { .. }) => AbortReason::Timeout,
        MatError::System(_) => AbortReason::SystemFailure,
    })
}

impl<S: System> MatTeacher<S> {
    pub fn new(system: S, config: MatConfig) -> Self {
        Self {
            cache: MatCache::new(),
            system,
            rng: ChaCha8Rng::seed_from_u64(config.sampler_seed),
            config,
            stats: MatStats::default(),
            events: EventLog::disabled(),
        }
    }

    pub fn with_events(mut self, events: EventLog) -> Self {
        self.events = events;
        self
    }

    pub fn cache(&self) -> &MatCache {
        &self.cache
    }

    pub fn system(&self) -> &S {
        &self.system
    }

    pub fn stats(&self) -> MatStats {
        self.stats
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub fn into_parts(self) -> (S, EventLog) {
        (self.system, self.events)
    }

    fn execute(&mut self, input: &[Sym], eq: bool) -> Result<Observation, MatError> {
        let before = self.system.stats().symbols;
        let result = execute_repeated(&mut self.system, input, &self.config.policy);
        let spent = self.system.stats().symbols - before;
        if eq {
            self.stats.eq_symbols += spent;
        } else {
            self.stats.mq_symbols += spent;
        }
        let obs = result?;
        self.stats.system_tests += 1;
        if eq {
            self.stats.eq_tests += 1;
        } else {
            self.stats.mq_tests += 1;
        }
        self.events.push(Event {
            kind: if eq { EventKind::EqTest } else { EventKind::MqTest },
            test_index: self.stats.system_tests,
            word_len: input.len(),
            symbols: self.system.stats().symbols,
        });
        Ok(obs)
    }
}

impl<S: System> LearnerOracle for MatTeacher<S> {
    fn mq(&mut self, input: &[Sym]) -> Result<Word, Interrupt> {
        if let Some(out) = self.cache.lookup(input) {
            self.stats.cache_hits += 1;
            return Ok(out);
        }
        let obs = self.execute(input, false).map_err(interrupt)?;
        self.cache.insert(&obs).map_err(|e| interrupt(e.into()))?;
        Ok(obs.into_parts().1)
    }

    fn eq(&mut self, h: &MealyMachine) -> Result<Option<Observation>, Interrupt> {
        let sampler = TestSampler::new(h, self.config.sampler).expect("learner hypotheses are connected");
        for _ in 0..self.config.survive_budget {
            let word = sampler.sample(&mut self.rng);
            let obs = self.execute(&word, true).map_err(interrupt)?;
            self.cache.insert(&obs).map_err(|e| interrupt(e.into()))?;
            if let Some(cex) = trim_counterexample(h, &obs) {
                return Ok(Some(cex));
            }
        }
        Ok(None)
    }
}

#[derive(Debug, Clone)]
pub struct MatRun {
    /// The last hypothesis, when the loop terminated normally.
    pub model: Option<MealyMachine>,
    pub outcome: Outcome,
    pub hypotheses: u64,
    pub distinct_hypotheses: usize,
}

/// Classic learn / test loop; the final model is the last hypothesis.
///
/// A counterexample is fed back until the learner's hypothesis agrees with
/// it (checked against the cache, no new tests) before testing resumes.
pub fn run_mat<S: System>(learner: &mut dyn Learner, teacher: &mut MatTeacher<S>) -> MatRun {
    let mut hypotheses = 0;
    let mut seen = std::collections::HashSet::new();
    let mut pending: Option<Observation> = None;
    let outcome = loop {
        let step = learner.hypothesis(teacher).and_then(|h| {
            hypotheses += 1;
            seen.insert(crate::ceal::HypothesisLog::fingerprint(&h));
            let (tests, symbols) = (teacher.stats.system_tests, teacher.system.stats().symbols);
            teacher.events.push(Event {
                kind: EventKind::Hypothesis,
                test_index: tests,
                word_len: 0,
                symbols,
            });
            let cex = match pending.take().filter(|c| trim_counterexample(&h, c).is_some()) {
                Some(c) => Some(c),
                None => teacher.eq(&h)?,
            };
            match cex {
                None => Ok(Some(h)),
                Some(cex) => {
                    learner.refine(&cex, teacher)?;
                    pending = Some(cex);
                    Ok(None)
                }
            }
        });
        match step {
            Ok(Some(h)) => break (Outcome::Elected, Some(h)),
            Ok(None) => {}
            // the cache never revises, so nothing asks for a restart
            Err(Interrupt::Restart) => break (Outcome::Aborted(AbortReason::Inconsistent), None),
            Err(Interrupt::Abort(reason)) => break (Outcome::Aborted(reason), None),
        }
    };
    MatRun {
        model: outcome.1,
        outcome: outcome.0,
        hypotheses,
        distinct_hypotheses: seen.len(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::LearnerKind;
    use crate::sul::{NoiseSpec, SulStats, SystemHandle};
    use crate::word::Alphabet;

    fn obs(i: &str, o: &str) -> Observation {
        let a = Alphabet::from_chars("abxyz").unwrap();
        Observation::new(a.encode_chars(i).unwrap(), a.encode_chars(o).unwrap()).unwrap()
    }

    #[test]
    fn cache_is_write_once() {
        let mut c = MatCache::new();
        assert!(c.is_empty());
        c.insert(&obs("aa", "xy")).unwrap();
        c.insert(&obs("a", "x")).unwrap();
        c.insert(&obs("aab", "xyz")).unwrap();
        assert_eq!(
            c.lookup(obs("aa", "xy").input()),
            Some(obs("aa", "xy").output().to_vec())
        );
        assert_eq!(c.insert(&obs("aa", "xz")), Err(CacheConflict { position: 2 }));
        assert_eq!(
            c.lookup(obs("aa", "xy").input()),
            Some(obs("aa", "xy").output().to_vec())
        );
        assert_eq!(
            c.lookup(obs("aab", "xyz").input()),
            Some(obs("aab", "xyz").output().to_vec())
        );
        assert_eq!(c.lookup(obs("b", "x").input()), None);
        assert_eq!(c.len(), 4);
    }

    /// Answers the n-th call with a constant output word.
    struct Scripted {
        answers: std::collections::VecDeque<Sym>,
        stats: SulStats,
    }

    impl System for Scripted {
        fn execute(&mut self, input: &[Sym]) -> Result<Observation, SulError> {
            self.stats.tests += 1;
            self.stats.symbols += input.len() as u64;
            let o = self.answers.pop_front().unwrap();
            Ok(Observation::new(input.to_vec(), vec![o; input.len()]).unwrap())
        }

        fn stats(&self) -> SulStats {
            self.stats
        }
    }

    #[test]
    fn eq_phase_contradiction_is_a_cache_conflict() {
        let mut cache = MatCache::new();
        let xy = obs("aa", "xx");
        let mut system = Scripted {
            answers: [2, 3].into(),
            stats: SulStats::default(),
        };
        let policy = RepeatsPolicy::single();
        assert_eq!(
            mat_mq(&mut cache, &mut system, xy.input(), &policy).unwrap(),
            xy.output()
        );
        assert_eq!(
            mat_mq(&mut cache, &mut system, xy.input(), &policy).unwrap(),
            xy.output()
        );
        assert_eq!(system.stats.tests, 1);
        let fresh = execute_repeated(&mut system, xy.input(), &policy).unwrap();
        assert_eq!(cache.insert(&fresh), Err(CacheConflict { position: 1 }));
    }

    #[test]
    fn repeats_are_counted() {
        let t = crate::mealy::tests::toggle();
        let mut system = SystemHandle::new(t, NoiseSpec::none());
        let mut cache = MatCache::new();
        mat_mq(
            &mut cache,
            &mut system,
            &[0, 0, 0],
            &RepeatsPolicy::pair(5, 10).unwrap(),
        )
        .unwrap();
        assert_eq!(system.stats().symbols, 15);
    }

    fn config(seed: u64) -> MatConfig {
        MatConfig {
            policy: RepeatsPolicy::single(),
            sampler: SamplerParams::default(),
            survive_budget: 500,
            sampler_seed: seed,
        }
    }

    #[test]
    fn noise_free_runs_succeed() {
        for seed in 0..20 {
            let target = MealyMachine::random(
                1 + seed as usize % 6,
                Alphabet::from_chars("abc").unwrap(),
                Alphabet::from_chars("xy").unwrap(),
                seed,
            )
            .unwrap();
            for kind in LearnerKind::ALL {
                let mut learner = kind.build(target.inputs().clone(), target.outputs().clone());
                let mut teacher = MatTeacher::new(SystemHandle::new(target.clone(), NoiseSpec::none()), config(seed));
                let run = run_mat(learner.as_mut(), &mut teacher);
                assert_eq!(run.outcome, Outcome::Elected);
                assert_eq!(
                    run.model.unwrap().equivalent(&target).unwrap(),
                    None,
                    "seed {seed} {kind}"
                );
            }
        }
    }

    #[test]
    fn conflict_at_first_test_fails_early() {
        let target = crate::mealy::tests::toggle();
        let mut system = Scripted {
            answers: [0, 0, 1].into(),
            stats: SulStats::default(),
        };
        // "a" and "aa" answer x..., then the first equivalence test (which
        // starts with the cached "a") answers y...
        let mut teacher = MatTeacher::new(&mut system, config(0));
        let mut learner = LearnerKind::LstarRs.build(target.inputs().clone(), target.outputs().clone());
        let run = run_mat(learner.as_mut(), &mut teacher);
        assert_eq!(run.outcome, Outcome::Aborted(AbortReason::CacheConflict));
        assert!(run.model.is_none());
        assert_eq!(teacher.stats().system_tests, 3);
        assert_eq!(teacher.stats().eq_tests, 1);
    }
}
