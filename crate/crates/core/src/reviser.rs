//! The Reviser: owner of the observation tree and the only component that
//! talks to the system under learning.
//!
//! Every system response goes through [`Reviser::apply`], which integrates
//! it in the tree and turns a conflicting update into a [`Answer::Restart`].
//! Membership queries are answered from the tree when possible
//! ([`Reviser::read`]); equivalence queries are first checked against the
//! tree and only then tested on the system ([`Reviser::eq`]).

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::SulError;
use crate::learner::trim_counterexample;
use crate::mealy::MealyMachine;
use crate::sampler::{SamplerParams, TestSampler};
use crate::sul::{execute_repeated, RepeatsPolicy, System};
use crate::tree::{ObservationTree, UpdateStrategy};
use crate::word::{Alphabet, Observation, Sym, Word};

/// Answer to a membership query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Answer {
    Output(Word),
    Restart,
}

/// Answer to an equivalence query.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum EqAnswer {
    Counterexample(Observation),
    Restart,
    /// The hypothesis agreed with the system on `survive_budget`
    /// consecutive sampled tests.
    Survived,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReviserConfig {
    pub policy: RepeatsPolicy,
    pub sampler: SamplerParams,
    pub survive_budget: u32,
    pub sampler_seed: u64,
}

impl Default for ReviserConfig {
    fn default() -> Self {
        Self {
            policy: RepeatsPolicy::single(),
            sampler: SamplerParams::default(),
            survive_budget: 2000,
            sampler_seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ReviserStats {
    /// System calls (one per voted query).
    pub system_tests: u64,
    pub mq_tests: u64,
    pub eq_tests: u64,
    /// Raw symbols spent in each phase, repeats included.
    pub mq_symbols: u64,
    pub eq_symbols: u64,
    /// Observations integrated through `apply`.
    pub applied: u64,
    pub conflicts: u64,
    /// Membership queries answered from the tree.
    pub cache_hits: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    MqTest,
    EqTest,
    Restart,
    Hypothesis,
}

/// One line of the event log.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Event {
    pub kind: EventKind,
    /// Number of system tests issued so far.
    pub test_index: u64,
    pub word_len: usize,
    pub symbols: u64,
}

/// Optional in-memory event recorder, written as JSON lines.
#[derive(Debug, Clone, Default)]
pub struct EventLog {
    events: Option<Vec<Event>>,
}

impl EventLog {
    pub fn enabled() -> Self {
        Self {
            events: Some(Vec::new()),
        }
    }

    pub fn disabled() -> Self {
        Self { events: None }
    }

    pub fn push(&mut self, event: Event) {
        if let Some(events) = &mut self.events {
            events.push(event);
        }
    }

    pub fn events(&self) -> &[Event] {
        self.events.as_deref().unwrap_or(&[])
    }

    pub fn write_jsonl<W: Write>(&self, mut out: W) -> io::Result<()> {
        for e in self.events() {
            serde_json::to_writer(&mut out, e)?;
            out.write_all(b"\n")?;
        }
        Ok(())
    }
}

#[derive(Clone, Copy)]
enum Phase {
    Membership,
    Equivalence,
}

pub struct Reviser<S: System> {
    tree: ObservationTree,
    system: S,
    config: ReviserConfig,
    rng: ChaCha8Rng,
    stats: ReviserStats,
    events: EventLog,
}

impl<S: System> Reviser<S> {
    pub fn new(
        system: S,
        inputs: Alphabet,
        outputs: Alphabet,
        strategy: UpdateStrategy,
        config: ReviserConfig,
    ) -> Self {
        Self {
            tree: ObservationTree::new(inputs, outputs, strategy),
            system,
            rng: ChaCha8Rng::seed_from_u64(config.sampler_seed),
            config,
            stats: ReviserStats::default(),
            events: EventLog::disabled(),
        }
    }

    pub fn with_events(mut self, events: EventLog) -> Self {
        self.events = events;
        self
    }

    pub fn tree(&self) -> &ObservationTree {
        &self.tree
    }

    pub fn system(&self) -> &S {
        &self.system
    }

    pub fn stats(&self) -> ReviserStats {
        self.stats
    }

    pub fn config(&self) -> &ReviserConfig {
        &self.config
    }

    pub fn events(&self) -> &EventLog {
        &self.events
    }

    pub(crate) fn events_mut(&mut self) -> &mut EventLog {
        &mut self.events
    }

    pub fn into_parts(self) -> (ObservationTree, S, EventLog) {
        (self.tree, self.system, self.events)
    }

    /// Integrates a system observation.
    pub fn apply(&mut self, obs: Observation) -> Answer {
        self.stats.applied += 1;
        if self.tree.update(&obs) {
            self.stats.conflicts += 1;
            return Answer::Restart;
        }
        Answer::Output(obs.into_parts().1)
    }

    fn system_call(&mut self, input: &[Sym], phase: Phase) -> Result<Observation, SulError> {
        let before = self.system.stats().symbols;
        let result = execute_repeated(&mut self.system, input, &self.config.policy);
        let spent = self.system.stats().symbols - before;
        let kind = match phase {
            Phase::Membership => {
                self.stats.mq_symbols += spent;
                EventKind::MqTest
            }
            Phase::Equivalence => {
                self.stats.eq_symbols += spent;
                EventKind::EqTest
            }
        };
        let obs = result?;
        self.stats.system_tests += 1;
        match phase {
            Phase::Membership => self.stats.mq_tests += 1,
            Phase::Equivalence => self.stats.eq_tests += 1,
        }
        self.events.push(Event {
            kind,
            test_index: self.stats.system_tests,
            word_len: input.len(),
            symbols: self.system.stats().symbols,
        });
        Ok(obs)
    }

    /// Longest prefix of `input` the tree answers, with its outputs.
    fn believed(&self, input: &[Sym]) -> Observation {
        let mut len = input.len();
        loop {
            if let Some(out) = self.tree.lookup(&input[..len]) {
                return Observation::new(input[..len].to_vec(), out).expect("lookup keeps length");
            }
            len -= 1;
        }
    }

    /// Answers from the tree, or runs one system test and applies it.
    pub fn read(&mut self, input: &[Sym]) -> Result<Answer, SulError> {
        if let Some(out) = self.tree.lookup(input) {
            self.stats.cache_hits += 1;
            return Ok(Answer::Output(out));
        }
        let obs = self.system_call(input, Phase::Membership)?;
        match self.apply(obs.clone()) {
            Answer::Restart => Ok(Answer::Restart),
            // under `MostFrequent` a fresh observation may be outvoted at a
            // divergence point; the tree's answer is what the learner gets
            Answer::Output(out) => Ok(Answer::Output(self.tree.lookup(input).unwrap_or(out))),
        }
    }

    /// First stored observation `h` disagrees with, trimmed to the shortest
    /// disagreeing prefix. No system contact.
    pub fn check(&self, h: &MealyMachine) -> Option<Observation> {
        self.tree.first_disagreement(h)
    }

    /// Samples tests from a Wp-style generator for `h` until a
    /// counterexample, a conflict, or `survive_budget` agreeing tests.
    pub fn test(&mut self, h: &MealyMachine) -> Result<EqAnswer, SulError> {
        let sampler = TestSampler::new(h, self.config.sampler).expect("canonical hypotheses are connected");
        for _ in 0..self.config.survive_budget {
            let word = sampler.sample(&mut self.rng);
            let obs = self.system_call(&word, Phase::Equivalence)?;
            if self.apply(obs) == Answer::Restart {
                return Ok(EqAnswer::Restart);
            }
            let believed = self.believed(&word);
            if let Some(cex) = trim_counterexample(h, &believed) {
                return Ok(EqAnswer::Counterexample(cex));
            }
        }
        Ok(EqAnswer::Survived)
    }

    pub fn mq(&mut self, input: &[Sym]) -> Result<Answer, SulError> {
        self.read(input)
    }

    /// Tree check first; system tests only if the tree cannot refute `h`.
    pub fn eq(&mut self, h: &MealyMachine) -> Result<EqAnswer, SulError> {
        match self.check(h) {
            Some(cex) => Ok(EqAnswer::Counterexample(cex)),
            None => self.test(h),
        }
    }
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::sul::{NoiseSpec, SulStats, SystemHandle};

    pub(crate) fn ab() -> Alphabet {
        Alphabet::from_chars("ab").unwrap()
    }

    pub(crate) fn obs(i: &str, o: &str) -> Observation {
        Observation::new(ab().encode_chars(i).unwrap(), ab().encode_chars(o).unwrap()).unwrap()
    }

    /// Answers from a queue of scripted outputs, then from a fallback.
    pub(crate) struct Scripted {
        pub script: std::collections::VecDeque<Word>,
        pub fallback: MealyMachine,
        pub stats: SulStats,
        pub log: Vec<Word>,
    }

    impl System for Scripted {
        fn execute(&mut self, input: &[Sym]) -> Result<Observation, SulError> {
            self.stats.tests += 1;
            self.stats.symbols += input.len() as u64;
            self.log.push(input.to_vec());
            let out = match self.script.pop_front() {
                Some(o) => o,
                None => self.fallback.run_word(input).unwrap(),
            };
            Ok(Observation::new(input.to_vec(), out).unwrap())
        }

        fn stats(&self) -> SulStats {
            self.stats
        }
    }

    /// A 2-state machine over {a, b} echoing its input, except in state 1
    /// where `a` answers `b`.
    pub(crate) fn echo() -> MealyMachine {
        MealyMachine::new(ab(), ab(), 0, vec![vec![(1, 0), (0, 1)], vec![(0, 1), (1, 1)]]).unwrap()
    }

    fn three_words(system: impl System) -> Reviser<impl System> {
        let mut r = Reviser::new(system, ab(), ab(), UpdateStrategy::MostRecent, ReviserConfig::default());
        for (i, o) in [("aaa", "aab"), ("aab", "aaa"), ("ab", "ab")] {
            assert_eq!(r.apply(obs(i, o)), Answer::Output(obs(i, o).output().to_vec()));
        }
        r
    }

    fn exact(m: MealyMachine) -> SystemHandle {
        SystemHandle::new(m, NoiseSpec::none())
    }

    #[test]
    fn apply_examples() {
        let mut r = Reviser::new(
            exact(echo()),
            ab(),
            ab(),
            UpdateStrategy::MostRecent,
            ReviserConfig::default(),
        );
        assert_eq!(r.apply(obs("ab", "ab")), Answer::Output(vec![0, 1]));
        assert_eq!(r.apply(obs("ab", "ab")), Answer::Output(vec![0, 1]));
        let mut r = three_words(exact(echo()));
        assert_eq!(r.apply(obs("aaa", "abb")), Answer::Restart);
        assert_eq!(r.stats().conflicts, 1);
    }

    #[test]
    fn read_uses_cache() {
        let mut r = three_words(exact(echo()));
        let aab = ab().encode_chars("aab").unwrap();
        assert_eq!(r.read(&aab).unwrap(), Answer::Output(ab().encode_chars("aaa").unwrap()));
        assert_eq!(r.system().stats().tests, 0);
        assert_eq!(r.stats().cache_hits, 1);
    }

    #[test]
    fn read_passes_through_once() {
        let m = echo();
        let mut r = Reviser::new(
            exact(m.clone()),
            ab(),
            ab(),
            UpdateStrategy::MostRecent,
            ReviserConfig::default(),
        );
        let w = ab().encode_chars("abaab").unwrap();
        assert_eq!(r.read(&w).unwrap(), Answer::Output(m.run_word(&w).unwrap()));
        assert_eq!(r.system().stats().tests, 1);
        assert_eq!(r.read(&w).unwrap(), Answer::Output(m.run_word(&w).unwrap()));
        assert_eq!(r.system().stats().tests, 1);
    }

    #[test]
    fn check_examples() {
        let m = echo();
        let mut r = Reviser::new(
            exact(m.clone()),
            ab(),
            ab(),
            UpdateStrategy::MostRecent,
            ReviserConfig::default(),
        );
        assert_eq!(r.check(&m), None);
        for w in ["aab", "abba", "bbab"] {
            r.read(&ab().encode_chars(w).unwrap()).unwrap();
        }
        assert_eq!(r.check(&m), None);

        // right tree of the running example
        let mut r = three_words(exact(echo()));
        r.apply(obs("aaa", "abb"));
        // h answers "aab" on "aaa": single state echo with a/a, b/b except
        // the second a gives a; craft via a 3-state chain
        let h = MealyMachine::new(
            ab(),
            ab(),
            0,
            vec![vec![(1, 0), (0, 1)], vec![(2, 0), (0, 1)], vec![(2, 1), (2, 1)]],
        )
        .unwrap();
        assert_eq!(h.outputs().display(&h.run_word(&[0, 0, 0]).unwrap()), "aab");
        assert_eq!(r.check(&h), Some(obs("aa", "ab")));
        assert_eq!(r.system().stats().tests, 0);
    }

    #[test]
    fn check_on_empty_tree_is_vacuous() {
        let r = Reviser::new(
            exact(echo()),
            ab(),
            ab(),
            UpdateStrategy::MostRecent,
            ReviserConfig::default(),
        );
        assert_eq!(r.check(&echo()), None);
    }

    #[test]
    fn test_survives_exact_hypothesis() {
        let m = echo();
        let config = ReviserConfig {
            survive_budget: 50,
            ..Default::default()
        };
        let mut r = Reviser::new(exact(m.clone()), ab(), ab(), UpdateStrategy::MostRecent, config);
        assert_eq!(r.test(&m).unwrap(), EqAnswer::Survived);
        assert_eq!(r.stats().eq_tests, 50);
        assert_eq!(r.eq(&m).unwrap(), EqAnswer::Survived);
    }

    #[test]
    fn test_finds_counterexample_for_wrong_hypothesis() {
        // 3-state target and a hypothesis differing in one deep transition
        let target = MealyMachine::new(
            ab(),
            ab(),
            0,
            vec![vec![(1, 0), (0, 0)], vec![(2, 0), (0, 0)], vec![(0, 1), (2, 0)]],
        )
        .unwrap();
        let wrong = target.with_transition(2, 1, 2, 1).unwrap();
        let config = ReviserConfig {
            survive_budget: 5000,
            sampler_seed: 3,
            ..Default::default()
        };
        let mut r = Reviser::new(exact(target.clone()), ab(), ab(), UpdateStrategy::MostRecent, config);
        match r.eq(&wrong).unwrap() {
            EqAnswer::Counterexample(cex) => {
                assert_ne!(wrong.run_word(cex.input()).unwrap(), cex.output());
                assert_eq!(target.run_word(cex.input()).unwrap(), cex.output());
                assert_eq!(r.tree().lookup(cex.input()).as_deref(), Some(cex.output()));
            }
            other => panic!("expected counterexample, got {other:?}"),
        }
    }

    #[test]
    fn eq_short_circuits_on_stored_knowledge() {
        let m = echo();
        let mut r = Reviser::new(
            exact(m.clone()),
            ab(),
            ab(),
            UpdateStrategy::MostRecent,
            ReviserConfig::default(),
        );
        r.read(&[0, 0, 0]).unwrap();
        let tests = r.system().stats().tests;
        let wrong = m.with_transition(1, 0, 0, 0).unwrap();
        assert!(matches!(r.eq(&wrong).unwrap(), EqAnswer::Counterexample(_)));
        assert_eq!(r.system().stats().tests, tests);
    }

    #[test]
    fn contradicting_system_answer_restarts() {
        // tree holds ("aaa","aab"); the system contradicts it on the first
        // sampled word, which is forced to start with "a"
        let h = MealyMachine::new(
            ab(),
            ab(),
            0,
            vec![vec![(1, 0), (0, 1)], vec![(2, 0), (0, 1)], vec![(2, 1), (2, 0)]],
        )
        .unwrap();
        let scripted = Scripted {
            script: Default::default(),
            fallback: h.clone(),
            stats: SulStats::default(),
            log: Vec::new(),
        };
        let mut r = Reviser::new(
            scripted,
            ab(),
            ab(),
            UpdateStrategy::MostRecent,
            ReviserConfig::default(),
        );
        assert_eq!(r.apply(obs("aaa", "aab")), Answer::Output(vec![0, 0, 1]));
        assert_eq!(r.apply(obs("b", "b")), Answer::Output(vec![1]));
        // the cached word is never re-read
        let aaa = ab().encode_chars("aaa").unwrap();
        assert_eq!(r.read(&aaa).unwrap(), Answer::Output(vec![0, 0, 1]));
        assert_eq!(r.system().stats().tests, 0);
        // a sampled test that disagrees at position one conflicts with both
        // stored observations, whatever word is drawn
        let liar = Scripted {
            script: Default::default(),
            fallback: MealyMachine::new(ab(), ab(), 0, vec![vec![(0, 1), (0, 0)]]).unwrap(),
            stats: SulStats::default(),
            log: Vec::new(),
        };
        let mut r = Reviser::new(liar, ab(), ab(), UpdateStrategy::MostRecent, ReviserConfig::default());
        r.apply(obs("aaa", "aab"));
        r.apply(obs("b", "b"));
        assert_eq!(r.test(&h).unwrap(), EqAnswer::Restart);
        assert_eq!(r.stats().eq_tests, 1);
    }

    #[test]
    fn events_are_recorded() {
        let m = echo();
        let config = ReviserConfig {
            survive_budget: 3,
            ..Default::default()
        };
        let mut r = Reviser::new(exact(m.clone()), ab(), ab(), UpdateStrategy::MostRecent, config)
            .with_events(EventLog::enabled());
        r.read(&[0, 1]).unwrap();
        r.test(&m).unwrap();
        let kinds: Vec<EventKind> = r.events().events().iter().map(|e| e.kind).collect();
        assert_eq!(
            kinds,
            vec![
                EventKind::MqTest,
                EventKind::EqTest,
                EventKind::EqTest,
                EventKind::EqTest
            ]
        );
        let mut buf = Vec::new();
        r.events().write_jsonl(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 4);
        assert!(text.starts_with("{\"kind\":\"mq_test\",\"test_index\":1,\"word_len\":2,\"symbols\":2}"));
    }
}
