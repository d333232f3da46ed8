//! The conflict-aware run loop: a classic learner driven through the
//! [`Reviser`], restarted from scratch whenever the Reviser reports a
//! conflict, followed by hypothesis election.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::dot::write_dot;
use crate::error::SulError;
use crate::learner::{AbortReason, Interrupt, Learner, LearnerOracle};
use crate::mealy::MealyMachine;
use crate::reviser::{Answer, EqAnswer, Event, EventKind, Reviser};
use crate::sul::System;
use crate::word::{Observation, Sym, Word};

/// How the final model is picked from the hypotheses of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    MostRecent,
    MostFrequent,
}

#[derive(Debug, Clone)]
struct LogEntry {
    model: MealyMachine,
    count: u64,
    last: u64,
}

/// Hypotheses seen during a run, grouped up to language equivalence.
#[derive(Debug, Clone, Default)]
pub struct HypothesisLog {
    entries: Vec<LogEntry>,
    by_fingerprint: HashMap<String, usize>,
    total: u64,
    last_entry: Option<usize>,
}

impl HypothesisLog {
    pub fn new() -> Self {
        Self::default()
    }

    /// Serialized canonical form; equal iff the machines are equivalent.
    pub fn fingerprint(h: &MealyMachine) -> String {
        write_dot(&h.minimize_canonical())
    }

    pub fn record(&mut self, h: &MealyMachine) {
        let canonical = h.minimize_canonical();
        let fp = write_dot(&canonical);
        self.total += 1;
        let ix = *self.by_fingerprint.entry(fp).or_insert_with(|| {
            self.entries.push(LogEntry {
                model: canonical,
                count: 0,
                last: 0,
            });
            self.entries.len() - 1
        });
        let e = &mut self.entries[ix];
        e.count += 1;
        e.last = self.total;
        self.last_entry = Some(ix);
    }

    /// Number of hypotheses recorded.
    pub fn total(&self) -> u64 {
        self.total
    }

    /// Number of distinct (up to equivalence) hypotheses.
    pub fn distinct(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// `(count, last index)` of the hypothesis equivalent to `h`.
    pub fn stats_of(&self, h: &MealyMachine) -> Option<(u64, u64)> {
        let ix = *self.by_fingerprint.get(&Self::fingerprint(h))?;
        Some((self.entries[ix].count, self.entries[ix].last))
    }

    /// The elected hypothesis, in canonical form. `None` on an empty log.
    pub fn elect(&self, selection: Selection) -> Option<&MealyMachine> {
        let ix = match selection {
            Selection::MostRecent => self.last_entry?,
            Selection::MostFrequent => {
                (0..self.entries.len()).max_by_key(|&i| (self.entries[i].count, self.entries[i].last))?
            }
        };
        Some(&self.entries[ix].model)
    }
}

/// Free-function form of [`HypothesisLog::elect`].
pub fn elect(log: &HypothesisLog, selection: Selection) -> Option<&MealyMachine> {
    log.elect(selection)
}

/// Why a run stopped without electing a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Elected,
    Aborted(AbortReason),
}

impl Outcome {
    pub fn as_str(self) -> &'static str {
        match self {
            Outcome::Elected => "elected",
            Outcome::Aborted(r) => r.as_str(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct CealRun {
    pub elected: Option<MealyMachine>,
    pub outcome: Outcome,
    pub log: HypothesisLog,
    /// Restart answers delivered to the learner.
    pub restarts: u64,
    /// Hypotheses the learner produced, including those the tree refuted.
    pub hypotheses: u64,
}

fn abort_reason(e: &SulError) -> AbortReason {
    match e {
        SulError::BudgetExhausted { .. } => AbortReason::Timeout,
        _ => AbortReason::SystemFailure,
    }
}

/// The Reviser seen as a teacher.
struct Teacher<'a, S: System> {
    reviser: &'a mut Reviser<S>,
    log: &'a mut HypothesisLog,
    #[cfg(test)]
    answers: Option<&'a mut Vec<(Word, Word, Option<Word>)>>,
}

impl<S: System> LearnerOracle for Teacher<'_, S> {
    fn mq(&mut self, input: &[Sym]) -> Result<Word, Interrupt> {
        match self.reviser.mq(input) {
            Ok(Answer::Output(out)) => {
                #[cfg(test)]
                if let Some(answers) = &mut self.answers {
                    answers.push((input.to_vec(), out.clone(), self.reviser.tree().lookup(input)));
                }
                Ok(out)
            }
            Ok(Answer::Restart) => Err(Interrupt::Restart),
            Err(e) => Err(Interrupt::Abort(abort_reason(&e))),
        }
    }

    fn eq(&mut self, h: &MealyMachine) -> Result<Option<Observation>, Interrupt> {
        if let Some(cex) = self.reviser.check(h) {
            return Ok(Some(cex));
        }
        // only hypotheses consistent with everything observed so far are
        // candidates for election
        self.log.record(h);
        match self.reviser.test(h) {
            Ok(EqAnswer::Survived) => Ok(None),
            Ok(EqAnswer::Counterexample(cex)) => Ok(Some(cex)),
            Ok(EqAnswer::Restart) => Err(Interrupt::Restart),
            Err(e) => Err(Interrupt::Abort(abort_reason(&e))),
        }
    }
}

/// Drives `learner` through `reviser` until a hypothesis survives testing,
/// then elects the final model from the logged hypotheses.
///
/// A Restart rebuilds the learner from scratch; the tree, and with it every
/// answer already paid for, is kept.
pub fn run_ceal<S: System>(learner: &mut dyn Learner, reviser: &mut Reviser<S>, selection: Selection) -> CealRun {
    run_inner(learner, reviser, selection, None)
}

fn run_inner<S: System>(
    learner: &mut dyn Learner,
    reviser: &mut Reviser<S>,
    selection: Selection,
    #[allow(unused_variables)] answers: Option<&mut Vec<(Word, Word, Option<Word>)>>,
) -> CealRun {
    let mut log = HypothesisLog::new();
    let mut restarts = 0;
    let mut hypotheses = 0;
    let mut teacher = Teacher {
        reviser,
        log: &mut log,
        #[cfg(test)]
        answers,
    };
    let outcome = loop {
        let step = learner.hypothesis(&mut teacher).and_then(|h| {
            hypotheses += 1;
            let (tests, symbols) = (
                teacher.reviser.stats().system_tests,
                teacher.reviser.system().stats().symbols,
            );
            teacher.reviser.events_mut().push(Event {
                kind: EventKind::Hypothesis,
                test_index: tests,
                word_len: 0,
                symbols,
            });
            match teacher.eq(&h)? {
                None => Ok(true),
                Some(cex) => learner.refine(&cex, &mut teacher).map(|()| false),
            }
        });
        match step {
            Ok(true) => break Outcome::Elected,
            Ok(false) => {}
            Err(Interrupt::Restart) => {
                restarts += 1;
                let (tests, symbols) = (
                    teacher.reviser.stats().system_tests,
                    teacher.reviser.system().stats().symbols,
                );
                teacher.reviser.events_mut().push(Event {
                    kind: EventKind::Restart,
                    test_index: tests,
                    word_len: 0,
                    symbols,
                });
                learner.restart();
            }
            Err(Interrupt::Abort(reason)) => break Outcome::Aborted(reason),
        }
    };
    let elected = match outcome {
        Outcome::Elected => log.elect(selection).cloned(),
        Outcome::Aborted(_) => None,
    };
    CealRun {
        elected,
        outcome,
        log,
        restarts,
        hypotheses,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learner::LearnerKind;
    use crate::mealy::tests::toggle;
    use crate::reviser::ReviserConfig;
    use crate::sul::{NoiseSpec, RepeatsPolicy, SystemHandle};
    use crate::tree::UpdateStrategy;
    use crate::word::Alphabet;

    fn machine(seed: u64) -> MealyMachine {
        MealyMachine::random(
            3,
            Alphabet::from_chars("ab").unwrap(),
            Alphabet::from_chars("xy").unwrap(),
            seed,
        )
        .unwrap()
    }

    #[test]
    fn election_rules() {
        let (a, b) = (machine(1), machine(2));
        assert!(a.equivalent(&b).unwrap().is_some());
        let mut log = HypothesisLog::new();
        assert!(log.elect(Selection::MostRecent).is_none());
        for _ in 0..3 {
            log.record(&a);
        }
        assert_eq!(
            log.elect(Selection::MostFrequent).unwrap().equivalent(&a).unwrap(),
            None
        );

        // {A:5, B:1} with B last
        let mut log = HypothesisLog::new();
        for _ in 0..5 {
            log.record(&a);
        }
        log.record(&b);
        assert_eq!(
            log.elect(Selection::MostFrequent).unwrap().equivalent(&a).unwrap(),
            None
        );
        assert_eq!(log.elect(Selection::MostRecent).unwrap().equivalent(&b).unwrap(), None);

        // {A:2 last@5, B:2 last@7}
        let mut log = HypothesisLog::new();
        for h in [&a, &b, &b, &machine(3), &a, &machine(3), &b] {
            log.record(h);
        }
        assert_eq!(log.stats_of(&a), Some((2, 5)));
        assert_eq!(log.stats_of(&b), Some((3, 7)));

        let mut log = HypothesisLog::new();
        for h in [&a, &b, &a, &machine(3), &b] {
            log.record(h);
        }
        assert_eq!(log.stats_of(&a), Some((2, 3)));
        assert_eq!(log.stats_of(&b), Some((2, 5)));
        assert_eq!(
            log.elect(Selection::MostFrequent).unwrap().equivalent(&b).unwrap(),
            None
        );

        // {A:5 last@9, B:6 last@4}
        let mut log = HypothesisLog::new();
        for _ in 0..6 {
            log.record(&b);
        }
        for _ in 0..5 {
            log.record(&a);
        }
        assert_eq!(
            log.elect(Selection::MostFrequent).unwrap().equivalent(&b).unwrap(),
            None
        );
        assert_eq!(log.total(), 11);
        assert_eq!(log.distinct(), 2);
    }

    #[test]
    fn fingerprint_is_representation_independent() {
        let t = toggle();
        let renamed = MealyMachine::new(
            t.inputs().clone(),
            t.outputs().clone(),
            1,
            vec![vec![(1, 1)], vec![(0, 0)]],
        )
        .unwrap();
        assert_eq!(HypothesisLog::fingerprint(&t), HypothesisLog::fingerprint(&renamed));
    }

    fn reviser(target: MealyMachine, strategy: UpdateStrategy, seed: u64) -> Reviser<SystemHandle> {
        let (i, o) = (target.inputs().clone(), target.outputs().clone());
        let config = ReviserConfig {
            policy: RepeatsPolicy::single(),
            sampler_seed: seed,
            survive_budget: 500,
            ..Default::default()
        };
        Reviser::new(SystemHandle::new(target, NoiseSpec::none()), i, o, strategy, config)
    }

    #[test]
    fn noise_free_runs_elect_the_target_without_restarts() {
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
                let mut r = reviser(target.clone(), UpdateStrategy::MostRecent, seed);
                let mut answers = Vec::new();
                let run = run_inner(learner.as_mut(), &mut r, Selection::MostFrequent, Some(&mut answers));
                assert_eq!(run.outcome, Outcome::Elected);
                assert_eq!(run.restarts, 0);
                assert_eq!(
                    run.elected.unwrap().equivalent(&target).unwrap(),
                    None,
                    "seed {seed} {kind}"
                );
                let stats = r.stats();
                assert_eq!(stats.conflicts, 0);
                // every system response was integrated exactly once
                assert_eq!(stats.system_tests, stats.applied);
                // every answer the learner saw is what the tree says
                for (w, out, lookup) in &answers {
                    assert_eq!(Some(out), lookup.as_ref(), "seed {seed}: {w:?}");
                }
            }
        }
    }

    #[test]
    fn mutation_forces_restart_and_is_recovered() {
        let inputs = Alphabet::from_chars("ab").unwrap();
        let outputs = Alphabet::from_chars("xy").unwrap();
        let target = MealyMachine::random(4, inputs.clone(), outputs.clone(), 11).unwrap();
        let q0 = target.initial();
        let (next, out) = target.step(q0, 0);
        let mutated = target.with_transition(q0, 0, next, 1 - out).unwrap();
        for seed in 0..5 {
            let system = SystemHandle::new(target.clone(), NoiseSpec::none()).with_mutation(50, mutated.clone());
            let config = ReviserConfig {
                sampler_seed: seed,
                survive_budget: 500,
                ..Default::default()
            };
            let mut r = Reviser::new(
                system,
                inputs.clone(),
                outputs.clone(),
                UpdateStrategy::MostRecent,
                config,
            );
            let mut learner = LearnerKind::LstarRs.build(inputs.clone(), outputs.clone());
            let run = run_ceal(learner.as_mut(), &mut r, Selection::MostRecent);
            assert_eq!(run.outcome, Outcome::Elected);
            assert!(run.restarts >= 1);
            assert_eq!(run.restarts, r.stats().conflicts);
            assert_eq!(run.elected.unwrap().equivalent(&mutated).unwrap(), None);
        }
    }

    #[test]
    fn budget_exhaustion_aborts() {
        let target = machine(4);
        let (i, o) = (target.inputs().clone(), target.outputs().clone());
        let system = SystemHandle::new(target, NoiseSpec::none()).with_budget(10);
        let mut r = Reviser::new(
            system,
            i.clone(),
            o.clone(),
            UpdateStrategy::MostRecent,
            ReviserConfig::default(),
        )
        .with_events(crate::reviser::EventLog::enabled());
        let mut learner = LearnerKind::Kv.build(i, o);
        let run = run_ceal(learner.as_mut(), &mut r, Selection::MostFrequent);
        assert_eq!(run.outcome, Outcome::Aborted(AbortReason::Timeout));
        assert!(run.elected.is_none());
        // the last test may start just below the budget
        let longest = r.events().events().iter().map(|e| e.word_len).max().unwrap_or(0) as u64;
        assert!(r.system().stats().symbols < 10 + longest.max(1));
    }
}
