//! Classic MAT learners and the oracle contract they are written against.
//!
//! Learners only ever see a [`LearnerOracle`]. A query may be interrupted
//! (the teacher asks for a restart, or the run is aborted); learners
//! propagate the interruption with `?` and the run loop decides what to do.

mod kv;
mod lstar;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::mealy::MealyMachine;
use crate::word::{Alphabet, Observation, Sym, Word};

pub use kv::KearnsVazirani;
pub use lstar::LStarRs;

/// Why a query did not produce an answer.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Interrupt {
    /// The teacher revised an earlier answer; the learner must be rebuilt.
    #[error("restart requested")]
    Restart,
    /// The run cannot continue (budget exhausted, cache conflict, ...).
    #[error("run aborted: {0}")]
    Abort(AbortReason),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbortReason {
    Timeout,
    CacheConflict,
    Inconsistent,
    SystemFailure,
}

impl AbortReason {
    pub fn as_str(self) -> &'static str {
        match self {
            AbortReason::Timeout => "timeout",
            AbortReason::CacheConflict => "cache_conflict",
            AbortReason::Inconsistent => "inconsistent",
            AbortReason::SystemFailure => "system_failure",
        }
    }
}

impl fmt::Display for AbortReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The teacher as seen by a learner.
pub trait LearnerOracle {
    /// Output word for `input`.
    fn mq(&mut self, input: &[Sym]) -> Result<Word, Interrupt>;

    /// `None` when the hypothesis is accepted, otherwise a counterexample
    /// `(i, o)` with `h(i) != o`.
    fn eq(&mut self, hypothesis: &MealyMachine) -> Result<Option<Observation>, Interrupt>;
}

/// A restartable MAT learner.
pub trait Learner: Send {
    /// Completes the internal structure and returns a hypothesis.
    fn hypothesis(&mut self, oracle: &mut dyn LearnerOracle) -> Result<MealyMachine, Interrupt>;

    /// Refines the structure with a counterexample to the last hypothesis.
    fn refine(&mut self, counterexample: &Observation, oracle: &mut dyn LearnerOracle) -> Result<(), Interrupt>;

    /// Back to the freshly-started state.
    fn restart(&mut self);

    fn name(&self) -> &'static str;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    LstarRs,
    Kv,
}

impl LearnerKind {
    pub const ALL: [LearnerKind; 2] = [LearnerKind::LstarRs, LearnerKind::Kv];

    pub fn as_str(self) -> &'static str {
        match self {
            LearnerKind::LstarRs => "lstar_rs",
            LearnerKind::Kv => "kv",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }

    pub fn build(self, inputs: Alphabet, outputs: Alphabet) -> Box<dyn Learner> {
        match self {
            LearnerKind::LstarRs => Box::new(LStarRs::new(inputs, outputs)),
            LearnerKind::Kv => Box::new(KearnsVazirani::new(inputs, outputs)),
        }
    }
}

impl fmt::Display for LearnerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Last `len` symbols of the answer to `prefix · suffix`.
pub(crate) fn suffix_output(oracle: &mut dyn LearnerOracle, prefix: &[Sym], suffix: &[Sym]) -> Result<Word, Interrupt> {
    let mut w = Vec::with_capacity(prefix.len() + suffix.len());
    w.extend_from_slice(prefix);
    w.extend_from_slice(suffix);
    let out = oracle.mq(&w)?;
    Ok(out[prefix.len()..].to_vec())
}

/// Cuts a counterexample to its shortest prefix on which `h` disagrees.
/// `None` if `h` actually agrees with it.
pub(crate) fn trim_counterexample(h: &MealyMachine, cex: &Observation) -> Option<Observation> {
    let mut q = h.initial();
    for (k, (&a, &o)) in cex.input().iter().zip(cex.output()).enumerate() {
        let (next, expect) = h.step(q, a);
        if expect != o {
            return Some(cex.prefix(k + 1));
        }
        q = next;
    }
    None
}

/// Rivest–Schapire style decomposition of a counterexample `w` of length n.
///
/// `agrees(i)` checks whether the answer to `access(h(w[..i])) · w[i..]`
/// matches `h` on the last `n - i` symbols. It is false at 0 (`w` is a
/// counterexample) and true at n. The returned index `i` satisfies
/// `!agrees(i) && agrees(i + 1)`, so `access(h(w[..i])) · w[i]` and
/// `access(h(w[..=i]))` are separated by `w[i + 1..]`.
pub(crate) struct Decomposition<'a> {
    pub h: &'a MealyMachine,
    pub access: &'a [Word],
    pub word: &'a [Sym],
}

impl Decomposition<'_> {
    pub fn agrees(&self, oracle: &mut dyn LearnerOracle, i: usize) -> Result<bool, Interrupt> {
        let q = self.h.state_after(&self.word[..i]);
        let suffix = &self.word[i..];
        let answer = suffix_output(oracle, &self.access[q], suffix)?;
        Ok(answer == self.h.run_from(q, suffix))
    }

    /// Binary search for a breakpoint.
    pub fn binary(&self, oracle: &mut dyn LearnerOracle) -> Result<usize, Interrupt> {
        let (mut lo, mut hi) = (0, self.word.len());
        if self.agrees(oracle, 0)? {
            return Err(Interrupt::Abort(AbortReason::Inconsistent));
        }
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.agrees(oracle, mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(lo)
    }

    /// Scans from the end, returning the largest breakpoint (shortest
    /// separating suffix).
    pub fn last(&self, oracle: &mut dyn LearnerOracle) -> Result<usize, Interrupt> {
        if self.agrees(oracle, 0)? {
            return Err(Interrupt::Abort(AbortReason::Inconsistent));
        }
        for i in (0..self.word.len()).rev() {
            if !self.agrees(oracle, i)? {
                return Ok(i);
            }
        }
        unreachable!("agrees(0) is false")
    }
}
