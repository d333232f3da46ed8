//! Complete deterministic Mealy machines.

use std::collections::VecDeque;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::MealyError;
use crate::word::{Alphabet, Observation, Sym, Word};

pub type StateId = usize;

/// A complete deterministic Mealy machine with dense state ids.
///
/// Immutable once built: transition and output tables are total over
/// `states x inputs`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MealyMachine {
    inputs: Alphabet,
    outputs: Alphabet,
    initial: StateId,
    successors: Vec<u32>,
    emitted: Vec<Sym>,
}

impl MealyMachine {
    /// Builds a machine from per-state rows of `(successor, output)`, one
    /// entry per input symbol in alphabet order.
    pub fn new(
        inputs: Alphabet,
        outputs: Alphabet,
        initial: StateId,
        rows: Vec<Vec<(StateId, Sym)>>,
    ) -> Result<Self, MealyError> {
        if rows.is_empty() {
            return Err(MealyError::NoStates);
        }
        let n = rows.len();
        if initial >= n {
            return Err(MealyError::UnknownState(initial));
        }
        let k = inputs.len();
        let mut successors = Vec::with_capacity(n * k);
        let mut emitted = Vec::with_capacity(n * k);
        for (state, row) in rows.into_iter().enumerate() {
            if row.len() != k {
                return Err(MealyError::IncompleteRow {
                    state,
                    got: row.len(),
                    expected: k,
                });
            }
            for (succ, out) in row {
                if succ >= n {
                    return Err(MealyError::UnknownState(succ));
                }
                if !outputs.contains(out) {
                    return Err(MealyError::OutputOutOfRange(out as usize));
                }
                successors.push(succ as u32);
                emitted.push(out);
            }
        }
        Ok(Self {
            inputs,
            outputs,
            initial,
            successors,
            emitted,
        })
    }

    pub fn inputs(&self) -> &Alphabet {
        &self.inputs
    }

    pub fn outputs(&self) -> &Alphabet {
        &self.outputs
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn num_states(&self) -> usize {
        self.successors.len() / self.inputs.len()
    }

    #[inline]
    pub fn next(&self, state: StateId, input: Sym) -> StateId {
        self.successors[state * self.inputs.len() + input as usize] as StateId
    }

    #[inline]
    pub fn output(&self, state: StateId, input: Sym) -> Sym {
        self.emitted[state * self.inputs.len() + input as usize]
    }

    #[inline]
    pub fn step(&self, state: StateId, input: Sym) -> (StateId, Sym) {
        let idx = state * self.inputs.len() + input as usize;
        (self.successors[idx] as StateId, self.emitted[idx])
    }

    fn check_domain(&self, input: &[Sym]) -> Result<(), MealyError> {
        match input.iter().find(|&&a| !self.inputs.contains(a)) {
            Some(&a) => Err(MealyError::InputOutOfDomain(a as usize)),
            None => Ok(()),
        }
    }

    /// Output word produced from the initial state.
    pub fn run_word(&self, input: &[Sym]) -> Result<Word, MealyError> {
        self.check_domain(input)?;
        Ok(self.run_from(self.initial, input))
    }

    /// Output word produced from `state`. Symbols must be in range.
    pub fn run_from(&self, state: StateId, input: &[Sym]) -> Word {
        let mut q = state;
        input
            .iter()
            .map(|&a| {
                let (next, out) = self.step(q, a);
                q = next;
                out
            })
            .collect()
    }

    /// State reached from the initial state. Symbols must be in range.
    pub fn state_after(&self, input: &[Sym]) -> StateId {
        input.iter().fold(self.initial, |q, &a| self.next(q, a))
    }

    /// Returns a shortest input word on which the machines disagree, paired
    /// with this machine's output, or `None` if they are equivalent.
    ///
    /// Breadth-first search over the product, visiting inputs in alphabet
    /// order, so the witness is the shortlex-least shortest one. Outputs are
    /// compared by name, so the output alphabets may differ.
    pub fn equivalent(&self, other: &MealyMachine) -> Result<Option<Observation>, MealyError> {
        if self.inputs != other.inputs {
            return Err(MealyError::AlphabetMismatch(
                self.inputs.to_string(),
                other.inputs.to_string(),
            ));
        }
        let same_outputs = self.outputs == other.outputs;
        let outputs_agree = |a: Sym, b: Sym| {
            if same_outputs {
                a == b
            } else {
                self.outputs.name(a) == other.outputs.name(b)
            }
        };
        let k = self.inputs.len();
        let n2 = other.num_states();
        let mut parent: Vec<Option<(usize, Sym)>> = vec![None; self.num_states() * n2];
        let mut seen = vec![false; self.num_states() * n2];
        let start = self.initial * n2 + other.initial;
        seen[start] = true;
        let mut queue = VecDeque::from([start]);
        while let Some(pair) = queue.pop_front() {
            let (p, q) = (pair / n2, pair % n2);
            for a in 0..k as Sym {
                let (p2, o1) = self.step(p, a);
                let (q2, o2) = other.step(q, a);
                if !outputs_agree(o1, o2) {
                    let mut input = vec![a];
                    let mut cur = pair;
                    while let Some((prev, sym)) = parent[cur] {
                        input.push(sym);
                        cur = prev;
                    }
                    input.reverse();
                    let output = self.run_from(self.initial, &input);
                    return Ok(Some(Observation::new(input, output).expect("run preserves length")));
                }
                let next = p2 * n2 + q2;
                if !seen[next] {
                    seen[next] = true;
                    parent[next] = Some((pair, a));
                    queue.push_back(next);
                }
            }
        }
        Ok(None)
    }

    /// States reachable from the initial state, in breadth-first discovery
    /// order over the sorted input alphabet.
    pub fn reachable_bfs(&self) -> Vec<StateId> {
        let mut order = vec![self.initial];
        let mut seen = vec![false; self.num_states()];
        seen[self.initial] = true;
        let mut i = 0;
        while i < order.len() {
            let q = order[i];
            for a in self.inputs.symbols() {
                let t = self.next(q, a);
                if !seen[t] {
                    seen[t] = true;
                    order.push(t);
                }
            }
            i += 1;
        }
        order
    }

    /// Partition of the reachable states into behavioural equivalence
    /// classes (Moore-style refinement). Returns the block id of every state;
    /// unreachable states get `usize::MAX`.
    pub fn equivalence_blocks(&self) -> (Vec<usize>, usize) {
        let reach = self.reachable_bfs();
        let k = self.inputs.len();
        let mut block = vec![usize::MAX; self.num_states()];
        // initial split by output rows
        let mut keys: std::collections::HashMap<Vec<usize>, usize> = Default::default();
        for &q in &reach {
            let sig: Vec<usize> = (0..k).map(|a| self.output(q, a as Sym) as usize).collect();
            let next = keys.len();
            block[q] = *keys.entry(sig).or_insert(next);
        }
        let mut count = keys.len();
        loop {
            let mut keys: std::collections::HashMap<Vec<usize>, usize> = Default::default();
            let mut refined = vec![usize::MAX; self.num_states()];
            for &q in &reach {
                let mut sig = Vec::with_capacity(k + 1);
                sig.push(block[q]);
                sig.extend((0..k).map(|a| block[self.next(q, a as Sym)]));
                let next = keys.len();
                refined[q] = *keys.entry(sig).or_insert(next);
            }
            let new_count = keys.len();
            block = refined;
            if new_count == count {
                return (block, count);
            }
            count = new_count;
        }
    }

    /// The unique minimal equivalent machine, states numbered in
    /// breadth-first discovery order from the initial state.
    pub fn minimize_canonical(&self) -> MealyMachine {
        let (block, count) = self.equivalence_blocks();
        // one representative per block
        let mut rep = vec![usize::MAX; count];
        for q in self.reachable_bfs() {
            if rep[block[q]] == usize::MAX {
                rep[block[q]] = q;
            }
        }
        let mut number = vec![usize::MAX; count];
        let mut order = vec![block[self.initial]];
        number[block[self.initial]] = 0;
        let mut i = 0;
        while i < order.len() {
            let q = rep[order[i]];
            for a in self.inputs.symbols() {
                let b = block[self.next(q, a)];
                if number[b] == usize::MAX {
                    number[b] = order.len();
                    order.push(b);
                }
            }
            i += 1;
        }
        let rows = order
            .iter()
            .map(|&b| {
                let q = rep[b];
                self.inputs
                    .symbols()
                    .map(|a| {
                        let (t, o) = self.step(q, a);
                        (number[block[t]], o)
                    })
                    .collect()
            })
            .collect();
        MealyMachine::new(self.inputs.clone(), self.outputs.clone(), 0, rows)
            .expect("quotient of a complete machine is complete")
    }

    /// A random machine reachable from its initial state and minimal.
    ///
    /// Deterministic in `seed`. Candidates are regenerated until minimal, at
    /// most 1000 times.
    pub fn random(n_states: usize, inputs: Alphabet, outputs: Alphabet, seed: u64) -> Result<MealyMachine, MealyError> {
        const MAX_ATTEMPTS: usize = 1000;
        if n_states == 0 {
            return Err(MealyError::NoStates);
        }
        let k = inputs.len();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for _ in 0..MAX_ATTEMPTS {
            let mut succ: Vec<Option<StateId>> = vec![None; n_states * k];
            // spanning tree: every new state hangs off a free slot of a reached one
            for q in 1..n_states {
                let free: Vec<usize> = (0..q * k).filter(|&slot| succ[slot].is_none()).collect();
                if free.is_empty() {
                    break;
                }
                succ[free[rng.gen_range(0..free.len())]] = Some(q);
            }
            let rows: Vec<Vec<(StateId, Sym)>> = (0..n_states)
                .map(|q| {
                    (0..k)
                        .map(|a| {
                            let t = succ[q * k + a].unwrap_or_else(|| rng.gen_range(0..n_states));
                            (t, rng.gen_range(0..outputs.len()) as Sym)
                        })
                        .collect()
                })
                .collect();
            let m = MealyMachine::new(inputs.clone(), outputs.clone(), 0, rows)?;
            if m.reachable_bfs().len() == n_states && m.equivalence_blocks().1 == n_states {
                return Ok(m);
            }
        }
        Err(MealyError::GenerationExhausted(MAX_ATTEMPTS))
    }

    /// Returns a copy with the transition `(state, input)` redirected.
    pub fn with_transition(
        &self,
        state: StateId,
        input: Sym,
        target: StateId,
        output: Sym,
    ) -> Result<MealyMachine, MealyError> {
        if state >= self.num_states() || target >= self.num_states() {
            return Err(MealyError::UnknownState(state.max(target)));
        }
        if !self.inputs.contains(input) {
            return Err(MealyError::InputOutOfDomain(input as usize));
        }
        if !self.outputs.contains(output) {
            return Err(MealyError::OutputOutOfRange(output as usize));
        }
        let mut m = self.clone();
        let idx = state * self.inputs.len() + input as usize;
        m.successors[idx] = target as u32;
        m.emitted[idx] = output;
        Ok(m)
    }
}

/// Free-function forms, mirroring the operation names used elsewhere.
pub fn run_word(m: &MealyMachine, input: &[Sym]) -> Result<Word, MealyError> {
    m.run_word(input)
}

pub fn equivalent(m1: &MealyMachine, m2: &MealyMachine) -> Result<Option<Observation>, MealyError> {
    m1.equivalent(m2)
}

pub fn minimize_canonical(m: &MealyMachine) -> MealyMachine {
    m.minimize_canonical()
}

pub fn random_mealy(
    n_states: usize,
    inputs: Alphabet,
    outputs: Alphabet,
    seed: u64,
) -> Result<MealyMachine, MealyError> {
    MealyMachine::random(n_states, inputs, outputs, seed)
}
