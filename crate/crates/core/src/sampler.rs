//! Randomized Wp-style test words for equivalence testing.
//!
//! A sampled word is `access · a` from the transition cover, a random infix
//! of geometric length, up to `m` further random symbols, and finally a
//! suffix drawn from the characterization set (or the empty word).

use std::collections::VecDeque;

use rand::Rng;
use rand_distr::{Distribution, Geometric};
use serde::{Deserialize, Serialize};

use crate::error::MealyError;
use crate::mealy::{MealyMachine, StateId};
use crate::word::{Sym, Word};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerParams {
    /// Mean length of the random infix.
    pub infix_mean: f64,
    /// Extra states the suite should account for.
    pub extra_states: u32,
}

impl Default for SamplerParams {
    fn default() -> Self {
        Self {
            infix_mean: 3.0,
            extra_states: 2,
        }
    }
}

/// Shortest access word of every state, in BFS order with ties broken by
/// input order. Fails if some state is unreachable.
pub fn access_words(h: &MealyMachine) -> Result<Vec<Word>, MealyError> {
    let mut access: Vec<Option<Word>> = vec![None; h.num_states()];
    access[h.initial()] = Some(Vec::new());
    let mut queue = VecDeque::from([h.initial()]);
    while let Some(q) = queue.pop_front() {
        for a in h.inputs().symbols() {
            let t = h.next(q, a);
            if access[t].is_none() {
                let mut w = access[q].clone().expect("dequeued states are reached");
                w.push(a);
                access[t] = Some(w);
                queue.push_back(t);
            }
        }
    }
    access
        .into_iter()
        .enumerate()
        .map(|(q, w)| w.ok_or(MealyError::Unreachable(q)))
        .collect()
}

/// Transition cover entries: `((q, a), access(q) · a)`.
pub type Cover = Vec<((StateId, Sym), Word)>;

/// `access(q) · a` for every state `q` and input `a`, state-major.
pub fn transition_cover(h: &MealyMachine) -> Result<Cover, MealyError> {
    let access = access_words(h)?;
    Ok(access
        .iter()
        .enumerate()
        .flat_map(|(q, w)| {
            h.inputs().symbols().map(move |a| {
                let mut x = w.clone();
                x.push(a);
                ((q, a), x)
            })
        })
        .collect())
}

/// Shortest word on which states `p` and `q` produce different outputs.
fn separating_word(h: &MealyMachine, p: StateId, q: StateId) -> Option<Word> {
    let n = h.num_states();
    let mut parent: Vec<Option<(usize, Sym)>> = vec![None; n * n];
    let mut seen = vec![false; n * n];
    let start = p * n + q;
    seen[start] = true;
    let mut queue = VecDeque::from([start]);
    while let Some(pair) = queue.pop_front() {
        let (x, y) = (pair / n, pair % n);
        for a in h.inputs().symbols() {
            let (x2, o1) = h.step(x, a);
            let (y2, o2) = h.step(y, a);
            if o1 != o2 {
                let mut w = vec![a];
                let mut cur = pair;
                while let Some((prev, s)) = parent[cur] {
                    w.push(s);
                    cur = prev;
                }
                w.reverse();
                return Some(w);
            }
            let next = x2 * n + y2;
            if !seen[next] {
                seen[next] = true;
                parent[next] = Some((pair, a));
                queue.push_back(next);
            }
        }
    }
    None
}

/// A characterization set of `minimize_canonical(h)`: every pair of its
/// states gets different outputs on some word of the set.
///
/// Built by splitting: while two states share a response signature, their
/// shortest separating word is added. Each addition splits at least one
/// block, so the set has at most `states - 1` words.
pub fn char_set(h: &MealyMachine) -> Vec<Word> {
    let m = h.minimize_canonical();
    let n = m.num_states();
    let mut set: Vec<Word> = Vec::new();
    let mut signature: Vec<Vec<Word>> = vec![Vec::new(); n];
    loop {
        let mut clash = None;
        'outer: for p in 0..n {
            for q in p + 1..n {
                if signature[p] == signature[q] {
                    clash = Some((p, q));
                    break 'outer;
                }
            }
        }
        let Some((p, q)) = clash else {
            return set;
        };
        let w = separating_word(&m, p, q).expect("states of a minimal machine are distinguishable");
        for (s, sig) in signature.iter_mut().enumerate() {
            sig.push(m.run_from(s, &w));
        }
        set.push(w);
    }
}

/// Test-word generator for one hypothesis.
#[derive(Debug, Clone)]
pub struct TestSampler {
    cover: Vec<Word>,
    suffixes: Vec<Word>,
    num_inputs: usize,
    infix: Geometric,
    params: SamplerParams,
}

impl TestSampler {
    pub fn new(h: &MealyMachine, params: SamplerParams) -> Result<Self, MealyError> {
        let canonical = h.minimize_canonical();
        let cover = transition_cover(&canonical)?.into_iter().map(|(_, w)| w).collect();
        let mut suffixes = vec![Vec::new()];
        suffixes.extend(char_set(&canonical));
        let infix = Geometric::new(1.0 / (params.infix_mean.max(0.0) + 1.0)).expect("probability in (0, 1]");
        Ok(Self {
            cover,
            suffixes,
            num_inputs: h.inputs().len(),
            infix,
            params,
        })
    }

    pub fn params(&self) -> SamplerParams {
        self.params
    }

    pub fn cover(&self) -> &[Word] {
        &self.cover
    }

    /// The characterization set, without the empty suffix.
    pub fn char_set(&self) -> &[Word] {
        &self.suffixes[1..]
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Word {
        let mut w = self.cover[rng.gen_range(0..self.cover.len())].clone();
        let infix = self.infix.sample(rng);
        let extra = rng.gen_range(0..=self.params.extra_states as u64);
        for _ in 0..infix + extra {
            w.push(rng.gen_range(0..self.num_inputs) as Sym);
        }
        w.extend_from_slice(&self.suffixes[rng.gen_range(0..self.suffixes.len())]);
        w
    }
}

/// Free-function form of [`TestSampler::sample`].
pub fn sample_word<R: Rng + ?Sized>(sampler: &TestSampler, rng: &mut R) -> Word {
    sampler.sample(rng)
}
