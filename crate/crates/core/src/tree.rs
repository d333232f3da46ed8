//! The observation tree: a partial, tree-shaped Mealy machine holding every
//! trace seen so far, with conflicting traces resolved by an
//! [`UpdateStrategy`].
//!
//! Every `(node, input)` pair owns a set of candidate edges, one per output
//! symbol observed there, and at most one of them is *active*. `lookup` and
//! the tree language only follow active edges.
//!
//! * [`UpdateStrategy::MostRecent`] keeps a single candidate per input. A
//!   diverging observation overwrites the output and drops the stale subtree.
//! * [`UpdateStrategy::MostFrequent`] keeps every candidate. Each candidate
//!   is ranked by the best `(occurrences, last seen)` key of any complete
//!   observation ending below it, where occurrences counts how often that
//!   exact observation was seen. The highest-ranked candidate is active, so
//!   the active path always leads to the most frequent, then most recent,
//!   observation among those sharing a divergence point. Inactive
//!   candidates keep their subtrees.

use std::fmt::Write as _;

use crate::mealy::{MealyMachine, StateId};
use crate::word::{Alphabet, Observation, Sym, Word};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UpdateStrategy {
    MostRecent,
    MostFrequent,
}

type NodeId = u32;
const ROOT: NodeId = 0;

#[derive(Debug, Clone, Copy)]
struct Edge {
    input: Sym,
    output: Sym,
    active: bool,
    /// Observations that walked through this edge.
    traversals: u32,
    /// Best `(occurrences, sequence)` of an observation ending below.
    best: (u32, u64),
    child: NodeId,
}

#[derive(Debug, Clone, Default)]
struct Node {
    /// Sorted by `(input, output)`.
    edges: Vec<Edge>,
    /// Number of observations that ended exactly here.
    ends: u32,
}

impl Node {
    fn active(&self, input: Sym) -> Option<&Edge> {
        self.edges.iter().find(|e| e.input == input && e.active)
    }

    fn position(&self, input: Sym, output: Sym) -> Result<usize, usize> {
        self.edges
            .binary_search_by(|e| (e.input, e.output).cmp(&(input, output)))
    }
}

/// Observation tree over fixed input and output alphabets.
#[derive(Debug, Clone)]
pub struct ObservationTree {
    nodes: Vec<Node>,
    free: Vec<NodeId>,
    strategy: UpdateStrategy,
    seq: u64,
    inputs: Alphabet,
    outputs: Alphabet,
}

impl ObservationTree {
    pub fn new(inputs: Alphabet, outputs: Alphabet, strategy: UpdateStrategy) -> Self {
        Self {
            nodes: vec![Node::default()],
            free: Vec::new(),
            strategy,
            seq: 0,
            inputs,
            outputs,
        }
    }

    pub fn strategy(&self) -> UpdateStrategy {
        self.strategy
    }

    pub fn inputs(&self) -> &Alphabet {
        &self.inputs
    }

    pub fn outputs(&self) -> &Alphabet {
        &self.outputs
    }

    /// Number of `update` calls so far.
    pub fn updates(&self) -> u64 {
        self.seq
    }

    /// Live nodes, including the root.
    pub fn len(&self) -> usize {
        self.nodes.len() - self.free.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes[ROOT as usize].edges.is_empty()
    }

    /// Output stored for `input`, following active edges, or `None` when
    /// the tree does not cover the whole word.
    pub fn lookup(&self, input: &[Sym]) -> Option<Word> {
        let mut node = ROOT;
        let mut out = Vec::with_capacity(input.len());
        for &a in input {
            let e = self.nodes[node as usize].active(a)?;
            out.push(e.output);
            node = e.child;
        }
        Some(out)
    }

    /// Integrates an observation. Returns `true` iff the call removed or
    /// changed an answer `lookup` gave before (a conflict).
    pub fn update(&mut self, obs: &Observation) -> bool {
        self.seq += 1;
        match self.strategy {
            UpdateStrategy::MostRecent => self.update_most_recent(obs),
            UpdateStrategy::MostFrequent => self.update_most_frequent(obs),
        }
    }

    fn alloc(&mut self) -> NodeId {
        match self.free.pop() {
            Some(id) => id,
            None => {
                self.nodes.push(Node::default());
                (self.nodes.len() - 1) as NodeId
            }
        }
    }

    /// Frees every descendant of `node` and empties it.
    fn clear_subtree(&mut self, node: NodeId) {
        let mut stack: Vec<NodeId> = std::mem::take(&mut self.nodes[node as usize].edges)
            .into_iter()
            .map(|e| e.child)
            .collect();
        self.nodes[node as usize].ends = 0;
        while let Some(n) = stack.pop() {
            let edges = std::mem::take(&mut self.nodes[n as usize].edges);
            stack.extend(edges.into_iter().map(|e| e.child));
            self.nodes[n as usize].ends = 0;
            self.free.push(n);
        }
    }

    fn update_most_recent(&mut self, obs: &Observation) -> bool {
        let mut node = ROOT;
        let mut conflict = false;
        for (&a, &o) in obs.input().iter().zip(obs.output()) {
            let edges = &self.nodes[node as usize].edges;
            match edges.iter().position(|e| e.input == a) {
                Some(ix) => {
                    let e = edges[ix];
                    if e.output != o {
                        self.clear_subtree(e.child);
                        let e = &mut self.nodes[node as usize].edges[ix];
                        e.output = o;
                        conflict = true;
                    }
                    node = e.child;
                }
                None => {
                    let child = self.alloc();
                    let edges = &mut self.nodes[node as usize].edges;
                    let at = edges.partition_point(|e| e.input < a);
                    edges.insert(
                        at,
                        Edge {
                            input: a,
                            output: o,
                            active: true,
                            traversals: 1,
                            best: (1, 0),
                            child,
                        },
                    );
                    node = child;
                }
            }
        }
        self.nodes[node as usize].ends = 1;
        conflict
    }

    fn update_most_frequent(&mut self, obs: &Observation) -> bool {
        // (node, input, output, previously active output, reachable before)
        let mut path: Vec<(NodeId, Sym, Sym, Option<Sym>, bool)> = Vec::with_capacity(obs.len());
        let mut node = ROOT;
        let mut reachable = true;
        for (&a, &o) in obs.input().iter().zip(obs.output()) {
            let prev = self.nodes[node as usize].active(a).map(|e| e.output);
            let ix = match self.nodes[node as usize].position(a, o) {
                Ok(ix) => ix,
                Err(at) => {
                    let child = self.alloc();
                    self.nodes[node as usize].edges.insert(
                        at,
                        Edge {
                            input: a,
                            output: o,
                            active: false,
                            traversals: 0,
                            best: (0, 0),
                            child,
                        },
                    );
                    at
                }
            };
            let e = &mut self.nodes[node as usize].edges[ix];
            e.traversals += 1;
            path.push((node, a, o, prev, reachable));
            reachable &= prev == Some(o);
            node = e.child;
        }
        let end = &mut self.nodes[node as usize];
        end.ends += 1;
        let key = (end.ends, self.seq);

        let mut conflict = false;
        for (node, a, o, prev, reachable) in path {
            let edges = &mut self.nodes[node as usize].edges;
            let ix = edges
                .binary_search_by(|e| (e.input, e.output).cmp(&(a, o)))
                .expect("edge created on the way down");
            if key > edges[ix].best {
                edges[ix].best = key;
            }
            let range = edges.partition_point(|e| e.input < a)..edges.partition_point(|e| e.input <= a);
            let winner = range
                .clone()
                .max_by_key(|&i| edges[i].best)
                .expect("at least the observed candidate");
            for i in range {
                edges[i].active = i == winner;
            }
            let now = edges[winner].output;
            if reachable && prev.is_some_and(|p| p != now) {
                conflict = true;
            }
        }
        conflict
    }

    /// Maximal elements of the tree language: one observation per
    /// root-to-leaf active path, depth-first over sorted inputs.
    pub fn language_iter(&self) -> LanguageIter<'_> {
        LanguageIter {
            tree: self,
            stack: if self.is_empty() { vec![] } else { vec![(ROOT, 0)] },
            input: Vec::new(),
            output: Vec::new(),
        }
    }

    /// First stored maximal observation (in `language_iter` order) that `h`
    /// disagrees with, cut to its shortest disagreeing prefix.
    ///
    /// Walks the tree and `h` in lockstep and stops at the first active edge
    /// whose output differs, which is exactly that prefix.
    pub fn first_disagreement(&self, h: &MealyMachine) -> Option<Observation> {
        // (node, hypothesis state, next edge index)
        let mut stack: Vec<(NodeId, StateId, usize)> = vec![(ROOT, h.initial(), 0)];
        let mut input: Word = Vec::new();
        let mut output: Word = Vec::new();
        while let Some(&mut (node, state, ref mut next)) = stack.last_mut() {
            let edges = &self.nodes[node as usize].edges;
            match edges[*next..].iter().position(|e| e.active) {
                Some(off) => {
                    let e = edges[*next + off];
                    *next += off + 1;
                    let (succ, expect) = h.step(state, e.input);
                    input.push(e.input);
                    output.push(e.output);
                    if expect != e.output {
                        return Some(Observation::new(input, output).expect("equal lengths"));
                    }
                    stack.push((e.child, succ, 0));
                }
                None => {
                    stack.pop();
                    input.pop();
                    output.pop();
                }
            }
        }
        None
    }

    /// Diagnostic DOT rendering. Active edges are solid; inactive
    /// candidates are dashed and annotated with their traversal count.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph tree {\n");
        let mut stack = vec![ROOT];
        while let Some(n) = stack.pop() {
            let _ = writeln!(out, "\tt{n} [shape=\"circle\" label=\"\"];");
            for e in &self.nodes[n as usize].edges {
                let (i, o) = (self.inputs.name(e.input), self.outputs.name(e.output));
                if e.active {
                    let _ = writeln!(out, "\tt{n} -> t{} [label=\"{i} / {o}\"];", e.child);
                } else {
                    let _ = writeln!(
                        out,
                        "\tt{n} -> t{} [label=\"{i} / {o} [{}]\" style=\"dashed\"];",
                        e.child, e.traversals
                    );
                }
                stack.push(e.child);
            }
        }
        out.push_str("}\n");
        out
    }
}

/// Iterator over the maximal observations of a tree.
pub struct LanguageIter<'a> {
    tree: &'a ObservationTree,
    // (node, index of the next active edge to explore)
    stack: Vec<(NodeId, usize)>,
    input: Word,
    output: Word,
}

impl Iterator for LanguageIter<'_> {
    type Item = Observation;

    fn next(&mut self) -> Option<Observation> {
        loop {
            let &mut (node, ref mut next) = self.stack.last_mut()?;
            let edges = &self.tree.nodes[node as usize].edges;
            if edges.is_empty() {
                // leaf: emit the current path and backtrack
                let obs = Observation::new(self.input.clone(), self.output.clone()).expect("equal lengths");
                self.pop();
                return Some(obs);
            }
            match edges[*next..].iter().position(|e| e.active) {
                Some(off) => {
                    let e = edges[*next + off];
                    *next += off + 1;
                    self.input.push(e.input);
                    self.output.push(e.output);
                    self.stack.push((e.child, 0));
                }
                None => self.pop(),
            }
        }
    }
}

impl LanguageIter<'_> {
    fn pop(&mut self) {
        self.stack.pop();
        self.input.pop();
        self.output.pop();
    }
}
