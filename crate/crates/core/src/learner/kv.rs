use super::{suffix_output, trim_counterexample, AbortReason, Decomposition, Interrupt, Learner, LearnerOracle};
use crate::mealy::MealyMachine;
use crate::word::{Alphabet, Observation, Sym, Word};

#[derive(Debug, Clone)]
enum DtNode {
    Inner { suffix: Word, children: Vec<(Word, usize)> },
    Leaf(usize),
}

/// Kearns–Vazirani discrimination-tree learner for Mealy machines.
///
/// Leaves hold states (identified by access words); inner nodes hold
/// suffixes and branch on the output word the suffix produces. Sifting a
/// word that hits an unseen output discovers a new state.
#[derive(Debug, Clone)]
pub struct KearnsVazirani {
    inputs: Alphabet,
    outputs: Alphabet,
    nodes: Vec<DtNode>,
    access: Vec<Word>,
    leaf_of: Vec<usize>,
    last: Option<MealyMachine>,
}

impl KearnsVazirani {
    pub fn new(inputs: Alphabet, outputs: Alphabet) -> Self {
        Self {
            inputs,
            outputs,
            nodes: vec![DtNode::Leaf(0)],
            access: vec![Vec::new()],
            leaf_of: vec![0],
            last: None,
        }
    }

    pub fn num_states(&self) -> usize {
        self.access.len()
    }

    fn new_state(&mut self, access: Word) -> (usize, usize) {
        let state = self.access.len();
        self.access.push(access);
        self.nodes.push(DtNode::Leaf(state));
        let node = self.nodes.len() - 1;
        self.leaf_of.push(node);
        (state, node)
    }

    fn sift(&mut self, word: &[Sym], oracle: &mut dyn LearnerOracle) -> Result<usize, Interrupt> {
        let mut node = 0;
        loop {
            let suffix = match &self.nodes[node] {
                DtNode::Leaf(state) => return Ok(*state),
                DtNode::Inner { suffix, .. } => suffix.clone(),
            };
            let key = suffix_output(oracle, word, &suffix)?;
            let found = match &self.nodes[node] {
                DtNode::Inner { children, .. } => children.iter().find(|(k, _)| *k == key).map(|&(_, c)| c),
                DtNode::Leaf(_) => unreachable!(),
            };
            match found {
                Some(child) => node = child,
                None => {
                    let (state, leaf) = self.new_state(word.to_vec());
                    if let DtNode::Inner { children, .. } = &mut self.nodes[node] {
                        children.push((key, leaf));
                    }
                    return Ok(state);
                }
            }
        }
    }
}

impl Learner for KearnsVazirani {
    fn hypothesis(&mut self, oracle: &mut dyn LearnerOracle) -> Result<MealyMachine, Interrupt> {
        let mut rows = Vec::new();
        let mut s = 0;
        // sifting may discover states, so the bound grows while we iterate
        while s < self.access.len() {
            let mut row = Vec::with_capacity(self.inputs.len());
            for a in 0..self.inputs.len() as Sym {
                let mut ua = self.access[s].clone();
                ua.push(a);
                let out = *oracle.mq(&ua)?.last().expect("non-empty word");
                let target = self.sift(&ua, oracle)?;
                row.push((target, out));
            }
            rows.push(row);
            s += 1;
        }
        let h = MealyMachine::new(self.inputs.clone(), self.outputs.clone(), 0, rows)
            .map_err(|_| Interrupt::Abort(AbortReason::Inconsistent))?;
        self.last = Some(h.clone());
        Ok(h)
    }

    fn refine(&mut self, counterexample: &Observation, oracle: &mut dyn LearnerOracle) -> Result<(), Interrupt> {
        let h = self.last.clone().ok_or(Interrupt::Abort(AbortReason::Inconsistent))?;
        let cex = trim_counterexample(&h, counterexample).ok_or(Interrupt::Abort(AbortReason::Inconsistent))?;
        let word = cex.input();
        let i = Decomposition {
            h: &h,
            access: &self.access,
            word,
        }
        .last(oracle)?;
        let suffix = word[i + 1..].to_vec();
        let old = h.state_after(&word[..=i]);
        let mut fresh = self.access[h.state_after(&word[..i])].clone();
        fresh.push(word[i]);
        let old_key = suffix_output(oracle, &self.access[old].clone(), &suffix)?;
        let new_key = suffix_output(oracle, &fresh, &suffix)?;
        if suffix.is_empty() || old_key == new_key {
            return Err(Interrupt::Abort(AbortReason::Inconsistent));
        }
        let node = self.leaf_of[old];
        self.nodes.push(DtNode::Leaf(old));
        let old_leaf = self.nodes.len() - 1;
        self.leaf_of[old] = old_leaf;
        let (_, new_leaf) = self.new_state(fresh);
        self.nodes[node] = DtNode::Inner {
            suffix,
            children: vec![(old_key, old_leaf), (new_key, new_leaf)],
        };
        Ok(())
    }

    fn restart(&mut self) {
        *self = Self::new(self.inputs.clone(), self.outputs.clone());
    }

    fn name(&self) -> &'static str {
        "kv"
    }
}
