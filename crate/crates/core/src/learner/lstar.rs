use std::collections::HashMap;

use super::{suffix_output, trim_counterexample, AbortReason, Decomposition, Interrupt, Learner, LearnerOracle};
use crate::mealy::MealyMachine;
use crate::word::{Alphabet, Observation, Sym, Word};

/// Mealy-style L* with Rivest–Schapire counterexample processing.
///
/// Rows are indexed by access words (`short`, plus their one-letter
/// extensions), columns by suffixes. A cell holds the output the suffix
/// produces after the prefix. Columns start as the single input symbols, and
/// each counterexample contributes one new suffix found by binary search.
/// Short rows are kept pairwise distinct, so closedness is the only table
/// property to maintain.
#[derive(Debug, Clone)]
pub struct LStarRs {
    inputs: Alphabet,
    outputs: Alphabet,
    short: Vec<Word>,
    suffixes: Vec<Word>,
    rows: HashMap<Word, Vec<Word>>,
    last: Option<MealyMachine>,
}

impl LStarRs {
    pub fn new(inputs: Alphabet, outputs: Alphabet) -> Self {
        let suffixes = inputs.symbols().map(|a| vec![a]).collect();
        Self {
            inputs,
            outputs,
            short: vec![Vec::new()],
            suffixes,
            rows: HashMap::new(),
            last: None,
        }
    }

    pub fn num_suffixes(&self) -> usize {
        self.suffixes.len()
    }

    pub fn num_short(&self) -> usize {
        self.short.len()
    }

    fn fill(&mut self, prefix: &[Sym], oracle: &mut dyn LearnerOracle) -> Result<(), Interrupt> {
        let have = self.rows.get(prefix).map_or(0, Vec::len);
        if have == self.suffixes.len() {
            return Ok(());
        }
        let mut cells = Vec::with_capacity(self.suffixes.len() - have);
        for e in &self.suffixes[have..] {
            cells.push(suffix_output(oracle, prefix, e)?);
        }
        self.rows.entry(prefix.to_vec()).or_default().extend(cells);
        Ok(())
    }

    fn extension(u: &[Sym], a: Sym) -> Word {
        let mut w = u.to_vec();
        w.push(a);
        w
    }
}

impl Learner for LStarRs {
    fn hypothesis(&mut self, oracle: &mut dyn LearnerOracle) -> Result<MealyMachine, Interrupt> {
        // close the table
        let mut by_row: HashMap<Vec<Word>, usize>;
        'close: loop {
            by_row = HashMap::new();
            for i in 0..self.short.len() {
                let u = self.short[i].clone();
                self.fill(&u, oracle)?;
                by_row.insert(self.rows[&u].clone(), i);
            }
            for i in 0..self.short.len() {
                for a in 0..self.inputs.len() as Sym {
                    let ua = Self::extension(&self.short[i], a);
                    self.fill(&ua, oracle)?;
                    if !by_row.contains_key(&self.rows[&ua]) {
                        self.short.push(ua);
                        continue 'close;
                    }
                }
            }
            break;
        }
        let rows = self
            .short
            .iter()
            .map(|u| {
                self.inputs
                    .symbols()
                    .map(|a| {
                        let ua = Self::extension(u, a);
                        let target = by_row[&self.rows[&ua]];
                        // suffix `a` is column `a`
                        let out = self.rows[u][a as usize][0];
                        (target, out)
                    })
                    .collect()
            })
            .collect();
        let h = MealyMachine::new(self.inputs.clone(), self.outputs.clone(), 0, rows)
            .map_err(|_| Interrupt::Abort(AbortReason::Inconsistent))?;
        self.last = Some(h.clone());
        Ok(h)
    }

    fn refine(&mut self, counterexample: &Observation, oracle: &mut dyn LearnerOracle) -> Result<(), Interrupt> {
        let h = self.last.clone().ok_or(Interrupt::Abort(AbortReason::Inconsistent))?;
        let cex = trim_counterexample(&h, counterexample).ok_or(Interrupt::Abort(AbortReason::Inconsistent))?;
        let split = Decomposition {
            h: &h,
            access: &self.short,
            word: cex.input(),
        }
        .binary(oracle)?;
        let suffix = cex.input()[split + 1..].to_vec();
        if suffix.is_empty() || self.suffixes.contains(&suffix) {
            return Err(Interrupt::Abort(AbortReason::Inconsistent));
        }
        self.suffixes.push(suffix);
        Ok(())
    }

    fn restart(&mut self) {
        *self = Self::new(self.inputs.clone(), self.outputs.clone());
    }

    fn name(&self) -> &'static str {
        "lstar_rs"
    }
}
