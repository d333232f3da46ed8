//! Alphabets, words and observations.
//!
//! Symbols are stored as indices into an [`Alphabet`], so a word is a plain
//! `Vec<Sym>`. Alphabets keep their symbols sorted: index order is symbol
//! order, which makes "lexicographic over the sorted alphabet" the same as
//! comparing index sequences.

use std::fmt;

use crate::error::{MealyError, ObservationError};

/// Index of a symbol inside an [`Alphabet`].
pub type Sym = u16;

/// A finite sequence of symbol indices.
pub type Word = Vec<Sym>;

/// An ordered, duplicate-free, non-empty set of symbol names.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Alphabet {
    symbols: Vec<String>,
}

impl Alphabet {
    pub fn new<I, S>(symbols: I) -> Result<Self, MealyError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let mut symbols: Vec<String> = symbols.into_iter().map(Into::into).collect();
        if symbols.is_empty() {
            return Err(MealyError::EmptyAlphabet);
        }
        symbols.sort();
        if let Some(w) = symbols.windows(2).find(|w| w[0] == w[1]) {
            return Err(MealyError::DuplicateSymbol(w[0].clone()));
        }
        if symbols.len() > Sym::MAX as usize {
            return Err(MealyError::AlphabetTooLarge(symbols.len()));
        }
        Ok(Self { symbols })
    }

    /// Single-character symbols, e.g. `Alphabet::from_chars("ab")`.
    pub fn from_chars(chars: &str) -> Result<Self, MealyError> {
        Self::new(chars.chars().map(String::from))
    }

    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    pub fn name(&self, sym: Sym) -> &str {
        &self.symbols[sym as usize]
    }

    pub fn index(&self, name: &str) -> Option<Sym> {
        self.symbols
            .binary_search_by(|s| s.as_str().cmp(name))
            .ok()
            .map(|i| i as Sym)
    }

    pub fn contains(&self, sym: Sym) -> bool {
        (sym as usize) < self.symbols.len()
    }

    pub fn symbols(&self) -> impl Iterator<Item = Sym> + '_ {
        (0..self.symbols.len()).map(|i| i as Sym)
    }

    pub fn names(&self) -> &[String] {
        &self.symbols
    }

    /// Encodes a word written one character per symbol.
    pub fn encode_chars(&self, text: &str) -> Result<Word, MealyError> {
        let mut buf = [0u8; 4];
        text.chars()
            .map(|c| {
                let s = c.encode_utf8(&mut buf);
                self.index(s).ok_or_else(|| MealyError::UnknownSymbol(s.to_string()))
            })
            .collect()
    }

    /// Encodes a word given as a sequence of symbol names.
    pub fn encode<S: AsRef<str>>(&self, names: &[S]) -> Result<Word, MealyError> {
        names
            .iter()
            .map(|n| {
                self.index(n.as_ref())
                    .ok_or_else(|| MealyError::UnknownSymbol(n.as_ref().to_string()))
            })
            .collect()
    }

    /// Renders a word. Single-character alphabets are concatenated, longer
    /// names are separated by spaces.
    pub fn display(&self, word: &[Sym]) -> String {
        let sep = if self.symbols.iter().all(|s| s.chars().count() == 1) {
            ""
        } else {
            " "
        };
        word.iter().map(|&s| self.name(s)).collect::<Vec<_>>().join(sep)
    }
}

impl fmt::Display for Alphabet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{{{}}}", self.symbols.join(", "))
    }
}

/// An input word paired with the output word it produced.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Observation {
    input: Word,
    output: Word,
}

impl Observation {
    pub fn new(input: Word, output: Word) -> Result<Self, ObservationError> {
        if input.len() != output.len() {
            return Err(ObservationError::LengthMismatch {
                input: input.len(),
                output: output.len(),
            });
        }
        Ok(Self { input, output })
    }

    pub fn input(&self) -> &[Sym] {
        &self.input
    }

    pub fn output(&self) -> &[Sym] {
        &self.output
    }

    pub fn len(&self) -> usize {
        self.input.len()
    }

    pub fn is_empty(&self) -> bool {
        self.input.is_empty()
    }

    /// The observation restricted to its first `len` symbols.
    pub fn prefix(&self, len: usize) -> Observation {
        Observation {
            input: self.input[..len].to_vec(),
            output: self.output[..len].to_vec(),
        }
    }

    pub fn into_parts(self) -> (Word, Word) {
        (self.input, self.output)
    }

    /// Two observations conflict when they share an input prefix of length
    /// at least one on which their outputs differ at the last position.
    pub fn conflicts(&self, other: &Observation) -> bool {
        self.input
            .iter()
            .zip(&other.input)
            .zip(self.output.iter().zip(&other.output))
            .take_while(|((a, b), _)| a == b)
            .any(|(_, (x, y))| x != y)
    }
}

/// Free-function form of [`Observation::conflicts`].
pub fn conflicts_obs(o1: &Observation, o2: &Observation) -> bool {
    o1.conflicts(o2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obs(ab: &Alphabet, i: &str, o: &str) -> Observation {
        Observation::new(ab.encode_chars(i).unwrap(), ab.encode_chars(o).unwrap()).unwrap()
    }

    #[test]
    fn alphabet_is_sorted_and_rejects_duplicates() {
        let ab = Alphabet::new(["b", "a", "c"]).unwrap();
        assert_eq!(ab.names(), &["a", "b", "c"]);
        assert_eq!(ab.index("c"), Some(2));
        assert!(matches!(Alphabet::new(["a", "a"]), Err(MealyError::DuplicateSymbol(_))));
        assert!(matches!(
            Alphabet::new(Vec::<String>::new()),
            Err(MealyError::EmptyAlphabet)
        ));
    }

    #[test]
    fn observation_requires_equal_lengths() {
        assert!(Observation::new(vec![0, 1], vec![0]).is_err());
    }

    #[test]
    fn conflict_examples() {
        let ab = Alphabet::from_chars("ab").unwrap();
        assert!(obs(&ab, "aaa", "aab").conflicts(&obs(&ab, "aaa", "abb")));
        assert!(!obs(&ab, "aaa", "aab").conflicts(&obs(&ab, "ab", "ab")));
        let o = obs(&ab, "abab", "baba");
        assert!(!o.conflicts(&o));
        // only shared prefixes can witness a conflict
        assert!(!obs(&ab, "ba", "aa").conflicts(&obs(&ab, "aa", "bb")));
    }

    #[test]
    fn display_round_trip() {
        let ab = Alphabet::from_chars("ab").unwrap();
        let w = ab.encode_chars("abba").unwrap();
        assert_eq!(ab.display(&w), "abba");
        let long = Alphabet::new(["ack", "syn"]).unwrap();
        assert_eq!(long.display(&[1, 0]), "syn ack");
    }
}
