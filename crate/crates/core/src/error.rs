use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum MealyError {
    #[error("alphabet must not be empty")]
    EmptyAlphabet,
    #[error("duplicate symbol `{0}` in alphabet")]
    DuplicateSymbol(String),
    #[error("alphabet of {0} symbols is too large")]
    AlphabetTooLarge(usize),
    #[error("symbol `{0}` is not in the alphabet")]
    UnknownSymbol(String),
    #[error("input symbol index {0} is outside the input alphabet")]
    InputOutOfDomain(usize),
    #[error("output symbol index {0} is outside the output alphabet")]
    OutputOutOfRange(usize),
    #[error("machine needs at least one state")]
    NoStates,
    #[error("state {0} does not exist")]
    UnknownState(usize),
    #[error("state {state} has {got} transitions, expected {expected}")]
    IncompleteRow { state: usize, got: usize, expected: usize },
    #[error("input alphabets differ: {0} vs {1}")]
    AlphabetMismatch(String, String),
    #[error("no minimal machine found after {0} attempts")]
    GenerationExhausted(usize),
    #[error("state {0} is unreachable from the initial state")]
    Unreachable(usize),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ObservationError {
    #[error("input has length {input} but output has length {output}")]
    LengthMismatch { input: usize, output: usize },
}

/// A DOT parse failure, located by line.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
#[error("line {line}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub message: String,
}

impl ParseError {
    pub(crate) fn new(line: usize, message: impl Into<String>) -> Self {
        Self {
            line,
            message: message.into(),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SulError {
    #[error("symbol budget of {budget} exhausted")]
    BudgetExhausted { budget: u64 },
    #[error("repeats policy invalid: {0}")]
    InvalidPolicy(String),
    #[error("noise level {0} outside [0, 1]")]
    InvalidNoise(f64),
    #[error("system failure: {0}")]
    Failure(String),
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("unsupported learner `{0}`")]
    UnsupportedLearner(String),
    #[error("unsupported {field} `{value}`")]
    UnsupportedValue { field: &'static str, value: String },
    #[error("invalid config: {0}")]
    Invalid(String),
    #[error("could not parse config: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("could not read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("target {path}: {source}")]
    Target { path: PathBuf, source: ParseError },
    #[error(transparent)]
    Mealy(#[from] MealyError),
}
