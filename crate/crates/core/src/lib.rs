//! Conflict-aware active learning of Mealy machines.
//!
//! A classic MAT learner ([`LStarRs`], [`KearnsVazirani`]) asks its queries
//! to a [`Reviser`], which answers from an [`ObservationTree`] and tests the
//! system under learning only for what the tree does not know. When a fresh
//! observation contradicts stored knowledge the tree is revised and the
//! learner is restarted from the (cheap, cached) tree instead of the run
//! collapsing. [`run_mat`] is the classic baseline that collapses instead.
//!
//! The [`harness`] module runs seeded experiment grids over both stacks.

pub mod ceal;
pub mod dot;
pub mod error;
pub mod harness;
pub mod learner;
pub mod mat;
pub mod mealy;
pub mod reviser;
pub mod sampler;
pub mod sul;
pub mod tree;
pub mod word;

pub use ceal::{elect, run_ceal, CealRun, HypothesisLog, Outcome, Selection};
pub use dot::{parse_dot, write_dot};
pub use error::{ConfigError, MealyError, ObservationError, ParseError, SulError};
pub use harness::{load_config, run_experiment, write_csv, Experiment, ExperimentConfig, Framework, RunRecord};
pub use learner::{AbortReason, Interrupt, KearnsVazirani, LStarRs, Learner, LearnerKind, LearnerOracle};
pub use mat::{mat_mq, run_mat, CacheConflict, MatCache, MatConfig, MatRun, MatTeacher};
pub use mealy::{equivalent, minimize_canonical, random_mealy, run_word, MealyMachine, StateId};
pub use reviser::{Answer, EqAnswer, Event, EventKind, EventLog, Reviser, ReviserConfig, ReviserStats};
pub use sampler::{char_set, sample_word, transition_cover, SamplerParams, TestSampler};
pub use sul::{execute_repeated, NoiseKind, NoiseSpec, RepeatsPolicy, SulStats, System, SystemHandle};
pub use tree::{ObservationTree, UpdateStrategy};
pub use word::{conflicts_obs, Alphabet, Observation, Sym, Word};
