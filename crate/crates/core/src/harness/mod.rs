//! Experiment cells, seeded execution of learning runs, and CSV output.

mod config;
mod experiment;

pub use config::{
    load_config, parse_config, write_config, ExperimentConfig, Framework, MutationSpec, DEFAULT_RUNS,
    DEFAULT_SURVIVE_BUDGET, DEFAULT_SYMBOL_BUDGET,
};
pub use experiment::{
    run_experiment, run_grid, worker_count, write_csv, Experiment, RunRecord, CSV_HEADER, WORKERS_ENV,
};
