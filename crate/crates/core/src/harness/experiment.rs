use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{ExperimentConfig, Framework};
use crate::ceal::{run_ceal, Outcome};
use crate::dot::parse_dot;
use crate::error::ConfigError;
use crate::mat::{run_mat, MatConfig, MatTeacher};
use crate::mealy::MealyMachine;
use crate::reviser::{EventLog, Reviser, ReviserConfig};
use crate::sul::{NoiseSpec, System, SystemHandle};

/// Environment variable overriding the worker count.
pub const WORKERS_ENV: &str = "CAAL_WORKERS";

/// Outcome and cost of one learning run. Field order is the CSV column
/// order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub experiment_id: String,
    pub run_id: u32,
    pub framework: String,
    pub learner: String,
    pub target: String,
    pub noise_kind: String,
    pub noise_level: f64,
    pub min_repeats: u32,
    pub max_repeats: u32,
    pub seed: u64,
    pub success: bool,
    /// `success`, `wrong_model`, or the abort reason.
    pub outcome: String,
    pub symbols: u64,
    pub tests: u64,
    pub resets: u64,
    pub eq_symbols: u64,
    pub eq_fraction: f64,
    pub restarts: u64,
    pub conflicts: u64,
    pub distinct_hypotheses: u64,
    pub wall_ms: u64,
    /// The final model, when the run produced one.
    #[serde(skip)]
    pub model: Option<MealyMachine>,
}

/// A cell with its machines loaded.
#[derive(Debug, Clone)]
pub struct Experiment {
    pub config: ExperimentConfig,
    pub target: MealyMachine,
    pub mutation: Option<(u64, MealyMachine)>,
}

fn load_machine(path: &Path) -> Result<MealyMachine, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_dot(&text).map_err(|source| ConfigError::Target {
        path: path.to_owned(),
        source,
    })
}

/// Derives the equivalence sampler seed from a run seed, so the noise
/// channel and the sampler draw from unrelated streams.
fn sampler_seed(seed: u64) -> u64 {
    // splitmix64 finalizer
    let mut z = seed.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Experiment {
    /// Validates `config` and reads its target (and mutation target).
    pub fn load(config: ExperimentConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let target = load_machine(&config.target)?;
        let mutation = match &config.mutation {
            Some(m) => Some((m.at_test, load_machine(&m.target)?)),
            None => None,
        };
        Self::with_machines(config, target, mutation)
    }

    /// Uses in-memory machines; `config.target` is only a label.
    pub fn with_machines(
        config: ExperimentConfig,
        target: MealyMachine,
        mutation: Option<(u64, MealyMachine)>,
    ) -> Result<Self, ConfigError> {
        config.validate()?;
        if let Some((_, m)) = &mutation {
            if m.inputs() != target.inputs() || m.outputs() != target.outputs() {
                return Err(ConfigError::Invalid("mutation target uses different alphabets".into()));
            }
        }
        Ok(Self {
            config,
            target,
            mutation,
        })
    }

    /// The machine a successful run must match.
    pub fn ground_truth(&self) -> &MealyMachine {
        self.mutation.as_ref().map_or(&self.target, |(_, m)| m)
    }

    fn system(&self, seed: u64) -> SystemHandle {
        let cfg = &self.config;
        let noise = NoiseSpec {
            kind: cfg.noise_kind,
            level: cfg.noise_level,
            seed,
        };
        let mut system = SystemHandle::new(self.target.clone(), noise).with_budget(cfg.symbol_budget);
        if let Some((at, m)) = &self.mutation {
            system = system.with_mutation(*at, m.clone());
        }
        system
    }

    /// Executes run `index` of the cell.
    pub fn run_one(&self, index: u32) -> RunRecord {
        self.run_logged(index, EventLog::disabled()).0
    }

    /// Like [`Experiment::run_one`], also returning the event log.
    pub fn run_logged(&self, index: u32, events: EventLog) -> (RunRecord, EventLog) {
        let cfg = &self.config;
        let seed = cfg.run_seed(index);
        let started = Instant::now();
        let (inputs, outputs) = (self.target.inputs().clone(), self.target.outputs().clone());
        let mut learner = cfg.learner.build(inputs.clone(), outputs.clone());
        let system = self.system(seed);

        struct Totals {
            outcome: Outcome,
            model: Option<MealyMachine>,
            eq_symbols: u64,
            restarts: u64,
            conflicts: u64,
            distinct: u64,
        }
        let (totals, system, events) = match cfg.framework {
            Framework::Ceal => {
                let config = ReviserConfig {
                    policy: cfg.repeats,
                    sampler: cfg.sampler,
                    survive_budget: cfg.survive_budget,
                    sampler_seed: sampler_seed(seed),
                };
                let mut reviser = Reviser::new(system, inputs, outputs, cfg.update, config).with_events(events);
                let run = run_ceal(learner.as_mut(), &mut reviser, cfg.selection);
                let stats = reviser.stats();
                let totals = Totals {
                    outcome: run.outcome,
                    model: run.elected,
                    eq_symbols: stats.eq_symbols,
                    restarts: run.restarts,
                    conflicts: stats.conflicts,
                    distinct: run.log.distinct() as u64,
                };
                let (_, system, events) = reviser.into_parts();
                (totals, system, events)
            }
            Framework::Mat => {
                let config = MatConfig {
                    policy: cfg.repeats,
                    sampler: cfg.sampler,
                    survive_budget: cfg.survive_budget,
                    sampler_seed: sampler_seed(seed),
                };
                let mut teacher = MatTeacher::new(system, config).with_events(events);
                let run = run_mat(learner.as_mut(), &mut teacher);
                let conflicts = matches!(
                    run.outcome,
                    Outcome::Aborted(crate::learner::AbortReason::CacheConflict)
                ) as u64;
                let totals = Totals {
                    outcome: run.outcome,
                    model: run.model,
                    eq_symbols: teacher.stats().eq_symbols,
                    restarts: 0,
                    conflicts,
                    distinct: run.distinct_hypotheses as u64,
                };
                let (system, events) = teacher.into_parts();
                (totals, system, events)
            }
        };

        let correct = totals
            .model
            .as_ref()
            .is_some_and(|m| m.equivalent(self.ground_truth()).expect("same alphabets").is_none());
        let outcome = match totals.outcome {
            Outcome::Elected if correct => "success".to_owned(),
            Outcome::Elected => "wrong_model".to_owned(),
            Outcome::Aborted(reason) => reason.as_str().to_owned(),
        };
        let stats = system.stats();
        let record = RunRecord {
            experiment_id: cfg.id.clone(),
            run_id: index,
            framework: cfg.framework.as_str().into(),
            learner: cfg.learner.as_str().into(),
            target: cfg.target.display().to_string(),
            noise_kind: cfg.noise_kind.as_str().into(),
            noise_level: cfg.noise_level,
            min_repeats: cfg.repeats.min_repeats,
            max_repeats: cfg.repeats.max_repeats,
            seed,
            success: correct,
            outcome,
            symbols: stats.symbols,
            tests: stats.tests,
            resets: stats.resets,
            eq_symbols: totals.eq_symbols,
            eq_fraction: if stats.symbols == 0 {
                0.0
            } else {
                totals.eq_symbols as f64 / stats.symbols as f64
            },
            restarts: totals.restarts,
            conflicts: totals.conflicts,
            distinct_hypotheses: totals.distinct,
            wall_ms: started.elapsed().as_millis() as u64,
            model: totals.model,
        };
        (record, events)
    }

    /// All runs of the cell, in run order.
    pub fn run_all(&self, workers: usize) -> Vec<RunRecord> {
        run_grid(std::slice::from_ref(self), workers)
    }
}

/// Worker count: `CAAL_WORKERS` if set and valid, else `fallback`, else the
/// number of CPUs.
pub fn worker_count(fallback: Option<usize>) -> usize {
    std::env::var(WORKERS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .or(fallback)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs every (cell, run) pair on `workers` threads. Records come back in
/// (cell, run) order regardless of scheduling.
pub fn run_grid(experiments: &[Experiment], workers: usize) -> Vec<RunRecord> {
    let jobs: Vec<(usize, u32)> = experiments
        .iter()
        .enumerate()
        .flat_map(|(e, x)| (0..x.config.runs).map(move |r| (e, r)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .expect("thread pool");
    pool.install(|| jobs.par_iter().map(|&(e, r)| experiments[e].run_one(r)).collect())
}

/// Loads and runs one cell.
pub fn run_experiment(config: ExperimentConfig) -> Result<Vec<RunRecord>, ConfigError> {
    Ok(Experiment::load(config)?.run_all(worker_count(None)))
}

/// Writes records as CSV with a header row, even when there are none.
pub fn write_csv<W: Write>(records: &[RunRecord], out: W) -> csv::Result<()> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in records {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Column names, in order.
pub const CSV_HEADER: [&str; 21] = [
    "experiment_id",
    "run_id",
    "framework",
    "learner",
    "target",
    "noise_kind",
    "noise_level",
    "min_repeats",
    "max_repeats",
    "seed",
    "success",
    "outcome",
    "symbols",
    "tests",
    "resets",
    "eq_symbols",
    "eq_fraction",
    "restarts",
    "conflicts",
    "distinct_hypotheses",
    "wall_ms",
];
