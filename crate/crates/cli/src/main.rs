use std::fs::{self, File};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use caal_core::harness::{
    load_config, run_grid, worker_count, write_csv, Experiment, ExperimentConfig, Framework, MutationSpec,
    DEFAULT_RUNS, DEFAULT_SURVIVE_BUDGET, DEFAULT_SYMBOL_BUDGET,
};
use caal_core::{
    parse_dot, write_dot, Alphabet, EventLog, LearnerKind, MealyMachine, NoiseKind, RepeatsPolicy, SamplerParams,
    Selection, UpdateStrategy,
};

#[derive(Parser)]
#[command(name = "caal", version, about = "Conflict-aware active learning of Mealy machines")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a single experiment cell.
    Run(RunArgs),
    /// Run every cell of a config file.
    Bench {
        config: PathBuf,
        /// CSV output (standard output if omitted).
        #[arg(long, short)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Check two DOT machines for equivalence (exit 0 if equivalent).
    Verify { model: PathBuf, target: PathBuf },
    /// Print a random minimal machine as DOT.
    Gen {
        #[arg(long)]
        states: usize,
        #[arg(long)]
        inputs: usize,
        #[arg(long)]
        outputs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum FrameworkArg {
    Mat,
    Ceal,
}

#[derive(Clone, Copy, ValueEnum)]
enum LearnerArg {
    LstarRs,
    Kv,
}

#[derive(Clone, Copy, ValueEnum)]
enum StrategyArg {
    MostRecent,
    MostFrequent,
}

#[derive(Clone, Copy, ValueEnum)]
enum NoiseArg {
    None,
    Input,
    Output,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    target: PathBuf,
    #[arg(long, value_enum, default_value = "ceal")]
    framework: FrameworkArg,
    #[arg(long, value_enum, default_value = "lstar-rs")]
    learner: LearnerArg,
    #[arg(long, value_enum, default_value = "most-recent")]
    update: StrategyArg,
    #[arg(long, value_enum, default_value = "most-frequent")]
    selection: StrategyArg,
    #[arg(long, default_value_t = 1)]
    min_repeats: u32,
    #[arg(long, default_value_t = 1)]
    max_repeats: u32,
    #[arg(long, default_value_t = RepeatsPolicy::DEFAULT_THRESHOLD)]
    threshold: f64,
    #[arg(long, value_enum, default_value = "none")]
    noise_kind: NoiseArg,
    #[arg(long, default_value_t = 0.0)]
    noise_level: f64,
    #[arg(long, default_value_t = SamplerParams::default().infix_mean)]
    infix_mean: f64,
    #[arg(long, default_value_t = SamplerParams::default().extra_states)]
    extra_states: u32,
    #[arg(long, default_value_t = DEFAULT_SURVIVE_BUDGET)]
    survive_budget: u32,
    #[arg(long, default_value_t = DEFAULT_SYMBOL_BUDGET)]
    symbol_budget: u64,
    #[arg(long, default_value_t = DEFAULT_RUNS)]
    runs: u32,
    #[arg(long, default_value_t = 0)]
    base_seed: u64,
    /// Switch to the machine in `--mutation-target` at this system test.
    #[arg(long, requires = "mutation_target")]
    mutation_at: Option<u64>,
    #[arg(long, requires = "mutation_at")]
    mutation_target: Option<PathBuf>,
    #[arg(long, default_value = "run")]
    id: String,
    /// CSV output (standard output if omitted).
    #[arg(long, short)]
    out: Option<PathBuf>,
    /// Directory receiving one JSON-lines event log per run.
    #[arg(long)]
    events: Option<PathBuf>,
    /// Directory receiving the final model of every run as DOT.
    #[arg(long)]
    models: Option<PathBuf>,
    #[arg(long)]
    workers: Option<usize>,
}

fn strategy(s: StrategyArg) -> (UpdateStrategy, Selection) {
    match s {
        StrategyArg::MostRecent => (UpdateStrategy::MostRecent, Selection::MostRecent),
        StrategyArg::MostFrequent => (UpdateStrategy::MostFrequent, Selection::MostFrequent),
    }
}

impl RunArgs {
    fn config(&self) -> Result<ExperimentConfig> {
        let framework = match self.framework {
            FrameworkArg::Mat => Framework::Mat,
            FrameworkArg::Ceal => Framework::Ceal,
        };
        let learner = match self.learner {
            LearnerArg::LstarRs => LearnerKind::LstarRs,
            LearnerArg::Kv => LearnerKind::Kv,
        };
        let mut cfg = ExperimentConfig::new(self.id.clone(), self.target.clone(), framework, learner);
        cfg.update = strategy(self.update).0;
        cfg.selection = strategy(self.selection).1;
        cfg.repeats = RepeatsPolicy::new(self.min_repeats, self.max_repeats, self.threshold)?;
        cfg.noise_kind = match self.noise_kind {
            NoiseArg::None => NoiseKind::None,
            NoiseArg::Input => NoiseKind::Input,
            NoiseArg::Output => NoiseKind::Output,
        };
        cfg.noise_level = self.noise_level;
        cfg.sampler = SamplerParams {
            infix_mean: self.infix_mean,
            extra_states: self.extra_states,
        };
        cfg.survive_budget = self.survive_budget;
        cfg.symbol_budget = self.symbol_budget;
        cfg.runs = self.runs;
        cfg.base_seed = self.base_seed;
        if let (Some(at_test), Some(target)) = (self.mutation_at, &self.mutation_target) {
            cfg.mutation = Some(MutationSpec {
                at_test,
                target: target.clone(),
            });
        }
        Ok(cfg)
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(File::create(p).with_context(|| format!("creating {}", p.display()))?),
        None => Box::new(io::stdout().lock()),
    })
}

fn read_machine(path: &Path) -> Result<MealyMachine> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_dot(&text).with_context(|| format!("parsing {}", path.display()))
}

fn run(args: RunArgs) -> Result<()> {
    let experiment = Experiment::load(args.config()?)?;
    let records = if args.events.is_some() || args.models.is_some() {
        // sequential, so logs can be written as runs complete
        let mut records = Vec::new();
        for index in 0..experiment.config.runs {
            let log = if args.events.is_some() {
                EventLog::enabled()
            } else {
                EventLog::disabled()
            };
            let (record, log) = experiment.run_logged(index, log);
            if let Some(dir) = &args.events {
                fs::create_dir_all(dir)?;
                log.write_jsonl(File::create(dir.join(format!("{}-{index}.jsonl", args.id)))?)?;
            }
            if let (Some(dir), Some(model)) = (&args.models, &record.model) {
                fs::create_dir_all(dir)?;
                fs::write(dir.join(format!("{}-{index}.dot", args.id)), write_dot(model))?;
            }
            records.push(record);
        }
        records
    } else {
        experiment.run_all(worker_count(args.workers))
    };
    let successes = records.iter().filter(|r| r.success).count();
    eprintln!("{successes}/{} runs succeeded", records.len());
    write_csv(&records, output(args.out.as_deref())?)?;
    Ok(())
}

fn bench(config: &Path, out: Option<&Path>, workers: Option<usize>) -> Result<()> {
    let cells = load_config(config)?;
    let experiments = cells.into_iter().map(Experiment::load).collect::<Result<Vec<_>, _>>()?;
    let records = run_grid(&experiments, worker_count(workers));
    for x in &experiments {
        let own = records.iter().filter(|r| r.experiment_id == x.config.id);
        let (n, ok) = own.fold((0, 0), |(n, ok), r| (n + 1, ok + r.success as usize));
        eprintln!("{}: {ok}/{n}", x.config.id);
    }
    write_csv(&records, output(out)?)?;
    Ok(())
}

fn verify(model: &Path, target: &Path) -> Result<bool> {
    let (m, t) = (read_machine(model)?, read_machine(target)?);
    match m.equivalent(&t)? {
        None => {
            println!("equivalent");
            Ok(true)
        }
        Some(w) => {
            let expected = t.run_word(w.input())?;
            println!(
                "counterexample: {} -> model {} / target {}",
                m.inputs().display(w.input()),
                m.outputs().display(w.output()),
                t.outputs().display(&expected)
            );
            Ok(false)
        }
    }
}

fn gen(states: usize, inputs: usize, outputs: usize, seed: u64) -> Result<()> {
    if inputs == 0 || outputs == 0 {
        bail!("alphabets must not be empty");
    }
    let i = Alphabet::new((0..inputs).map(|k| format!("i{k}")))?;
    let o = Alphabet::new((0..outputs).map(|k| format!("o{k}")))?;
    print!("{}", write_dot(&MealyMachine::random(states, i, o, seed)?));
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(args) => run(args).map(|()| true),
        Command::Bench { config, out, workers } => bench(&config, out.as_deref(), workers).map(|()| true),
        Command::Verify { model, target } => verify(&model, &target),
        Command::Gen {
            states,
            inputs,
            outputs,
            seed,
        } => gen(states, inputs, outputs, seed).map(|()| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
