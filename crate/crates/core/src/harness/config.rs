use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::ceal::Selection;
use crate::error::ConfigError;
use crate::learner::LearnerKind;
use crate::sampler::SamplerParams;
use crate::sul::{NoiseKind, RepeatsPolicy};
use crate::tree::UpdateStrategy;

pub const DEFAULT_SYMBOL_BUDGET: u64 = 10_000_000;
pub const DEFAULT_SURVIVE_BUDGET: u32 = 2000;
pub const DEFAULT_RUNS: u32 = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Framework {
    Mat,
    Ceal,
}

impl Framework {
    pub const ALL: [Framework; 2] = [Framework::Mat, Framework::Ceal];

    pub fn as_str(self) -> &'static str {
        match self {
            Framework::Mat => "mat",
            Framework::Ceal => "ceal",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == name)
    }
}

/// Replace the target by the machine in `target` from system test `at_test`
/// on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MutationSpec {
    pub at_test: u64,
    pub target: PathBuf,
}

/// One cell of an experiment grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub id: String,
    pub target: PathBuf,
    pub framework: Framework,
    pub learner: LearnerKind,
    pub update: UpdateStrategy,
    pub selection: Selection,
    pub repeats: RepeatsPolicy,
    pub noise_kind: NoiseKind,
    pub noise_level: f64,
    pub sampler: SamplerParams,
    pub survive_budget: u32,
    pub symbol_budget: u64,
    pub runs: u32,
    pub base_seed: u64,
    pub mutation: Option<MutationSpec>,
}

impl ExperimentConfig {
    /// A noise-free cell with the documented defaults.
    pub fn new(id: impl Into<String>, target: impl Into<PathBuf>, framework: Framework, learner: LearnerKind) -> Self {
        Self {
            id: id.into(),
            target: target.into(),
            framework,
            learner,
            update: UpdateStrategy::MostRecent,
            selection: Selection::MostFrequent,
            repeats: RepeatsPolicy::single(),
            noise_kind: NoiseKind::None,
            noise_level: 0.0,
            sampler: SamplerParams::default(),
            survive_budget: DEFAULT_SURVIVE_BUDGET,
            symbol_budget: DEFAULT_SYMBOL_BUDGET,
            runs: DEFAULT_RUNS,
            base_seed: 0,
            mutation: None,
        }
    }

    /// Seed of run `index`.
    pub fn run_seed(&self, index: u32) -> u64 {
        self.base_seed.wrapping_add(index as u64)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        RepeatsPolicy::new(
            self.repeats.min_repeats,
            self.repeats.max_repeats,
            self.repeats.threshold,
        )
        .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.noise_level) {
            return Err(ConfigError::Invalid(format!(
                "noise level {} outside [0, 1]",
                self.noise_level
            )));
        }
        if self.noise_kind == NoiseKind::None && self.noise_level != 0.0 {
            return Err(ConfigError::Invalid("noise level set without a noise kind".into()));
        }
        if !(self.sampler.infix_mean.is_finite() && self.sampler.infix_mean >= 0.0) {
            return Err(ConfigError::Invalid(format!(
                "infix mean {} must be finite and >= 0",
                self.sampler.infix_mean
            )));
        }
        if self.survive_budget == 0 {
            return Err(ConfigError::Invalid("survive budget must be positive".into()));
        }
        if self.runs == 0 {
            return Err(ConfigError::Invalid("runs must be positive".into()));
        }
        Ok(())
    }
}

/// On-disk form of a cell. Enumerations are kept as strings so that an
/// unknown name yields a precise error.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCell {
    id: String,
    target: PathBuf,
    framework: String,
    learner: String,
    update: String,
    selection: String,
    min_repeats: u32,
    max_repeats: u32,
    #[serde(default = "default_threshold")]
    threshold: f64,
    noise_kind: String,
    noise_level: f64,
    #[serde(default = "default_infix_mean")]
    infix_mean: f64,
    #[serde(default = "default_extra_states")]
    extra_states: u32,
    #[serde(default = "default_survive_budget")]
    survive_budget: u32,
    #[serde(default = "default_symbol_budget")]
    symbol_budget: u64,
    #[serde(default = "default_runs")]
    runs: u32,
    base_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    mutation: Option<MutationSpec>,
}

fn default_threshold() -> f64 {
    RepeatsPolicy::DEFAULT_THRESHOLD
}
fn default_infix_mean() -> f64 {
    SamplerParams::default().infix_mean
}
fn default_extra_states() -> u32 {
    SamplerParams::default().extra_states
}
fn default_survive_budget() -> u32 {
    DEFAULT_SURVIVE_BUDGET
}
fn default_symbol_budget() -> u64 {
    DEFAULT_SYMBOL_BUDGET
}
fn default_runs() -> u32 {
    DEFAULT_RUNS
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    cell: Vec<RawCell>,
}

fn unsupported(field: &'static str, value: &str) -> ConfigError {
    ConfigError::UnsupportedValue {
        field,
        value: value.to_owned(),
    }
}

fn parse_update(s: &str) -> Option<UpdateStrategy> {
    match s {
        "most_recent" => Some(UpdateStrategy::MostRecent),
        "most_frequent" => Some(UpdateStrategy::MostFrequent),
        _ => None,
    }
}

fn update_str(u: UpdateStrategy) -> &'static str {
    match u {
        UpdateStrategy::MostRecent => "most_recent",
        UpdateStrategy::MostFrequent => "most_frequent",
    }
}

fn parse_selection(s: &str) -> Option<Selection> {
    match s {
        "most_recent" => Some(Selection::MostRecent),
        "most_frequent" => Some(Selection::MostFrequent),
        _ => None,
    }
}

fn selection_str(s: Selection) -> &'static str {
    match s {
        Selection::MostRecent => "most_recent",
        Selection::MostFrequent => "most_frequent",
    }
}

fn parse_noise(s: &str) -> Option<NoiseKind> {
    [NoiseKind::None, NoiseKind::Input, NoiseKind::Output]
        .into_iter()
        .find(|k| k.as_str() == s)
}

impl RawCell {
    fn into_config(self, base: &Path) -> Result<ExperimentConfig, ConfigError> {
        let learner = LearnerKind::parse(&self.learner).ok_or(ConfigError::UnsupportedLearner(self.learner.clone()))?;
        let framework = Framework::parse(&self.framework).ok_or_else(|| unsupported("framework", &self.framework))?;
        let update = parse_update(&self.update).ok_or_else(|| unsupported("update", &self.update))?;
        let selection = parse_selection(&self.selection).ok_or_else(|| unsupported("selection", &self.selection))?;
        let noise_kind = parse_noise(&self.noise_kind).ok_or_else(|| unsupported("noise_kind", &self.noise_kind))?;
        let repeats = RepeatsPolicy::new(self.min_repeats, self.max_repeats, self.threshold)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        let cfg = ExperimentConfig {
            id: self.id,
            target: base.join(self.target),
            framework,
            learner,
            update,
            selection,
            repeats,
            noise_kind,
            noise_level: self.noise_level,
            sampler: SamplerParams {
                infix_mean: self.infix_mean,
                extra_states: self.extra_states,
            },
            survive_budget: self.survive_budget,
            symbol_budget: self.symbol_budget,
            runs: self.runs,
            base_seed: self.base_seed,
            mutation: self.mutation.map(|m| MutationSpec {
                at_test: m.at_test,
                target: base.join(m.target),
            }),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            id: cfg.id.clone(),
            target: cfg.target.clone(),
            framework: cfg.framework.as_str().into(),
            learner: cfg.learner.as_str().into(),
            update: update_str(cfg.update).into(),
            selection: selection_str(cfg.selection).into(),
            min_repeats: cfg.repeats.min_repeats,
            max_repeats: cfg.repeats.max_repeats,
            threshold: cfg.repeats.threshold,
            noise_kind: cfg.noise_kind.as_str().into(),
            noise_level: cfg.noise_level,
            infix_mean: cfg.sampler.infix_mean,
            extra_states: cfg.sampler.extra_states,
            survive_budget: cfg.survive_budget,
            symbol_budget: cfg.symbol_budget,
            runs: cfg.runs,
            base_seed: cfg.base_seed,
            mutation: cfg.mutation.clone(),
        }
    }
}

/// Parses a config text. Relative target paths are resolved against `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let raw: RawFile = toml::from_str(text)?;
    raw.cell.into_iter().map(|c| c.into_config(base)).collect()
}

/// Reads a config file: one `[[cell]]` table per experiment cell.
pub fn load_config(path: &Path) -> Result<Vec<ExperimentConfig>, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_owned(),
        source,
    })?;
    parse_config(&text, path.parent().unwrap_or(Path::new("")))
}

/// Serializes cells in the format [`parse_config`] reads. Paths are written
/// as they are stored.
pub fn write_config(cells: &[ExperimentConfig]) -> String {
    let raw = RawFile {
        cell: cells.iter().map(RawCell::from_config).collect(),
    };
    toml::to_string(&raw).expect("config cells serialize")
}

#[cfg(test)]
mod tests {
    use super::*;

    const CELL: &str = r#"
[[cell]]
id = "toggle-ceal"
target = "toggle.dot"
framework = "ceal"
learner = "lstar_rs"
update = "most_recent"
selection = "most_frequent"
min_repeats = 5
max_repeats = 10
noise_kind = "output"
noise_level = 0.05
base_seed = 7
"#;

    #[test]
    fn documented_defaults_apply() {
        let cells = parse_config(CELL, Path::new("/data")).unwrap();
        assert_eq!(cells.len(), 1);
        let c = &cells[0];
        assert_eq!(c.target, Path::new("/data/toggle.dot"));
        assert_eq!(c.framework, Framework::Ceal);
        assert_eq!(c.repeats, RepeatsPolicy::pair(5, 10).unwrap());
        assert_eq!(c.survive_budget, 2000);
        assert_eq!(c.symbol_budget, 10_000_000);
        assert_eq!(c.runs, 20);
        assert_eq!(c.sampler, SamplerParams::default());
        assert_eq!(c.run_seed(3), 10);
    }

    #[test]
    fn round_trip() {
        let mut cells = parse_config(CELL, Path::new("")).unwrap();
        let mut other = ExperimentConfig::new("b", "x.dot", Framework::Mat, LearnerKind::Kv);
        other.mutation = Some(MutationSpec {
            at_test: 50,
            target: "y.dot".into(),
        });
        cells.push(other);
        let text = write_config(&cells);
        assert_eq!(parse_config(&text, Path::new("")).unwrap(), cells);
        assert_eq!(parse_config("", Path::new("")).unwrap(), vec![]);
    }

    #[test]
    fn unknown_learner_is_rejected() {
        let text = CELL.replace("lstar_rs", "ttt");
        let err = parse_config(&text, Path::new("")).unwrap_err();
        assert!(matches!(err, ConfigError::UnsupportedLearner(ref l) if l == "ttt"));
        assert!(err.to_string().contains("unsupported learner"));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = CELL.replace("base_seed", "base_sed");
        assert!(matches!(
            parse_config(&text, Path::new("")),
            Err(ConfigError::Syntax(_))
        ));
        let text = format!("{CELL}\n[extra]\nx = 1\n");
        assert!(parse_config(&text, Path::new("")).is_err());
    }

    #[test]
    fn invalid_values_are_rejected() {
        for (from, to) in [
            ("min_repeats = 5", "min_repeats = 11"),
            ("noise_level = 0.05", "noise_level = 1.5"),
            ("\"output\"", "\"burst\""),
            ("\"ceal\"", "\"lstar\""),
            ("update = \"most_recent\"", "update = \"oldest\""),
        ] {
            assert!(parse_config(&CELL.replace(from, to), Path::new("")).is_err(), "{to}");
        }
    }
}
