//! Experiment configuration files (TOML).
//!
//! A config describes one problem and a base run. Optional `[[variants]]`
//! entries override the algorithm, delay or schedules to produce several
//! runs over the same problem and seed list.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use asgd_core::delay::DelayModel;
use asgd_core::engine::{Algorithm, RunConfig, DEFAULT_ANALYSIS_HORIZON, DEFAULT_HISTORY_CAPACITY};
use asgd_core::problems::{Problem, ProblemSpec};
use asgd_core::schedules::{BatchSchedule, StepSchedule};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub schema_version: u32,
    pub problem: ProblemSpec,
    pub delay: DelayModel,
    pub step_schedule: StepSchedule,
    pub batch_schedule: BatchSchedule,
    pub algorithm: AlgorithmSection,
    pub run: RunSection,
    #[serde(default)]
    pub output: OutputSection,
    #[serde(default)]
    pub variants: Vec<Variant>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AlgorithmSection {
    pub name: Algorithm,
    /// Divide the gradient sum by `M` in the update.
    #[serde(default)]
    pub average: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub iterations: usize,
    pub seeds: Vec<u64>,
    #[serde(default = "default_history")]
    pub history_capacity: usize,
    #[serde(default)]
    pub allow_inadmissible: bool,
    /// Force the per-event worker simulation for system delays.
    #[serde(default)]
    pub exact_events: bool,
    #[serde(default = "default_horizon")]
    pub analysis_horizon: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    /// Output directory; `--out-dir` takes precedence.
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Fill the `lyapunov` trace column.
    #[serde(default = "yes")]
    pub lyapunov: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            dir: None,
            lyapunov: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Variant {
    pub name: String,
    #[serde(default)]
    pub algorithm: Option<AlgorithmSection>,
    #[serde(default)]
    pub delay: Option<DelayModel>,
    #[serde(default)]
    pub step_schedule: Option<StepSchedule>,
    #[serde(default)]
    pub batch_schedule: Option<BatchSchedule>,
}

fn default_history() -> usize {
    DEFAULT_HISTORY_CAPACITY
}

fn default_horizon() -> usize {
    DEFAULT_ANALYSIS_HORIZON
}

fn yes() -> bool {
    true
}

/// One named run configuration, executed once per seed.
#[derive(Debug, Clone)]
pub struct Job {
    pub name: String,
    pub config: RunConfig,
    pub seeds: Vec<u64>,
}

impl Job {
    pub fn for_seed(&self, seed: u64) -> RunConfig {
        RunConfig {
            seed,
            ..self.config.clone()
        }
    }
}

pub fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse(&text)
}

/// Parses and validates a config document.
pub fn parse(text: &str) -> Result<ConfigFile> {
    let table: toml::Table =
        toml::from_str(text).map_err(|e| CliError::config("(document)", e.message()))?;
    let config: ConfigFile = serde_path_to_error::deserialize(toml::Value::Table(table))
        .map_err(|e| {
            let mut key = e.path().to_string();
            let message = e.into_inner().message().to_string();
            if let Some(field) = message
                .strip_prefix("missing field `")
                .and_then(|m| m.strip_suffix('`'))
            {
                key = if key == "." { field.to_string() } else { format!("{key}.{field}") };
            }
            if key == "." {
                key = "(document)".to_string();
            }
            CliError::config(key, message)
        })?;
    config.validate()?;
    Ok(config)
}

impl ConfigFile {
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(CliError::config(
                "schema_version",
                format!("unsupported version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        if self.run.iterations == 0 {
            return Err(CliError::config("run.iterations", "must be at least 1"));
        }
        if self.run.seeds.is_empty() {
            return Err(CliError::config("run.seeds", "must list at least one seed"));
        }
        let distinct: BTreeSet<u64> = self.run.seeds.iter().copied().collect();
        if distinct.len() != self.run.seeds.len() {
            return Err(CliError::config("run.seeds", "seeds must be distinct"));
        }
        if self.run.history_capacity == 0 {
            return Err(CliError::config("run.history_capacity", "must be at least 1"));
        }
        if self.run.analysis_horizon == 0 {
            return Err(CliError::config("run.analysis_horizon", "must be at least 1"));
        }
        self.delay.validate().map_err(|e| CliError::config("delay", e))?;
        self.step_schedule
            .validate()
            .map_err(|e| CliError::config("step_schedule", e))?;
        self.batch_schedule
            .validate()
            .map_err(|e| CliError::config("batch_schedule", e))?;
        let mut names = BTreeSet::new();
        for (i, v) in self.variants.iter().enumerate() {
            let key = |field: &str| format!("variants[{i}].{field}");
            let valid_name = !v.name.is_empty()
                && v.name
                    .chars()
                    .all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '-');
            if !valid_name {
                return Err(CliError::config(
                    key("name"),
                    "names must be non-empty and use only letters, digits, '_' or '-'",
                ));
            }
            if !names.insert(v.name.as_str()) {
                return Err(CliError::config(key("name"), format!("duplicate name `{}`", v.name)));
            }
            if let Some(d) = &v.delay {
                d.validate().map_err(|e| CliError::config(key("delay"), e))?;
            }
            if let Some(s) = &v.step_schedule {
                s.validate().map_err(|e| CliError::config(key("step_schedule"), e))?;
            }
            if let Some(b) = &v.batch_schedule {
                b.validate().map_err(|e| CliError::config(key("batch_schedule"), e))?;
            }
        }
        Ok(())
    }

    pub fn build_problem(&self) -> Result<Box<dyn Problem>> {
        self.problem.build().map_err(|e| CliError::config("problem", e))
    }

    fn base_config(&self, algorithm: &AlgorithmSection) -> RunConfig {
        let mut c = RunConfig::new(
            algorithm.name,
            self.delay.clone(),
            self.step_schedule.clone(),
            self.batch_schedule.clone(),
            self.run.iterations,
            0,
        );
        c.average = algorithm.average;
        c.history_capacity = self.run.history_capacity;
        c.allow_inadmissible = self.run.allow_inadmissible;
        c.exact_events = self.run.exact_events;
        c.analysis_horizon = self.run.analysis_horizon;
        c.record_lyapunov = self.output.lyapunov;
        c
    }

    /// Expands the config into named runs.
    ///
    /// With an algorithm override only the base sections are used, under the
    /// algorithm's name. Without variants the single run is also named after
    /// its algorithm.
    pub fn jobs(&self, algorithm: Option<Algorithm>) -> Vec<Job> {
        let seeds = self.run.seeds.clone();
        if let Some(name) = algorithm {
            let section = AlgorithmSection {
                name,
                ..self.algorithm.clone()
            };
            return vec![Job {
                name: name.name().to_string(),
                config: self.base_config(&section),
                seeds,
            }];
        }
        if self.variants.is_empty() {
            return vec![Job {
                name: self.algorithm.name.name().to_string(),
                config: self.base_config(&self.algorithm),
                seeds,
            }];
        }
        self.variants
            .iter()
            .map(|v| {
                let mut config = self.base_config(v.algorithm.as_ref().unwrap_or(&self.algorithm));
                if let Some(d) = &v.delay {
                    config.delay = d.clone();
                }
                if let Some(s) = &v.step_schedule {
                    config.step = s.clone();
                }
                if let Some(b) = &v.batch_schedule {
                    config.batch = b.clone();
                }
                Job {
                    name: v.name.clone(),
                    config,
                    seeds: seeds.clone(),
                }
            })
            .collect()
    }
}
