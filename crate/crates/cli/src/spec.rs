//! Experiment grids: the config file, flag overrides and expansion into
//! individual runs.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use asyncbo::acquisition::Rule;
use asyncbo::objectives::Objective;
use asyncbo::simulator::{Mode, RunConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Environment variable that overrides the output root of the config file.
pub const OUT_ENV: &str = "ASYNCBO_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum ModeSelection {
    Async,
    Seq,
    Both,
}

impl ModeSelection {
    pub fn modes(self) -> Vec<Mode> {
        match self {
            ModeSelection::Async => vec![Mode::Async],
            ModeSelection::Seq => vec![Mode::Sequential],
            ModeSelection::Both => vec![Mode::Async, Mode::Sequential],
        }
    }
}

/// Keys accepted in a config file; every key is optional and may be
/// overridden on the command line.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub objectives: Option<Vec<String>>,
    pub rules: Option<Vec<Rule>>,
    pub workers: Option<Vec<usize>>,
    pub seeds: Option<usize>,
    pub seed_base: Option<u64>,
    pub budget_time: Option<f64>,
    pub budget_evals: Option<usize>,
    pub mode: Option<ModeSelection>,
    pub out: Option<PathBuf>,
    pub jobs: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing {}", path.display()))
    }

    /// Fields set in `other` replace those in `self`.
    pub fn overlay(self, other: ConfigFile) -> ConfigFile {
        ConfigFile {
            objectives: other.objectives.or(self.objectives),
            rules: other.rules.or(self.rules),
            workers: other.workers.or(self.workers),
            seeds: other.seeds.or(self.seeds),
            seed_base: other.seed_base.or(self.seed_base),
            budget_time: other.budget_time.or(self.budget_time),
            budget_evals: other.budget_evals.or(self.budget_evals),
            mode: other.mode.or(self.mode),
            out: other.out.or(self.out),
            jobs: other.jobs.or(self.jobs),
        }
    }
}

/// A validated experiment grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub objectives: Vec<String>,
    pub rules: Vec<Rule>,
    pub workers: Vec<usize>,
    pub seeds: usize,
    pub seed_base: u64,
    pub budget_time: Option<f64>,
    pub budget_evals: Option<usize>,
    pub mode: ModeSelection,
    pub out: PathBuf,
    pub jobs: usize,
}

/// One cell of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedRun {
    pub config: RunConfig,
    pub mode: Mode,
    pub file_name: String,
}

impl ExperimentSpec {
    /// Validates a merged config. Missing grid axes mean an empty grid;
    /// `out` falls back to `results`.
    pub fn from_config(cfg: ConfigFile) -> Result<Self> {
        let objectives = cfg.objectives.unwrap_or_default();
        for name in &objectives {
            Objective::from_name(name)?;
        }
        let workers = cfg.workers.unwrap_or_else(|| vec![1]);
        if workers.contains(&0) {
            bail!("workers must be at least 1");
        }
        let spec = ExperimentSpec {
            objectives,
            rules: cfg.rules.unwrap_or_default(),
            workers,
            seeds: cfg.seeds.unwrap_or(1),
            seed_base: cfg.seed_base.unwrap_or(0),
            budget_time: cfg.budget_time,
            budget_evals: cfg.budget_evals,
            mode: cfg.mode.unwrap_or(ModeSelection::Async),
            out: cfg.out.unwrap_or_else(|| PathBuf::from("results")),
            jobs: cfg.jobs.unwrap_or(1).max(1),
        };
        if !spec.is_empty() && spec.budget_time.is_none() && spec.budget_evals.is_none() {
            bail!("set budget_time, budget_evals or both");
        }
        if let Some(t) = spec.budget_time {
            if !(t >= 0.0) {
                bail!("budget_time must be >= 0, got {t}");
            }
        }
        Ok(spec)
    }

    pub fn is_empty(&self) -> bool {
        self.objectives.is_empty() || self.rules.is_empty() || self.workers.is_empty() || self.seeds == 0
    }

    /// Full Cartesian product in a fixed order: objective, rule, workers,
    /// mode, seed.
    pub fn expand(&self) -> Vec<PlannedRun> {
        let mut out = Vec::new();
        for objective in &self.objectives {
            for &rule in &self.rules {
                for &q in &self.workers {
                    for mode in self.mode.modes() {
                        for seed in self.seed_base..self.seed_base + self.seeds as u64 {
                            let mut config = RunConfig::new(objective, rule, q, seed);
                            config.budget_time = self.budget_time;
                            config.budget_evals = self.budget_evals;
                            let file_name = trace_file_name(objective, rule, q, seed, mode);
                            out.push(PlannedRun { config, mode, file_name });
                        }
                    }
                }
            }
        }
        out
    }

    /// SHA-256 of the canonical JSON form of the spec.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("spec serializes");
        format!("{:x}", Sha256::digest(json.as_bytes()))
    }
}

/// `{objective}__{rule}__q{q}__s{seed}.csv`, with `__seq` before the
/// extension for sequential runs.
pub fn trace_file_name(objective: &str, rule: Rule, q: usize, seed: u64, mode: Mode) -> String {
    let suffix = match mode {
        Mode::Async => "",
        Mode::Sequential => "__seq",
    };
    format!("{objective}__{rule}__q{q}__s{seed}{suffix}.csv")
}
