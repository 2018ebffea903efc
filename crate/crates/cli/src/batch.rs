//! Batch execution of an experiment grid and the run manifest.

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use asyncbo::simulator::{Mode, RunStatus, Simulation};
use asyncbo::trace_io::save_trace;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::spec::{ExperimentSpec, PlannedRun};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT: &str = "asyncbo-manifest v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunState {
    /// Not finished; seen in manifests of interrupted batches.
    Pending,
    Complete,
    /// The objective failed mid-run; the partial trace was written.
    Aborted,
    /// No trace could be produced.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub objective: String,
    pub rule: String,
    pub workers: usize,
    pub seed: u64,
    pub mode: Mode,
    pub state: RunState,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completions: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format: String,
    pub version: String,
    pub spec_hash: String,
    pub spec: ExperimentSpec,
    pub seeds: Vec<u64>,
    pub runs: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
    }

    fn write(&self, dir: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }

    pub fn failures(&self) -> usize {
        self.runs.iter().filter(|r| r.state != RunState::Complete).count()
    }
}

fn entry(run: &PlannedRun, state: RunState) -> ManifestEntry {
    ManifestEntry {
        file: run.file_name.clone(),
        objective: run.config.objective.clone(),
        rule: run.config.rule.to_string(),
        workers: run.config.workers,
        seed: run.config.seed,
        mode: run.mode,
        state,
        message: None,
        completions: None,
    }
}

fn execute_one(run: &PlannedRun, dir: &Path) -> ManifestEntry {
    let trace = match Simulation::new(&run.config, run.mode) {
        Ok(sim) => sim.run(),
        Err(e) => {
            log::error!("{}: {e}", run.file_name);
            return ManifestEntry { message: Some(e.to_string()), ..entry(run, RunState::Failed) };
        }
    };
    if let Err(e) = save_trace(&trace, &dir.join(&run.file_name)) {
        log::error!("{}: {e}", run.file_name);
        return ManifestEntry { message: Some(e.to_string()), ..entry(run, RunState::Failed) };
    }
    let completions = Some(trace.completions().len());
    match trace.meta.status {
        RunStatus::Complete => ManifestEntry { completions, ..entry(run, RunState::Complete) },
        RunStatus::Aborted(reason) => {
            log::warn!("{} aborted: {reason}", run.file_name);
            ManifestEntry { completions, message: Some(reason), ..entry(run, RunState::Aborted) }
        }
    }
}

/// Runs every cell of `spec` on `spec.jobs` threads and writes one trace
/// per run plus `manifest.json` into `spec.out`. The manifest is written
/// with every run pending before execution starts and rewritten at the end.
pub fn execute(spec: &ExperimentSpec) -> Result<Manifest> {
    let dir = &spec.out;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let planned = spec.expand();
    let mut manifest = Manifest {
        format: MANIFEST_FORMAT.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        spec_hash: spec.hash(),
        spec: spec.clone(),
        seeds: (spec.seed_base..spec.seed_base + spec.seeds as u64).collect(),
        runs: planned.iter().map(|r| entry(r, RunState::Pending)).collect(),
    };
    manifest.write(dir)?;

    let pool = rayon::ThreadPoolBuilder::new().num_threads(spec.jobs).build()?;
    manifest.runs = pool.install(|| {
        planned
            .par_iter()
            .map(|run| {
                log::info!("running {}", run.file_name);
                execute_one(run, dir)
            })
            .collect()
    });
    manifest.write(dir)?;
    Ok(manifest)
}
