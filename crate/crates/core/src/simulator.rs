//! Discrete-event simulation of asynchronous BO with `q` workers in simulated
//! time, and the single-worker sequential baseline.
//!
//! The initial design is evaluated at time 0 without consuming time. Then
//! every worker starts on a further quasi-random point; each completion is
//! appended to the data, the surrogate is refit, and the freed worker gets a
//! new proposal conditioned on the other workers' pending points.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::acquisition::{propose, Rule, RuleParams};
use crate::error::{Error, Result};
use crate::gp::{fit_hyperparameters, fit_posterior, Dataset, FitConfig, KernelHyperparams, LengthscalePrior};
use crate::metrics::busy_distance;
use crate::objectives::{DurationModel, Objective};
use crate::optimizer::OptimizerConfig;
use crate::rng::{Purpose, Streams};
use crate::sampling::halton_points;

/// Worker id recorded for the initial design.
pub const INITIAL_WORKER: i64 = -1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Async,
    Sequential,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub objective: String,
    pub rule: Rule,
    pub workers: usize,
    /// Simulated-time budget T; proposals are issued only up to T.
    pub budget_time: Option<f64>,
    /// Maximum number of worker completions (the initial design not counted).
    pub budget_evals: Option<usize>,
    pub seed: u64,
    /// Initial design size; `3·d` when unset.
    #[serde(default)]
    pub n_initial: Option<usize>,
    #[serde(default = "default_theta")]
    pub duration_theta: f64,
    #[serde(default)]
    pub params: RuleParams,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub fit: FitConfig,
}

fn default_theta() -> f64 {
    DurationModel::default().theta
}

impl RunConfig {
    /// Defaults for everything except the experiment coordinates.
    pub fn new(objective: &str, rule: Rule, workers: usize, seed: u64) -> Self {
        Self {
            objective: objective.to_string(),
            rule,
            workers,
            budget_time: None,
            budget_evals: None,
            seed,
            n_initial: None,
            duration_theta: default_theta(),
            params: RuleParams::default(),
            optimizer: OptimizerConfig::default(),
            fit: FitConfig::default(),
        }
    }

    pub fn with_time(mut self, t: f64) -> Self {
        self.budget_time = Some(t);
        self
    }

    pub fn with_evals(mut self, n: usize) -> Self {
        self.budget_evals = Some(n);
        self
    }

    pub fn validate(&self) -> Result<Objective> {
        let obj = Objective::from_name(&self.objective)?;
        if self.workers == 0 {
            return Err(Error::InvalidArgument("need at least one worker".into()));
        }
        match (self.budget_time, self.budget_evals) {
            (None, None) => return Err(Error::InvalidArgument("set a time budget, an evaluation budget or both".into())),
            (Some(t), _) if !(t >= 0.0) => return Err(Error::InvalidArgument(format!("time budget must be >= 0, got {t}"))),
            _ => {}
        }
        DurationModel::new(self.duration_theta)?;
        self.params.validate()?;
        let oc = &self.optimizer;
        if oc.num_candidates_per_dim == 0 || oc.num_restarts == 0 || oc.max_iters == 0 {
            return Err(Error::InvalidArgument(format!("optimizer settings must be positive: {oc:?}")));
        }
        Ok(obj)
    }

    pub fn n_initial_for(&self, dim: usize) -> usize {
        self.n_initial.unwrap_or(3 * dim)
    }
}

/// One completed evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub sim_time: f64,
    pub worker_id: i64,
    pub x: Vec<f64>,
    /// Objective value in native units.
    pub y_raw: f64,
    /// Best native value so far, initial design included.
    pub incumbent: f64,
    /// Distance of the proposal issued at this step to the other pending
    /// points (async) or to the previous `q − 1` queries (sequential). NaN
    /// when no proposal was issued or the reference set was empty.
    pub delta: f64,
    pub mean_lengthscale: f64,
    /// Mean absolute change of the lengthscales since the previous refit.
    pub delta_lengthscale: f64,
    pub lengthscales: Vec<f64>,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "state", content = "reason")]
pub enum RunStatus {
    Complete,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config: RunConfig,
    pub mode: Mode,
    pub dim: usize,
    pub optimum: f64,
    pub minimize: bool,
    /// Records `0..n_initial` are the initial design; they are part of the
    /// data but do not count as completions.
    pub n_initial: usize,
    pub status: RunStatus,
    /// Records whose hyperparameter fit failed and kept the previous values.
    pub fit_fallbacks: Vec<usize>,
    /// Records whose proposal came from an unrefined raw candidate.
    pub degraded_proposals: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrace {
    pub meta: RunMeta,
    pub records: Vec<Record>,
}

impl RunTrace {
    /// The best evaluated point and its native value.
    pub fn final_incumbent(&self) -> Option<(&[f64], f64)> {
        let better = |a: f64, b: f64| if self.meta.minimize { a < b } else { a > b };
        let mut best: Option<&Record> = None;
        for r in &self.records {
            if best.is_none_or(|b| better(r.y_raw, b.y_raw)) {
                best = Some(r);
            }
        }
        best.map(|r| (r.x.as_slice(), r.y_raw))
    }

    /// Worker completions (initial design excluded).
    pub fn completions(&self) -> &[Record] {
        &self.records[self.meta.n_initial.min(self.records.len())..]
    }
}

#[derive(Debug, Clone)]
struct Event {
    time: f64,
    worker: usize,
    x: Vec<f64>,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    /// Reversed so the max-heap pops the earliest event, lowest worker first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then(other.worker.cmp(&self.worker))
    }
}

/// A run in progress; [`Simulation::step`] processes one completion.
pub struct Simulation {
    objective: Objective,
    mode: Mode,
    cfg: RunConfig,
    streams: Streams,
    durations: DurationModel,
    prior: LengthscalePrior,
    data: Dataset,
    hyper: KernelHyperparams,
    prev_lengthscales: Option<Vec<f64>>,
    queue: BinaryHeap<Event>,
    busy: Vec<Option<Vec<f64>>>,
    /// Worker queries in issue order (used for the sequential distance).
    issued: Vec<Vec<f64>>,
    completions: usize,
    best: f64,
    trace: RunTrace,
    finished: bool,
}

impl Simulation {
    pub fn new(cfg: &RunConfig, mode: Mode) -> Result<Self> {
        let objective = cfg.validate()?;
        let d = objective.dim;
        let n0 = cfg.n_initial_for(d);
        let streams = Streams::new(cfg.seed);
        let slots = match mode {
            Mode::Async => cfg.workers,
            Mode::Sequential => 1,
        };
        let prior = LengthscalePrior::dimension_scaled(d);
        let ls0 = prior.loc.exp().clamp(cfg.fit.bounds.lengthscale.0, cfg.fit.bounds.lengthscale.1);
        let hyper = KernelHyperparams::new(vec![ls0; d], 1.0, 1e-3)?;
        let meta = RunMeta {
            config: cfg.clone(),
            mode,
            dim: d,
            optimum: objective.optimum,
            minimize: objective.minimize,
            n_initial: n0,
            status: RunStatus::Complete,
            fit_fallbacks: Vec::new(),
            degraded_proposals: Vec::new(),
        };
        let mut sim = Self {
            mode,
            cfg: cfg.clone(),
            streams,
            durations: DurationModel::new(cfg.duration_theta)?,
            prior,
            data: Dataset::new(d),
            hyper,
            prev_lengthscales: None,
            queue: BinaryHeap::new(),
            busy: vec![None; slots],
            issued: Vec::new(),
            completions: 0,
            best: f64::NAN,
            trace: RunTrace { meta, records: Vec::new() },
            finished: false,
            objective,
        };

        let points = halton_points(n0 + slots, d, &mut streams.rng(Purpose::Init, 0))?;
        for x in &points[..n0] {
            let y = match sim.objective.evaluate(x) {
                Ok(y) => y,
                Err(e) => {
                    sim.abort(e);
                    return Ok(sim);
                }
            };
            sim.observe(x.clone(), y)?;
            let nan = f64::NAN;
            sim.trace.records.push(Record {
                sim_time: 0.0,
                worker_id: INITIAL_WORKER,
                x: x.clone(),
                y_raw: y,
                incumbent: sim.best,
                delta: nan,
                mean_lengthscale: nan,
                delta_lengthscale: nan,
                lengthscales: vec![nan; d],
                signal_variance: nan,
                noise_variance: nan,
            });
        }
        if cfg.budget_evals == Some(0) {
            sim.finished = true;
            return Ok(sim);
        }
        for (w, x) in points[n0..].iter().enumerate() {
            sim.schedule(w, x.clone(), 0.0);
        }
        Ok(sim)
    }

    fn abort(&mut self, e: Error) {
        log::warn!("run aborted: {e}");
        self.trace.meta.status = RunStatus::Aborted(e.to_string());
        self.finished = true;
    }

    fn observe(&mut self, x: Vec<f64>, y: f64) -> Result<()> {
        let internal = if self.objective.minimize { -y } else { y };
        self.data.push(x, internal)?;
        if self.best.is_nan() || self.objective.better(y, self.best) {
            self.best = y;
        }
        Ok(())
    }

    fn schedule(&mut self, worker: usize, x: Vec<f64>, now: f64) {
        let index = self.issued.len() as u64;
        let dur = self.durations.sample(&mut self.streams.rng(Purpose::Durations, index));
        self.busy[worker] = Some(x.clone());
        self.issued.push(x.clone());
        self.queue.push(Event { time: now + dur, worker, x });
    }

    pub fn is_finished(&self) -> bool {
        self.finished
    }

    pub fn objective(&self) -> &Objective {
        &self.objective
    }

    /// Pending queries as `(worker, x)`.
    pub fn busy(&self) -> Vec<(usize, &[f64])> {
        self.busy.iter().enumerate().filter_map(|(w, x)| x.as_deref().map(|x| (w, x))).collect()
    }

    pub fn trace(&self) -> &RunTrace {
        &self.trace
    }

    pub fn into_trace(self) -> RunTrace {
        self.trace
    }

    fn refit(&mut self, k: usize) -> Result<crate::gp::GpModel> {
        let record = self.trace.records.len();
        if self.data.len() >= 2 {
            let mut rng = self.streams.rng(Purpose::HyperRestarts, k as u64);
            match fit_hyperparameters(&self.data, &self.hyper, &self.prior, &self.cfg.fit, &mut rng) {
                Ok(out) if !out.warning => self.hyper = out.hyper,
                _ => self.trace.meta.fit_fallbacks.push(record),
            }
        }
        fit_posterior(&self.data, &self.hyper)
    }

    /// Processes the next completion. Returns `false` once the run is over.
    pub fn step(&mut self) -> bool {
        if self.finished {
            return false;
        }
        match self.try_step() {
            Ok(more) => {
                self.finished = !more;
                more
            }
            Err(e) => {
                self.abort(e);
                false
            }
        }
    }

    fn try_step(&mut self) -> Result<bool> {
        let Some(ev) = self.queue.pop() else {
            return Ok(false);
        };
        if self.cfg.budget_time.is_some_and(|t| ev.time > t) {
            return Ok(false);
        }
        let y = self.objective.evaluate(&ev.x)?;
        self.observe(ev.x.clone(), y)?;
        self.busy[ev.worker] = None;
        let k = self.completions;
        self.completions += 1;
        let model = self.refit(k)?;

        let h = model.hyper();
        let mean_ls = h.mean_lengthscale();
        let delta_ls = match &self.prev_lengthscales {
            Some(prev) => {
                prev.iter().zip(&h.lengthscales).map(|(a, b)| (a - b).abs()).sum::<f64>() / prev.len() as f64
            }
            None => f64::NAN,
        };
        self.prev_lengthscales = Some(h.lengthscales.clone());
        let mut record = Record {
            sim_time: ev.time,
            worker_id: ev.worker as i64,
            x: ev.x,
            y_raw: y,
            incumbent: self.best,
            delta: f64::NAN,
            mean_lengthscale: mean_ls,
            delta_lengthscale: delta_ls,
            lengthscales: h.lengthscales.clone(),
            signal_variance: h.signal_variance,
            noise_variance: h.noise_variance,
        };

        let more = self.cfg.budget_evals.is_none_or(|n| self.completions < n);
        if more {
            let others: Vec<Vec<f64>> = self.busy.iter().flatten().cloned().collect();
            let p = propose(self.cfg.rule, &self.cfg.params, &model, &others, &self.cfg.optimizer, &self.streams, k as u64)?;
            if p.degraded {
                self.trace.meta.degraded_proposals.push(self.trace.records.len());
            }
            record.delta = match self.mode {
                Mode::Async => busy_distance(&p.x, &others).unwrap_or(f64::NAN),
                Mode::Sequential => {
                    let window = self.cfg.workers - 1;
                    let start = self.issued.len().saturating_sub(window);
                    busy_distance(&p.x, &self.issued[start..]).unwrap_or(f64::NAN)
                }
            };
            self.schedule(ev.worker, p.x, ev.time);
        }
        self.trace.records.push(record);
        Ok(more)
    }

    /// Runs to completion.
    pub fn run(mut self) -> RunTrace {
        while self.step() {}
        self.trace
    }
}

/// Asynchronous BO with `cfg.workers` workers.
pub fn run_async(cfg: &RunConfig) -> Result<RunTrace> {
    Ok(Simulation::new(cfg, Mode::Async)?.run())
}

/// Sequential BO with one worker; `cfg.workers` only sets the window of the
/// sequential distance diagnostic.
pub fn run_seq(cfg: &RunConfig) -> Result<RunTrace> {
    Ok(Simulation::new(cfg, Mode::Sequential)?.run())
}
