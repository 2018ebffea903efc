//! WebAssembly bindings for the browser demo in `www/`.
//!
//! Every exported function takes plain numbers and strings and returns a JSON
//! document, so the page needs no generated type bindings beyond the
//! functions themselves.

use asyncbo::acquisition::{
    propose, AnalyticBase, ExpectedLogEiSurface, KbSurface, LogEiSurface, PenalizedUcbSurface, PenaltyMode,
    PenalizerConfig, Rule, RuleParams, UcbSurface,
};
use asyncbo::gp::{fit_hyperparameters, fit_posterior, Dataset, FitConfig, GpModel, KernelHyperparams, LengthscalePrior};
use asyncbo::metrics::{distance_series, log_regret};
use asyncbo::objectives::{Family, Objective};
use asyncbo::optimizer::{OptimizerConfig, Surface};
use asyncbo::rng::{Purpose, Streams};
use asyncbo::sampling::halton_points;
use asyncbo::simulator::{run_async, RunConfig};
use asyncbo::trace_io::records_to_string;
use serde::Serialize;
use wasm_bindgen::prelude::*;

/// 1-d posterior and acquisition surface on an evenly spaced grid.
#[derive(Debug, Serialize)]
pub struct Curve {
    pub grid: Vec<f64>,
    pub mean: Vec<f64>,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// None for rules without a deterministic surface (random, TS, AEGIS).
    pub acquisition: Option<Vec<f64>>,
    pub proposal: f64,
    pub lengthscale: f64,
    pub signal_variance: f64,
    pub noise_variance: f64,
}

/// Summary of one simulated asynchronous run.
#[derive(Debug, Serialize)]
pub struct RunSummary {
    pub times: Vec<f64>,
    pub log_regret: Vec<f64>,
    pub delta_query: Vec<usize>,
    pub delta: Vec<f64>,
    pub points: Vec<Vec<f64>>,
    pub workers: Vec<i64>,
    pub csv: String,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn demo_optimizer() -> OptimizerConfig {
    OptimizerConfig { num_candidates_per_dim: 200, num_restarts: 4, ..Default::default() }
}

fn surface_values(model: &GpModel, rule: Rule, busy: &[Vec<f64>], params: &RuleParams, grid: &[Vec<f64>], seed: u64) -> Result<Option<Vec<f64>>, String> {
    let streams = Streams::new(seed);
    let eval = |s: &dyn Surface| Some(s.values(grid));
    let values = match rule {
        Rule::Ucb => eval(&UcbSurface { model, beta: params.beta }),
        Rule::LogEi => {
            let incumbent = model.best_std().ok_or("LogEI needs at least one observation")?;
            eval(&LogEiSurface { model, incumbent })
        }
        Rule::KbUcb => eval(&KbSurface::new(AnalyticBase::Ucb { beta: params.beta }, model, busy).map_err(err)?),
        Rule::KbLogEi => eval(&KbSurface::new(AnalyticBase::LogEi, model, busy).map_err(err)?),
        Rule::ExpectedLogEi => {
            let mut rng = streams.rng(Purpose::Fantasies, 0);
            eval(&ExpectedLogEiSurface::new(model, busy, params.num_fantasies, &mut rng).map_err(err)?)
        }
        Rule::LpUcb | Rule::LlpUcb => {
            let mode = if rule == Rule::LpUcb { PenaltyMode::Global } else { PenaltyMode::Local };
            let cfg = PenalizerConfig { gamma: params.gamma, p: params.p, local_candidates: params.local_candidates };
            let mut rng = streams.rng(Purpose::AcqRestarts, 0);
            let candidates = halton_points(demo_optimizer().num_candidates(1), 1, &mut rng).map_err(err)?;
            eval(&PenalizedUcbSurface::new(model, busy, params.beta, mode, &cfg, &candidates, &mut rng).map_err(err)?)
        }
        Rule::Random | Rule::Thompson | Rule::Aegis => None,
    };
    Ok(values)
}

/// Fits a GP to 1-d observations on `[0, 1]` (hyperparameters by MAP when
/// `fit` is set and there are at least two points) and evaluates `rule` with
/// pending points `busy`.
pub fn acquisition_curve_impl(xs: &[f64], ys: &[f64], busy: &[f64], rule: &str, fit: bool, points: usize, seed: u64) -> Result<Curve, String> {
    let rule: Rule = rule.parse().map_err(err)?;
    if xs.is_empty() {
        return Err("add at least one observation".into());
    }
    if points < 2 {
        return Err("need at least two grid points".into());
    }
    let inputs: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
    let data = Dataset::from_observations(1, inputs, ys.to_vec()).map_err(err)?;
    let init = KernelHyperparams::isotropic(1, 0.2);
    let hyper = if fit && data.len() >= 2 {
        let mut rng = Streams::new(seed).rng(Purpose::HyperRestarts, 0);
        fit_hyperparameters(&data, &init, &LengthscalePrior::dimension_scaled(1), &FitConfig::default(), &mut rng)
            .map_err(err)?
            .hyper
    } else {
        init
    };
    let model = fit_posterior(&data, &hyper).map_err(err)?;
    let busy: Vec<Vec<f64>> = busy.iter().map(|&b| vec![b]).collect();
    let params = RuleParams { num_fantasies: 64, ..Default::default() };

    let grid: Vec<Vec<f64>> = (0..points).map(|i| vec![i as f64 / (points - 1) as f64]).collect();
    let (mean_std, var_std) = model.predict_many(&grid);
    let s = data.standardizer();
    let mean: Vec<f64> = mean_std.iter().map(|&m| s.inverse(m)).collect();
    let band: Vec<f64> = var_std.iter().map(|&v| 2.0 * v.max(0.0).sqrt() * s.stddev).collect();
    let acquisition = surface_values(&model, rule, &busy, &params, &grid, seed)?;
    let proposal = propose(rule, &params, &model, &busy, &demo_optimizer(), &Streams::new(seed), 0).map_err(err)?;
    Ok(Curve {
        grid: grid.iter().map(|g| g[0]).collect(),
        lower: mean.iter().zip(&band).map(|(m, b)| m - b).collect(),
        upper: mean.iter().zip(&band).map(|(m, b)| m + b).collect(),
        mean,
        acquisition,
        proposal: proposal.x[0],
        lengthscale: hyper.lengthscales[0],
        signal_variance: hyper.signal_variance,
        noise_variance: hyper.noise_variance,
    })
}

/// Simulates one asynchronous run with a reduced inner optimizer.
pub fn simulate_impl(objective: &str, rule: &str, workers: usize, evals: usize, seed: u64) -> Result<RunSummary, String> {
    let rule: Rule = rule.parse().map_err(err)?;
    let mut cfg = RunConfig::new(objective, rule, workers, seed).with_evals(evals);
    cfg.optimizer = demo_optimizer();
    cfg.params.num_fantasies = 64;
    cfg.params.num_features = 256;
    let trace = run_async(&cfg).map_err(err)?;
    let (delta_query, delta) = distance_series(&trace).into_iter().unzip();
    Ok(RunSummary {
        times: trace.records.iter().map(|r| r.sim_time).collect(),
        log_regret: log_regret(&trace),
        delta_query,
        delta,
        points: trace.records.iter().map(|r| r.x.clone()).collect(),
        workers: trace.records.iter().map(|r| r.worker_id).collect(),
        csv: records_to_string(&trace.records, trace.meta.dim).map_err(err)?,
    })
}

/// Objective names with a valid default dimension, and rule names.
pub fn catalog_impl() -> serde_json::Value {
    let objectives: Vec<String> = Family::ALL
        .iter()
        .filter_map(|f| [2, 3, 4, 6].into_iter().map(|d| format!("{}-{d}", f.name())).find(|n| Objective::from_name(n).is_ok()))
        .collect();
    let rules: Vec<&str> = Rule::ALL.iter().map(|r| r.name()).collect();
    serde_json::json!({ "objectives": objectives, "rules": rules })
}

fn to_js<T: Serialize>(r: Result<T, String>) -> Result<String, JsError> {
    let v = r.map_err(|e| JsError::new(&e))?;
    serde_json::to_string(&v).map_err(|e| JsError::new(&e.to_string()))
}

#[wasm_bindgen]
pub fn acquisition_curve(xs: Vec<f64>, ys: Vec<f64>, busy: Vec<f64>, rule: &str, fit: bool, points: usize, seed: u64) -> Result<String, JsError> {
    to_js(acquisition_curve_impl(&xs, &ys, &busy, rule, fit, points, seed))
}

#[wasm_bindgen]
pub fn simulate(objective: &str, rule: &str, workers: usize, evals: usize, seed: u64) -> Result<String, JsError> {
    to_js(simulate_impl(objective, rule, workers, evals, seed))
}

#[wasm_bindgen]
pub fn catalog() -> String {
    catalog_impl().to_string()
}
