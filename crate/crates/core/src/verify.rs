//! Oracle checks that can be run outside the test harness, e.g. from the
//! command line. Each check recomputes a quantity along a route that does
//! not share code with the implementation it audits.

use rand::Rng;
use serde::Serialize;

use crate::acquisition::{kriging_believer, log_ei_value, log_h, ucb_value, AnalyticBase};
use crate::error::Result;
use crate::gp::{fit_posterior, Dataset, GpModel, KernelHyperparams};
use crate::objectives::DurationModel;
use crate::rng::{Purpose, RngStream};
use crate::sampling::mvn_sample;

/// One (model, busy set, x) comparison between the Monte-Carlo mean of UCB
/// over fantasy outcomes and the Kriging-Believer UCB.
#[derive(Debug, Clone, Serialize)]
pub struct FantasyUcbCase {
    pub n: usize,
    pub dim: usize,
    pub busy: usize,
    pub kb: f64,
    pub mc_mean: f64,
    pub mc_stderr: f64,
    pub agrees: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct FantasyUcbReport {
    pub draws: usize,
    pub cases: Vec<FantasyUcbCase>,
}

impl FantasyUcbReport {
    pub fn agreeing(&self) -> usize {
        self.cases.iter().filter(|c| c.agrees).count()
    }
}

fn random_model(rng: &mut impl Rng, max_n: usize, max_dim: usize) -> Result<GpModel> {
    let dim = rng.random_range(1..=max_dim);
    let n = rng.random_range(1..=max_n);
    let inputs: Vec<Vec<f64>> = (0..n).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
    let outputs: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
    let data = Dataset::from_observations(dim, inputs, outputs)?;
    let ls = (0..dim).map(|_| 0.1 + rng.random::<f64>() * 0.9).collect();
    let h = KernelHyperparams::new(ls, 0.5 + rng.random::<f64>() * 1.5, 1e-4 + rng.random::<f64>() * 0.05)?;
    fit_posterior(&data, &h)
}

/// Draws `cases` random triples (n ≤ 20, |B| ≤ 7, d ≤ 4) and averages UCB
/// over `draws` joint fantasies at the busy points, refitting the posterior
/// for each draw with frozen hyperparameters. A case agrees when the
/// Kriging-Believer value lies within three Monte-Carlo standard errors.
pub fn fantasy_ucb_check(cases: usize, draws: usize, beta: f64, seed: u64) -> Result<FantasyUcbReport> {
    let stream = RngStream::new(seed, Purpose::Custom(1));
    let mut out = Vec::with_capacity(cases);
    for case in 0..cases {
        let mut rng = stream.at(case as u64);
        let model = random_model(&mut rng, 20, 4)?;
        let dim = model.dim();
        let nb = rng.random_range(1..=7);
        let busy: Vec<Vec<f64>> = (0..nb).map(|_| (0..dim).map(|_| rng.random::<f64>()).collect()).collect();
        let x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>()).collect();

        let (mu_b, cov_b) = model.predict_joint(&busy)?;
        let samples = mvn_sample(&mu_b, &cov_b, draws, &mut rng)?;
        let mut values = Vec::with_capacity(draws);
        for yb in &samples {
            let m = model.condition_on_fantasies(&busy, yb.as_slice())?;
            let (mean, var) = m.predict(&x)?;
            values.push(ucb_value(mean, var, beta));
        }
        let mc_mean = values.iter().sum::<f64>() / draws as f64;
        let var = values.iter().map(|v| (v - mc_mean).powi(2)).sum::<f64>() / (draws as f64 - 1.0).max(1.0);
        let mc_stderr = (var / draws as f64).sqrt();
        let kb = kriging_believer(AnalyticBase::Ucb { beta }, &model, &busy, &x)?;
        let agrees = (kb - mc_mean).abs() <= 3.0 * mc_stderr + 1e-12 * (1.0 + kb.abs());
        out.push(FantasyUcbCase { n: model.len(), dim, busy: nb, kb, mc_mean, mc_stderr, agrees });
    }
    Ok(FantasyUcbReport { draws, cases: out })
}

/// `ln h(z)`, `h(z) = E[max(z + ε, 0)]` with ε standard normal, by composite
/// Simpson quadrature of `h(z) = φ(z) ∫₀^∞ s·exp(zs − s²/2) ds`.
pub fn log_h_quadrature(z: f64) -> f64 {
    let upper = if z >= 0.0 { z + 40.0 } else { (60.0 / -z).min(40.0) };
    let intervals = 200_000;
    let step = upper / intervals as f64;
    let f = |s: f64| s * (z * s - 0.5 * s * s).exp();
    let mut acc = f(0.0) + f(upper);
    for i in 1..intervals {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(i as f64 * step);
    }
    let integral = acc * step / 3.0;
    -0.5 * z * z - 0.5 * (2.0 * std::f64::consts::PI).ln() + integral.ln()
}

#[derive(Debug, Clone, Serialize)]
pub struct LogEiReport {
    /// Worst `|ln h − oracle| / max(1, |oracle|)` over the quadrature grid.
    pub max_rel_error: f64,
    pub worst_z: f64,
    pub grid_points: usize,
    pub sweep_points: usize,
    pub non_finite: usize,
}

/// Compares `ln h` against quadrature on `grid_points` evenly spaced `z` in
/// `[lo, hi]`, then evaluates LogEI at `sweep_points` random
/// (mean, variance, incumbent) triples and counts non-finite results.
pub fn log_ei_check(lo: f64, hi: f64, grid_points: usize, sweep_points: usize, seed: u64) -> LogEiReport {
    let mut max_rel_error: f64 = 0.0;
    let mut worst_z = lo;
    for i in 0..grid_points {
        let z = lo + (hi - lo) * i as f64 / (grid_points.max(2) - 1) as f64;
        let oracle = log_h_quadrature(z);
        let err = (log_h(z).0 - oracle).abs() / oracle.abs().max(1.0);
        if err > max_rel_error || err.is_nan() {
            max_rel_error = err;
            worst_z = z;
        }
    }
    let mut rng = RngStream::new(seed, Purpose::Custom(2)).at(0);
    let mut non_finite = 0;
    for _ in 0..sweep_points {
        let mean = rng.random_range(-50.0..50.0);
        let var = 10f64.powf(rng.random_range(-30.0..4.0));
        let inc = rng.random_range(-50.0..50.0);
        if !log_ei_value(mean, var, inc).is_finite() {
            non_finite += 1;
        }
    }
    LogEiReport { max_rel_error, worst_z, grid_points, sweep_points, non_finite }
}

#[derive(Debug, Clone, Serialize)]
pub struct DurationReport {
    pub draws: usize,
    pub mean: f64,
    pub min: f64,
}

pub fn duration_check(draws: usize, seed: u64) -> DurationReport {
    let model = DurationModel::default();
    let mut rng = RngStream::new(seed, Purpose::Durations).at(0);
    let (mut sum, mut min) = (0.0, f64::INFINITY);
    for _ in 0..draws {
        let t = model.sample(&mut rng);
        sum += t;
        min = min.min(t);
    }
    DurationReport { draws, mean: sum / draws as f64, min }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadrature_matches_closed_form_near_zero() {
        // h(0) = φ(0)
        let expect = -0.5 * (2.0 * std::f64::consts::PI).ln();
        assert!((log_h_quadrature(0.0) - expect).abs() < 1e-10);
    }

    #[test]
    fn small_fantasy_check_agrees() {
        let r = fantasy_ucb_check(5, 400, 2.0, 3).unwrap();
        assert_eq!(r.cases.len(), 5);
        assert!(r.agreeing() >= 4);
    }

    #[test]
    fn duration_mean_near_one() {
        let r = duration_check(20_000, 1);
        assert!((r.mean - 1.0).abs() < 0.05);
        assert!(r.min >= 0.0);
    }
}
