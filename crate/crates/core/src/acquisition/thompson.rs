//! Thompson sampling and the AEGIS mixture of Thompson sampling, Pareto
//! exploration and mean exploitation.

use rand::Rng;

use super::analytic::MeanSurface;
use crate::error::Result;
use crate::gp::GpModel;
use crate::optimizer::{maximize, Maximum, OptimizerConfig, Surface};
use crate::sampling::{draw_posterior_path, halton_points, PathSample};

struct PathSurface<'a>(&'a PathSample);

impl Surface for PathSurface<'_> {
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.0.eval(x)
    }

    fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        Some(self.0.eval_grad(x))
    }
}

/// Maximizer of one posterior function sample.
pub fn thompson_propose(
    model: &GpModel,
    cfg: &OptimizerConfig,
    num_features: usize,
    rng: &mut impl Rng,
) -> Result<Maximum> {
    let path = draw_posterior_path(model, num_features, rng)?;
    Ok(maximize(&PathSurface(&path), cfg, rng))
}

/// Indices of the points not dominated in (maximize `a`, maximize `b`),
/// in increasing index order.
pub fn pareto_front(a: &[f64], b: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..a.len()).collect();
    order.sort_by(|&i, &j| a[j].total_cmp(&a[i]).then(b[j].total_cmp(&b[i])));
    let mut front = Vec::new();
    // Highest `b` among points with strictly larger `a` than the current group.
    let mut best_b = f64::NEG_INFINITY;
    let mut start = 0;
    while start < order.len() {
        let group_a = a[order[start]];
        let end = start + order[start..].iter().take_while(|&&i| a[i] == group_a).count();
        let group_max = b[order[start]];
        if group_max > best_b {
            front.extend(order[start..end].iter().filter(|&&i| b[i] == group_max));
            best_b = group_max;
        }
        start = end;
    }
    front.sort_unstable();
    front
}

/// The AEGIS exploration probability `min(2/√d, 1)`.
pub fn aegis_epsilon(d: usize) -> f64 {
    (2.0 / (d as f64).sqrt()).min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AegisBranch {
    Thompson,
    Pareto,
    Exploit,
}

/// One AEGIS proposal: Thompson sampling with probability ε/2, a uniform
/// pick from the (mean, std) Pareto front with probability ε/2, otherwise the
/// maximizer of the posterior mean.
pub fn aegis_propose(
    model: &GpModel,
    cfg: &OptimizerConfig,
    num_features: usize,
    rng: &mut impl Rng,
) -> Result<(Maximum, AegisBranch)> {
    let d = model.dim();
    let eps = aegis_epsilon(d);
    let u: f64 = rng.random();
    if u < eps / 2.0 {
        return Ok((thompson_propose(model, cfg, num_features, rng)?, AegisBranch::Thompson));
    }
    if u < eps {
        let candidates = halton_points(cfg.num_candidates(d).max(1), d, rng)?;
        let (mu, var) = model.predict_many(&candidates);
        let sd: Vec<f64> = var.iter().map(|v| v.sqrt()).collect();
        let front = pareto_front(&mu, &sd);
        let pick = front[rng.random_range(0..front.len())];
        let m = Maximum { x: candidates[pick].clone(), value: mu[pick], degraded: false };
        return Ok((m, AegisBranch::Pareto));
    }
    Ok((maximize(&MeanSurface { model }, cfg, rng), AegisBranch::Exploit))
}
