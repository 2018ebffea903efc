//! UCB with (local) Lipschitz exclusion cones around the busy locations.

use rand::Rng;

use super::analytic::{ucb_value, UcbSurface};
use crate::error::{check_dim, Error, Result};
use crate::gp::GpModel;
use crate::optimizer::Surface;
use crate::sampling::halton_points;

const MIN_LIPSCHITZ: f64 = 1e-6;
const MIN_RADIUS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PenaltyMode {
    /// One Lipschitz constant for the whole box.
    Global,
    /// One constant per busy point, from a lengthscale-sized box around it.
    Local,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PenalizerConfig {
    pub gamma: f64,
    /// Power-mean exponent of the soft minimum, `p < 0`.
    pub p: f64,
    pub local_candidates: usize,
}

impl Default for PenalizerConfig {
    fn default() -> Self {
        Self { gamma: 1.0, p: -5.0, local_candidates: 200 }
    }
}

/// Soft `min(z, 1) ≈ (z^p + 1)^{1/p}` for `z ≥ 0`; exactly 0 at `z = 0`.
pub fn soft_min_one(z: f64, p: f64) -> f64 {
    if z <= 0.0 {
        0.0
    } else if z >= 1.0 {
        (z.powf(p) + 1.0).powf(1.0 / p)
    } else {
        z * (1.0 + z.powf(-p)).powf(1.0 / p)
    }
}

fn grad_norm(model: &GpModel, x: &[f64]) -> f64 {
    model.mean_grad(x).iter().map(|g| g * g).sum::<f64>().sqrt()
}

fn max_grad_norm<'a>(model: &GpModel, xs: impl Iterator<Item = &'a Vec<f64>>) -> f64 {
    xs.map(|x| grad_norm(model, x)).fold(MIN_LIPSCHITZ, f64::max)
}

/// Shifted-nonnegative UCB times one soft penalizer per busy point.
pub struct PenalizedUcbSurface<'a> {
    model: &'a GpModel,
    beta: f64,
    p: f64,
    shift: f64,
    centres: Vec<Vec<f64>>,
    /// `L̂_j / (|μ(x_j) − y*| + γσ(x_j))`
    slopes: Vec<f64>,
}

impl<'a> PenalizedUcbSurface<'a> {
    /// `candidates` fix the UCB shift (their minimum UCB) and, for
    /// [`PenaltyMode::Global`], the Lipschitz estimate.
    pub fn new(
        model: &'a GpModel,
        busy: &[Vec<f64>],
        beta: f64,
        mode: PenaltyMode,
        cfg: &PenalizerConfig,
        candidates: &[Vec<f64>],
        rng: &mut impl Rng,
    ) -> Result<Self> {
        if !(cfg.p < 0.0) || !(cfg.gamma >= 0.0) {
            return Err(Error::InvalidArgument(format!("penalizer needs p < 0 and gamma >= 0, got {cfg:?}")));
        }
        for b in busy {
            check_dim(model.dim(), b.len())?;
        }
        let ucb = UcbSurface { model, beta };
        let shift = ucb.values(candidates).into_iter().fold(f64::INFINITY, f64::min);
        let y_star = model.best_std().unwrap_or(0.0);
        let global = match mode {
            PenaltyMode::Global if !busy.is_empty() => max_grad_norm(model, candidates.iter()),
            _ => 0.0,
        };
        let mut slopes = Vec::with_capacity(busy.len());
        for xj in busy {
            let lip = match mode {
                PenaltyMode::Global => global,
                PenaltyMode::Local => {
                    let ls = &model.hyper().lengthscales;
                    let mut local = halton_points(cfg.local_candidates, model.dim(), rng)?;
                    for u in &mut local {
                        for ((v, c), l) in u.iter_mut().zip(xj).zip(ls) {
                            let lo = (c - 0.5 * l).max(0.0);
                            let hi = (c + 0.5 * l).min(1.0);
                            *v = lo + *v * (hi - lo);
                        }
                    }
                    local.push(xj.clone());
                    max_grad_norm(model, local.iter())
                }
            };
            let (mu, var) = model.predict_unchecked(xj);
            let radius = ((mu - y_star).abs() + cfg.gamma * var.sqrt()).max(MIN_RADIUS);
            slopes.push(lip / radius);
        }
        Ok(Self { model, beta, p: cfg.p, shift, centres: busy.to_vec(), slopes })
    }

    fn penalty(&self, x: &[f64]) -> f64 {
        self.centres
            .iter()
            .zip(&self.slopes)
            .map(|(c, s)| {
                let dist = c.iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
                soft_min_one(s * dist, self.p)
            })
            .product()
    }

    fn combine(&self, ucb: f64, x: &[f64]) -> f64 {
        if self.centres.is_empty() {
            return ucb;
        }
        (ucb - self.shift).max(0.0) * self.penalty(x)
    }
}

impl Surface for PenalizedUcbSurface<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (m, v) = self.model.predict_unchecked(x);
        self.combine(ucb_value(m, v, self.beta), x)
    }

    fn values(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let (m, v) = self.model.predict_many(xs);
        xs.iter().enumerate().map(|(i, x)| self.combine(ucb_value(m[i], v[i], self.beta), x)).collect()
    }

    fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        if self.centres.is_empty() {
            UcbSurface { model: self.model, beta: self.beta }.value_grad(x)
        } else {
            None
        }
    }
}

/// Evaluates the penalized UCB at `x` with a fresh candidate set.
#[allow(clippy::too_many_arguments)]
pub fn penalized_ucb(
    model: &GpModel,
    busy: &[Vec<f64>],
    x: &[f64],
    beta: f64,
    mode: PenaltyMode,
    cfg: &PenalizerConfig,
    num_candidates: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    check_dim(model.dim(), x.len())?;
    let candidates = halton_points(num_candidates, model.dim(), rng)?;
    Ok(PenalizedUcbSurface::new(model, busy, beta, mode, cfg, &candidates, rng)?.value(x))
}
