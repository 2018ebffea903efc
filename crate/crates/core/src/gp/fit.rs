//! Marginal-likelihood hyperparameter fitting.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::model::kernel_matrix;
use super::{Dataset, KernelHyperparams};
use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::optimizer::{minimize_bounded, QuasiNewtonConfig};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Log-normal priors: one per lengthscale (dimension-scaled location) and
/// weak ones on the signal and noise variances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LengthscalePrior {
    pub loc: f64,
    pub scale: f64,
    pub variance_loc: f64,
    pub variance_scale: f64,
}

impl LengthscalePrior {
    /// `LogNormal(√2 + ½ log d, √3)` on lengthscales, `LogNormal(0, 2)` on variances.
    pub fn dimension_scaled(dim: usize) -> Self {
        Self {
            loc: std::f64::consts::SQRT_2 + 0.5 * (dim as f64).ln(),
            scale: 3f64.sqrt(),
            variance_loc: 0.0,
            variance_scale: 2.0,
        }
    }

    /// Log-density of the hyperparameters (in their natural scale) and its
    /// gradient with respect to the log-parameters.
    pub fn log_density(&self, theta: &[f64]) -> (f64, Vec<f64>) {
        let d = theta.len() - 2;
        let mut value = 0.0;
        let mut grad = vec![0.0; theta.len()];
        for (i, &t) in theta.iter().enumerate() {
            let (loc, scale) = if i < d { (self.loc, self.scale) } else { (self.variance_loc, self.variance_scale) };
            let z = (t - loc) / scale;
            value += -t - scale.ln() - 0.5 * LN_2PI - 0.5 * z * z;
            grad[i] = -1.0 - z / scale;
        }
        (value, grad)
    }

    fn sample_log(&self, dim: usize, rng: &mut impl Rng) -> Vec<f64> {
        let mut theta = Vec::with_capacity(dim + 2);
        for _ in 0..dim {
            let z: f64 = rng.sample(StandardNormal);
            theta.push(self.loc + self.scale * z);
        }
        for _ in 0..2 {
            let z: f64 = rng.sample(StandardNormal);
            theta.push(self.variance_loc + self.variance_scale * z);
        }
        theta
    }
}

/// Box constraints, in natural units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HyperBounds {
    pub lengthscale: (f64, f64),
    pub variance: (f64, f64),
}

impl Default for HyperBounds {
    fn default() -> Self {
        Self { lengthscale: (1e-3, 1e3), variance: (1e-6, 1e3) }
    }
}

impl HyperBounds {
    fn log_box(&self, dim: usize) -> (Vec<f64>, Vec<f64>) {
        let mut lo = vec![self.lengthscale.0.ln(); dim];
        let mut hi = vec![self.lengthscale.1.ln(); dim];
        lo.extend([self.variance.0.ln(); 2]);
        hi.extend([self.variance.1.ln(); 2]);
        (lo, hi)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    /// Restarts drawn from the prior, on top of the warm start.
    pub prior_restarts: usize,
    pub max_iters: usize,
    pub grad_tol: f64,
    pub bounds: HyperBounds,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self { prior_restarts: 4, max_iters: 100, grad_tol: 1e-6, bounds: HyperBounds::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutcome {
    pub hyper: KernelHyperparams,
    /// log-MLL + log-prior at `hyper`.
    pub objective: f64,
    /// Set when every restart failed and `hyper` is the unchanged init.
    pub warning: bool,
}

/// Log marginal likelihood of the standardized outputs and its gradient with
/// respect to `[log ℓ, log σ_f², log η²]`.
pub fn log_marginal_likelihood(data: &Dataset, h: &KernelHyperparams) -> Result<(f64, Vec<f64>)> {
    h.validate()?;
    check_dim(data.dim(), h.dim())?;
    let n = data.len();
    if n == 0 {
        return Err(Error::InvalidArgument("log marginal likelihood needs data".into()));
    }
    let d = h.dim();
    let xs = data.inputs();
    let kmat = kernel_matrix(h, xs, h.noise_variance);
    // The jitter scales with σ_f², so it enters the σ_f² derivative below.
    let (chol, jitter) = linalg::cholesky_with_jitter(&kmat, 1e-8 * h.signal_variance)?;
    let y = nalgebra::DVector::from_column_slice(data.outputs_std());
    let alpha = linalg::cholesky_solve(&chol, &y);
    let log_det_half: f64 = (0..n).map(|i| chol[(i, i)].ln()).sum();
    let value = -0.5 * y.dot(&alpha) - log_det_half - 0.5 * n as f64 * LN_2PI;

    // ½ tr((ααᵀ − K⁻¹) ∂K/∂θ)
    let kinv = linalg::cholesky_inverse(&chol);
    let inv_l2: Vec<f64> = h.lengthscales.iter().map(|l| 1.0 / (l * l)).collect();
    let mut grad = vec![0.0; d + 2];
    let mut ls_grad = vec![0.0; d];
    for a in 0..n {
        let w_aa = alpha[a] * alpha[a] - kinv[(a, a)];
        grad[d] += w_aa * (h.signal_variance + jitter);
        grad[d + 1] += w_aa * h.noise_variance;
        let xa = &xs[a];
        for b in 0..a {
            let term = 2.0 * (alpha[a] * alpha[b] - kinv[(a, b)]) * kmat[(a, b)];
            grad[d] += term;
            let xb = &xs[b];
            for j in 0..d {
                let diff = xa[j] - xb[j];
                ls_grad[j] += term * diff * diff;
            }
        }
    }
    for j in 0..d {
        grad[j] = ls_grad[j] * inv_l2[j];
    }
    for g in &mut grad {
        *g *= 0.5;
    }
    Ok((value, grad))
}

/// Maximizes log-MLL + log-prior over log-hyperparameters with a multi-start
/// bounded quasi-Newton search: the (clamped) warm start plus
/// `cfg.prior_restarts` draws from the prior.
pub fn fit_hyperparameters(
    data: &Dataset,
    init: &KernelHyperparams,
    prior: &LengthscalePrior,
    cfg: &FitConfig,
    rng: &mut impl Rng,
) -> Result<FitOutcome> {
    init.validate()?;
    check_dim(data.dim(), init.dim())?;
    if data.len() < 2 {
        return Err(Error::InvalidArgument("hyperparameter fitting needs at least two points".into()));
    }
    let dim = data.dim();
    let (lo, hi) = cfg.bounds.log_box(dim);
    let clamp = |theta: Vec<f64>| -> Vec<f64> {
        theta.iter().zip(lo.iter().zip(&hi)).map(|(t, (l, u))| t.clamp(*l, *u)).collect()
    };

    let neg_objective = |theta: &[f64]| -> Option<(f64, Vec<f64>)> {
        let h = KernelHyperparams::from_log(theta);
        let (lml, lml_grad) = log_marginal_likelihood(data, &h).ok()?;
        let (lp, lp_grad) = prior.log_density(theta);
        let f = -(lml + lp);
        let g: Vec<f64> = lml_grad.iter().zip(&lp_grad).map(|(a, b)| -(a + b)).collect();
        (f.is_finite() && g.iter().all(|v| v.is_finite())).then_some((f, g))
    };

    let mut starts = vec![clamp(init.to_log())];
    for _ in 0..cfg.prior_restarts {
        starts.push(clamp(prior.sample_log(dim, rng)));
    }

    let qn = QuasiNewtonConfig { max_iters: cfg.max_iters, grad_tol: cfg.grad_tol, ftol: 2.2e-9, ..Default::default() };
    let mut best: Option<(f64, Vec<f64>)> = None;
    for x0 in starts {
        if let Some(m) = minimize_bounded(&neg_objective, &x0, &lo, &hi, &qn) {
            if best.as_ref().is_none_or(|(f, _)| m.f < *f) {
                best = Some((m.f, m.x));
            }
        }
    }
    Ok(match best {
        Some((f, theta)) => FitOutcome { hyper: KernelHyperparams::from_log(&theta), objective: -f, warning: false },
        None => {
            log::warn!("hyperparameter fit failed on every restart; keeping the initial values");
            FitOutcome { hyper: init.clone(), objective: f64::NEG_INFINITY, warning: true }
        }
    })
}
