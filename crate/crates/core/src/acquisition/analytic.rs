//! Closed-form acquisitions: UCB and LogEI.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use statrs::function::erf::erfc;

use crate::error::{check_dim, Result};
use crate::gp::GpModel;
use crate::optimizer::Surface;

/// Value LogEI takes where no improvement is possible; also the lower clamp.
pub const LOG_EI_FLOOR: f64 = -700.0;

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// `exp(x²)·erfc(x)`; only used for moderate `x` where both factors are
/// representable.
fn erfcx(x: f64) -> f64 {
    (x * x).exp() * erfc(x)
}

fn norm_cdf(z: f64) -> f64 {
    0.5 * erfc(-z * FRAC_1_SQRT_2)
}

fn norm_pdf(z: f64) -> f64 {
    (-0.5 * z * z - LN_SQRT_2PI).exp()
}

/// For `z ≤ −10`: `h(z)/φ(z) = Σ_{n≥1} (−1)^{n+1} (2n−1)!! / z^{2n}` and
/// `Φ(z)/φ(z) = (1/|z|) Σ_{n≥0} (−1)^n (2n−1)!! / z^{2n}`.
fn tail_series(z: f64) -> (f64, f64) {
    let inv = 1.0 / (z * z);
    let mut term = 1.0;
    let mut ratio = 1.0;
    let mut h = 0.0;
    for n in 1..200 {
        term *= -((2 * n - 1) as f64) * inv;
        ratio += term;
        h -= term;
        if term.abs() < 1e-17 * h.abs() {
            break;
        }
    }
    (h, ratio / z.abs())
}

/// `ln h(z)` with `h(z) = φ(z) + zΦ(z)`, and `Φ(z)/h(z) = d ln h / dz`.
pub fn log_h(z: f64) -> (f64, f64) {
    if z > -1.0 {
        let cdf = norm_cdf(z);
        let h = norm_pdf(z) + z * cdf;
        (h.ln(), cdf / h)
    } else if z > -10.0 {
        // h = φ(z)·(1 − |z|·Φ/φ), with Φ/φ = √(π/2)·erfcx(|z|/√2).
        let r = (PI / 2.0).sqrt() * erfcx(-z * FRAC_1_SQRT_2);
        let s = 1.0 + z * r;
        (-0.5 * z * z - LN_SQRT_2PI + s.ln(), r / s)
    } else {
        let (s, r) = tail_series(z);
        (-0.5 * z * z - LN_SQRT_2PI + s.ln(), r / s)
    }
}

pub fn ucb_value(mean: f64, var: f64, beta: f64) -> f64 {
    mean + beta.sqrt() * var.max(0.0).sqrt()
}

/// LogEI from a predictive mean and variance, clamped at [`LOG_EI_FLOOR`].
pub fn log_ei_value(mean: f64, var: f64, incumbent: f64) -> f64 {
    log_ei_with_grad_parts(mean, var, incumbent).0
}

/// LogEI and its partial derivatives with respect to the mean and the
/// standard deviation.
fn log_ei_with_grad_parts(mean: f64, var: f64, incumbent: f64) -> (f64, f64, f64) {
    let sigma = var.max(0.0).sqrt();
    let diff = mean - incumbent;
    if sigma < 1e-150 {
        if diff > 0.0 {
            return (diff.ln().max(LOG_EI_FLOOR), 1.0 / diff, 0.0);
        }
        return (LOG_EI_FLOOR, 0.0, 0.0);
    }
    let z = diff / sigma;
    let (lh, ratio) = log_h(z);
    let v = sigma.ln() + lh;
    if v <= LOG_EI_FLOOR {
        return (LOG_EI_FLOOR, 0.0, 0.0);
    }
    // ∂/∂μ = (Φ/h)/σ, ∂/∂σ = 1/σ − z(Φ/h)/σ
    (v, ratio / sigma, (1.0 - z * ratio) / sigma)
}

/// `μ(x) + √β σ(x)` in standardized units.
pub fn ucb(model: &GpModel, x: &[f64], beta: f64) -> Result<f64> {
    check_dim(model.dim(), x.len())?;
    let (m, v) = model.predict_unchecked(x);
    Ok(ucb_value(m, v, beta))
}

/// `log(σ·h((μ − y*)/σ))` in standardized units.
pub fn log_ei(model: &GpModel, x: &[f64], incumbent: f64) -> Result<f64> {
    check_dim(model.dim(), x.len())?;
    let (m, v) = model.predict_unchecked(x);
    Ok(log_ei_value(m, v, incumbent))
}

/// Chain rule from (mean, variance) derivatives to an input gradient.
fn chain(model: &GpModel, x: &[f64], f: impl Fn(f64, f64) -> (f64, f64, f64)) -> (f64, Vec<f64>) {
    let p = model.predict_with_grad(x);
    let var = p.var.max(0.0);
    let sigma = var.sqrt();
    let (v, dm, ds) = f(p.mean, var);
    let grad = (0..x.len())
        .map(|j| {
            let dsigma = if sigma > 1e-150 { p.var_grad[j] / (2.0 * sigma) } else { 0.0 };
            dm * p.mean_grad[j] + ds * dsigma
        })
        .collect();
    (v, grad)
}

pub struct UcbSurface<'a> {
    pub model: &'a GpModel,
    pub beta: f64,
}

impl Surface for UcbSurface<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (m, v) = self.model.predict_unchecked(x);
        ucb_value(m, v, self.beta)
    }

    fn values(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let (m, v) = self.model.predict_many(xs);
        m.iter().zip(&v).map(|(m, v)| ucb_value(*m, *v, self.beta)).collect()
    }

    fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        let sb = self.beta.sqrt();
        Some(chain(self.model, x, |m, v| (ucb_value(m, v, self.beta), 1.0, sb)))
    }
}

pub struct LogEiSurface<'a> {
    pub model: &'a GpModel,
    pub incumbent: f64,
}

impl Surface for LogEiSurface<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let (m, v) = self.model.predict_unchecked(x);
        log_ei_value(m, v, self.incumbent)
    }

    fn values(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        let (m, v) = self.model.predict_many(xs);
        m.iter().zip(&v).map(|(m, v)| log_ei_value(*m, *v, self.incumbent)).collect()
    }

    fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        Some(chain(self.model, x, |m, v| log_ei_with_grad_parts(m, v, self.incumbent)))
    }

    fn is_sentinel(&self, v: f64) -> bool {
        !(v > LOG_EI_FLOOR)
    }
}

/// Posterior mean as a surface (the pure-exploitation step of AEGIS).
pub struct MeanSurface<'a> {
    pub model: &'a GpModel,
}

impl Surface for MeanSurface<'_> {
    fn dim(&self) -> usize {
        self.model.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.model.predict_unchecked(x).0
    }

    fn values(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        self.model.predict_many(xs).0
    }

    fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        Some((self.value(x), self.model.mean_grad(x)))
    }
}
