//! Busy-aware acquisitions built on fantasized outcomes at the busy
//! locations: Kriging Believer and expected LogEI.

use nalgebra::DVector;
use rand::Rng;

use super::analytic::{log_ei_value, ucb_value, LogEiSurface, UcbSurface, LOG_EI_FLOOR};
use crate::error::{check_dim, Result};
use crate::gp::GpModel;
use crate::linalg;
use crate::optimizer::Surface;
use crate::sampling::mvn_sample;

/// The closed-form rules KB can wrap.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AnalyticBase {
    Ucb { beta: f64 },
    LogEi,
}

/// `model` conditioned on its own posterior means at `busy`. With no busy
/// points this is a clone of `model`.
pub fn kriging_believer_model(model: &GpModel, busy: &[Vec<f64>]) -> Result<GpModel> {
    if busy.is_empty() {
        return Ok(model.clone());
    }
    let (mu_b, _) = model.predict_joint(busy)?;
    model.condition_on_fantasies(busy, mu_b.as_slice())
}

/// Incumbent of `model`, erroring on an empty model.
pub(crate) fn incumbent(model: &GpModel) -> Result<f64> {
    model.best_std().ok_or_else(|| crate::Error::InvalidArgument("LogEI needs at least one observation".into()))
}

/// `base` evaluated on the Kriging-Believer model. The LogEI incumbent stays
/// the best completed observation.
pub fn kriging_believer(base: AnalyticBase, model: &GpModel, busy: &[Vec<f64>], x: &[f64]) -> Result<f64> {
    check_dim(model.dim(), x.len())?;
    let kb = kriging_believer_model(model, busy)?;
    let (m, v) = kb.predict_unchecked(x);
    Ok(match base {
        AnalyticBase::Ucb { beta } => ucb_value(m, v, beta),
        AnalyticBase::LogEi => log_ei_value(m, v, incumbent(model)?),
    })
}

/// Surface for KB over either base; owns the conditioned model.
pub struct KbSurface {
    pub kb: GpModel,
    pub base: AnalyticBase,
    pub incumbent: f64,
}

impl KbSurface {
    pub fn new(base: AnalyticBase, model: &GpModel, busy: &[Vec<f64>]) -> Result<Self> {
        let incumbent = match base {
            AnalyticBase::Ucb { .. } => 0.0,
            AnalyticBase::LogEi => incumbent(model)?,
        };
        Ok(Self { kb: kriging_believer_model(model, busy)?, base, incumbent })
    }

    fn inner(&self) -> Box<dyn Surface + '_> {
        match self.base {
            AnalyticBase::Ucb { beta } => Box::new(UcbSurface { model: &self.kb, beta }),
            AnalyticBase::LogEi => Box::new(LogEiSurface { model: &self.kb, incumbent: self.incumbent }),
        }
    }
}

impl Surface for KbSurface {
    fn dim(&self) -> usize {
        self.kb.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.inner().value(x)
    }

    fn values(&self, xs: &[Vec<f64>]) -> Vec<f64> {
        self.inner().values(xs)
    }

    fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        self.inner().value_grad(x)
    }

    fn is_sentinel(&self, v: f64) -> bool {
        self.inner().is_sentinel(v)
    }
}

/// Log of the Monte-Carlo mean of EI over joint fantasies at the busy
/// locations. The fantasies are drawn once at construction so the surface is
/// deterministic while it is being optimized.
///
/// The posterior mean after observing `y_b` is affine in `y_b` and the
/// variance does not depend on it, so one conditioned model (at the fantasy
/// mean) serves every draw: `μ_i(x) = μ_KB(x) + c(x)ᵀ(y_b,i − μ_b)`.
pub struct ExpectedLogEiSurface {
    aug: Option<GpModel>,
    base: GpModel,
    n: usize,
    /// Row `i` holds `y_b,i − μ_b`.
    offsets: Vec<Vec<f64>>,
    incumbent: f64,
}

impl ExpectedLogEiSurface {
    pub fn new(model: &GpModel, busy: &[Vec<f64>], num_fantasies: usize, rng: &mut impl Rng) -> Result<Self> {
        if num_fantasies == 0 {
            return Err(crate::Error::InvalidArgument("need at least one fantasy".into()));
        }
        let incumbent = incumbent(model)?;
        if busy.is_empty() {
            return Ok(Self { aug: None, base: model.clone(), n: model.len(), offsets: Vec::new(), incumbent });
        }
        let (mu_b, cov_b) = model.predict_joint(busy)?;
        let draws = mvn_sample(&mu_b, &cov_b, num_fantasies, rng)?;
        let offsets = draws.iter().map(|y| (y - &mu_b).as_slice().to_vec()).collect();
        let aug = model.condition_on_fantasies(busy, mu_b.as_slice())?;
        Ok(Self { aug: Some(aug), base: model.clone(), n: model.len(), offsets, incumbent })
    }

    /// Same surface with the supplied fantasy offsets (rows of `y_b − μ_b`).
    pub fn with_offsets(model: &GpModel, busy: &[Vec<f64>], offsets: Vec<Vec<f64>>) -> Result<Self> {
        let incumbent = incumbent(model)?;
        let aug = if busy.is_empty() { None } else { Some(kriging_believer_model(model, busy)?) };
        Ok(Self { aug, base: model.clone(), n: model.len(), offsets, incumbent })
    }

    pub fn incumbent(&self) -> f64 {
        self.incumbent
    }
}

fn log_sum_exp(values: &[f64]) -> f64 {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln()
}

impl Surface for ExpectedLogEiSurface {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let Some(aug) = &self.aug else {
            let (m, v) = self.base.predict_unchecked(x);
            return log_ei_value(m, v, self.incumbent);
        };
        let sv = aug.hyper().signal_variance;
        let k = aug.cross_cov(x);
        let mean_kb = k.dot(aug.alpha());
        let mut w: DVector<f64> = k;
        linalg::forward_solve(aug.chol(), &mut w);
        let var = (sv - w.norm_squared()).clamp(0.0, sv);
        linalg::backward_solve(aug.chol(), &mut w);
        let c = &w.as_slice()[self.n..];
        let logs: Vec<f64> = self
            .offsets
            .iter()
            .map(|off| {
                let mean = mean_kb + c.iter().zip(off).map(|(a, b)| a * b).sum::<f64>();
                log_ei_value(mean, var, self.incumbent)
            })
            .collect();
        (log_sum_exp(&logs) - (logs.len() as f64).ln()).max(LOG_EI_FLOOR)
    }

    fn value_grad(&self, x: &[f64]) -> Option<(f64, Vec<f64>)> {
        match self.aug {
            None => LogEiSurface { model: &self.base, incumbent: self.incumbent }.value_grad(x),
            Some(_) => None,
        }
    }

    fn is_sentinel(&self, v: f64) -> bool {
        !(v > LOG_EI_FLOOR)
    }
}

/// Single evaluation of the expected-LogEI surface at `x`.
pub fn expected_log_ei(
    model: &GpModel,
    busy: &[Vec<f64>],
    x: &[f64],
    num_fantasies: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    check_dim(model.dim(), x.len())?;
    Ok(ExpectedLogEiSurface::new(model, busy, num_fantasies, rng)?.value(x))
}
