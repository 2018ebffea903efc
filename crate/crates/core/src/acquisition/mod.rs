//! Acquisition rules and the single `propose` entry point used by the
//! simulator.
//!
//! Surfaces work in standardized output units on the unit cube. Rules that
//! know nothing about pending evaluations (UCB, LogEI, random search,
//! Thompson sampling, AEGIS) ignore the busy set.

mod analytic;
mod fantasy;
mod penalized;
mod thompson;

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

pub use analytic::{log_ei, log_ei_value, log_h, ucb, ucb_value, LogEiSurface, MeanSurface, UcbSurface, LOG_EI_FLOOR};
pub use fantasy::{
    expected_log_ei, kriging_believer, kriging_believer_model, AnalyticBase, ExpectedLogEiSurface, KbSurface,
};
pub use penalized::{penalized_ucb, soft_min_one, PenaltyMode, PenalizedUcbSurface, PenalizerConfig};
pub use thompson::{aegis_epsilon, aegis_propose, pareto_front, thompson_propose, AegisBranch};

use crate::error::{check_dim, Error, Result};
use crate::gp::GpModel;
use crate::optimizer::{maximize, maximize_from, Maximum, OptimizerConfig};
use crate::rng::{Purpose, Streams};
use crate::sampling::halton_points;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Rule {
    Ucb,
    LogEi,
    Random,
    Thompson,
    KbUcb,
    KbLogEi,
    ExpectedLogEi,
    LpUcb,
    LlpUcb,
    Aegis,
}

impl Rule {
    pub const ALL: [Rule; 10] = [
        Rule::Ucb,
        Rule::LogEi,
        Rule::Random,
        Rule::Thompson,
        Rule::KbUcb,
        Rule::KbLogEi,
        Rule::ExpectedLogEi,
        Rule::LpUcb,
        Rule::LlpUcb,
        Rule::Aegis,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::Ucb => "ucb",
            Rule::LogEi => "logei",
            Rule::Random => "random",
            Rule::Thompson => "ts",
            Rule::KbUcb => "kb-ucb",
            Rule::KbLogEi => "kb-logei",
            Rule::ExpectedLogEi => "e-logei",
            Rule::LpUcb => "lp-ucb",
            Rule::LlpUcb => "llp-ucb",
            Rule::Aegis => "aegis",
        }
    }

    /// Whether the rule looks at the pending evaluations.
    pub fn uses_busy(self) -> bool {
        matches!(self, Rule::KbUcb | Rule::KbLogEi | Rule::ExpectedLogEi | Rule::LpUcb | Rule::LlpUcb)
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Rule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Rule::ALL.into_iter().find(|r| r.name() == s).ok_or_else(|| Error::UnknownName {
            kind: "rule",
            name: s.to_string(),
            valid: Rule::ALL.map(Rule::name).join(", "),
        })
    }
}

impl TryFrom<String> for Rule {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Rule> for String {
    fn from(r: Rule) -> String {
        r.name().to_string()
    }
}

/// Tunable constants shared by the rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RuleParams {
    pub beta: f64,
    pub num_fantasies: usize,
    pub gamma: f64,
    pub p: f64,
    pub num_features: usize,
    pub local_candidates: usize,
}

impl Default for RuleParams {
    fn default() -> Self {
        Self { beta: 2.0, num_fantasies: 500, gamma: 1.0, p: -5.0, num_features: 1024, local_candidates: 200 }
    }
}

impl RuleParams {
    pub fn validate(&self) -> Result<()> {
        let ok = self.beta > 0.0
            && self.num_fantasies >= 1
            && self.gamma >= 0.0
            && self.p < 0.0
            && self.num_features >= 1
            && self.local_candidates >= 1;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("rule parameters out of range: {self:?}")))
        }
    }

    fn penalizer(&self) -> PenalizerConfig {
        PenalizerConfig { gamma: self.gamma, p: self.p, local_candidates: self.local_candidates }
    }
}

/// The proposed point and how it was found.
#[derive(Debug, Clone, PartialEq)]
pub struct Proposal {
    pub x: Vec<f64>,
    /// Acquisition value at `x` (NaN for random search).
    pub value: f64,
    /// The inner optimizer fell back to the best raw candidate.
    pub degraded: bool,
}

impl From<Maximum> for Proposal {
    fn from(m: Maximum) -> Self {
        Proposal { x: m.x, value: m.value, degraded: m.degraded }
    }
}

/// Next query for a free worker. `index` keys the random streams (the
/// simulator passes its completion counter).
pub fn propose(
    rule: Rule,
    params: &RuleParams,
    model: &GpModel,
    busy: &[Vec<f64>],
    cfg: &OptimizerConfig,
    streams: &Streams,
    index: u64,
) -> Result<Proposal> {
    params.validate()?;
    for b in busy {
        check_dim(model.dim(), b.len())?;
    }
    let d = model.dim();
    let mut acq_rng = streams.rng(Purpose::AcqRestarts, index);
    let proposal = match rule {
        Rule::Random => Proposal { x: (0..d).map(|_| acq_rng.random::<f64>()).collect(), value: f64::NAN, degraded: false },
        Rule::Ucb => maximize(&UcbSurface { model, beta: params.beta }, cfg, &mut acq_rng).into(),
        Rule::LogEi => {
            let incumbent = fantasy::incumbent(model)?;
            maximize(&LogEiSurface { model, incumbent }, cfg, &mut acq_rng).into()
        }
        Rule::Thompson => {
            thompson_propose(model, cfg, params.num_features, &mut streams.rng(Purpose::Thompson, index))?.into()
        }
        Rule::Aegis => aegis_propose(model, cfg, params.num_features, &mut streams.rng(Purpose::Thompson, index))?.0.into(),
        Rule::KbUcb | Rule::KbLogEi => {
            let base = if rule == Rule::KbUcb { AnalyticBase::Ucb { beta: params.beta } } else { AnalyticBase::LogEi };
            maximize(&KbSurface::new(base, model, busy)?, cfg, &mut acq_rng).into()
        }
        Rule::ExpectedLogEi => {
            let mut frng = streams.rng(Purpose::Fantasies, index);
            let s = ExpectedLogEiSurface::new(model, busy, params.num_fantasies, &mut frng)?;
            maximize(&s, cfg, &mut acq_rng).into()
        }
        Rule::LpUcb | Rule::LlpUcb => {
            let mode = if rule == Rule::LpUcb { PenaltyMode::Global } else { PenaltyMode::Local };
            let candidates = halton_points(cfg.num_candidates(d).max(1), d, &mut acq_rng)?;
            let s = PenalizedUcbSurface::new(model, busy, params.beta, mode, &params.penalizer(), &candidates, &mut acq_rng)?;
            maximize_from(&s, &candidates, cfg).into()
        }
    };
    Ok(proposal)
}
