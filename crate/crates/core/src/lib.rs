//! Asynchronous Bayesian optimization benchmark toolkit.
//!
//! The crate bundles everything needed to replay the asynchronous q-worker
//! Bayesian-optimization loop on synthetic objectives in simulated time:
//!
//! * [`gp`]: zero-mean GP regression with an ARD-RBF kernel, marginal
//!   likelihood fitting and fantasy conditioning.
//! * [`sampling`]: perturbed Halton points, multivariate-normal draws and
//!   pathwise posterior samples for Thompson sampling.
//! * [`objectives`]: synthetic test functions and the half-normal duration model.
//! * [`acquisition`]: UCB, LogEI, random search, Thompson sampling, Kriging
//!   Believer, expected LogEI, (local) Lipschitz penalization and AEGIS.
//! * [`optimizer`]: the shared multi-start bounded quasi-Newton maximizer.
//! * [`simulator`]: deterministic discrete-event execution of the asynchronous
//!   loop and its sequential baseline.
//! * [`metrics`]: regret, query distances, lengthscale diagnostics, win-rates
//!   and the Mann-Whitney U test.
//! * [`trace_io`]: the delimiter-separated trace format.

pub mod acquisition;
pub mod error;
pub mod gp;
pub mod linalg;
pub mod metrics;
pub mod objectives;
pub mod optimizer;
pub mod rng;
pub mod sampling;
pub mod simulator;
pub mod trace_io;
pub mod verify;

pub use error::{Error, Result};
