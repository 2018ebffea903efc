//! Zero-mean Gaussian-process regression with an ARD-RBF kernel.
//!
//! All predictions are in standardized output units; [`Dataset`] keeps the
//! raw outputs and the standardizer needed to map back.

mod dataset;
mod fit;
mod kernel;
mod model;

pub use dataset::{Dataset, Standardizer};
pub use fit::{
    fit_hyperparameters, log_marginal_likelihood, FitConfig, FitOutcome, HyperBounds,
    LengthscalePrior,
};
pub use kernel::{kernel_eval, KernelHyperparams};
pub use model::{fit_posterior, GpModel, PredictionWithGrad};
