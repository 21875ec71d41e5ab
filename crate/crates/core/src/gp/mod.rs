//! Gaussian-process regression with a squared-exponential kernel.
//!
//! The posterior is fitted once per sample set and is immutable afterwards, so a
//! [`GpPosteriorModel`] can be shared across threads for read-only prediction.

mod hyperopt;
mod kernel;
mod posterior;
mod samples;

pub use hyperopt::{optimize_hyperparams, HyperoptOptions};
pub use kernel::{kernel_eval, kernel_gradient, KernelHyperparams};
pub use posterior::{fit, log_marginal_likelihood, GpPosteriorModel};
pub use samples::SampleSet;
