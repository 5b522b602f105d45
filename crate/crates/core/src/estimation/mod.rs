//! Likelihood-based estimation of the physical model parameters.

pub mod fit;
pub mod likelihood;
pub mod simplex;

pub use fit::{
    apply_fallback, fit_model_parameters, parameter_bounds, to_vector, FitReport, OptimizerConfig, ParameterFit, PARAMETER_NAMES,
};
pub use likelihood::{bernoulli_log_likelihood, log_likelihood, DatasetCaps, LikelihoodDataset, PROBABILITY_FLOOR};
pub use simplex::{nelder_mead_maximize, nelder_mead_minimize, Bounds, SimplexConfig, SimplexOutcome};
