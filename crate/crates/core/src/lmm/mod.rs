//! Linear mixed model machinery: covariance assembly, Gaussian
//! log-likelihood, generalized least squares and profiled ML fitting.

mod covariance;
mod fit;
pub(crate) mod gls;
pub mod optim;
mod profile;

pub use covariance::{
    build_covariance, RandomEffectsSpec, SlopeCorrelation, VarianceComponents, LOG_RATIO_LOWER,
    LOG_RATIO_UPPER,
};
pub use fit::{fit_mle, score_residual, FitResult, BOUNDARY_LOG_RATIO, SCORE_TOLERANCE};
pub use gls::{gls_solve, log_likelihood};
pub use profile::{profiled_deviance, ProfiledEval, ProfiledProblem};
