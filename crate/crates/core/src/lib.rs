//! Conditional likelihood screening for ultra-high dimensional longitudinal
//! covariates.
//!
//! Every candidate covariate gets a marginal linear mixed model holding its
//! main effect, its interaction with time and a protected conditioning block
//! (time, plus optional extra covariates). Covariates are ranked by the
//! maximized log-likelihood of their marginal model. GEES/SIS baselines and a
//! seeded simulation benchmark are included for comparison.

pub mod baselines;
pub mod data;
pub mod error;
pub mod lmm;
pub mod method;
pub mod report;
pub mod rng;
pub mod screening;
pub mod simbench;

pub use error::{Error, Result};
pub use method::Method;
