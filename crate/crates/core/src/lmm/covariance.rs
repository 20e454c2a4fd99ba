use nalgebra::{Cholesky, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Lower bound of every log standard-deviation ratio.
pub const LOG_RATIO_LOWER: f64 = -15.0;
/// Upper bound of every log standard-deviation ratio.
pub const LOG_RATIO_UPPER: f64 = 15.0;
/// Bound on the scaled Cholesky off-diagonal of a full 2 x 2 G.
pub const OFF_DIAGONAL_BOUND: f64 = 1.0e3;

/// Covariance of the random intercept and slope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum SlopeCorrelation {
    /// Independent intercept and slope (two variance parameters).
    #[default]
    Diagonal,
    /// Unstructured 2 x 2 G (three parameters).
    Full,
}

/// Random-effects structure of every subject.
///
/// `Intercept` uses `Q_i = 1`; `InterceptSlope` uses `Q_i = [1 | t_i]` with the
/// numeric measurement times as slope basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RandomEffectsSpec {
    Intercept,
    InterceptSlope(SlopeCorrelation),
}

impl RandomEffectsSpec {
    /// Number of random effects per subject.
    pub fn n_effects(self) -> usize {
        match self {
            RandomEffectsSpec::Intercept => 1,
            RandomEffectsSpec::InterceptSlope(_) => 2,
        }
    }

    /// Number of unconstrained variance parameters.
    pub fn n_theta(self) -> usize {
        match self {
            RandomEffectsSpec::Intercept => 1,
            RandomEffectsSpec::InterceptSlope(SlopeCorrelation::Diagonal) => 2,
            RandomEffectsSpec::InterceptSlope(SlopeCorrelation::Full) => 3,
        }
    }

    /// Positions of theta holding log standard-deviation ratios. The remaining
    /// position (full G only) is the scaled Cholesky off-diagonal.
    pub fn log_ratio_positions(self) -> &'static [usize] {
        match self {
            RandomEffectsSpec::Intercept => &[0],
            RandomEffectsSpec::InterceptSlope(SlopeCorrelation::Diagonal) => &[0, 1],
            RandomEffectsSpec::InterceptSlope(SlopeCorrelation::Full) => &[0, 2],
        }
    }

    pub fn theta_bounds(self) -> (Vec<f64>, Vec<f64>) {
        let n = self.n_theta();
        let mut lower = vec![LOG_RATIO_LOWER; n];
        let mut upper = vec![LOG_RATIO_UPPER; n];
        if let RandomEffectsSpec::InterceptSlope(SlopeCorrelation::Full) = self {
            lower[1] = -OFF_DIAGONAL_BOUND;
            upper[1] = OFF_DIAGONAL_BOUND;
        }
        (lower, upper)
    }

    /// Lower-triangular factor L of the relative covariance `G / sigma_eps^2 = L L^T`.
    /// A log ratio of `-inf` pins the corresponding standard deviation at zero.
    pub fn relative_factor(self, theta: &[f64]) -> DMatrix<f64> {
        match self {
            RandomEffectsSpec::Intercept => DMatrix::from_element(1, 1, theta[0].exp()),
            RandomEffectsSpec::InterceptSlope(SlopeCorrelation::Diagonal) => {
                DMatrix::from_row_slice(2, 2, &[theta[0].exp(), 0.0, 0.0, theta[1].exp()])
            }
            RandomEffectsSpec::InterceptSlope(SlopeCorrelation::Full) => {
                DMatrix::from_row_slice(2, 2, &[theta[0].exp(), 0.0, theta[1], theta[2].exp()])
            }
        }
    }

    /// Random-effects design `Q_i` for the given measurement times.
    pub fn random_design(self, times: &[f64]) -> DMatrix<f64> {
        match self {
            RandomEffectsSpec::Intercept => DMatrix::from_element(times.len(), 1, 1.0),
            RandomEffectsSpec::InterceptSlope(_) => {
                DMatrix::from_fn(times.len(), 2, |r, c| if c == 0 { 1.0 } else { times[r] })
            }
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            RandomEffectsSpec::Intercept => "intercept",
            RandomEffectsSpec::InterceptSlope(SlopeCorrelation::Diagonal) => "intercept_slope",
            RandomEffectsSpec::InterceptSlope(SlopeCorrelation::Full) => "intercept_slope_full",
        }
    }
}

/// Random-effects covariance G and residual variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VarianceComponents {
    /// Row-major q x q random-effects covariance.
    pub g: Vec<f64>,
    pub n_effects: usize,
    pub sigma_eps2: f64,
}

impl VarianceComponents {
    pub fn new(g: DMatrix<f64>, sigma_eps2: f64) -> Self {
        let n_effects = g.nrows();
        let mut flat = Vec::with_capacity(n_effects * n_effects);
        for r in 0..n_effects {
            for c in 0..n_effects {
                flat.push(g[(r, c)]);
            }
        }
        Self {
            g: flat,
            n_effects,
            sigma_eps2,
        }
    }

    /// Variance components implied by theta and the residual variance.
    pub fn from_theta(spec: RandomEffectsSpec, theta: &[f64], sigma_eps2: f64) -> Self {
        let l = spec.relative_factor(theta);
        Self::new(&l * l.transpose() * sigma_eps2, sigma_eps2)
    }

    pub fn g_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n_effects, self.n_effects, &self.g)
    }

    /// Random-intercept variance.
    pub fn intercept_variance(&self) -> f64 {
        self.g[0]
    }
}

/// `V_i = Q_i G Q_i^T + sigma_eps^2 I` for a subject measured at `times`.
pub fn build_covariance(
    spec: RandomEffectsSpec,
    vc: &VarianceComponents,
    times: &[f64],
) -> Result<DMatrix<f64>> {
    if !(vc.sigma_eps2 > 0.0) || !vc.sigma_eps2.is_finite() {
        return Err(Error::VarianceDomain(format!(
            "residual variance must be positive, got {}",
            vc.sigma_eps2
        )));
    }
    if vc.n_effects != spec.n_effects() {
        return Err(Error::Shape(format!(
            "G is {0}x{0} but the random-effects structure has {1} effects",
            vc.n_effects,
            spec.n_effects()
        )));
    }
    let q = spec.random_design(times);
    let mut v = &q * vc.g_matrix() * q.transpose();
    for j in 0..times.len() {
        v[(j, j)] += vc.sigma_eps2;
    }
    if Cholesky::new(v.clone()).is_none() {
        return Err(Error::VarianceDomain(
            "random-effects covariance is not positive semi-definite".into(),
        ));
    }
    Ok(v)
}
