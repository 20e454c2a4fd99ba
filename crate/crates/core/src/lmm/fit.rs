use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::covariance::{build_covariance, RandomEffectsSpec, VarianceComponents};
use super::gls::{deficient_columns, log_likelihood_factored, solve_normal_equations};
use super::optim::{brent, nelder_mead, Minimum, DEVIANCE_TOLERANCE, MAX_ITERATIONS};
use super::profile::ProfiledProblem;
use crate::data::MarginalDesign;
use crate::error::{Error, Result};

/// Log ratio below which a random-effect standard deviation is set to zero.
pub const BOUNDARY_LOG_RATIO: f64 = -6.0;
/// Sup-norm of the average score required for a fit to count as converged.
pub const SCORE_TOLERANCE: f64 = 1e-6;

/// Maximum likelihood fit of one marginal model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub spec: RandomEffectsSpec,
    /// Fixed effects in design column order.
    pub beta: Vec<f64>,
    pub variance: VarianceComponents,
    /// Unconstrained variance parameters; `-inf` marks a component pinned at zero.
    pub theta: Vec<f64>,
    /// Maximized log-likelihood averaged over subjects.
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    pub evaluations: usize,
    pub boundary: bool,
    /// Residual variance held at its numerical floor (response fitted exactly).
    pub degenerate: bool,
    pub score_sup: f64,
}

impl FitResult {
    /// `-2 n loglik`.
    pub fn deviance(&self, n_subjects: usize) -> f64 {
        -2.0 * n_subjects as f64 * self.loglik
    }
}

/// Runs the derivative-free search over the free positions of `theta`,
/// holding the others fixed.
fn search(problem: &ProfiledProblem, theta: &[f64], free: &[usize]) -> Minimum {
    let (lower, upper) = problem.spec().theta_bounds();
    let objective = |values: &[f64]| -> f64 {
        let mut full = theta.to_vec();
        for (&pos, &v) in free.iter().zip(values) {
            full[pos] = v;
        }
        problem.evaluate(&full).map(|e| e.deviance).unwrap_or(f64::INFINITY)
    };
    let mut result = if free.len() == 1 {
        let pos = free[0];
        brent(|v| objective(&[v]), lower[pos], upper[pos], MAX_ITERATIONS)
    } else {
        let start: Vec<f64> = free.iter().map(|&p| theta[p]).collect();
        let lo: Vec<f64> = free.iter().map(|&p| lower[p]).collect();
        let hi: Vec<f64> = free.iter().map(|&p| upper[p]).collect();
        nelder_mead(objective, &start, 1.0, &lo, &hi, DEVIANCE_TOLERANCE, MAX_ITERATIONS)
    };
    let mut full = theta.to_vec();
    for (&pos, &v) in free.iter().zip(&result.x) {
        full[pos] = v;
    }
    result.x = full;
    result
}

/// Maximizes the subject-averaged log-likelihood over fixed effects and
/// variance components.
///
/// Beta and the residual variance are profiled out; the remaining variance
/// ratios are searched from theta = 0. Ratios that end below
/// [`BOUNDARY_LOG_RATIO`] are pinned at zero and the rest re-searched; the
/// pinned solution is kept unless it lowers the likelihood. A fit that stops
/// on the iteration cap is returned with `converged = false`.
pub fn fit_mle(design: &MarginalDesign, y: &[f64], spec: RandomEffectsSpec) -> Result<FitResult> {
    if design.n_subjects() < 2 {
        return Err(Error::Domain(format!(
            "at least two subjects are required, got {}",
            design.n_subjects()
        )));
    }
    let x = design.matrix();
    let deficient = deficient_columns(&(x.transpose() * x));
    if !deficient.is_empty() {
        return Err(Error::RankDeficient { columns: deficient });
    }
    let problem = ProfiledProblem::new(design, y, spec)?;

    let all: Vec<usize> = (0..spec.n_theta()).collect();
    let mut best = search(&problem, &vec![0.0; spec.n_theta()], &all);
    let mut iterations = best.iterations;
    let mut evaluations = best.evaluations;
    let mut converged = best.converged;
    let mut boundary = false;

    loop {
        let newly_pinned: Vec<usize> = spec
            .log_ratio_positions()
            .iter()
            .copied()
            .filter(|&p| best.x[p].is_finite() && best.x[p] < BOUNDARY_LOG_RATIO)
            .collect();
        if newly_pinned.is_empty() {
            break;
        }
        let mut pinned_theta = best.x.clone();
        for &p in &newly_pinned {
            pinned_theta[p] = f64::NEG_INFINITY;
        }
        let free: Vec<usize> = (0..spec.n_theta())
            .filter(|&p| pinned_theta[p].is_finite())
            .collect();
        let candidate = if free.is_empty() {
            let value = problem.evaluate(&pinned_theta)?.deviance;
            Minimum {
                x: pinned_theta,
                value,
                iterations: 0,
                evaluations: 1,
                converged: true,
            }
        } else {
            search(&problem, &pinned_theta, &free)
        };
        iterations += candidate.iterations;
        evaluations += candidate.evaluations;
        if candidate.value <= best.value + DEVIANCE_TOLERANCE * best.value.abs().max(1.0) {
            converged = candidate.converged;
            best = candidate;
            boundary = true;
        } else {
            break;
        }
    }

    finish(design, y, &problem, best.x, iterations, evaluations, converged, boundary)
}

#[allow(clippy::too_many_arguments)]
fn finish(
    design: &MarginalDesign,
    y: &[f64],
    problem: &ProfiledProblem,
    theta: Vec<f64>,
    iterations: usize,
    evaluations: usize,
    optimizer_converged: bool,
    boundary: bool,
) -> Result<FitResult> {
    let spec = problem.spec();
    let q = design.n_columns();
    let n = design.n_subjects();
    let x = design.matrix();
    let factors = problem.pattern_factors(&theta)?;
    let mut owner = vec![0usize; n];
    for (slot, subjects) in problem.pattern_subjects().enumerate() {
        for &i in subjects {
            owner[i] = slot;
        }
    }

    // GLS in the whitened per-subject form at the optimal relative covariance
    let mut normal = DMatrix::<f64>::zeros(q, q);
    let mut rhs = DVector::<f64>::zeros(q);
    let mut whitened = Vec::with_capacity(n);
    for i in 0..n {
        let rows = design.subject_rows(i);
        let l = factors[owner[i]].l_dirty();
        let wx = l
            .solve_lower_triangular(&x.rows(rows.start, rows.len()).into_owned())
            .expect("positive diagonal");
        let wy = l
            .solve_lower_triangular(&DVector::from_column_slice(&y[rows]))
            .expect("positive diagonal");
        normal += wx.transpose() * &wx;
        rhs += wx.transpose() * &wy;
        whitened.push((wx, wy));
    }
    let beta = solve_normal_equations(normal, &rhs)?;
    let rss: f64 = whitened
        .iter()
        .map(|(wx, wy)| (wy - wx * &beta).norm_squared())
        .sum();
    let mut sigma_eps2 = rss / design.n_obs() as f64;
    let degenerate = !(sigma_eps2 > problem.sigma2_floor());
    if degenerate {
        sigma_eps2 = problem.sigma2_floor();
    }

    // loglik_i with V_i = sigma^2 Lambda_i
    let mut total = 0.0;
    for i in 0..n {
        let rows = design.subject_rows(i);
        let chol = &factors[owner[i]];
        let residual = DVector::from_column_slice(&y[rows.clone()]) - x.rows(rows.start, rows.len()) * &beta;
        total += log_likelihood_factored(&residual, chol, sigma_eps2);
    }
    let variance = VarianceComponents::from_theta(spec, &theta, sigma_eps2);
    let mut fit = FitResult {
        spec,
        beta: beta.iter().copied().collect(),
        variance,
        theta,
        loglik: total / n as f64,
        converged: optimizer_converged,
        iterations,
        evaluations,
        boundary,
        degenerate,
        score_sup: 0.0,
    };
    fit.score_sup = score_residual(&fit, design, y)?;
    fit.converged = optimizer_converged && !degenerate && fit.score_sup <= SCORE_TOLERANCE;
    Ok(fit)
}

/// Sup-norm of the subject-averaged score `X_i^T V_i^{-1} (y_i - X_i beta)`
/// at the fitted variance components.
pub fn score_residual(fit: &FitResult, design: &MarginalDesign, y: &[f64]) -> Result<f64> {
    let q = design.n_columns();
    if fit.beta.len() != q || y.len() != design.n_obs() {
        return Err(Error::Shape("fit does not belong to this design".into()));
    }
    let beta = DVector::from_column_slice(&fit.beta);
    let x = design.matrix();
    let mut score = DVector::<f64>::zeros(q);
    for i in 0..design.n_subjects() {
        let rows = design.subject_rows(i);
        let v = build_covariance(fit.spec, &fit.variance, &design.row_times()[rows.clone()])?;
        let chol = nalgebra::Cholesky::new(v).ok_or(Error::NotPositiveDefinite)?;
        let xi = x.rows(rows.start, rows.len());
        let residual = DVector::from_column_slice(&y[rows]) - xi * &beta;
        score += xi.transpose() * chol.solve(&residual);
    }
    Ok(score.amax() / design.n_subjects() as f64)
}
