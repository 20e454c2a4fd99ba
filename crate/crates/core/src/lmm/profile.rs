//! Profiled ML deviance. For fixed relative covariance `Lambda(theta)`, beta is
//! the GLS solution and `sigma_eps^2 = RSS / N`, leaving
//! `-2 loglik = N (log(2 pi) + 1 + log(RSS / N)) + sum_i log|Lambda_i|`.
//!
//! Subjects measured at the same time sequence share `Lambda_i`. For each such
//! pattern the cross products `sum_i x_ij x_il^T`, `sum_i x_ij y_il` and
//! `sum_i y_ij y_il` are accumulated once, so one evaluation costs a single
//! small factorization per pattern regardless of the number of subjects.

use std::collections::HashMap;
use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::covariance::RandomEffectsSpec;
use crate::data::MarginalDesign;
use crate::error::{Error, Result};

/// Lower bound of the residual variance relative to the mean squared response.
pub(crate) const SIGMA2_RELATIVE_FLOOR: f64 = 1e-14;

struct Pattern {
    times: Vec<f64>,
    subjects: Vec<usize>,
    /// Packed upper triangle of `S_jl + S_lj^T` (or `S_jj`) per pair j <= l.
    xx: Vec<f64>,
    /// `u_jl + u_lj` (or `u_jj`) per pair, q entries each.
    xy: Vec<f64>,
    /// `sum_i y_ij y_il`, doubled off the diagonal, per pair.
    yy: Vec<f64>,
}

/// Evaluation of the profiled objective at one theta.
#[derive(Debug, Clone)]
pub struct ProfiledEval {
    pub deviance: f64,
    pub beta: DVector<f64>,
    pub sigma_eps2: f64,
    /// Set when the residual variance had to be raised to its floor.
    pub floored: bool,
}

/// Precomputed sufficient statistics of one (design, response, spec) triple.
pub struct ProfiledProblem {
    spec: RandomEffectsSpec,
    q: usize,
    n_obs: usize,
    n_subjects: usize,
    sigma2_floor: f64,
    patterns: Vec<Pattern>,
}

fn pair_index(m: usize) -> Vec<(usize, usize)> {
    let mut pairs = Vec::with_capacity(m * (m + 1) / 2);
    for j in 0..m {
        for l in j..m {
            pairs.push((j, l));
        }
    }
    pairs
}

impl ProfiledProblem {
    pub fn new(design: &MarginalDesign, y: &[f64], spec: RandomEffectsSpec) -> Result<Self> {
        let n_obs = design.n_obs();
        if y.len() != n_obs {
            return Err(Error::Shape(format!(
                "response has {} entries, design has {n_obs} rows",
                y.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidData("response contains non-finite values".into()));
        }
        let q = design.n_columns();
        let x = design.matrix();
        let tri = q * (q + 1) / 2;

        let mut lookup: HashMap<&[usize], usize> = HashMap::new();
        let mut patterns: Vec<Pattern> = Vec::new();
        for i in 0..design.n_subjects() {
            let rows = design.subject_rows(i);
            let key = &design.time_index()[rows.clone()];
            let slot = *lookup.entry(key).or_insert_with(|| {
                patterns.push(Pattern {
                    times: design.row_times()[rows.clone()].to_vec(),
                    subjects: Vec::new(),
                    xx: Vec::new(),
                    xy: Vec::new(),
                    yy: Vec::new(),
                });
                patterns.len() - 1
            });
            patterns[slot].subjects.push(i);
        }

        for pattern in &mut patterns {
            let m = pattern.times.len();
            let pairs = pair_index(m);
            pattern.xx = vec![0.0; pairs.len() * tri];
            pattern.xy = vec![0.0; pairs.len() * q];
            pattern.yy = vec![0.0; pairs.len()];
            for &i in &pattern.subjects {
                let base = design.subject_rows(i).start;
                for (p, &(j, l)) in pairs.iter().enumerate() {
                    let (rj, rl) = (base + j, base + l);
                    let (yj, yl) = (y[rj], y[rl]);
                    let xx = &mut pattern.xx[p * tri..(p + 1) * tri];
                    let xy = &mut pattern.xy[p * q..(p + 1) * q];
                    let mut t = 0;
                    if j == l {
                        for a in 0..q {
                            let xa = x[(rj, a)];
                            for b in a..q {
                                xx[t] += xa * x[(rj, b)];
                                t += 1;
                            }
                            xy[a] += xa * yj;
                        }
                        pattern.yy[p] += yj * yj;
                    } else {
                        for a in 0..q {
                            let (xja, xla) = (x[(rj, a)], x[(rl, a)]);
                            for b in a..q {
                                xx[t] += xja * x[(rl, b)] + xla * x[(rj, b)];
                                t += 1;
                            }
                            xy[a] += xja * yl + xla * yj;
                        }
                        pattern.yy[p] += 2.0 * yj * yl;
                    }
                }
            }
        }

        let mean_square = y.iter().map(|v| v * v).sum::<f64>() / n_obs as f64;
        Ok(Self {
            spec,
            q,
            n_obs,
            n_subjects: design.n_subjects(),
            sigma2_floor: (mean_square * SIGMA2_RELATIVE_FLOOR).max(f64::MIN_POSITIVE),
            patterns,
        })
    }

    pub fn spec(&self) -> RandomEffectsSpec {
        self.spec
    }

    pub fn n_subjects(&self) -> usize {
        self.n_subjects
    }

    pub(crate) fn sigma2_floor(&self) -> f64 {
        self.sigma2_floor
    }

    pub fn n_patterns(&self) -> usize {
        self.patterns.len()
    }

    /// Relative covariance `Lambda = Q L L^T Q^T + I` for one pattern.
    fn relative_covariance(&self, factor: &DMatrix<f64>, times: &[f64]) -> DMatrix<f64> {
        let zl = self.spec.random_design(times) * factor;
        let mut lambda = &zl * zl.transpose();
        for j in 0..times.len() {
            lambda[(j, j)] += 1.0;
        }
        lambda
    }

    /// Cholesky factors of `Lambda` for every pattern, keyed like `patterns`.
    pub(crate) fn pattern_factors(&self, theta: &[f64]) -> Result<Vec<Cholesky<f64, nalgebra::Dyn>>> {
        let factor = self.spec.relative_factor(theta);
        self.patterns
            .iter()
            .map(|p| {
                Cholesky::new(self.relative_covariance(&factor, &p.times))
                    .ok_or(Error::NotPositiveDefinite)
            })
            .collect()
    }

    /// Subjects of each pattern, in pattern order.
    pub(crate) fn pattern_subjects(&self) -> impl Iterator<Item = &[usize]> {
        self.patterns.iter().map(|p| p.subjects.as_slice())
    }

    pub fn evaluate(&self, theta: &[f64]) -> Result<ProfiledEval> {
        let q = self.q;
        let tri = q * (q + 1) / 2;
        let mut normal_packed = vec![0.0; tri];
        let mut rhs = DVector::<f64>::zeros(q);
        let mut yy = 0.0;
        let mut log_det = 0.0;

        let factors = self.pattern_factors(theta)?;
        for (pattern, chol) in self.patterns.iter().zip(&factors) {
            let m = pattern.times.len();
            let l = chol.l_dirty();
            log_det += pattern.subjects.len() as f64
                * 2.0
                * (0..m).map(|j| l[(j, j)].ln()).sum::<f64>();
            let w = chol.inverse();
            let mut p = 0;
            for j in 0..m {
                for k in j..m {
                    let weight = w[(j, k)];
                    for (acc, v) in normal_packed.iter_mut().zip(&pattern.xx[p * tri..(p + 1) * tri]) {
                        *acc += weight * v;
                    }
                    for a in 0..q {
                        rhs[a] += weight * pattern.xy[p * q + a];
                    }
                    yy += weight * pattern.yy[p];
                    p += 1;
                }
            }
        }

        let mut normal = DMatrix::<f64>::zeros(q, q);
        let mut t = 0;
        for a in 0..q {
            for b in a..q {
                normal[(a, b)] = normal_packed[t];
                normal[(b, a)] = normal_packed[t];
                t += 1;
            }
        }
        let chol = Cholesky::new(normal).ok_or(Error::RankDeficient { columns: vec![] })?;
        let beta = chol.solve(&rhs);
        let rss = yy - rhs.dot(&beta);
        let n = self.n_obs as f64;
        let mut sigma_eps2 = rss / n;
        let floored = !(sigma_eps2 > self.sigma2_floor);
        if floored {
            sigma_eps2 = self.sigma2_floor;
        }
        let deviance = n * ((2.0 * PI).ln() + sigma_eps2.ln()) + rss.max(0.0) / sigma_eps2 + log_det;
        Ok(ProfiledEval {
            deviance,
            beta,
            sigma_eps2,
            floored,
        })
    }
}

/// `-2 n` times the subject-averaged log-likelihood with beta and the residual
/// variance profiled out, at unconstrained variance parameters `theta`.
pub fn profiled_deviance(
    theta: &[f64],
    design: &MarginalDesign,
    y: &[f64],
    spec: RandomEffectsSpec,
) -> Result<f64> {
    if theta.len() != spec.n_theta() {
        return Err(Error::Shape(format!(
            "expected {} variance parameters, got {}",
            spec.n_theta(),
            theta.len()
        )));
    }
    Ok(ProfiledProblem::new(design, y, spec)?.evaluate(theta)?.deviance)
}
