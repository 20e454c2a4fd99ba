//! GEES screening statistics with independence (SIS), compound-symmetry and
//! AR(1) working correlations.
//!
//! The response is centered per time point and every covariate standardized
//! over all rows, after which the diagonal variance matrix is taken as the
//! identity and `g_k = n^-1 sum_i x_ik^T R^-1 y_i`.

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::LongitudinalDataset;
use crate::error::{Error, Result};
use crate::screening::rank_descending;

/// Largest absolute working correlation allowed.
pub const RHO_BOUND: f64 = 0.99;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WorkingCorrelation {
    Independence,
    CompoundSymmetry,
    Ar1,
}

impl WorkingCorrelation {
    pub fn label(self) -> &'static str {
        match self {
            WorkingCorrelation::Independence => "sis",
            WorkingCorrelation::CompoundSymmetry => "gees-cs",
            WorkingCorrelation::Ar1 => "gees-ar1",
        }
    }

    /// m x m working correlation at `rho`.
    pub fn matrix(self, rho: f64, m: usize) -> DMatrix<f64> {
        DMatrix::from_fn(m, m, |j, l| {
            if j == l {
                1.0
            } else {
                match self {
                    WorkingCorrelation::Independence => 0.0,
                    WorkingCorrelation::CompoundSymmetry => rho,
                    WorkingCorrelation::Ar1 => rho.powi(j.abs_diff(l) as i32),
                }
            }
        })
    }
}

/// Means and scales removed by [`preprocess_gees`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessRecord {
    /// Response mean at each distinct time.
    pub time_means: Vec<f64>,
    pub covariate_means: Vec<f64>,
    /// Sample standard deviations (divisor N - 1).
    pub covariate_sds: Vec<f64>,
    pub zero_variance: Vec<bool>,
}

#[derive(Debug, Clone)]
pub struct Preprocessed {
    pub m: usize,
    /// Centered response, subject-major.
    pub y: Vec<f64>,
    /// Standardized covariates, column-major N x p; zero-variance columns are all zero.
    pub x: Vec<f64>,
    pub record: PreprocessRecord,
}

/// Centers the response per time point and standardizes each covariate.
pub fn preprocess_gees(ds: &LongitudinalDataset) -> Result<Preprocessed> {
    let m = ds
        .balanced_measurements()
        .ok_or_else(|| Error::Unbalanced("GEES statistics need every subject measured at the same times".into()))?;
    let n_obs = ds.n_obs();
    let n_times = ds.time_values().len();
    let mut sums = vec![0.0; n_times];
    let mut counts = vec![0usize; n_times];
    for (&t, &v) in ds.time_index().iter().zip(ds.response()) {
        sums[t] += v;
        counts[t] += 1;
    }
    let time_means: Vec<f64> = sums
        .iter()
        .zip(&counts)
        .map(|(s, &c)| if c > 0 { s / c as f64 } else { 0.0 })
        .collect();
    let y: Vec<f64> = ds
        .time_index()
        .iter()
        .zip(ds.response())
        .map(|(&t, &v)| v - time_means[t])
        .collect();

    let p = ds.n_covariates();
    let mut x = Vec::with_capacity(n_obs * p);
    let mut covariate_means = Vec::with_capacity(p);
    let mut covariate_sds = Vec::with_capacity(p);
    let mut zero_variance = Vec::with_capacity(p);
    for k in 0..p {
        let col = ds.covariate(k);
        let mean = col.iter().sum::<f64>() / n_obs as f64;
        let ss: f64 = col.iter().map(|v| (v - mean).powi(2)).sum();
        let sd = if n_obs > 1 { (ss / (n_obs - 1) as f64).sqrt() } else { 0.0 };
        let flat = !(sd > 1e-12 * mean.abs().max(1.0));
        if flat {
            x.extend(std::iter::repeat_n(0.0, n_obs));
        } else {
            x.extend(col.iter().map(|v| (v - mean) / sd));
        }
        covariate_means.push(mean);
        covariate_sds.push(sd);
        zero_variance.push(flat);
    }
    Ok(Preprocessed {
        m,
        y,
        x,
        record: PreprocessRecord {
            time_means,
            covariate_means,
            covariate_sds,
            zero_variance,
        },
    })
}

/// Moment estimate of the working correlation from residuals laid out
/// subject-major with `m` values per subject.
///
/// Compound symmetry averages all within-subject pair products; AR(1)
/// averages lag-one products. Both are divided by the mean square of the
/// positions involved, which is one for residuals of unit variance.
pub fn estimate_rho(residuals: &[f64], m: usize, kind: WorkingCorrelation) -> Result<f64> {
    if m < 2 {
        return Err(Error::Domain(format!("a working correlation needs m >= 2, got {m}")));
    }
    if residuals.is_empty() || residuals.len() % m != 0 {
        return Err(Error::Shape(format!(
            "{} residuals do not split into subjects of {m}",
            residuals.len()
        )));
    }
    let (products, squares) = match kind {
        WorkingCorrelation::Independence => return Ok(0.0),
        WorkingCorrelation::CompoundSymmetry => {
            let mut pair_sum = 0.0;
            let mut pairs = 0usize;
            for r in residuals.chunks(m) {
                for j in 0..m {
                    for l in j + 1..m {
                        pair_sum += r[j] * r[l];
                        pairs += 1;
                    }
                }
            }
            let square = residuals.iter().map(|v| v * v).sum::<f64>() / residuals.len() as f64;
            (pair_sum / pairs as f64, square)
        }
        WorkingCorrelation::Ar1 => {
            let mut lag_sum = 0.0;
            let mut square_sum = 0.0;
            let mut pairs = 0usize;
            for r in residuals.chunks(m) {
                for j in 0..m - 1 {
                    lag_sum += r[j] * r[j + 1];
                    square_sum += 0.5 * (r[j] * r[j] + r[j + 1] * r[j + 1]);
                    pairs += 1;
                }
            }
            (lag_sum / pairs as f64, square_sum / pairs as f64)
        }
    };
    if !(squares > 0.0) {
        return Ok(0.0);
    }
    let rho = products / squares;
    let lower = match kind {
        WorkingCorrelation::CompoundSymmetry => (-1.0 / (m as f64 - 1.0) + 0.01).max(-RHO_BOUND),
        _ => -RHO_BOUND,
    };
    Ok(rho.clamp(lower, RHO_BOUND))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeesResult {
    pub method: String,
    pub covariate_names: Vec<String>,
    pub g: Vec<f64>,
    /// Covariate indices (0-based) by descending `|g|`, ties by index.
    pub ranking: Vec<usize>,
    pub selected: Vec<usize>,
    pub d: usize,
    pub rho: Option<f64>,
    pub record: PreprocessRecord,
}

/// GEES screening statistics and the top-`d` set.
pub fn gees_statistics(ds: &LongitudinalDataset, kind: WorkingCorrelation, d: usize) -> Result<GeesResult> {
    if d < 1 {
        return Err(Error::Config("d must be at least 1".into()));
    }
    let pre = preprocess_gees(ds)?;
    let m = pre.m;
    let n = ds.n_subjects();
    let n_obs = ds.n_obs();

    let rho = match kind {
        WorkingCorrelation::Independence => None,
        _ => {
            let mean_square = pre.y.iter().map(|v| v * v).sum::<f64>() / n_obs as f64;
            let scale = if mean_square > 0.0 { mean_square.sqrt().recip() } else { 0.0 };
            let standardized: Vec<f64> = pre.y.iter().map(|v| v * scale).collect();
            Some(estimate_rho(&standardized, m, kind)?)
        }
    };

    // w_i = R^-1 y_i, stacked like y
    let weighted: Vec<f64> = match rho {
        None => pre.y.clone(),
        Some(rho) => {
            let chol = kind
                .matrix(rho, m)
                .cholesky()
                .ok_or(Error::NotPositiveDefinite)?;
            let mut out = Vec::with_capacity(n_obs);
            for yi in pre.y.chunks(m) {
                out.extend(chol.solve(&DVector::from_column_slice(yi)).iter());
            }
            out
        }
    };

    let g: Vec<f64> = (0..ds.n_covariates())
        .into_par_iter()
        .map(|k| {
            let col = &pre.x[k * n_obs..(k + 1) * n_obs];
            col.iter().zip(&weighted).map(|(a, b)| a * b).sum::<f64>() / n as f64
        })
        .collect();
    let magnitude: Vec<f64> = g.iter().map(|v| v.abs()).collect();
    let ranking = rank_descending(&magnitude, &vec![false; g.len()]);
    let selected = ranking[..d.min(g.len())].to_vec();
    Ok(GeesResult {
        method: kind.label().to_string(),
        covariate_names: ds.covariate_names().to_vec(),
        g,
        ranking,
        selected,
        d,
        rho,
        record: pre.record,
    })
}
