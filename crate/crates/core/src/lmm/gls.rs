//! Gaussian log-likelihood and generalized least squares over independent
//! subjects, all through Cholesky factors.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// `-(m/2) log(2 pi) - 1/2 log|V| - 1/2 (y - mean)^T V^{-1} (y - mean)`.
pub fn log_likelihood(y: &DVector<f64>, mean: &DVector<f64>, v: &DMatrix<f64>) -> Result<f64> {
    let m = y.len();
    if mean.len() != m || v.nrows() != m || v.ncols() != m {
        return Err(Error::Shape(format!(
            "y has {m} entries, mean {} and V is {}x{}",
            mean.len(),
            v.nrows(),
            v.ncols()
        )));
    }
    let chol = Cholesky::new(v.clone()).ok_or(Error::NotPositiveDefinite)?;
    Ok(log_likelihood_factored(&(y - mean), &chol, 1.0))
}

/// Log-likelihood under `V = scale * L L^T` given the Cholesky factor of `L L^T`.
pub(crate) fn log_likelihood_factored(
    residual: &DVector<f64>,
    chol: &Cholesky<f64, Dyn>,
    scale: f64,
) -> f64 {
    let m = residual.len() as f64;
    let l = chol.l_dirty();
    let log_det: f64 =
        2.0 * (0..residual.len()).map(|j| l[(j, j)].ln()).sum::<f64>() + m * scale.ln();
    let whitened = l
        .solve_lower_triangular(residual)
        .expect("Cholesky factor has a positive diagonal");
    -0.5 * m * (2.0 * PI).ln() - 0.5 * log_det - 0.5 * whitened.norm_squared() / scale
}

/// Solves `sum_i X_i^T V_i^{-1} X_i beta = sum_i X_i^T V_i^{-1} y_i` and returns
/// beta with the subject-averaged log-likelihood at beta.
pub fn gls_solve(
    designs: &[DMatrix<f64>],
    ys: &[DVector<f64>],
    vs: &[DMatrix<f64>],
) -> Result<(DVector<f64>, f64)> {
    if designs.is_empty() || designs.len() != ys.len() || designs.len() != vs.len() {
        return Err(Error::Shape(format!(
            "{} design blocks, {} responses, {} covariances",
            designs.len(),
            ys.len(),
            vs.len()
        )));
    }
    let q = designs[0].ncols();
    let factors = vs
        .iter()
        .map(|v| Cholesky::new(v.clone()).ok_or(Error::NotPositiveDefinite))
        .collect::<Result<Vec<_>>>()?;

    let mut normal = DMatrix::<f64>::zeros(q, q);
    let mut rhs = DVector::<f64>::zeros(q);
    for ((x, y), chol) in designs.iter().zip(ys).zip(&factors) {
        if x.ncols() != q || x.nrows() != y.len() || y.len() != chol.l_dirty().nrows() {
            return Err(Error::Shape("subject blocks disagree in dimension".into()));
        }
        let l = chol.l_dirty();
        let wx = l.solve_lower_triangular(x).expect("positive diagonal");
        let wy = l.solve_lower_triangular(y).expect("positive diagonal");
        normal += wx.transpose() * &wx;
        rhs += wx.transpose() * wy;
    }
    let beta = solve_normal_equations(normal, &rhs)?;

    let mut total = 0.0;
    for ((x, y), chol) in designs.iter().zip(ys).zip(&factors) {
        total += log_likelihood_factored(&(y - x * &beta), chol, 1.0);
    }
    Ok((beta, total / designs.len() as f64))
}

/// Relative pivot below which a normal matrix is declared singular.
pub(crate) const RANK_TOLERANCE: f64 = 1e-10;

/// Solves a symmetric normal system, reporting rank deficiency with the
/// columns that could not be pivoted.
pub(crate) fn solve_normal_equations(normal: DMatrix<f64>, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    let deficient = deficient_columns(&normal);
    if !deficient.is_empty() {
        return Err(Error::RankDeficient { columns: deficient });
    }
    let chol = Cholesky::new(normal).ok_or(Error::RankDeficient { columns: vec![] })?;
    Ok(chol.solve(rhs))
}

/// Columns whose pivot in a diagonally scaled Cholesky sweep falls below
/// [`RANK_TOLERANCE`]; they are linear combinations of earlier columns.
pub(crate) fn deficient_columns(normal: &DMatrix<f64>) -> Vec<usize> {
    let q = normal.nrows();
    let scale: Vec<f64> = (0..q)
        .map(|c| {
            let d = normal[(c, c)];
            if d > 0.0 {
                1.0 / d.sqrt()
            } else {
                0.0
            }
        })
        .collect();
    let mut a = DMatrix::from_fn(q, q, |r, c| normal[(r, c)] * scale[r] * scale[c]);
    let mut deficient = Vec::new();
    for k in 0..q {
        let pivot = a[(k, k)];
        if scale[k] == 0.0 || !(pivot > RANK_TOLERANCE) {
            deficient.push(k);
            for r in 0..q {
                a[(r, k)] = 0.0;
                a[(k, r)] = 0.0;
            }
            continue;
        }
        let root = pivot.sqrt();
        for r in k..q {
            a[(r, k)] /= root;
        }
        for c in k + 1..q {
            for r in c..q {
                let update = a[(r, k)] * a[(c, k)];
                a[(r, c)] -= update;
            }
        }
    }
    deficient
}
