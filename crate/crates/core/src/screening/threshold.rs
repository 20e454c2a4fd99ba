use crate::data::{build_variance_component_design, LongitudinalDataset};
use crate::error::{Error, Result};
use crate::lmm::{fit_mle, RandomEffectsSpec};

/// Intraclass correlation `sigma_b^2 / (sigma_b^2 + sigma_eps^2)` of a
/// random-intercept model with intercept and the listed conditioning columns
/// as fixed effects. Time is deliberately left out.
pub fn estimate_icc(ds: &LongitudinalDataset, conditioning: &[usize]) -> Result<f64> {
    let design = build_variance_component_design(ds, conditioning)?;
    let fit = fit_mle(&design, ds.response(), RandomEffectsSpec::Intercept)?;
    let between = fit.variance.intercept_variance();
    if fit.boundary || !(between > 0.0) {
        return Ok(0.0);
    }
    Ok(between / (between + fit.variance.sigma_eps2))
}

/// `m n / (1 + icc (m - 1))`.
pub fn effective_sample_size(n: usize, m: f64, icc: f64) -> Result<f64> {
    if n < 1 {
        return Err(Error::Domain("need at least one subject".into()));
    }
    if !(m >= 1.0) || !m.is_finite() {
        return Err(Error::Domain(format!("measurements per subject must be >= 1, got {m}")));
    }
    if !(0.0..=1.0).contains(&icc) {
        return Err(Error::Domain(format!("icc must lie in [0, 1], got {icc}")));
    }
    Ok(m * n as f64 / (1.0 + icc * (m - 1.0)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn limits() {
        assert_eq!(effective_sample_size(40, 4.0, 0.0).unwrap(), 160.0);
        assert_eq!(effective_sample_size(40, 4.0, 1.0).unwrap(), 40.0);
        assert_eq!(effective_sample_size(7, 1.0, 0.3).unwrap(), 7.0);
    }

    #[test]
    fn back_solved_real_data_icc() {
        // icc implied by n_e = 61 at n = 43, m = 4
        let ne = effective_sample_size(43, 4.0, 0.605).unwrap();
        assert!((ne - 61.0).abs() < 0.2, "{ne}");
    }

    #[test]
    fn domain_errors() {
        assert!(effective_sample_size(0, 4.0, 0.1).is_err());
        assert!(effective_sample_size(10, 0.5, 0.1).is_err());
        assert!(effective_sample_size(10, 4.0, -0.1).is_err());
        assert!(effective_sample_size(10, 4.0, 1.5).is_err());
        assert!(effective_sample_size(10, 4.0, f64::NAN).is_err());
    }

    proptest! {
        #[test]
        fn bracketed_and_decreasing(n in 1usize..500, m in 2usize..10, a in 0.0f64..1.0, b in 0.0f64..1.0) {
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            let m = m as f64;
            let ne_lo = effective_sample_size(n, m, lo).unwrap();
            let ne_hi = effective_sample_size(n, m, hi).unwrap();
            prop_assert!(ne_hi <= ne_lo);
            if hi > lo {
                prop_assert!(ne_hi < ne_lo);
            }
            for ne in [ne_lo, ne_hi] {
                prop_assert!(ne >= n as f64 - 1e-9 && ne <= m * n as f64 + 1e-9);
            }
        }
    }
}
