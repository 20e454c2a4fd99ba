use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{screen_likelihood, ScreeningConfig};
use crate::data::LongitudinalDataset;
use crate::error::{Error, Result};
use crate::rng::{stream, Role};

/// Selection frequencies over subject-level bootstrap replicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapResult {
    pub covariate_names: Vec<String>,
    /// Number of replicates in which each covariate was selected.
    pub counts: Vec<usize>,
    pub replicates: usize,
    /// Retained-set size of each replicate; `None` for a failed replicate.
    pub d_per_replicate: Vec<Option<usize>>,
    /// `(replicate, message)` of every failed replicate.
    pub failures: Vec<(usize, String)>,
}

impl BootstrapResult {
    /// Covariate indices sorted by descending count, ties by index.
    pub fn order(&self) -> Vec<usize> {
        let mut order: Vec<usize> = (0..self.counts.len()).collect();
        order.sort_by(|&a, &b| self.counts[b].cmp(&self.counts[a]).then(a.cmp(&b)));
        order
    }
}

/// Resamples whole subjects with replacement `b` times and counts how often
/// each covariate lands in the screened set.
pub fn bootstrap_stability(
    ds: &LongitudinalDataset,
    cfg: &ScreeningConfig,
    b: usize,
    seed: u64,
) -> Result<BootstrapResult> {
    if b < 1 {
        return Err(Error::Config("the number of bootstrap replicates must be at least 1".into()));
    }
    cfg.validate(ds)?;
    let n = ds.n_subjects();
    let outcomes: Vec<Result<Vec<usize>>> = (0..b)
        .into_par_iter()
        .map(|r| {
            let mut rng = stream(seed, r as u64, Role::Resampling);
            let subjects: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
            let sample = ds.resample_subjects(&subjects)?;
            Ok(screen_likelihood(&sample, cfg)?.selected)
        })
        .collect();

    let mut counts = vec![0; ds.n_covariates()];
    let mut d_per_replicate = Vec::with_capacity(b);
    let mut failures = Vec::new();
    for (r, outcome) in outcomes.into_iter().enumerate() {
        match outcome {
            Ok(selected) => {
                for &k in &selected {
                    counts[k] += 1;
                }
                d_per_replicate.push(Some(selected.len()));
            }
            Err(e) => {
                d_per_replicate.push(None);
                failures.push((r, e.to_string()));
            }
        }
    }
    Ok(BootstrapResult {
        covariate_names: ds.covariate_names().to_vec(),
        counts,
        replicates: b,
        d_per_replicate,
        failures,
    })
}
