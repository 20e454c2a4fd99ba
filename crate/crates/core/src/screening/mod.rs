//! Conditional likelihood screening.
//!
//! Each covariate is ranked by the maximized average log-likelihood of its
//! marginal model. The likelihood ratio against the conditional null model is
//! reported alongside; the null is shared by all covariates, so both orderings
//! coincide.

mod bootstrap;
mod threshold;

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use bootstrap::{bootstrap_stability, BootstrapResult};
pub use threshold::{effective_sample_size, estimate_icc};

use crate::data::{build_conditional_design, build_marginal_design, LongitudinalDataset, TimeCoding};
use crate::error::{Error, Result};
use crate::lmm::gls::deficient_columns;
use crate::lmm::{fit_mle, FitResult, RandomEffectsSpec, SlopeCorrelation};

/// How many top-ranked covariates are retained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DPolicy {
    Fixed(usize),
    /// `floor(n_e)` with the ICC estimated from the data.
    EffectiveSampleSize,
}

impl FromStr for DPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "auto" {
            return Ok(DPolicy::EffectiveSampleSize);
        }
        match s.parse::<usize>() {
            Ok(d) if d >= 1 => Ok(DPolicy::Fixed(d)),
            _ => Err(Error::Config(format!("--d must be a positive integer or 'auto', got '{s}'"))),
        }
    }
}

impl fmt::Display for DPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            DPolicy::Fixed(d) => write!(f, "{d}"),
            DPolicy::EffectiveSampleSize => f.write_str("auto"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningConfig {
    pub spec: RandomEffectsSpec,
    pub coding: TimeCoding,
    /// Indices of the dataset's conditioning columns entering every model.
    pub conditioning: Vec<usize>,
    pub d: DPolicy,
}

impl ScreeningConfig {
    pub fn new(spec: RandomEffectsSpec, coding: TimeCoding) -> Self {
        Self {
            spec,
            coding,
            conditioning: Vec::new(),
            d: DPolicy::EffectiveSampleSize,
        }
    }

    pub fn validate(&self, ds: &LongitudinalDataset) -> Result<()> {
        if let DPolicy::Fixed(0) = self.d {
            return Err(Error::Config("d must be at least 1".into()));
        }
        if let Some(&bad) = self.conditioning.iter().find(|&&j| j >= ds.n_conditioning()) {
            return Err(Error::Config(format!(
                "conditioning column {bad} does not exist ({} available)",
                ds.n_conditioning()
            )));
        }
        Ok(())
    }

    /// Report label of the likelihood method.
    pub fn label(&self) -> &'static str {
        match self.spec {
            RandomEffectsSpec::Intercept => "ls-intercept",
            RandomEffectsSpec::InterceptSlope(SlopeCorrelation::Diagonal) => "ls-slope",
            RandomEffectsSpec::InterceptSlope(SlopeCorrelation::Full) => "ls-slope-full",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningResult {
    pub method: String,
    pub covariate_names: Vec<String>,
    /// Maximized average log-likelihood per covariate; `None` when the fit failed.
    pub loglik: Vec<Option<f64>>,
    /// `loglik - null_loglik`.
    pub lr: Vec<Option<f64>>,
    pub null_loglik: f64,
    /// Covariate indices (0-based), best first.
    pub ranking: Vec<usize>,
    /// The first `d` entries of `ranking`.
    pub selected: Vec<usize>,
    pub d: usize,
    pub icc: Option<f64>,
    pub converged: Vec<bool>,
    pub failures: Vec<Option<String>>,
    /// Conditioning columns removed because they were collinear with the
    /// rest of the null design.
    pub dropped_conditioning: Vec<String>,
}

impl ScreeningResult {
    /// 1-based rank of every covariate.
    pub fn ranks(&self) -> Vec<usize> {
        let mut ranks = vec![0; self.ranking.len()];
        for (pos, &k) in self.ranking.iter().enumerate() {
            ranks[k] = pos + 1;
        }
        ranks
    }
}

/// Orders covariates by descending score with ascending index on ties.
/// Covariates flagged in `demoted` follow all others, by index.
pub fn rank_descending(scores: &[f64], demoted: &[bool]) -> Vec<usize> {
    let mut ranking: Vec<usize> = (0..scores.len()).collect();
    ranking.sort_by(|&a, &b| {
        demoted[a]
            .cmp(&demoted[b])
            .then_with(|| {
                if demoted[a] {
                    std::cmp::Ordering::Equal
                } else {
                    scores[b].total_cmp(&scores[a])
                }
            })
            .then(a.cmp(&b))
    });
    ranking
}

/// Conditioning columns that survive a rank check of the null design.
fn usable_conditioning(ds: &LongitudinalDataset, cfg: &ScreeningConfig) -> Result<(Vec<usize>, Vec<String>)> {
    let design = build_conditional_design(ds, cfg.coding, &cfg.conditioning)?;
    let x = design.matrix();
    let deficient = deficient_columns(&(x.transpose() * x));
    let extras = design.layout().extras.clone();
    if let Some(&c) = deficient.iter().find(|c| !extras.contains(c)) {
        return Err(Error::RankDeficient { columns: vec![c] });
    }
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for (offset, &j) in cfg.conditioning.iter().enumerate() {
        if deficient.contains(&(extras.start + offset)) {
            dropped.push(ds.conditioning_names()[j].clone());
        } else {
            kept.push(j);
        }
    }
    Ok((kept, dropped))
}

/// Model of the response on intercept, time coding and conditioning columns.
pub fn fit_null_model(
    ds: &LongitudinalDataset,
    coding: TimeCoding,
    conditioning: &[usize],
    spec: RandomEffectsSpec,
) -> Result<FitResult> {
    let design = build_conditional_design(ds, coding, conditioning)?;
    fit_mle(&design, ds.response(), spec)
}

/// Resolves the retained-set size; returns `(d, icc)`.
pub fn resolve_d(ds: &LongitudinalDataset, policy: DPolicy, conditioning: &[usize]) -> Result<(usize, Option<f64>)> {
    match policy {
        DPolicy::Fixed(d) => Ok((d, None)),
        DPolicy::EffectiveSampleSize => {
            let icc = estimate_icc(ds, conditioning)?;
            let ne = effective_sample_size(ds.n_subjects(), ds.mean_measurements(), icc)?;
            Ok(((ne.floor() as usize).max(1), Some(icc)))
        }
    }
}

/// Fits every marginal model and ranks the covariates.
///
/// A covariate whose fit fails or does not converge is ranked after all
/// converged ones and flagged; only dataset-level problems abort the run.
pub fn screen_likelihood(ds: &LongitudinalDataset, cfg: &ScreeningConfig) -> Result<ScreeningResult> {
    cfg.validate(ds)?;
    let (conditioning, dropped) = usable_conditioning(ds, cfg)?;
    let null = fit_null_model(ds, cfg.coding, &conditioning, cfg.spec)?;
    let (d, icc) = resolve_d(ds, cfg.d, &conditioning)?;

    let fits: Vec<Result<FitResult>> = (0..ds.n_covariates())
        .into_par_iter()
        .map(|k| {
            let design = build_marginal_design(ds, k, cfg.coding, &conditioning)?;
            fit_mle(&design, ds.response(), cfg.spec)
        })
        .collect();

    let p = fits.len();
    let mut loglik = Vec::with_capacity(p);
    let mut converged = Vec::with_capacity(p);
    let mut failures = Vec::with_capacity(p);
    for fit in &fits {
        match fit {
            Ok(f) => {
                loglik.push(Some(f.loglik));
                converged.push(f.converged);
                failures.push(None);
            }
            Err(e) => {
                loglik.push(None);
                converged.push(false);
                failures.push(Some(e.to_string()));
            }
        }
    }
    let scores: Vec<f64> = loglik.iter().map(|l| l.unwrap_or(f64::NEG_INFINITY)).collect();
    let demoted: Vec<bool> = converged.iter().map(|c| !c).collect();
    let ranking = rank_descending(&scores, &demoted);
    let selected = ranking[..d.min(p)].to_vec();

    Ok(ScreeningResult {
        method: cfg.label().to_string(),
        covariate_names: ds.covariate_names().to_vec(),
        lr: loglik.iter().map(|l| l.map(|v| v - null.loglik)).collect(),
        loglik,
        null_loglik: null.loglik,
        ranking,
        selected,
        d,
        icc,
        converged,
        failures,
        dropped_conditioning: dropped,
    })
}
