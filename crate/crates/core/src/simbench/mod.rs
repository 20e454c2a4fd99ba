//! Monte-Carlo benchmark on the four simulation designs: baseline covariates
//! with a random intercept (1), AR(1) time-varying covariates with random
//! intercept and slope (2), dummy-coded time (3) and equicorrelated
//! covariates (4).

mod generate;
mod metrics;

use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use generate::{generate_dataset, Truth};
pub use metrics::{
    aggregate_metrics, evaluate_replicate, minimum_model_size, nearest_rank, MethodSummary,
    ReplicateOutcome,
};

use crate::baselines::gees_statistics;
use crate::data::{LongitudinalDataset, TimeCoding};
use crate::error::{Error, Result};
use crate::method::Method;
use crate::screening::{resolve_d, screen_likelihood, DPolicy, ScreeningConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Example {
    Baseline = 1,
    TimeVarying = 2,
    DummyTime = 3,
    Equicorrelated = 4,
}

impl TryFrom<u8> for Example {
    type Error = Error;

    fn try_from(v: u8) -> Result<Self> {
        match v {
            1 => Ok(Example::Baseline),
            2 => Ok(Example::TimeVarying),
            3 => Ok(Example::DummyTime),
            4 => Ok(Example::Equicorrelated),
            _ => Err(Error::Config(format!("example must be 1, 2, 3 or 4, got {v}"))),
        }
    }
}

impl From<Example> for u8 {
    fn from(e: Example) -> u8 {
        e as u8
    }
}

impl Example {
    /// Time coding used by the generator and by the likelihood methods.
    pub fn coding(self) -> TimeCoding {
        match self {
            Example::DummyTime => TimeCoding::Dummy,
            _ => TimeCoding::Linear,
        }
    }
}

/// Simulation settings. Active sets are 1-based as in the result tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub example: Example,
    pub n: usize,
    pub p: usize,
    pub m: usize,
    pub sigma_b: f64,
    pub sigma_eps: f64,
    pub active_main: Vec<usize>,
    pub active_inter: Vec<usize>,
    pub beta_main: f64,
    /// Interaction coefficient; with dummy time every time contrast gets it.
    pub beta_inter: f64,
    pub beta0: f64,
    /// Time coefficient; with dummy time every contrast gets it.
    pub tau: f64,
    pub covariate_sd: f64,
    pub omega: f64,
    pub ar_coef: f64,
    pub replicates: usize,
    pub master_seed: u64,
    pub methods: Vec<Method>,
    pub d_policy: DPolicy,
    /// Keep every method's full ranking in the report.
    #[serde(default)]
    pub keep_rankings: bool,
}

impl SimConfig {
    /// Defaults of the given example.
    pub fn new(example: Example, n: usize, p: usize) -> Self {
        let dummy = example == Example::DummyTime;
        Self {
            example,
            n,
            p,
            m: 4,
            sigma_b: 0.1,
            sigma_eps: 0.1,
            active_main: vec![1, 2, 3, 4],
            active_inter: vec![2, 3, 4, 5],
            beta_main: 1.0,
            beta_inter: if dummy { 1.0 } else { 0.5 },
            beta0: 0.0,
            tau: if dummy { 1.0 } else { 0.2 },
            covariate_sd: if example == Example::Equicorrelated { 1.0 } else { 0.4 },
            omega: 0.0,
            ar_coef: 0.8,
            replicates: 100,
            master_seed: 1,
            methods: Method::ALL.to_vec(),
            d_policy: DPolicy::EffectiveSampleSize,
            keep_rankings: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.n < 2 {
            return fail(format!("n must be at least 2, got {}", self.n));
        }
        if self.p < 1 {
            return fail("p must be at least 1".into());
        }
        if self.m < 2 {
            return fail(format!("m must be at least 2, got {}", self.m));
        }
        if !(self.sigma_eps > 0.0) || !self.sigma_eps.is_finite() {
            return fail(format!("sigma_eps must be positive, got {}", self.sigma_eps));
        }
        if !(self.sigma_b >= 0.0) || !self.sigma_b.is_finite() {
            return fail(format!("sigma_b must be non-negative, got {}", self.sigma_b));
        }
        if !(self.covariate_sd > 0.0) || !self.covariate_sd.is_finite() {
            return fail(format!("covariate_sd must be positive, got {}", self.covariate_sd));
        }
        if !(self.omega > -1.0 && self.omega < 1.0) {
            return fail(format!("omega must lie in (-1, 1), got {}", self.omega));
        }
        if self.omega < 0.0 && self.example == Example::Equicorrelated {
            return fail(format!(
                "the equicorrelated sampler needs omega >= 0, got {}",
                self.omega
            ));
        }
        if !(self.ar_coef.abs() < 1.0) {
            return fail(format!("ar_coef must lie in (-1, 1), got {}", self.ar_coef));
        }
        for (name, set) in [("active_main", &self.active_main), ("active_inter", &self.active_inter)] {
            if let Some(&k) = set.iter().find(|&&k| k < 1 || k > self.p) {
                return fail(format!("{name} entry {k} is outside 1..={}", self.p));
            }
        }
        if self.active_main.is_empty() && self.active_inter.is_empty() {
            return fail("at least one active covariate is required".into());
        }
        if self.replicates < 1 {
            return fail("replicates must be at least 1".into());
        }
        if self.methods.is_empty() {
            return fail("no methods selected".into());
        }
        if let DPolicy::Fixed(0) = self.d_policy {
            return fail("d must be at least 1".into());
        }
        for (name, v) in [
            ("beta_main", self.beta_main),
            ("beta_inter", self.beta_inter),
            ("beta0", self.beta0),
            ("tau", self.tau),
        ] {
            if !v.is_finite() {
                return fail(format!("{name} must be finite"));
            }
        }
        Ok(())
    }

    /// 0-based active sets.
    pub fn truth(&self) -> Truth {
        let zero_based = |set: &[usize]| set.iter().map(|k| k - 1).collect();
        Truth {
            main: zero_based(&self.active_main),
            inter: zero_based(&self.active_inter),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodFailure {
    pub method: Method,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRecord {
    pub replicate: usize,
    pub icc: Option<f64>,
    pub d: usize,
    pub outcomes: Vec<ReplicateOutcome>,
    pub failures: Vec<MethodFailure>,
    /// Full rankings per method when `keep_rankings` is set.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rankings: Vec<(Method, Vec<usize>)>,
}

/// Deterministic part of a benchmark run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub config: SimConfig,
    pub summaries: Vec<MethodSummary>,
    pub replicates: Vec<ReplicateRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodTiming {
    pub method: Method,
    pub seconds: f64,
}

/// Report plus wall-clock totals, which are kept apart because they vary
/// between otherwise identical runs.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkOutput {
    pub report: BenchmarkReport,
    pub timings: Vec<MethodTiming>,
}

/// Ranking of all covariates by `method` on a simulated replicate.
pub fn rank_with(method: Method, ds: &LongitudinalDataset, coding: TimeCoding, d: usize) -> Result<Vec<usize>> {
    if let Some(spec) = method.random_effects() {
        let mut cfg = ScreeningConfig::new(spec, coding);
        cfg.d = DPolicy::Fixed(d);
        Ok(screen_likelihood(ds, &cfg)?.ranking)
    } else {
        let kind = method.working_correlation().expect("every method is likelihood or GEES");
        Ok(gees_statistics(ds, kind, d)?.ranking)
    }
}

fn run_replicate(cfg: &SimConfig, replicate: usize) -> Result<(ReplicateRecord, Vec<f64>)> {
    let (ds, truth) = generate_dataset(cfg, replicate as u64)?;
    let (d, icc) = resolve_d(&ds, cfg.d_policy, &[])?;
    let mut record = ReplicateRecord {
        replicate,
        icc,
        d,
        outcomes: Vec::new(),
        failures: Vec::new(),
        rankings: Vec::new(),
    };
    let mut seconds = Vec::with_capacity(cfg.methods.len());
    for &method in &cfg.methods {
        let start = Instant::now();
        let ranked = rank_with(method, &ds, cfg.example.coding(), d);
        seconds.push(start.elapsed().as_secs_f64());
        match ranked {
            Ok(ranking) => {
                record.outcomes.push(evaluate_replicate(method, &ranking, &truth, d)?);
                if cfg.keep_rankings {
                    record.rankings.push((method, ranking));
                }
            }
            Err(e) => record.failures.push(MethodFailure {
                method,
                message: e.to_string(),
            }),
        }
    }
    Ok((record, seconds))
}

/// Generates every replicate, runs the configured methods with `d` resolved
/// per replicate, and aggregates the recovery metrics.
///
/// Replicates run in parallel; the report only depends on the configuration.
pub fn run_benchmark(cfg: &SimConfig) -> Result<BenchmarkOutput> {
    cfg.validate()?;
    let runs: Vec<Result<(ReplicateRecord, Vec<f64>)>> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cfg, r))
        .collect();

    let mut replicates = Vec::with_capacity(cfg.replicates);
    let mut totals = vec![0.0; cfg.methods.len()];
    for run in runs {
        let (record, seconds) = run?;
        for (t, s) in totals.iter_mut().zip(seconds) {
            *t += s;
        }
        replicates.push(record);
    }
    let outcomes: Vec<ReplicateOutcome> = replicates
        .iter()
        .flat_map(|r| r.outcomes.iter().cloned())
        .collect();
    let summaries = if outcomes.is_empty() {
        Vec::new()
    } else {
        aggregate_metrics(&outcomes)?
    };
    Ok(BenchmarkOutput {
        report: BenchmarkReport {
            config: cfg.clone(),
            summaries,
            replicates,
        },
        timings: cfg
            .methods
            .iter()
            .zip(totals)
            .map(|(&method, seconds)| MethodTiming { method, seconds })
            .collect(),
    })
}
