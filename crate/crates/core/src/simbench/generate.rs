use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{Example, SimConfig};
use crate::data::{DatasetParts, LongitudinalDataset};
use crate::error::Result;
use crate::rng::{stream, Role};

/// Active sets of a simulated dataset, 0-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Truth {
    pub main: Vec<usize>,
    pub inter: Vec<usize>,
}

impl Truth {
    /// Sorted union of both active sets.
    pub fn union(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.main.iter().chain(&self.inter).copied().collect();
        all.sort_unstable();
        all.dedup();
        all
    }
}

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Column-major N x p covariates for `n` subjects of `m` rows each.
fn draw_covariates(cfg: &SimConfig, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let (n, m, p) = (cfg.n, cfg.m, cfg.p);
    let n_obs = n * m;
    let sd = cfg.covariate_sd;
    let mut x = vec![0.0; n_obs * p];
    match cfg.example {
        Example::Baseline | Example::DummyTime | Example::Equicorrelated => {
            let shared = if cfg.example == Example::Equicorrelated { cfg.omega } else { 0.0 };
            let own = (1.0 - shared).sqrt();
            for i in 0..n {
                // the subject factor is only drawn when it matters, so that
                // omega = 0 reproduces the independent sampler draw for draw
                let z = if shared > 0.0 { shared.sqrt() * normal(rng) } else { 0.0 };
                for k in 0..p {
                    let v = sd * (z + own * normal(rng));
                    x[k * n_obs + i * m..k * n_obs + (i + 1) * m].fill(v);
                }
            }
        }
        Example::TimeVarying => {
            let rho = cfg.ar_coef;
            let innovation = (1.0 - rho * rho).sqrt();
            for i in 0..n {
                for k in 0..p {
                    let base = k * n_obs + i * m;
                    let mut prev = sd * normal(rng);
                    x[base] = prev;
                    for j in 1..m {
                        prev = rho * prev + sd * innovation * normal(rng);
                        x[base + j] = prev;
                    }
                }
            }
        }
    }
    x
}

/// Draws one replicate of the configured example.
///
/// Covariates, random effects and noise come from separate streams keyed by
/// `(master_seed, replicate)`, so e.g. changing `p` leaves the noise intact.
pub fn generate_dataset(cfg: &SimConfig, replicate: u64) -> Result<(LongitudinalDataset, Truth)> {
    cfg.validate()?;
    let (n, m, p) = (cfg.n, cfg.m, cfg.p);
    let n_obs = n * m;
    let truth = cfg.truth();
    let x = draw_covariates(cfg, &mut stream(cfg.master_seed, replicate, Role::Covariates));

    // time contribution of coefficient vectors of ones (dummy) or of the numeric time
    let time_basis: Vec<f64> = (0..m)
        .map(|j| match cfg.example {
            Example::DummyTime => {
                if j == 0 {
                    0.0
                } else {
                    1.0
                }
            }
            _ => j as f64,
        })
        .collect();

    let mut effects = stream(cfg.master_seed, replicate, Role::RandomEffects);
    let mut noise = stream(cfg.master_seed, replicate, Role::Noise);
    let mut y = vec![0.0; n_obs];
    for i in 0..n {
        let b0 = cfg.sigma_b * normal(&mut effects);
        let b1 = if cfg.example == Example::TimeVarying {
            cfg.sigma_b * normal(&mut effects)
        } else {
            0.0
        };
        for j in 0..m {
            let r = i * m + j;
            let t = j as f64;
            let mut mean = cfg.beta0 + cfg.tau * time_basis[j];
            for &k in &truth.main {
                mean += cfg.beta_main * x[k * n_obs + r];
            }
            for &k in &truth.inter {
                mean += cfg.beta_inter * x[k * n_obs + r] * time_basis[j];
            }
            y[r] = mean + b0 + b1 * t + cfg.sigma_eps * normal(&mut noise);
        }
    }

    let ds = LongitudinalDataset::new(DatasetParts {
        subject_ids: (1..=n).map(|i| format!("s{i}")).collect(),
        subject_offsets: (0..=n).map(|i| i * m).collect(),
        time_values: (0..m).map(|j| j as f64).collect(),
        time_index: (0..n_obs).map(|r| r % m).collect(),
        response: y,
        covariates: x,
        covariate_names: (1..=p).map(|k| format!("x{k}")).collect(),
        conditioning: Vec::new(),
        conditioning_names: Vec::new(),
    })?;
    Ok((ds, truth))
}
