use serde::{Deserialize, Serialize};

use super::generate::Truth;
use crate::error::{Error, Result};
use crate::method::Method;

/// Recovery of the true active sets by one method on one replicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub method: Method,
    pub captured_main: f64,
    pub captured_inter: f64,
    pub full_main: bool,
    pub full_inter: bool,
    pub mms: usize,
}

/// Largest 1-based rank among the active covariates, i.e. the smallest `d`
/// whose top-`d` set contains all of them.
pub fn minimum_model_size(ranking: &[usize], active: &[usize]) -> Result<usize> {
    if active.is_empty() {
        return Err(Error::Domain("the active set is empty".into()));
    }
    let mut rank = vec![usize::MAX; ranking.len()];
    for (pos, &k) in ranking.iter().enumerate() {
        if k < rank.len() {
            rank[k] = pos + 1;
        }
    }
    active
        .iter()
        .map(|&k| match rank.get(k) {
            Some(&r) if r != usize::MAX => Ok(r),
            _ => Err(Error::Index {
                index: k,
                len: ranking.len(),
            }),
        })
        .try_fold(0, |acc, r| r.map(|r| acc.max(r)))
}

fn captured(top: &[bool], set: &[usize]) -> f64 {
    if set.is_empty() {
        return 1.0;
    }
    set.iter().filter(|&&k| top[k]).count() as f64 / set.len() as f64
}

pub fn evaluate_replicate(method: Method, ranking: &[usize], truth: &Truth, d: usize) -> Result<ReplicateOutcome> {
    let mut top = vec![false; ranking.len()];
    for &k in ranking.iter().take(d) {
        top[k] = true;
    }
    let captured_main = captured(&top, &truth.main);
    let captured_inter = captured(&top, &truth.inter);
    Ok(ReplicateOutcome {
        method,
        captured_main,
        captured_inter,
        full_main: captured_main == 1.0,
        full_inter: captured_inter == 1.0,
        mms: minimum_model_size(ranking, &truth.union())?,
    })
}

/// Per-method aggregate in the layout of the paper's result tables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub replicates: usize,
    pub r_main: f64,
    pub rbar_main: f64,
    pub r_inter: f64,
    pub rbar_inter: f64,
    pub mms50: usize,
    pub mms75: usize,
    pub mms95: usize,
}

/// Nearest-rank percentile: the `ceil(q B / 100)`-th smallest of `B` values.
pub fn nearest_rank(values: &[usize], q: usize) -> Result<usize> {
    if values.is_empty() {
        return Err(Error::Domain("no values for a percentile".into()));
    }
    let mut sorted = values.to_vec();
    sorted.sort_unstable();
    let rank = (q * sorted.len()).div_ceil(100).max(1);
    Ok(sorted[rank - 1])
}

/// Aggregates outcomes per method, methods in order of first appearance.
pub fn aggregate_metrics(outcomes: &[ReplicateOutcome]) -> Result<Vec<MethodSummary>> {
    if outcomes.is_empty() {
        return Err(Error::Domain("no replicate outcomes to aggregate".into()));
    }
    let mut methods: Vec<Method> = Vec::new();
    for o in outcomes {
        if !methods.contains(&o.method) {
            methods.push(o.method);
        }
    }
    methods
        .into_iter()
        .map(|method| {
            let own: Vec<&ReplicateOutcome> = outcomes.iter().filter(|o| o.method == method).collect();
            let b = own.len() as f64;
            let mean = |f: &dyn Fn(&ReplicateOutcome) -> f64| own.iter().map(|o| f(o)).sum::<f64>() / b;
            let mms: Vec<usize> = own.iter().map(|o| o.mms).collect();
            Ok(MethodSummary {
                method,
                replicates: own.len(),
                r_main: mean(&|o| o.full_main as u8 as f64),
                rbar_main: mean(&|o| o.captured_main),
                r_inter: mean(&|o| o.full_inter as u8 as f64),
                rbar_inter: mean(&|o| o.captured_inter),
                mms50: nearest_rank(&mms, 50)?,
                mms75: nearest_rank(&mms, 75)?,
                mms95: nearest_rank(&mms, 95)?,
            })
        })
        .collect()
}
