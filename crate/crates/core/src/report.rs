//! JSON and CSV renderings of screening, bootstrap and benchmark results.
//! Field and column names are a stable contract; see the schema files under
//! `schemas/`.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baselines::GeesResult;
use crate::error::Result;
use crate::screening::{BootstrapResult, ScreeningResult};
use crate::simbench::{BenchmarkReport, MethodSummary};

/// One covariate of a screening report. `index` and `rank` are 1-based.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VariableRow {
    pub index: usize,
    pub name: String,
    pub loglik: Option<f64>,
    pub lr: Option<f64>,
    /// GEES statistic; absent for likelihood methods.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub statistic: Option<f64>,
    pub rank: usize,
    pub selected: bool,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScreeningReport {
    pub method: String,
    pub d: usize,
    pub icc: Option<f64>,
    pub null_loglik: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rho: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_conditioning: Vec<String>,
    /// Covariates in input order.
    pub variables: Vec<VariableRow>,
}

fn ranks(ranking: &[usize]) -> Vec<usize> {
    let mut out = vec![0; ranking.len()];
    for (pos, &k) in ranking.iter().enumerate() {
        out[k] = pos + 1;
    }
    out
}

impl ScreeningReport {
    pub fn from_likelihood(res: &ScreeningResult) -> Self {
        let rank = ranks(&res.ranking);
        let d = res.selected.len();
        Self {
            method: res.method.clone(),
            d: res.d,
            icc: res.icc,
            null_loglik: Some(res.null_loglik),
            rho: None,
            dropped_conditioning: res.dropped_conditioning.clone(),
            variables: (0..res.covariate_names.len())
                .map(|k| VariableRow {
                    index: k + 1,
                    name: res.covariate_names[k].clone(),
                    loglik: res.loglik[k],
                    lr: res.lr[k],
                    statistic: None,
                    rank: rank[k],
                    selected: rank[k] <= d,
                    converged: res.converged[k],
                })
                .collect(),
        }
    }

    pub fn from_gees(res: &GeesResult, icc: Option<f64>) -> Self {
        let rank = ranks(&res.ranking);
        let d = res.selected.len();
        Self {
            method: res.method.clone(),
            d: res.d,
            icc,
            null_loglik: None,
            rho: res.rho,
            dropped_conditioning: Vec::new(),
            variables: (0..res.g.len())
                .map(|k| VariableRow {
                    index: k + 1,
                    name: res.covariate_names[k].clone(),
                    loglik: None,
                    lr: None,
                    statistic: Some(res.g[k]),
                    rank: rank[k],
                    selected: rank[k] <= d,
                    converged: !res.record.zero_variance[k],
                })
                .collect(),
        }
    }

    /// Variables ordered by rank.
    pub fn ranked(&self) -> Vec<&VariableRow> {
        let mut rows: Vec<&VariableRow> = self.variables.iter().collect();
        rows.sort_by_key(|r| r.rank);
        rows
    }

    pub fn write_json<W: Write>(&self, sink: W) -> Result<()> {
        serde_json::to_writer_pretty(sink, self)?;
        Ok(())
    }

    /// CSV with one row per covariate in rank order.
    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["rank", "index", "name", "loglik", "lr", "statistic", "selected", "converged"])?;
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        for row in self.ranked() {
            w.write_record([
                row.rank.to_string(),
                row.index.to_string(),
                row.name.clone(),
                opt(row.loglik),
                opt(row.lr),
                opt(row.statistic),
                row.selected.to_string(),
                row.converged.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapRow {
    pub index: usize,
    pub name: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FailedReplicate {
    pub replicate: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BootstrapReport {
    pub method: String,
    pub replicates: usize,
    pub seed: u64,
    pub failures: Vec<FailedReplicate>,
    /// Covariates by descending selection count, ties by index.
    pub variables: Vec<BootstrapRow>,
}

impl BootstrapReport {
    pub fn new(method: &str, seed: u64, res: &BootstrapResult) -> Self {
        Self {
            method: method.to_string(),
            replicates: res.replicates,
            seed,
            failures: res
                .failures
                .iter()
                .map(|(replicate, message)| FailedReplicate {
                    replicate: *replicate,
                    message: message.clone(),
                })
                .collect(),
            variables: res
                .order()
                .into_iter()
                .map(|k| BootstrapRow {
                    index: k + 1,
                    name: res.covariate_names[k].clone(),
                    count: res.counts[k],
                })
                .collect(),
        }
    }

    pub fn write_json<W: Write>(&self, sink: W) -> Result<()> {
        serde_json::to_writer_pretty(sink, self)?;
        Ok(())
    }

    pub fn write_csv<W: Write>(&self, sink: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(sink);
        w.write_record(["index", "name", "count"])?;
        for row in &self.variables {
            w.write_record([row.index.to_string(), row.name.clone(), row.count.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Table of per-method summaries, one row per method.
pub fn write_benchmark_csv<W: Write>(report: &BenchmarkReport, sink: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["n", "method", "r_M", "Rbar_M", "r_I", "Rbar_I", "mms50", "mms75", "mms95"])?;
    for s in &report.summaries {
        let MethodSummary {
            method,
            r_main,
            rbar_main,
            r_inter,
            rbar_inter,
            mms50,
            mms75,
            mms95,
            ..
        } = s;
        w.write_record([
            report.config.n.to_string(),
            method.to_string(),
            format!("{r_main:.3}"),
            format!("{rbar_main:.3}"),
            format!("{r_inter:.3}"),
            format!("{rbar_inter:.3}"),
            mms50.to_string(),
            mms75.to_string(),
            mms95.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result() -> ScreeningResult {
        ScreeningResult {
            method: "ls-slope".into(),
            covariate_names: vec!["a".into(), "b".into(), "c".into()],
            loglik: vec![Some(-1.0), None, Some(-0.5)],
            lr: vec![Some(0.25), None, Some(0.75)],
            null_loglik: -1.25,
            ranking: vec![2, 0, 1],
            selected: vec![2, 0],
            d: 2,
            icc: Some(0.3),
            converged: vec![true, false, true],
            failures: vec![None, Some("rank".into()), None],
            dropped_conditioning: vec![],
        }
    }

    #[test]
    fn likelihood_rows_are_one_based() {
        let rep = ScreeningReport::from_likelihood(&result());
        let ranks: Vec<usize> = rep.variables.iter().map(|v| v.rank).collect();
        assert_eq!(ranks, vec![2, 3, 1]);
        assert_eq!(rep.variables[1].index, 2);
        assert!(rep.variables[0].selected && !rep.variables[1].selected);
    }

    #[test]
    fn csv_is_in_rank_order() {
        let mut buf = Vec::new();
        ScreeningReport::from_likelihood(&result()).write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "rank,index,name,loglik,lr,statistic,selected,converged");
        assert_eq!(lines[1], "1,3,c,-0.5,0.75,,true,true");
        assert_eq!(lines[3], "3,2,b,,,,false,false");
    }

    #[test]
    fn json_field_names() {
        let value = serde_json::to_value(ScreeningReport::from_likelihood(&result())).unwrap();
        for key in ["method", "d", "icc", "null_loglik", "variables"] {
            assert!(value.get(key).is_some(), "{key}");
        }
        let row = &value["variables"][0];
        for key in ["index", "name", "loglik", "lr", "rank", "selected", "converged"] {
            assert!(row.get(key).is_some(), "{key}");
        }
    }
}
