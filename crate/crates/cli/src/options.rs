use std::fs;
use std::path::{Path, PathBuf};

use clap::Args;
use serde::{Deserialize, Deserializer};

/// Settings shared by every command. Each can also come from the JSON file
/// given with `--config`, using the flag name without dashes as key; flags
/// win over the file.
#[derive(Debug, Clone, Default, Args, Deserialize)]
#[serde(default, deny_unknown_fields, rename_all = "kebab-case")]
pub struct Options {
    /// Long-format CSV input
    #[arg(long)]
    pub input: Option<PathBuf>,
    #[arg(long)]
    pub output_json: Option<PathBuf>,
    #[arg(long)]
    pub output_csv: Option<PathBuf>,
    /// Subject id column [default: id]
    #[arg(long)]
    pub id_col: Option<String>,
    /// Time column [default: time]
    #[arg(long)]
    pub time_col: Option<String>,
    /// Response column [default: y]
    #[arg(long)]
    pub response_col: Option<String>,
    /// Comma-separated conditioning columns
    #[arg(long)]
    pub condition_cols: Option<String>,
    /// Comma-separated covariate columns, or "rest" [default: rest]
    #[arg(long)]
    pub covariate_cols: Option<String>,
    /// ls-intercept|ls-slope|sis|gees-cs|gees-ar1; simulate accepts a comma list
    #[arg(long)]
    pub method: Option<String>,
    /// dummy|linear [default: dummy]
    #[arg(long)]
    pub time_coding: Option<String>,
    /// Retained-set size, an integer or "auto" [default: auto]
    #[arg(long)]
    #[serde(deserialize_with = "int_or_string")]
    pub d: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads [default: all cores]
    #[arg(long)]
    pub workers: Option<usize>,
    /// Simulation design 1-4
    #[arg(long)]
    pub example: Option<u8>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub sigma_b: Option<f64>,
    #[arg(long)]
    pub sigma_eps: Option<f64>,
    #[arg(long)]
    pub omega: Option<f64>,
    #[arg(long)]
    pub replicates: Option<usize>,
    /// Bootstrap replicates
    #[arg(long = "bootstrap-B")]
    #[serde(rename = "bootstrap-B")]
    pub bootstrap_b: Option<usize>,
    /// JSON file with default values for any of these flags
    #[arg(long)]
    #[serde(skip)]
    pub config: Option<PathBuf>,
}

fn int_or_string<'de, D: Deserializer<'de>>(de: D) -> Result<Option<String>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Raw {
        Int(u64),
        Text(String),
    }
    Ok(Option::<Raw>::deserialize(de)?.map(|raw| match raw {
        Raw::Int(v) => v.to_string(),
        Raw::Text(s) => s,
    }))
}

macro_rules! fill {
    ($target:ident, $file:ident, $($field:ident),*) => {
        $( if $target.$field.is_none() { $target.$field = $file.$field; } )*
    };
}

impl Options {
    /// Completes unset flags from the config file, if any.
    pub fn resolve(mut self) -> Result<Self, String> {
        let Some(path) = self.config.clone() else {
            return Ok(self);
        };
        let file = read_config(&path)?;
        fill!(
            self, file, input, output_json, output_csv, id_col, time_col, response_col,
            condition_cols, covariate_cols, method, time_coding, d, seed, workers, example, n, p,
            sigma_b, sigma_eps, omega, replicates, bootstrap_b
        );
        Ok(self)
    }
}

fn read_config(path: &Path) -> Result<Options, String> {
    let text = fs::read_to_string(path)
        .map_err(|e| format!("cannot read config file {}: {e}", path.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("invalid config file {}: {e}", path.display()))
}

/// Splits a comma list, dropping blanks.
pub fn split_list(raw: &str) -> Vec<String> {
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}
