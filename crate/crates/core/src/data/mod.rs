//! Longitudinal datasets: one response vector per subject, measured at a subset
//! of a shared, ascending list of distinct times, with screened covariates and
//! conditioning covariates aligned row by row.

mod csv_io;
mod design;

pub use csv_io::{load_long_csv, write_long_csv, CovariateSelection, CsvSchema};
pub use design::{
    build_conditional_design, build_interaction_block, build_marginal_design,
    build_time_dummies, build_variance_component_design, DesignLayout, MarginalDesign, TimeCoding,
};

use std::ops::Range;

use crate::error::{Error, Result};

/// Raw column storage used to assemble a [`LongitudinalDataset`].
///
/// Rows are stacked subject by subject; `subject_offsets` has `n + 1` entries
/// and subject `i` owns rows `subject_offsets[i]..subject_offsets[i + 1]`.
/// Covariate and conditioning values are column-major.
#[derive(Debug, Clone, Default)]
pub struct DatasetParts {
    pub subject_ids: Vec<String>,
    pub subject_offsets: Vec<usize>,
    pub time_values: Vec<f64>,
    pub time_index: Vec<usize>,
    pub response: Vec<f64>,
    pub covariates: Vec<f64>,
    pub covariate_names: Vec<String>,
    pub conditioning: Vec<f64>,
    pub conditioning_names: Vec<String>,
}

/// Immutable longitudinal dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalDataset {
    subject_ids: Vec<String>,
    subject_offsets: Vec<usize>,
    time_values: Vec<f64>,
    time_index: Vec<usize>,
    response: Vec<f64>,
    covariates: Vec<f64>,
    covariate_names: Vec<String>,
    conditioning: Vec<f64>,
    conditioning_names: Vec<String>,
}

impl LongitudinalDataset {
    /// Validates and wraps the given columns.
    ///
    /// Rows of each subject must be in strictly increasing time order.
    pub fn new(parts: DatasetParts) -> Result<Self> {
        let DatasetParts {
            subject_ids,
            subject_offsets,
            time_values,
            time_index,
            response,
            covariates,
            covariate_names,
            conditioning,
            conditioning_names,
        } = parts;

        let n = subject_ids.len();
        if n == 0 {
            return Err(Error::InvalidData("dataset has no subjects".into()));
        }
        if subject_offsets.len() != n + 1 || subject_offsets[0] != 0 {
            return Err(Error::Shape(format!(
                "subject offsets must have {} entries starting at 0",
                n + 1
            )));
        }
        let n_obs = response.len();
        if subject_offsets[n] != n_obs {
            return Err(Error::Shape(format!(
                "offsets cover {} rows but response has {n_obs}",
                subject_offsets[n]
            )));
        }
        if time_index.len() != n_obs {
            return Err(Error::Shape(format!(
                "time index has {} rows, expected {n_obs}",
                time_index.len()
            )));
        }
        let p = covariate_names.len();
        if p == 0 {
            return Err(Error::InvalidData("at least one covariate is required".into()));
        }
        if covariates.len() != n_obs * p {
            return Err(Error::Shape(format!(
                "covariate storage has {} values, expected {n_obs} x {p}",
                covariates.len()
            )));
        }
        if conditioning.len() != n_obs * conditioning_names.len() {
            return Err(Error::Shape(format!(
                "conditioning storage has {} values, expected {n_obs} x {}",
                conditioning.len(),
                conditioning_names.len()
            )));
        }
        if time_values.iter().any(|t| !t.is_finite()) {
            return Err(Error::InvalidData("time values must be finite".into()));
        }
        if time_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidData(
                "time values must be distinct and ascending".into(),
            ));
        }
        for (i, w) in subject_offsets.windows(2).enumerate() {
            if w[0] >= w[1] {
                return Err(Error::InvalidData(format!(
                    "subject '{}' has no measurements",
                    subject_ids[i]
                )));
            }
            let rows = &time_index[w[0]..w[1]];
            if rows.iter().any(|&t| t >= time_values.len()) {
                return Err(Error::InvalidData(format!(
                    "subject '{}' references an unknown time",
                    subject_ids[i]
                )));
            }
            if let Some(pair) = rows.windows(2).find(|r| r[0] >= r[1]) {
                if pair[0] == pair[1] {
                    return Err(Error::DuplicateMeasurement {
                        subject: subject_ids[i].clone(),
                        time: time_values[pair[0]],
                    });
                }
                return Err(Error::InvalidData(format!(
                    "rows of subject '{}' are not sorted by time",
                    subject_ids[i]
                )));
            }
        }
        let all_finite = response
            .iter()
            .chain(&covariates)
            .chain(&conditioning)
            .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::InvalidData("non-finite numeric entry".into()));
        }

        Ok(Self {
            subject_ids,
            subject_offsets,
            time_values,
            time_index,
            response,
            covariates,
            covariate_names,
            conditioning,
            conditioning_names,
        })
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_ids.len()
    }

    /// Total number of measurements N.
    pub fn n_obs(&self) -> usize {
        self.response.len()
    }

    pub fn n_covariates(&self) -> usize {
        self.covariate_names.len()
    }

    pub fn n_conditioning(&self) -> usize {
        self.conditioning_names.len()
    }

    /// Distinct measurement times, ascending.
    pub fn time_values(&self) -> &[f64] {
        &self.time_values
    }

    pub fn subject_ids(&self) -> &[String] {
        &self.subject_ids
    }

    pub fn subject_offsets(&self) -> &[usize] {
        &self.subject_offsets
    }

    pub fn subject_rows(&self, i: usize) -> Range<usize> {
        self.subject_offsets[i]..self.subject_offsets[i + 1]
    }

    /// Per-row index into [`time_values`](Self::time_values).
    pub fn time_index(&self) -> &[usize] {
        &self.time_index
    }

    /// Per-row numeric time.
    pub fn row_times(&self) -> Vec<f64> {
        self.time_index.iter().map(|&t| self.time_values[t]).collect()
    }

    pub fn response(&self) -> &[f64] {
        &self.response
    }

    pub fn covariate(&self, k: usize) -> &[f64] {
        let n_obs = self.n_obs();
        &self.covariates[k * n_obs..(k + 1) * n_obs]
    }

    pub fn covariate_names(&self) -> &[String] {
        &self.covariate_names
    }

    pub fn conditioning_column(&self, j: usize) -> &[f64] {
        let n_obs = self.n_obs();
        &self.conditioning[j * n_obs..(j + 1) * n_obs]
    }

    pub fn conditioning_names(&self) -> &[String] {
        &self.conditioning_names
    }

    /// Average number of measurements per subject.
    pub fn mean_measurements(&self) -> f64 {
        self.n_obs() as f64 / self.n_subjects() as f64
    }

    /// True when every subject is measured at the same sorted set of times.
    pub fn is_balanced(&self) -> bool {
        let first = &self.time_index[self.subject_rows(0)];
        (1..self.n_subjects()).all(|i| &self.time_index[self.subject_rows(i)] == first)
    }

    /// Number of measurements per subject when the dataset is balanced.
    pub fn balanced_measurements(&self) -> Option<usize> {
        self.is_balanced().then(|| self.subject_rows(0).len())
    }

    /// Copy with the response replaced.
    pub fn with_response(&self, response: Vec<f64>) -> Result<Self> {
        let mut parts = self.to_parts();
        parts.response = response;
        Self::new(parts)
    }

    /// Copy keeping the covariates listed in `order`, in that order.
    pub fn select_covariates(&self, order: &[usize]) -> Result<Self> {
        let n_obs = self.n_obs();
        let mut parts = self.to_parts();
        parts.covariates = Vec::with_capacity(order.len() * n_obs);
        parts.covariate_names = Vec::with_capacity(order.len());
        for &k in order {
            if k >= self.n_covariates() {
                return Err(Error::Index {
                    index: k,
                    len: self.n_covariates(),
                });
            }
            parts.covariates.extend_from_slice(self.covariate(k));
            parts.covariate_names.push(self.covariate_names[k].clone());
        }
        Self::new(parts)
    }

    /// Copy with an extra conditioning column appended.
    pub fn with_conditioning_column(&self, name: &str, values: &[f64]) -> Result<Self> {
        if values.len() != self.n_obs() {
            return Err(Error::Shape(format!(
                "conditioning column has {} rows, expected {}",
                values.len(),
                self.n_obs()
            )));
        }
        let mut parts = self.to_parts();
        parts.conditioning.extend_from_slice(values);
        parts.conditioning_names.push(name.to_string());
        Self::new(parts)
    }

    /// Dataset made of the listed subjects (repeats allowed), rows copied verbatim.
    pub fn resample_subjects(&self, subjects: &[usize]) -> Result<Self> {
        if subjects.is_empty() {
            return Err(Error::InvalidData("empty subject selection".into()));
        }
        if let Some(&bad) = subjects.iter().find(|&&i| i >= self.n_subjects()) {
            return Err(Error::Index {
                index: bad,
                len: self.n_subjects(),
            });
        }
        let rows: Vec<usize> = subjects
            .iter()
            .flat_map(|&i| self.subject_rows(i))
            .collect();
        let n_obs = self.n_obs();
        let gather = |storage: &[f64], width: usize| -> Vec<f64> {
            let mut out = Vec::with_capacity(rows.len() * width);
            for c in 0..width {
                let column = &storage[c * n_obs..(c + 1) * n_obs];
                out.extend(rows.iter().map(|&r| column[r]));
            }
            out
        };
        let mut offsets = Vec::with_capacity(subjects.len() + 1);
        offsets.push(0);
        for &i in subjects {
            offsets.push(offsets.last().unwrap() + self.subject_rows(i).len());
        }
        Self::new(DatasetParts {
            subject_ids: subjects.iter().map(|&i| self.subject_ids[i].clone()).collect(),
            subject_offsets: offsets,
            time_values: self.time_values.clone(),
            time_index: rows.iter().map(|&r| self.time_index[r]).collect(),
            response: rows.iter().map(|&r| self.response[r]).collect(),
            covariates: gather(&self.covariates, self.n_covariates()),
            covariate_names: self.covariate_names.clone(),
            conditioning: gather(&self.conditioning, self.n_conditioning()),
            conditioning_names: self.conditioning_names.clone(),
        })
    }

    pub fn to_parts(&self) -> DatasetParts {
        DatasetParts {
            subject_ids: self.subject_ids.clone(),
            subject_offsets: self.subject_offsets.clone(),
            time_values: self.time_values.clone(),
            time_index: self.time_index.clone(),
            response: self.response.clone(),
            covariates: self.covariates.clone(),
            covariate_names: self.covariate_names.clone(),
            conditioning: self.conditioning.clone(),
            conditioning_names: self.conditioning_names.clone(),
        }
    }
}
