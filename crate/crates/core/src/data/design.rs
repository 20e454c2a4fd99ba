//! Fixed-effects designs for the per-variable marginal models.
//!
//! Column order of a marginal design is
//! `[intercept | x_k | x_k-by-time | time coding | extra conditioning]`.

use std::ops::Range;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::LongitudinalDataset;
use crate::error::{Error, Result};

/// How the time variable enters the fixed effects.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TimeCoding {
    /// `m - 1` indicator columns, the earliest time is the reference.
    Dummy,
    /// A single column holding the numeric time.
    Linear,
}

impl TimeCoding {
    /// Number of columns produced for `m` distinct times.
    pub fn width(self, m: usize) -> usize {
        match self {
            TimeCoding::Dummy => m.saturating_sub(1),
            TimeCoding::Linear => 1,
        }
    }
}

/// m x (m - 1) indicator matrix: row 0 is all zeros, row j has a one in column j - 1.
pub fn build_time_dummies(time_values: &[f64]) -> Result<DMatrix<f64>> {
    let m = time_values.len();
    if m < 2 {
        return Err(Error::EmptyTimeBasis(m));
    }
    if time_values.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Domain("time values must be distinct and ascending".into()));
    }
    Ok(DMatrix::from_fn(m, m - 1, |j, l| if j == l + 1 { 1.0 } else { 0.0 }))
}

/// Scales row j of the time coding by `x_k[j]`.
pub fn build_interaction_block(x_k: &[f64], time_dummies: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x_k.len() != time_dummies.nrows() {
        return Err(Error::Shape(format!(
            "covariate has {} entries but the time basis has {} rows",
            x_k.len(),
            time_dummies.nrows()
        )));
    }
    Ok(DMatrix::from_fn(time_dummies.nrows(), time_dummies.ncols(), |j, l| {
        time_dummies[(j, l)] * x_k[j]
    }))
}

/// Column ranges of each block inside a design.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DesignLayout {
    pub main: Option<usize>,
    pub interaction: Range<usize>,
    pub time: Range<usize>,
    pub extras: Range<usize>,
}

/// Stacked fixed-effects design with the subject structure needed to build
/// per-subject covariance matrices.
#[derive(Debug, Clone, PartialEq)]
pub struct MarginalDesign {
    matrix: DMatrix<f64>,
    column_names: Vec<String>,
    layout: DesignLayout,
    subject_offsets: Vec<usize>,
    time_index: Vec<usize>,
    row_times: Vec<f64>,
}

impl MarginalDesign {
    /// Wraps an arbitrary stacked design. `time_index` identifies rows sharing
    /// a measurement occasion; `row_times` feeds random slopes.
    pub fn from_matrix(
        matrix: DMatrix<f64>,
        subject_offsets: Vec<usize>,
        time_index: Vec<usize>,
        row_times: Vec<f64>,
    ) -> Result<Self> {
        let n_obs = matrix.nrows();
        if subject_offsets.first() != Some(&0)
            || subject_offsets.last() != Some(&n_obs)
            || subject_offsets.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Shape("subject offsets do not partition the rows".into()));
        }
        if time_index.len() != n_obs || row_times.len() != n_obs {
            return Err(Error::Shape("per-row time information has the wrong length".into()));
        }
        let q = matrix.ncols();
        Ok(Self {
            column_names: (0..q).map(|c| format!("c{c}")).collect(),
            layout: DesignLayout {
                main: None,
                interaction: 0..0,
                time: 0..0,
                extras: 0..0,
            },
            matrix,
            subject_offsets,
            time_index,
            row_times,
        })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.matrix
    }

    /// Fixed-effect dimension q_f.
    pub fn n_columns(&self) -> usize {
        self.matrix.ncols()
    }

    pub fn n_subjects(&self) -> usize {
        self.subject_offsets.len() - 1
    }

    pub fn n_obs(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn layout(&self) -> &DesignLayout {
        &self.layout
    }

    pub fn subject_rows(&self, i: usize) -> Range<usize> {
        self.subject_offsets[i]..self.subject_offsets[i + 1]
    }

    pub fn subject_offsets(&self) -> &[usize] {
        &self.subject_offsets
    }

    pub fn time_index(&self) -> &[usize] {
        &self.time_index
    }

    pub fn row_times(&self) -> &[f64] {
        &self.row_times
    }

    /// Design rows of subject `i` as an owned block.
    pub fn subject_block(&self, i: usize) -> DMatrix<f64> {
        let rows = self.subject_rows(i);
        self.matrix.rows(rows.start, rows.len()).into_owned()
    }

    /// Copy with column `c` multiplied by `factor`.
    pub fn scale_column(&self, c: usize, factor: f64) -> Self {
        let mut out = self.clone();
        out.matrix.column_mut(c).scale_mut(factor);
        out
    }

    /// Copy restricted to the listed columns.
    pub fn select_columns(&self, columns: &[usize]) -> Self {
        let matrix = self.matrix.select_columns(columns.iter());
        Self {
            column_names: columns.iter().map(|&c| self.column_names[c].clone()).collect(),
            layout: DesignLayout {
                main: None,
                interaction: 0..0,
                time: 0..0,
                extras: 0..0,
            },
            matrix,
            subject_offsets: self.subject_offsets.clone(),
            time_index: self.time_index.clone(),
            row_times: self.row_times.clone(),
        }
    }
}

/// Per-row time coding values (row-major, `width` entries per row).
fn time_coding_rows(ds: &LongitudinalDataset, coding: TimeCoding) -> Result<(usize, Vec<f64>)> {
    match coding {
        TimeCoding::Linear => Ok((1, ds.row_times())),
        TimeCoding::Dummy => {
            let dummies = build_time_dummies(ds.time_values())?;
            let m = ds.time_values().len();
            let mut seen = vec![false; m];
            for &t in ds.time_index() {
                seen[t] = true;
            }
            if let Some(t) = seen.iter().position(|s| !s) {
                return Err(Error::Unbalanced(format!(
                    "time {} is never observed, its indicator column would be empty",
                    ds.time_values()[t]
                )));
            }
            let mut rows = Vec::with_capacity(ds.n_obs() * (m - 1));
            for &t in ds.time_index() {
                rows.extend(dummies.row(t).iter());
            }
            Ok((m - 1, rows))
        }
    }
}

struct Assembler<'a> {
    ds: &'a LongitudinalDataset,
    columns: Vec<Vec<f64>>,
    names: Vec<String>,
}

impl<'a> Assembler<'a> {
    fn new(ds: &'a LongitudinalDataset) -> Self {
        Self {
            ds,
            columns: vec![vec![1.0; ds.n_obs()]],
            names: vec!["(intercept)".into()],
        }
    }

    fn push(&mut self, name: String, values: Vec<f64>) -> usize {
        self.columns.push(values);
        self.names.push(name);
        self.columns.len() - 1
    }

    fn push_time(&mut self, coding: TimeCoding, width: usize, rows: &[f64]) -> Range<usize> {
        let start = self.columns.len();
        let times = self.ds.time_values();
        for l in 0..width {
            let name = match coding {
                TimeCoding::Linear => "time".to_string(),
                TimeCoding::Dummy => format!("time={}", times[l + 1]),
            };
            self.push(name, rows.iter().skip(l).step_by(width).copied().collect());
        }
        start..self.columns.len()
    }

    fn push_extras(&mut self, extras: &[usize]) -> Result<Range<usize>> {
        let start = self.columns.len();
        for &j in extras {
            if j >= self.ds.n_conditioning() {
                return Err(Error::Index {
                    index: j,
                    len: self.ds.n_conditioning(),
                });
            }
            let name = self.ds.conditioning_names()[j].clone();
            self.push(name, self.ds.conditioning_column(j).to_vec());
        }
        Ok(start..self.columns.len())
    }

    fn finish(self, layout: DesignLayout) -> MarginalDesign {
        let n_obs = self.ds.n_obs();
        let q = self.columns.len();
        let mut data = Vec::with_capacity(n_obs * q);
        for c in self.columns {
            data.extend(c);
        }
        MarginalDesign {
            matrix: DMatrix::from_vec(n_obs, q, data),
            column_names: self.names,
            layout,
            subject_offsets: self.ds.subject_offsets().to_vec(),
            time_index: self.ds.time_index().to_vec(),
            row_times: self.ds.row_times(),
        }
    }
}

/// Marginal design for covariate `k` (0-based):
/// `[1 | x_k | x_k * time coding | time coding | extras]`.
///
/// Dummy coding accepts unbalanced data as long as every distinct time is
/// observed for some subject; subjects simply lack the rows they were not
/// measured at. Rank is not checked here.
pub fn build_marginal_design(
    ds: &LongitudinalDataset,
    k: usize,
    coding: TimeCoding,
    extras: &[usize],
) -> Result<MarginalDesign> {
    if k >= ds.n_covariates() {
        return Err(Error::Index {
            index: k,
            len: ds.n_covariates(),
        });
    }
    let (width, coding_rows) = time_coding_rows(ds, coding)?;
    let x = ds.covariate(k);
    let name = ds.covariate_names()[k].clone();

    let mut asm = Assembler::new(ds);
    let main = asm.push(name.clone(), x.to_vec());
    let start = asm.columns.len();
    for l in 0..width {
        let values = x
            .iter()
            .enumerate()
            .map(|(r, &v)| coding_rows[r * width + l] * v)
            .collect();
        let label = match coding {
            TimeCoding::Linear => format!("{name}:time"),
            TimeCoding::Dummy => format!("{name}:time={}", ds.time_values()[l + 1]),
        };
        asm.push(label, values);
    }
    let interaction = start..asm.columns.len();
    let time = asm.push_time(coding, width, &coding_rows);
    let extras = asm.push_extras(extras)?;
    Ok(asm.finish(DesignLayout {
        main: Some(main),
        interaction,
        time,
        extras,
    }))
}

/// Conditional null design `[1 | time coding | extras]`.
pub fn build_conditional_design(
    ds: &LongitudinalDataset,
    coding: TimeCoding,
    extras: &[usize],
) -> Result<MarginalDesign> {
    let (width, coding_rows) = time_coding_rows(ds, coding)?;
    let mut asm = Assembler::new(ds);
    let time = asm.push_time(coding, width, &coding_rows);
    let extras = asm.push_extras(extras)?;
    Ok(asm.finish(DesignLayout {
        main: None,
        interaction: 0..0,
        time,
        extras,
    }))
}

/// Design of the variance component model used for the ICC: `[1 | extras]`.
pub fn build_variance_component_design(
    ds: &LongitudinalDataset,
    extras: &[usize],
) -> Result<MarginalDesign> {
    let mut asm = Assembler::new(ds);
    let extras = asm.push_extras(extras)?;
    Ok(asm.finish(DesignLayout {
        main: None,
        interaction: 0..0,
        time: 1..1,
        extras,
    }))
}
