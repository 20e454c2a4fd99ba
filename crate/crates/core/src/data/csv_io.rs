//! Long-format CSV ingestion: one row per (subject, time) measurement.

use std::cmp::Ordering;
use std::collections::{BTreeSet, HashMap};
use std::io::{Read, Write};

use super::{DatasetParts, LongitudinalDataset};
use crate::error::{Error, Result};

/// Which columns hold the screened covariates.
#[derive(Debug, Clone, PartialEq)]
pub enum CovariateSelection {
    Named(Vec<String>),
    /// Every column not claimed by another role, in file order.
    Rest,
}

/// Maps CSV columns to their roles.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub id: String,
    pub time: String,
    pub response: String,
    pub conditioning: Vec<String>,
    pub covariates: CovariateSelection,
}

impl CsvSchema {
    /// Schema matching the layout written by [`write_long_csv`].
    pub fn for_written(ds: &LongitudinalDataset) -> Self {
        Self {
            id: "id".into(),
            time: "time".into(),
            response: "response".into(),
            conditioning: ds.conditioning_names().to_vec(),
            covariates: CovariateSelection::Named(ds.covariate_names().to_vec()),
        }
    }
}

struct Row {
    subject: usize,
    time: f64,
    response: f64,
    covariates: Vec<f64>,
    conditioning: Vec<String>,
}

fn parse_number(raw: &str, row: usize, column: &str) -> Result<f64> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(Error::Parse {
            row,
            column: column.to_string(),
            message: "missing value".into(),
        });
    }
    match trimmed.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(Error::Parse {
            row,
            column: column.to_string(),
            message: format!("'{trimmed}' is not a finite number"),
        }),
    }
}

/// Natural order for subject ids: numeric when every id is an integer.
fn sort_subject_ids(ids: &[String]) -> Vec<usize> {
    let numeric: Option<Vec<i64>> = ids.iter().map(|s| s.trim().parse().ok()).collect();
    let mut order: Vec<usize> = (0..ids.len()).collect();
    match numeric {
        Some(keys) => order.sort_by(|&a, &b| keys[a].cmp(&keys[b]).then(ids[a].cmp(&ids[b]))),
        None => order.sort_by(|&a, &b| ids[a].cmp(&ids[b])),
    }
    order
}

/// Reads a header-bearing, comma-delimited long-format table.
///
/// Conditioning columns whose cells are all numeric are kept as is; any other
/// conditioning column is treated as categorical and expanded into indicator
/// columns named `column=level`, levels sorted, the first level dropped as
/// reference.
pub fn load_long_csv<R: Read>(source: R, schema: &CsvSchema) -> Result<LongitudinalDataset> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::Headers)
        .from_reader(source);
    let headers = reader.headers()?.clone();
    let position: HashMap<&str, usize> = headers.iter().enumerate().map(|(i, h)| (h, i)).collect();
    if position.len() != headers.len() {
        return Err(Error::Schema("header contains duplicate column names".into()));
    }
    let locate = |name: &str| -> Result<usize> {
        position
            .get(name)
            .copied()
            .ok_or_else(|| Error::Schema(format!("column '{name}' not found in header")))
    };

    let id_col = locate(&schema.id)?;
    let time_col = locate(&schema.time)?;
    let response_col = locate(&schema.response)?;
    let conditioning_cols = schema
        .conditioning
        .iter()
        .map(|c| locate(c))
        .collect::<Result<Vec<_>>>()?;
    let mut claimed: BTreeSet<usize> = [id_col, time_col, response_col].into_iter().collect();
    claimed.extend(&conditioning_cols);
    if claimed.len() != 3 + conditioning_cols.len() {
        return Err(Error::Schema("a column is assigned to more than one role".into()));
    }
    let covariate_cols: Vec<usize> = match &schema.covariates {
        CovariateSelection::Named(names) => {
            let cols = names.iter().map(|c| locate(c)).collect::<Result<Vec<_>>>()?;
            if let Some(&c) = cols.iter().find(|c| claimed.contains(c)) {
                return Err(Error::Schema(format!(
                    "column '{}' cannot be both a covariate and another role",
                    &headers[c]
                )));
            }
            cols
        }
        CovariateSelection::Rest => (0..headers.len()).filter(|c| !claimed.contains(c)).collect(),
    };
    if covariate_cols.is_empty() {
        return Err(Error::Schema("no covariate columns selected".into()));
    }
    if covariate_cols.iter().collect::<BTreeSet<_>>().len() != covariate_cols.len() {
        return Err(Error::Schema("covariate column listed twice".into()));
    }

    let mut subject_lookup: HashMap<String, usize> = HashMap::new();
    let mut subject_names: Vec<String> = Vec::new();
    let mut rows: Vec<Row> = Vec::new();
    for record in reader.records() {
        let record = record?;
        let line = record.position().map(|p| p.line() as usize).unwrap_or(rows.len() + 2);
        let field = |c: usize| record.get(c).unwrap_or("");
        let id = field(id_col).trim().to_string();
        if id.is_empty() {
            return Err(Error::Parse {
                row: line,
                column: schema.id.clone(),
                message: "missing subject id".into(),
            });
        }
        let next = subject_names.len();
        let subject = *subject_lookup.entry(id.clone()).or_insert_with(|| {
            subject_names.push(id);
            next
        });
        let time = parse_number(field(time_col), line, &headers[time_col])?;
        let response = parse_number(field(response_col), line, &headers[response_col])?;
        let covariates = covariate_cols
            .iter()
            .map(|&c| parse_number(field(c), line, &headers[c]))
            .collect::<Result<Vec<_>>>()?;
        let conditioning = conditioning_cols
            .iter()
            .map(|&c| {
                let raw = field(c).trim();
                if raw.is_empty() {
                    Err(Error::Parse {
                        row: line,
                        column: headers[c].to_string(),
                        message: "missing value".into(),
                    })
                } else {
                    Ok(raw.to_string())
                }
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(Row {
            subject,
            time,
            response,
            covariates,
            conditioning,
        });
    }
    if rows.is_empty() {
        return Err(Error::InvalidData("no data rows".into()));
    }

    let mut time_values: Vec<f64> = rows.iter().map(|r| r.time).collect();
    time_values.sort_by(f64::total_cmp);
    time_values.dedup();

    let subject_order = sort_subject_ids(&subject_names);
    let mut rank = vec![0usize; subject_names.len()];
    for (slot, &s) in subject_order.iter().enumerate() {
        rank[s] = slot;
    }
    rows.sort_by(|a, b| {
        rank[a.subject]
            .cmp(&rank[b.subject])
            .then(a.time.partial_cmp(&b.time).unwrap_or(Ordering::Equal))
    });
    if let Some(pair) = rows
        .windows(2)
        .find(|w| w[0].subject == w[1].subject && w[0].time == w[1].time)
    {
        return Err(Error::DuplicateMeasurement {
            subject: subject_names[pair[0].subject].clone(),
            time: pair[0].time,
        });
    }

    let n_obs = rows.len();
    let mut subject_offsets = vec![0usize];
    for (r, row) in rows.iter().enumerate().skip(1) {
        if row.subject != rows[r - 1].subject {
            subject_offsets.push(r);
        }
    }
    subject_offsets.push(n_obs);

    let time_index = rows
        .iter()
        .map(|r| time_values.binary_search_by(|t| t.total_cmp(&r.time)).unwrap())
        .collect();

    let mut covariates = Vec::with_capacity(n_obs * covariate_cols.len());
    for k in 0..covariate_cols.len() {
        covariates.extend(rows.iter().map(|r| r.covariates[k]));
    }

    let mut conditioning = Vec::new();
    let mut conditioning_names = Vec::new();
    for (j, &c) in conditioning_cols.iter().enumerate() {
        let numeric: Option<Vec<f64>> = rows
            .iter()
            .map(|r| r.conditioning[j].parse::<f64>().ok().filter(|v| v.is_finite()))
            .collect();
        match numeric {
            Some(values) => {
                conditioning.extend(values);
                conditioning_names.push(headers[c].to_string());
            }
            None => {
                let levels: BTreeSet<&str> =
                    rows.iter().map(|r| r.conditioning[j].as_str()).collect();
                for level in levels.into_iter().skip(1) {
                    conditioning.extend(rows.iter().map(|r| {
                        if r.conditioning[j] == level {
                            1.0
                        } else {
                            0.0
                        }
                    }));
                    conditioning_names.push(format!("{}={level}", &headers[c]));
                }
            }
        }
    }

    LongitudinalDataset::new(DatasetParts {
        subject_ids: subject_order.iter().map(|&s| subject_names[s].clone()).collect(),
        subject_offsets,
        time_values,
        time_index,
        response: rows.iter().map(|r| r.response).collect(),
        covariates,
        covariate_names: covariate_cols.iter().map(|&c| headers[c].to_string()).collect(),
        conditioning,
        conditioning_names,
    })
}

/// Writes the dataset in the long format read by [`load_long_csv`], using the
/// column names given by [`CsvSchema::for_written`]. Numbers are written in
/// shortest round-trip form, so reloading reproduces every value bit for bit.
pub fn write_long_csv<W: Write>(ds: &LongitudinalDataset, sink: W) -> Result<()> {
    let mut writer = csv::Writer::from_writer(sink);
    let mut header = vec!["id".to_string(), "time".into(), "response".into()];
    header.extend(ds.conditioning_names().iter().cloned());
    header.extend(ds.covariate_names().iter().cloned());
    writer.write_record(&header)?;

    let times = ds.time_values();
    let mut record: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..ds.n_subjects() {
        for r in ds.subject_rows(i) {
            record.clear();
            record.push(ds.subject_ids()[i].clone());
            record.push(times[ds.time_index()[r]].to_string());
            record.push(ds.response()[r].to_string());
            for j in 0..ds.n_conditioning() {
                record.push(ds.conditioning_column(j)[r].to_string());
            }
            for k in 0..ds.n_covariates() {
                record.push(ds.covariate(k)[r].to_string());
            }
            writer.write_record(&record)?;
        }
    }
    writer.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(covariates: CovariateSelection) -> CsvSchema {
        CsvSchema {
            id: "id".into(),
            time: "t".into(),
            response: "y".into(),
            conditioning: vec![],
            covariates,
        }
    }

    #[test]
    fn minimal_file() {
        let text = "id,t,y,x1\n1,0,1.0,0.5\n1,2,2.0,0.5\n";
        let ds = load_long_csv(text.as_bytes(), &schema(CovariateSelection::Rest)).unwrap();
        assert_eq!(ds.n_subjects(), 1);
        assert_eq!(ds.time_values(), &[0.0, 2.0]);
        assert_eq!(ds.subject_rows(0).len(), 2);
        assert_eq!(ds.n_covariates(), 1);
        assert_eq!(ds.response(), &[1.0, 2.0]);
    }

    #[test]
    fn row_order_does_not_matter() {
        let a = "id,t,y,x1,x2\n1,0,1.0,0.5,3\n1,2,2.0,0.5,4\n2,0,5,1,1\n2,1,6,1,2\n10,1,7,2,2\n";
        let b = "id,t,y,x1,x2\n10,1,7,2,2\n2,1,6,1,2\n1,2,2.0,0.5,4\n2,0,5,1,1\n1,0,1.0,0.5,3\n";
        let s = schema(CovariateSelection::Rest);
        let da = load_long_csv(a.as_bytes(), &s).unwrap();
        let db = load_long_csv(b.as_bytes(), &s).unwrap();
        assert_eq!(da, db);
        // integer ids sort numerically
        assert_eq!(da.subject_ids(), &["1", "2", "10"]);
        assert_eq!(da.time_values(), &[0.0, 1.0, 2.0]);
    }

    #[test]
    fn duplicate_measurement_is_rejected() {
        let text = "id,t,y,x1\n1,0,1.0,0.5\n1,0,2.0,0.5\n";
        let err = load_long_csv(text.as_bytes(), &schema(CovariateSelection::Rest)).unwrap_err();
        assert!(matches!(err, Error::DuplicateMeasurement { .. }), "{err}");
    }

    #[test]
    fn non_numeric_cell_names_row_and_column() {
        let text = "id,t,y,x1\n1,0,1.0,0.5\n1,1,abc,0.5\n";
        match load_long_csv(text.as_bytes(), &schema(CovariateSelection::Rest)) {
            Err(Error::Parse { row, column, .. }) => {
                assert_eq!(row, 3);
                assert_eq!(column, "y");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_column_is_schema_error() {
        let text = "id,t,y,x1\n1,0,1.0,0.5\n";
        let s = schema(CovariateSelection::Named(vec!["x9".into()]));
        let err = load_long_csv(text.as_bytes(), &s).unwrap_err();
        assert!(matches!(err, Error::Schema(ref m) if m.contains("x9")), "{err}");
    }

    #[test]
    fn missing_cell_is_parse_error() {
        let text = "id,t,y,x1\n1,0,1.0,\n";
        assert!(matches!(
            load_long_csv(text.as_bytes(), &schema(CovariateSelection::Rest)),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn categorical_conditioning_is_dummy_coded() {
        let text = "id,t,y,meal,x1\n1,0,1,B,0.1\n1,1,2,A,0.1\n2,0,3,C,0.2\n2,1,4,A,0.2\n";
        let mut s = schema(CovariateSelection::Rest);
        s.conditioning = vec!["meal".into()];
        let ds = load_long_csv(text.as_bytes(), &s).unwrap();
        assert_eq!(ds.conditioning_names(), &["meal=B", "meal=C"]);
        assert_eq!(ds.conditioning_column(0), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(ds.conditioning_column(1), &[0.0, 0.0, 1.0, 0.0]);
        assert_eq!(ds.covariate_names(), &["x1"]);
    }

    #[test]
    fn write_then_load_is_identity() {
        let text = "id,t,y,dose,x1,x2\n\
                    a,0,0.1,1.5,0.30000000000000004,-2e-9\n\
                    a,3.25,1e300,2,1,2\n\
                    b,0,-0.7,1,3.14159,2.718281828459045\n";
        let mut s = schema(CovariateSelection::Rest);
        s.conditioning = vec!["dose".into()];
        let ds = load_long_csv(text.as_bytes(), &s).unwrap();
        let mut buf = Vec::new();
        write_long_csv(&ds, &mut buf).unwrap();
        let again = load_long_csv(buf.as_slice(), &CsvSchema::for_written(&ds)).unwrap();
        assert_eq!(ds, again);
    }
}
