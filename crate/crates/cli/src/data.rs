//! CSV ingestion into [`BinaryDataset`].

use std::fs::File;
use std::io::Read;
use std::path::Path;

use sunprobit_core::{BinaryDataset, Matrix};

/// Name given to the column of ones added by `intercept`.
pub const INTERCEPT: &str = "(Intercept)";

/// Target standard deviation of standardised covariates.
pub const STANDARD_SD: f64 = 0.5;

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("row {row}, column {column}: {message}")]
    Parse { row: usize, column: String, message: String },
    #[error("response column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}: response value `{value}` is not 0 or 1")]
    NonBinaryResponse { row: usize, value: String },
    #[error("no covariate columns")]
    NoCovariates,
    #[error(transparent)]
    Core(#[from] sunprobit_core::Error),
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct IngestOptions {
    pub intercept: bool,
    pub standardize: bool,
}

#[derive(Debug, Clone)]
pub struct Ingested {
    pub dataset: BinaryDataset,
    pub feature_names: Vec<String>,
    /// Column means and standard deviations used for standardisation, in
    /// covariate order (intercept excluded).
    pub scaling: Option<Vec<(f64, f64)>>,
    pub warnings: Vec<String>,
}

/// Reads a headered CSV with a binary response column. Rows are numbered
/// from 1 after the header.
pub fn ingest_csv(path: &Path, response: &str, opts: &IngestOptions) -> Result<Ingested, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    ingest_reader(file, response, opts)
}

pub fn ingest_reader<R: Read>(reader: R, response: &str, opts: &IngestOptions) -> Result<Ingested, IngestError> {
    let (names, columns, y, _) = read_table(reader, Some(response))?;
    let y = y.expect("response requested");
    build(names, columns, y, opts)
}

/// Covariate rows for prediction. The response column, if present, is
/// ignored; `scaling` applies a training-set standardisation.
pub fn ingest_covariates(
    path: &Path,
    response: &str,
    intercept: bool,
    scaling: Option<&[(f64, f64)]>,
) -> Result<(Vec<String>, Matrix), IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })?;
    let (mut names, mut columns, _, rows) = read_table(file, None)?;
    if let Some(k) = names.iter().position(|n| n == response) {
        names.remove(k);
        columns.remove(k);
    }
    if let Some(sc) = scaling {
        if sc.len() != columns.len() {
            return Err(IngestError::Core(sunprobit_core::Error::DimensionMismatch(format!(
                "{} covariates for a model fitted on {}",
                columns.len(),
                sc.len()
            ))));
        }
        for (col, &(m, s)) in columns.iter_mut().zip(sc) {
            for v in col.iter_mut() {
                *v = if s > 0.0 { STANDARD_SD * (*v - m) / s } else { 0.0 };
            }
        }
    }
    Ok(assemble(names, columns, intercept, rows))
}

/// Covariate names, covariate columns, responses and the row count.
type Table = (Vec<String>, Vec<Vec<f64>>, Option<Vec<u8>>, usize);

fn read_table<R: Read>(reader: R, response: Option<&str>) -> Result<Table, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr
        .headers()
        .map_err(|e| IngestError::Parse { row: 0, column: "header".into(), message: e.to_string() })?
        .iter()
        .map(str::to_owned)
        .collect();
    let resp_idx = match response {
        Some(r) => Some(header.iter().position(|h| h == r).ok_or_else(|| IngestError::MissingColumn(r.to_owned()))?),
        None => None,
    };
    let names: Vec<String> =
        header.iter().enumerate().filter(|(i, _)| Some(*i) != resp_idx).map(|(_, h)| h.clone()).collect();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); names.len()];
    let mut y = Vec::new();
    let mut rows = 0;
    for (r, rec) in rdr.records().enumerate() {
        let row = r + 1;
        rows = row;
        let rec = rec.map_err(|e| IngestError::Parse { row, column: "-".into(), message: e.to_string() })?;
        let mut k = 0;
        for (i, field) in rec.iter().enumerate() {
            if Some(i) == resp_idx {
                y.push(match field {
                    "0" | "0.0" => 0,
                    "1" | "1.0" => 1,
                    _ => return Err(IngestError::NonBinaryResponse { row, value: field.to_owned() }),
                });
                continue;
            }
            let v: f64 = field.parse().map_err(|_| IngestError::Parse {
                row,
                column: header[i].clone(),
                message: format!("`{field}` is not a number"),
            })?;
            if !v.is_finite() {
                return Err(IngestError::Parse {
                    row,
                    column: header[i].clone(),
                    message: format!("`{field}` is not finite"),
                });
            }
            columns[k].push(v);
            k += 1;
        }
    }
    Ok((names, columns, resp_idx.map(|_| y), rows))
}

fn build(
    names: Vec<String>,
    mut columns: Vec<Vec<f64>>,
    y: Vec<u8>,
    opts: &IngestOptions,
) -> Result<Ingested, IngestError> {
    if columns.is_empty() && !opts.intercept {
        return Err(IngestError::NoCovariates);
    }
    let mut warnings = Vec::new();
    let mut scaling = Vec::with_capacity(columns.len());
    for (name, col) in names.iter().zip(columns.iter_mut()) {
        let (m, s) = mean_sd(col);
        if col.len() > 1 && s == 0.0 {
            warnings.push(format!("column `{name}` is constant"));
        }
        if opts.standardize {
            for v in col.iter_mut() {
                *v = if s > 0.0 { STANDARD_SD * (*v - m) / s } else { 0.0 };
            }
        }
        scaling.push((m, s));
    }
    let (feature_names, x) = assemble(names, columns, opts.intercept, y.len());
    let dataset = BinaryDataset::new(y, x)?.with_feature_names(feature_names.clone())?;
    Ok(Ingested { dataset, feature_names, scaling: opts.standardize.then_some(scaling), warnings })
}

fn assemble(mut names: Vec<String>, columns: Vec<Vec<f64>>, intercept: bool, n: usize) -> (Vec<String>, Matrix) {
    let offset = usize::from(intercept);
    let p = columns.len() + offset;
    let x = Matrix::from_fn(n, p, |i, j| if j < offset { 1.0 } else { columns[j - offset][i] });
    if intercept {
        names.insert(0, INTERCEPT.to_owned());
    }
    (names, x)
}

/// Mean and sample standard deviation (denominator `n − 1`).
fn mean_sd(v: &[f64]) -> (f64, f64) {
    let n = v.len();
    if n == 0 {
        return (0.0, 0.0);
    }
    let m = v.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (m, 0.0);
    }
    let ss = v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    (m, (ss / (n - 1) as f64).sqrt())
}
