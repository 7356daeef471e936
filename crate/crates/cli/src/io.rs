//! File formats: numeric CSVs, datasets, label sidecars.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::path::{Path, PathBuf};

use miscorr_core::{CategoryMatrix, DVector, MarginalDist, MisclassMatrix, ObservedDataset};

use crate::error::{CliError, CliResult};

/// 17 significant digits, enough for an exact round trip.
pub fn fmt_num(v: f64) -> String {
    format!("{v:.16e}")
}

fn parse_err(path: &Path, message: impl Into<String>) -> CliError {
    CliError::Parse {
        path: path.display().to_string(),
        message: message.into(),
    }
}

pub fn write_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Write {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

pub fn create_dir(path: &Path) -> CliResult<()> {
    fs::create_dir_all(path).map_err(|e| write_err(path, e))
}

pub fn write_text(path: &Path, text: &str) -> CliResult<()> {
    fs::write(path, text).map_err(|e| write_err(path, e))
}

pub fn csv_writer(path: &Path) -> CliResult<csv::Writer<File>> {
    csv::Writer::from_path(path).map_err(|e| write_err(path, e))
}

pub fn write_row<I, S>(w: &mut csv::Writer<File>, path: &Path, row: I) -> CliResult<()>
where
    I: IntoIterator<Item = S>,
    S: AsRef<[u8]>,
{
    w.write_record(row).map_err(|e| write_err(path, e))
}

pub fn finish(mut w: csv::Writer<File>, path: &Path) -> CliResult<()> {
    w.flush().map_err(|e| write_err(path, e))
}

/// Headerless numeric CSV; a first row that does not parse is taken as a
/// header and skipped.
pub fn read_numeric_table(path: &Path) -> CliResult<Vec<Vec<f64>>> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        if record.iter().all(|f| f.is_empty()) {
            continue;
        }
        let parsed: Result<Vec<f64>, _> = record.iter().map(str::parse::<f64>).collect();
        match parsed {
            Ok(row) => rows.push(row),
            Err(_) if i == 0 => continue,
            Err(e) => return Err(parse_err(path, format!("row {}: {e}", i + 1))),
        }
    }
    if rows.is_empty() {
        return Err(parse_err(path, "no numeric rows"));
    }
    Ok(rows)
}

/// A single row or a single column of numbers.
pub fn read_vector(path: &Path) -> CliResult<Vec<f64>> {
    let rows = read_numeric_table(path)?;
    if rows.len() == 1 {
        Ok(rows.into_iter().next().unwrap())
    } else if rows.iter().all(|r| r.len() == 1) {
        Ok(rows.into_iter().flatten().collect())
    } else {
        Err(parse_err(path, "expected a single row or a single column"))
    }
}

pub fn read_theta(path: &Path) -> CliResult<MisclassMatrix> {
    if !path.is_file() {
        return Err(CliError::ThetaMissing(path.display().to_string()));
    }
    let rows = read_numeric_table(path)?;
    Ok(MisclassMatrix::from_rows(&rows)?)
}

pub fn read_marginal(path: &Path) -> CliResult<MarginalDist> {
    if !path.is_file() {
        return Err(CliError::MarginalMissing(path.display().to_string()));
    }
    Ok(MarginalDist::new(read_vector(path)?)?)
}

pub fn write_theta(path: &Path, theta: &MisclassMatrix) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    for x in 0..theta.levels() {
        write_row(&mut w, path, theta.row(x).into_iter().map(fmt_num))?;
    }
    finish(w, path)
}

pub fn write_vector(path: &Path, values: &[f64]) -> CliResult<()> {
    let mut w = csv_writer(path)?;
    write_row(&mut w, path, values.iter().map(|v| fmt_num(*v)))?;
    finish(w, path)
}

/// External string labels per covariate column; position is the integer
/// category.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Labels(pub BTreeMap<String, Vec<String>>);

impl Labels {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Labels {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let map: BTreeMap<String, Vec<String>> = serde_json::from_str(&text).map_err(|e| CliError::Labels {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        for (col, labels) in &map {
            let mut seen = labels.clone();
            seen.sort();
            seen.dedup();
            if seen.len() != labels.len() {
                return Err(CliError::Labels {
                    path: path.display().to_string(),
                    message: format!("duplicate labels for column {col}"),
                });
            }
        }
        Ok(Self(map))
    }

    pub fn label(&self, column: &str, level: usize) -> String {
        self.0
            .get(column)
            .and_then(|l| l.get(level))
            .cloned()
            .unwrap_or_else(|| level.to_string())
    }

    fn code(&self, column: &str, raw: &str) -> CliResult<Option<i64>> {
        match self.0.get(column) {
            Some(labels) => match labels.iter().position(|l| l == raw) {
                Some(i) => Ok(Some(i as i64)),
                None => Err(CliError::UnknownLabel {
                    column: column.to_string(),
                    label: raw.to_string(),
                }),
            },
            None => Ok(None),
        }
    }
}

/// Dataset with header `y,w1..wK`.
#[derive(Debug, Clone)]
pub struct LoadedData {
    pub dataset: ObservedDataset,
    pub columns: Vec<String>,
}

pub fn read_dataset(path: &Path, labels: &Labels) -> CliResult<LoadedData> {
    if !path.is_file() {
        return Err(CliError::DataMissing(path.display().to_string()));
    }
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, e.to_string()))?;
    let headers = reader.headers().map_err(|e| parse_err(path, e.to_string()))?.clone();
    if headers.len() < 2 || &headers[0] != "y" {
        return Err(parse_err(path, "header must be y followed by one column per covariate"));
    }
    let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
    let mut y = Vec::new();
    let mut cats = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| parse_err(path, e.to_string()))?;
        if record.len() != headers.len() {
            return Err(parse_err(path, format!("row {} has {} fields", i + 1, record.len())));
        }
        y.push(
            record[0]
                .parse::<f64>()
                .map_err(|e| parse_err(path, format!("row {} response: {e}", i + 1)))?,
        );
        for (k, raw) in record.iter().skip(1).enumerate() {
            let v = match labels.code(&columns[k], raw)? {
                Some(v) => v,
                None => raw
                    .parse::<i64>()
                    .map_err(|e| parse_err(path, format!("row {} column {}: {e}", i + 1, columns[k])))?,
            };
            cats.push(v);
        }
    }
    let n = y.len();
    let w = CategoryMatrix::new(n, columns.len(), cats)?;
    let dataset = ObservedDataset::new(DVector::from_vec(y), w)?;
    Ok(LoadedData { dataset, columns })
}

pub fn write_dataset(path: &Path, y: &DVector<f64>, w: &CategoryMatrix) -> CliResult<()> {
    let mut out = csv_writer(path)?;
    let header = std::iter::once("y".to_string()).chain((1..=w.ncols()).map(|k| format!("w{k}")));
    write_row(&mut out, path, header)?;
    for i in 0..w.nrows() {
        let row = std::iter::once(fmt_num(y[i])).chain(w.row(i).iter().map(|v| v.to_string()));
        write_row(&mut out, path, row)?;
    }
    finish(out, path)
}

/// Resolves `p` against `base` unless it is absolute.
pub fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
