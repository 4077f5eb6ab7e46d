//! CSV ingestion, schema-driven encoding to `[0,1]^d`, filtering and splits.
//!
//! Labels are carried alongside the features for evaluation and for
//! dropping anomalies from the training split. Training itself only ever
//! sees normal rows.

pub mod nslkdd;
mod schema;

pub use schema::{AnomalyValues, Column, LabelSpec, Schema, UnknownCategory};

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::{rng, Error, Matrix, Result};

/// A parsed raw cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Value {
    Numeric(f64),
    /// Index into the column's categories; `None` for an unknown value kept
    /// under [`UnknownCategory::ZeroBlock`].
    Category(Option<usize>),
}

/// Typed rows in schema column order, plus the raw label strings.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub rows: Vec<Vec<Value>>,
    pub labels: Vec<String>,
}

impl Table {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Rows whose raw label satisfies `keep`.
    pub fn filter_labels(&self, keep: impl Fn(&str) -> bool) -> Table {
        let (rows, labels) = self
            .rows
            .iter()
            .zip(&self.labels)
            .filter(|(_, l)| keep(l))
            .map(|(r, l)| (r.clone(), l.clone()))
            .unzip();
        Table { rows, labels }
    }
}

/// Read a headed CSV file; column order in the file is free.
pub fn load_csv(path: &Path, schema: &Schema) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &Schema) -> Result<Table> {
    schema.validate()?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let records = rdr.records().map(|r| r.map_err(Error::from));
    parse_records(&header, records, schema)
}

/// Typed parse of string records under `header`.
pub fn parse_records<I>(header: &[String], records: I, schema: &Schema) -> Result<Table>
where
    I: IntoIterator<Item = Result<csv::StringRecord>>,
{
    let position: HashMap<&str, usize> = header.iter().enumerate().map(|(i, h)| (h.as_str(), i)).collect();
    let find = |name: &str| position.get(name).copied().ok_or_else(|| Error::MissingColumn(name.to_owned()));
    let feature_idx = schema.columns.iter().map(|c| find(c.name())).collect::<Result<Vec<_>>>()?;
    let label_idx = find(&schema.label.name)?;
    let lookups: Vec<Option<HashMap<&str, usize>>> = schema
        .columns
        .iter()
        .map(|c| match c {
            Column::Categorical { categories, .. } => {
                Some(categories.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect())
            }
            Column::Numeric { .. } => None,
        })
        .collect();

    let mut table = Table { rows: Vec::new(), labels: Vec::new() };
    for (r, record) in records.into_iter().enumerate() {
        let record = record?;
        let row_no = r + 1;
        let field = |i: usize, name: &str| {
            record.get(i).ok_or_else(|| Error::Parse {
                row: row_no,
                column: name.to_owned(),
                message: "row is shorter than the header".into(),
            })
        };
        let mut row = Vec::with_capacity(schema.columns.len());
        for ((col, &i), lookup) in schema.columns.iter().zip(&feature_idx).zip(&lookups) {
            let raw = field(i, col.name())?;
            let value = match lookup {
                None => {
                    let v: f64 = raw.parse().map_err(|_| Error::Parse {
                        row: row_no,
                        column: col.name().to_owned(),
                        message: format!("`{raw}` is not a number"),
                    })?;
                    if !v.is_finite() {
                        return Err(Error::Parse {
                            row: row_no,
                            column: col.name().to_owned(),
                            message: format!("non-finite value `{raw}`"),
                        });
                    }
                    Value::Numeric(v)
                }
                Some(map) => match (map.get(raw), schema.unknown_category) {
                    (Some(&k), _) => Value::Category(Some(k)),
                    (None, UnknownCategory::ZeroBlock) => Value::Category(None),
                    (None, UnknownCategory::Reject) => {
                        return Err(Error::Parse {
                            row: row_no,
                            column: col.name().to_owned(),
                            message: format!("unknown category `{raw}`"),
                        })
                    }
                },
            };
            row.push(value);
        }
        let label = field(label_idx, &schema.label.name)?;
        if schema.label.encode(label).is_none() {
            return Err(Error::Parse {
                row: row_no,
                column: schema.label.name.clone(),
                message: format!("label `{label}` is neither normal nor a listed anomaly"),
            });
        }
        table.rows.push(row);
        table.labels.push(label.to_owned());
    }
    Ok(table)
}

/// Encoded features in `[0,1]^d` with `±1` labels (`+1` normal).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub features: Matrix,
    pub labels: Vec<f64>,
    /// Where the rows came from, e.g. `train:path/to/file.csv`.
    pub provenance: String,
}

impl Dataset {
    pub fn new(features: Matrix, labels: Vec<f64>, provenance: impl Into<String>) -> Result<Self> {
        if features.rows() != labels.len() {
            return Err(Error::DimensionMismatch { expected: features.rows(), got: labels.len() });
        }
        if let Some(bad) = features.iter_rows().find(|r| r.iter().any(|v| !(0.0..=1.0).contains(v))) {
            return Err(Error::OutsideDomain(bad.to_vec()));
        }
        if let Some(l) = labels.iter().find(|&&l| l != 1.0 && l != -1.0) {
            return Err(Error::InvalidConfig(format!("labels must be ±1, got {l}")));
        }
        Ok(Self { features, labels, provenance: provenance.into() })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.features.cols()
    }

    pub fn count_normal(&self) -> usize {
        self.labels.iter().filter(|&&l| l > 0.0).count()
    }

    pub fn select(&self, idx: &[usize], provenance: impl Into<String>) -> Dataset {
        Dataset {
            features: self.features.select_rows(idx),
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            provenance: provenance.into(),
        }
    }

    /// Rows of one class.
    pub fn class_rows(&self, label: f64) -> Matrix {
        let idx: Vec<usize> = (0..self.len()).filter(|&i| self.labels[i] == label).collect();
        self.features.select_rows(&idx)
    }

    /// Audit cache: encoded feature columns followed by `label`.
    pub fn write_csv<W: std::io::Write>(&self, schema_names: &[String], out: W) -> Result<()> {
        if schema_names.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), got: schema_names.len() });
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = schema_names.to_vec();
        header.push("label".into());
        w.write_record(&header)?;
        for (row, &l) in self.features.iter_rows().zip(&self.labels) {
            let mut rec: Vec<String> = row.iter().map(f64::to_string).collect();
            rec.push(l.to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io("<csv>", e))?;
        Ok(())
    }

    pub fn save_csv(&self, schema: &Schema, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(&schema.encoded_names(), std::io::BufWriter::new(file))
    }

    /// Inverse of [`Dataset::write_csv`].
    pub fn read_cache<R: Read>(reader: R, provenance: impl Into<String>) -> Result<Dataset> {
        let mut rdr = csv::Reader::from_reader(reader);
        let cols = rdr.headers()?.len();
        if cols < 2 {
            return Err(Error::Schema("cache needs at least one feature and a label".into()));
        }
        let mut features = Matrix::zeros(0, cols - 1);
        let mut labels = Vec::new();
        for (r, rec) in rdr.records().enumerate() {
            let rec = rec?;
            let vals = rec
                .iter()
                .map(|v| {
                    v.parse::<f64>().map_err(|_| Error::Parse {
                        row: r + 1,
                        column: String::new(),
                        message: format!("`{v}` is not a number"),
                    })
                })
                .collect::<Result<Vec<f64>>>()?;
            features.push_row(&vals[..cols - 1])?;
            labels.push(vals[cols - 1]);
        }
        Dataset::new(features, labels, provenance)
    }
}

/// Scale numeric columns, one-hot categories, map labels to `±1`.
pub fn encode(table: &Table, schema: &Schema, provenance: impl Into<String>) -> Result<Dataset> {
    schema.validate()?;
    let d = schema.encoded_dim();
    let mut features = Matrix::zeros(table.len(), d);
    for (r, row) in table.rows.iter().enumerate() {
        if row.len() != schema.columns.len() {
            return Err(Error::DimensionMismatch { expected: schema.columns.len(), got: row.len() });
        }
        let out = features.row_mut(r);
        let mut offset = 0;
        for (col, value) in schema.columns.iter().zip(row) {
            match (col, value) {
                (Column::Numeric { min, max, .. }, Value::Numeric(v)) => {
                    out[offset] = ((v - min) / (max - min)).clamp(0.0, 1.0);
                }
                (Column::Categorical { .. }, Value::Category(k)) => {
                    if let Some(k) = *k {
                        out[offset + k] = 1.0;
                    }
                }
                _ => {
                    return Err(Error::Schema(format!(
                        "row {} holds the wrong kind of value for column `{}`",
                        r + 1,
                        col.name()
                    )))
                }
            }
            offset += col.width();
        }
    }
    let labels = table
        .labels
        .iter()
        .map(|l| schema.label.encode(l).ok_or_else(|| Error::Schema(format!("unknown label `{l}`"))))
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(features, labels, provenance)
}

/// Map one encoded row back to raw values; a block is decoded to its
/// largest entry, or to `None` if it is all zeros.
pub fn decode_row(row: &[f64], schema: &Schema) -> Result<Vec<Value>> {
    if row.len() != schema.encoded_dim() {
        return Err(Error::DimensionMismatch { expected: schema.encoded_dim(), got: row.len() });
    }
    let mut offset = 0;
    let out = schema
        .columns
        .iter()
        .map(|col| {
            let v = match col {
                Column::Numeric { min, max, .. } => Value::Numeric(min + row[offset] * (max - min)),
                Column::Categorical { categories, .. } => {
                    let block = &row[offset..offset + categories.len()];
                    let best = block
                        .iter()
                        .enumerate()
                        .filter(|(_, &v)| v > 0.0)
                        .max_by(|a, b| a.1.total_cmp(b.1))
                        .map(|(k, _)| k);
                    Value::Category(best)
                }
            };
            offset += col.width();
            v
        })
        .collect();
    Ok(out)
}

/// Keep only normal rows, as the unsupervised setting requires.
pub fn filter_unsupervised_train(dataset: &Dataset) -> Result<Dataset> {
    let idx: Vec<usize> = (0..dataset.len()).filter(|&i| dataset.labels[i] > 0.0).collect();
    if idx.is_empty() {
        return Err(Error::Empty(format!("no normal rows in {}", dataset.provenance)));
    }
    Ok(dataset.select(&idx, dataset.provenance.clone()))
}

/// Largest-remainder apportionment of `total` by `fractions`.
fn apportion(total: usize, fractions: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = fractions.iter().map(|f| f * total as f64).collect();
    let mut out: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order: Vec<usize> = (0..fractions.len()).collect();
    order.sort_by(|&a, &b| (exact[b] - exact[b].floor()).total_cmp(&(exact[a] - exact[a].floor())));
    let mut left = total - out.iter().sum::<usize>();
    for &j in order.iter().cycle() {
        if left == 0 {
            break;
        }
        out[j] += 1;
        left -= 1;
    }
    out
}

/// Label-stratified split into train, validation and test.
///
/// Split sizes follow largest-remainder rounding of the global count, and
/// every split's anomaly count is within one sample of its global share.
pub fn split(dataset: &Dataset, fractions: [f64; 3], seed: u64) -> Result<(Dataset, Dataset, Dataset)> {
    if fractions.iter().any(|&f| !(f > 0.0 && f.is_finite())) {
        return Err(Error::InvalidConfig(format!("split fractions must be positive, got {fractions:?}")));
    }
    if (fractions.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("split fractions must sum to 1, got {fractions:?}")));
    }
    let targets = apportion(dataset.len(), &fractions);
    if targets.contains(&0) {
        return Err(Error::InvalidConfig(format!(
            "{} rows leave an empty split under fractions {fractions:?}",
            dataset.len()
        )));
    }

    let mut r = rng::seeded(seed);
    let mut classes: Vec<Vec<usize>> = [1.0, -1.0]
        .iter()
        .map(|&c| (0..dataset.len()).filter(|&i| dataset.labels[i] == c).collect())
        .collect();
    for c in classes.iter_mut() {
        c.shuffle(&mut r);
    }

    // Anomalies are apportioned by the split sizes themselves, so each
    // split's anomaly count is within one of its global share.
    let shares: Vec<f64> = targets.iter().map(|&t| t as f64 / dataset.len() as f64).collect();
    let anomalies = apportion(classes[1].len(), &shares);
    let alloc = [
        targets.iter().zip(&anomalies).map(|(t, a)| t - a).collect::<Vec<_>>(),
        anomalies,
    ];

    let mut parts: [Vec<usize>; 3] = Default::default();
    for (c, idx) in classes.iter().enumerate() {
        let mut start = 0;
        for j in 0..3 {
            parts[j].extend_from_slice(&idx[start..start + alloc[c][j]]);
            start += alloc[c][j];
        }
    }
    for p in parts.iter_mut() {
        p.sort_unstable();
    }
    let tag = |name: &str| format!("{name}:{}", dataset.provenance);
    Ok((
        dataset.select(&parts[0], tag("train")),
        dataset.select(&parts[1], tag("val")),
        dataset.select(&parts[2], tag("test")),
    ))
}
