use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use thiserror::Error;

use crate::plan::{ColumnKind, Comparison, Literal, Schema};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("malformed CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("CSV header is missing column `{column}`")]
    MissingColumn { column: String },
    #[error("row {row}, column `{column}`: `{value}` is not a valid {expected}")]
    TypeMismatch { row: usize, column: String, value: String, expected: &'static str },
    #[error("row {row}, column `{column}`: `{value}` is not one of {allowed:?}")]
    UnknownCategory { row: usize, column: String, value: String, allowed: Vec<String> },
    #[error("row has {found} fields but the schema has {expected} columns")]
    Width { expected: usize, found: usize },
    #[error("privacy unit column `{0}` is not in the schema")]
    UnknownUnitColumn(String),
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Number(f64),
    /// Seconds since the Unix epoch.
    Time(i64),
}

impl Cell {
    pub fn key(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Number(x) => format!("{x}"),
            Cell::Time(t) => format!("{t}"),
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            Cell::Number(x) => Some(*x),
            _ => None,
        }
    }

    /// Compares against a predicate literal; `None` if the types do not meet.
    pub fn compare(&self, lit: &Literal) -> Option<Ordering> {
        match (self, lit) {
            (Cell::Text(a), Literal::Text(b)) => Some(a.as_str().cmp(b.as_str())),
            (Cell::Number(a), Literal::Number(b)) => a.partial_cmp(b),
            (Cell::Time(a), Literal::Text(b)) => parse_timestamp(b).map(|t| a.cmp(&t)),
            _ => None,
        }
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.key())
    }
}

/// Accepts RFC 3339, `YYYY-MM-DD HH:MM[:SS]`, `YYYY-MM-DDTHH:MM[:SS]`, and
/// bare dates. Naive times are taken as UTC.
pub fn parse_timestamp(text: &str) -> Option<i64> {
    let text = text.trim();
    if let Ok(dt) = DateTime::parse_from_rfc3339(text) {
        return Some(dt.timestamp());
    }
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"] {
        if let Ok(dt) = NaiveDateTime::parse_from_str(text, fmt) {
            return Some(dt.and_utc().timestamp());
        }
    }
    NaiveDate::parse_from_str(text, "%Y-%m-%d")
        .ok()
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .map(|dt| dt.and_utc().timestamp())
}

/// Rows conforming to a schema, indexed by privacy unit.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: Schema,
    unit_column: String,
    unit_col_idx: usize,
    rows: Vec<Vec<Cell>>,
    unit_index: BTreeMap<String, Vec<usize>>,
}

impl Dataset {
    /// Builds a dataset from already-typed rows, checking kinds and value sets.
    pub fn new(schema: Schema, unit_column: &str, rows: Vec<Vec<Cell>>) -> Result<Self, DatasetError> {
        let unit_col_idx =
            schema.index_of(unit_column).ok_or_else(|| DatasetError::UnknownUnitColumn(unit_column.to_string()))?;
        for (r, row) in rows.iter().enumerate() {
            if row.len() != schema.columns.len() {
                return Err(DatasetError::Width { expected: schema.columns.len(), found: row.len() });
            }
            for (cell, col) in row.iter().zip(&schema.columns) {
                let expected = match (col.kind, cell) {
                    (ColumnKind::Numeric, Cell::Number(x)) if x.is_finite() => None,
                    (ColumnKind::Numeric, _) => Some("number"),
                    (ColumnKind::Timestamp, Cell::Time(_)) => None,
                    (ColumnKind::Timestamp, _) => Some("timestamp"),
                    (ColumnKind::Categorical | ColumnKind::Identifier, Cell::Text(_)) => None,
                    (ColumnKind::Categorical | ColumnKind::Identifier, _) => Some("text value"),
                };
                if let Some(expected) = expected {
                    return Err(DatasetError::TypeMismatch {
                        row: r + 1,
                        column: col.name.clone(),
                        value: cell.key(),
                        expected,
                    });
                }
                if let (Some(allowed), Cell::Text(v)) = (col.closed_values(), cell) {
                    if !allowed.iter().any(|a| a == v) {
                        return Err(DatasetError::UnknownCategory {
                            row: r + 1,
                            column: col.name.clone(),
                            value: v.clone(),
                            allowed: allowed.to_vec(),
                        });
                    }
                }
            }
        }
        let mut unit_index: BTreeMap<String, Vec<usize>> = BTreeMap::new();
        for (i, row) in rows.iter().enumerate() {
            unit_index.entry(row[unit_col_idx].key()).or_default().push(i);
        }
        Ok(Self { schema, unit_column: unit_column.to_string(), unit_col_idx, rows, unit_index })
    }

    /// Reads CSV with a header row. Columns are matched by name; extra CSV
    /// columns are ignored. Row numbers in errors count data rows from 1.
    pub fn from_csv_reader<R: std::io::Read>(reader: R, schema: &Schema, unit_column: &str) -> Result<Self, DatasetError> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
        let headers = rdr.headers()?.clone();
        let mut positions = Vec::with_capacity(schema.columns.len());
        for col in &schema.columns {
            let pos = headers
                .iter()
                .position(|h| h == col.name)
                .ok_or_else(|| DatasetError::MissingColumn { column: col.name.clone() })?;
            positions.push(pos);
        }
        let mut rows = Vec::new();
        for (r, record) in rdr.records().enumerate() {
            let record = record?;
            let mut row = Vec::with_capacity(schema.columns.len());
            for (col, &pos) in schema.columns.iter().zip(&positions) {
                let raw = record.get(pos).unwrap_or("");
                let mismatch = |expected| DatasetError::TypeMismatch {
                    row: r + 1,
                    column: col.name.clone(),
                    value: raw.to_string(),
                    expected,
                };
                let cell = match col.kind {
                    ColumnKind::Numeric => {
                        Cell::Number(raw.parse::<f64>().ok().filter(|x| x.is_finite()).ok_or_else(|| mismatch("number"))?)
                    }
                    ColumnKind::Timestamp => Cell::Time(parse_timestamp(raw).ok_or_else(|| mismatch("timestamp"))?),
                    ColumnKind::Categorical | ColumnKind::Identifier => Cell::Text(raw.to_string()),
                };
                row.push(cell);
            }
            rows.push(row);
        }
        Self::new(schema.clone(), unit_column, rows)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn unit_column(&self) -> &str {
        &self.unit_column
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn unit_index(&self) -> &BTreeMap<String, Vec<usize>> {
        &self.unit_index
    }

    pub fn unit_count(&self) -> usize {
        self.unit_index.len()
    }

    pub fn unit_of(&self, row: usize) -> String {
        self.rows[row][self.unit_col_idx].key()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.schema.index_of(name)
    }

    /// Whether `row` satisfies every comparison. Comparisons whose types do
    /// not meet evaluate to false.
    pub fn matches(&self, row: usize, predicate: &[&Comparison]) -> bool {
        predicate.iter().all(|c| {
            self.column_index(&c.column)
                .and_then(|i| self.rows[row][i].compare(&c.value))
                .is_some_and(|ord| c.op.holds(ord))
        })
    }

    /// Copy keeping only the given rows, in the given order.
    pub fn select(&self, rows: &[usize]) -> Dataset {
        let kept = rows.iter().map(|&i| self.rows[i].clone()).collect();
        Dataset::new(self.schema.clone(), &self.unit_column, kept).expect("subset of a valid dataset is valid")
    }

    /// Copy with every row of `unit` removed.
    pub fn without_unit(&self, unit: &str) -> Dataset {
        let keep: Vec<usize> = (0..self.rows.len()).filter(|&i| self.unit_of(i) != unit).collect();
        self.select(&keep)
    }

    /// Copy with extra rows appended.
    pub fn with_rows(&self, extra: Vec<Vec<Cell>>) -> Result<Dataset, DatasetError> {
        let mut rows = self.rows.clone();
        rows.extend(extra);
        Dataset::new(self.schema.clone(), &self.unit_column, rows)
    }
}

/// Reads a CSV file against a schema and indexes it by privacy unit.
pub fn load_dataset(path: impl AsRef<Path>, schema: &Schema, unit_column: &str) -> Result<Dataset, DatasetError> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|source| DatasetError::Io { path: path.display().to_string(), source })?;
    Dataset::from_csv_reader(std::io::BufReader::new(file), schema, unit_column)
}
