//! Tables: named, typed columns over rows of cells.

use std::cmp::Ordering;
use std::collections::HashSet;
use std::fmt;
use std::io::Read;

use serde::{Deserialize, Serialize};

use crate::decimal::Decimal;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnKind {
    Number,
    Text,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    pub kind: ColumnKind,
}

/// A single table cell, also the atom of answers and value lists.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Cell {
    Number(Decimal),
    Text(String),
}

impl Cell {
    pub fn kind(&self) -> ColumnKind {
        match self {
            Cell::Number(_) => ColumnKind::Number,
            Cell::Text(_) => ColumnKind::Text,
        }
    }

    pub fn as_number(&self) -> Option<Decimal> {
        match self {
            Cell::Number(n) => Some(*n),
            Cell::Text(_) => None,
        }
    }

    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn int(n: i64) -> Self {
        Cell::Number(Decimal::from_int(n))
    }
}

/// Numbers sort before text; numbers by value, text lexicographically.
impl Ord for Cell {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Cell::Number(a), Cell::Number(b)) => a.cmp_value(b),
            (Cell::Number(_), Cell::Text(_)) => Ordering::Less,
            (Cell::Text(_), Cell::Number(_)) => Ordering::Greater,
            (Cell::Text(a), Cell::Text(b)) => a.cmp(b),
        }
    }
}

impl PartialOrd for Cell {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Number(n) => write!(f, "{n}"),
            Cell::Text(t) => f.write_str(t),
        }
    }
}

impl fmt::Debug for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Number(n) => write!(f, "{n}"),
            Cell::Text(t) => write!(f, "{t:?}"),
        }
    }
}

impl Serialize for Cell {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            Cell::Number(n) => n.serialize(s),
            Cell::Text(t) => s.serialize_str(t),
        }
    }
}

impl<'de> Deserialize<'de> for Cell {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        match serde_json::Value::deserialize(d)? {
            serde_json::Value::String(s) => Ok(Cell::Text(s)),
            serde_json::Value::Number(n) => {
                let d = n
                    .to_string()
                    .parse::<Decimal>()
                    .map_err(serde::de::Error::custom)?;
                Ok(Cell::Number(d))
            }
            other => Err(serde::de::Error::custom(format!(
                "expected a number or string cell, found {other}"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TableError {
    #[error("table {table}: duplicate column `{column}`")]
    DuplicateColumn { table: String, column: String },
    #[error("table {table}: row {row} has {found} cells, expected {expected}")]
    RowWidth {
        table: String,
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error("table {table}: row {row}, column `{column}` holds a {found:?} cell in a {expected:?} column")]
    CellKind {
        table: String,
        row: usize,
        column: String,
        expected: ColumnKind,
        found: ColumnKind,
    },
    #[error("table {table}: no columns")]
    NoColumns { table: String },
    #[error("csv: {0}")]
    Csv(String),
}

/// One table environment. Immutable once built.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TableEnv {
    table_id: String,
    columns: Vec<Column>,
    rows: Vec<Vec<Cell>>,
}

impl TableEnv {
    pub fn new(
        table_id: impl Into<String>,
        columns: Vec<Column>,
        rows: Vec<Vec<Cell>>,
    ) -> Result<Self, TableError> {
        let table = table_id.into();
        if columns.is_empty() {
            return Err(TableError::NoColumns { table });
        }
        let mut seen = HashSet::new();
        for c in &columns {
            if !seen.insert(c.name.as_str()) {
                return Err(TableError::DuplicateColumn {
                    table,
                    column: c.name.clone(),
                });
            }
        }
        for (r, row) in rows.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(TableError::RowWidth {
                    table,
                    row: r,
                    expected: columns.len(),
                    found: row.len(),
                });
            }
            for (cell, col) in row.iter().zip(&columns) {
                if cell.kind() != col.kind {
                    return Err(TableError::CellKind {
                        table,
                        row: r,
                        column: col.name.clone(),
                        expected: col.kind,
                        found: cell.kind(),
                    });
                }
            }
        }
        Ok(TableEnv {
            table_id: table,
            columns,
            rows,
        })
    }

    pub fn id(&self) -> &str {
        &self.table_id
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn rows(&self) -> &[Vec<Cell>] {
        &self.rows
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn cell(&self, row: usize, col: usize) -> &Cell {
        &self.rows[row][col]
    }

    /// Distinct cell values of a column, in first-occurrence order.
    pub fn distinct_values(&self, col: usize) -> Vec<&Cell> {
        let mut seen = HashSet::new();
        self.rows
            .iter()
            .map(|r| &r[col])
            .filter(|c| seen.insert(*c))
            .collect()
    }

    /// Reads a CSV with a header row. A column whose every cell parses as an
    /// exact decimal is numeric; anything else is text.
    pub fn from_csv<R: Read>(table_id: impl Into<String>, reader: R) -> Result<Self, TableError> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(true)
            .trim(csv::Trim::All)
            .from_reader(reader);
        let headers: Vec<String> = rdr
            .headers()
            .map_err(|e| TableError::Csv(e.to_string()))?
            .iter()
            .map(str::to_string)
            .collect();
        let mut raw: Vec<Vec<String>> = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| TableError::Csv(e.to_string()))?;
            raw.push(rec.iter().map(str::to_string).collect());
        }
        let kinds: Vec<ColumnKind> = (0..headers.len())
            .map(|c| {
                let numeric = !raw.is_empty()
                    && raw
                        .iter()
                        .all(|r| r.get(c).is_some_and(|v| v.parse::<Decimal>().is_ok()));
                if numeric {
                    ColumnKind::Number
                } else {
                    ColumnKind::Text
                }
            })
            .collect();
        let columns = headers
            .into_iter()
            .zip(&kinds)
            .map(|(name, &kind)| Column { name, kind })
            .collect();
        let rows = raw
            .into_iter()
            .map(|r| {
                r.into_iter()
                    .zip(&kinds)
                    .map(|(v, k)| match k {
                        ColumnKind::Number => Cell::Number(v.parse().expect("checked numeric")),
                        ColumnKind::Text => Cell::Text(v),
                    })
                    .collect()
            })
            .collect();
        TableEnv::new(table_id, columns, rows)
    }
}

/// On-disk table layout: `{"columns":[{"name","kind"}],"rows":[[...]]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableJson {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl TableEnv {
    pub fn to_json(&self) -> TableJson {
        TableJson {
            columns: self.columns.clone(),
            rows: self.rows.clone(),
        }
    }

    pub fn from_json(table_id: impl Into<String>, t: TableJson) -> Result<Self, TableError> {
        TableEnv::new(table_id, t.columns, t.rows)
    }
}
