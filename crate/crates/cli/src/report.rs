//! Flat report tables and the CSV/JSON writers.
//!
//! Numbers in CSV are written in scientific notation with 17 significant
//! digits through a formatter that ignores the locale. JSON reports use
//! serde_json's shortest round-trip form. Neither output carries
//! timestamps, host names or thread counts, so reruns are byte-identical.

use std::io::Write;
use std::path::Path;

use restartk::simulation::fmt_f64;
use restartk::Warning;
use serde::Serialize;

use crate::config::Format;
use crate::error::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Bool(bool),
    Text(String),
    Empty,
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(v) => fmt_f64(*v),
            Cell::Int(v) => v.to_string(),
            Cell::Bool(b) => b.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::Int(u64::from(v))
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<Option<bool>> for Cell {
    fn from(v: Option<bool>) -> Self {
        v.map_or(Cell::Empty, Cell::Bool)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// A rectangular table with a fixed header.
#[derive(Debug, Clone)]
pub struct Table {
    pub columns: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &'static [&'static str]) -> Self {
        Self {
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the header");
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns).expect("writing to memory");
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).expect("writing to memory");
        }
        w.into_inner().expect("flushing to memory")
    }
}

/// Short machine-readable names joined by `;`.
pub fn warning_tags(ws: &[Warning]) -> Cell {
    if ws.is_empty() {
        return Cell::Empty;
    }
    let mut tags: Vec<&str> = ws
        .iter()
        .map(|w| match w {
            Warning::MomentUnstable { .. } => "moment_unstable",
            Warning::FubiniUnverified { .. } => "fubini_unverified",
        })
        .collect();
    tags.dedup();
    Cell::Text(tags.join(";"))
}

/// JSON envelope shared by every task.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub schema_version: u32,
    pub task: &'a str,
    pub seed: u64,
    pub lambda: f64,
    pub report: T,
}

pub fn to_json<T: Serialize>(value: &T) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(value).expect("reports serialize to JSON");
    bytes.push(b'\n');
    bytes
}

/// The bytes of a report in the requested format.
pub fn render(format: Format, table: &Table, json: &[u8]) -> Vec<u8> {
    match format {
        Format::Csv => table.to_csv(),
        Format::Json => json.to_vec(),
    }
}

/// Writes through a temporary file in the destination directory and
/// renames it into place, so an interrupted run never leaves a truncated
/// report behind.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let err = |source| CliError::Write {
        path: path.to_path_buf(),
        source,
    };
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(err)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(err)?;
    tmp.write_all(bytes).map_err(err)?;
    tmp.persist(path).map_err(|e| err(e.error))?;
    Ok(())
}
