//! Record CSV files: a header with unit annotations, then one or more rows
//! per seed. Each seed's rows are appended with a single write so an
//! interrupted run leaves at most a partial final line, which is dropped on
//! the next open.

use std::collections::BTreeSet;
use std::fs::{self, File, OpenOptions};
use std::io::{self, Read, Seek, SeekFrom, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::fmt_f64;

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{path}: header does not match this experiment (found `{found}`)")]
    Header { path: PathBuf, found: String },
    #[error("{path}: missing column `{column}`")]
    MissingColumn { path: PathBuf, column: String },
    #[error("{path}: row {row}: column `{column}` is not a number: `{value}`")]
    BadNumber { path: PathBuf, row: usize, column: String, value: String },
}

/// A column name and its unit (`1` for dimensionless, empty for labels).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Column {
    pub name: &'static str,
    pub unit: &'static str,
}

pub const fn col(name: &'static str, unit: &'static str) -> Column {
    Column { name, unit }
}

impl Column {
    pub fn header(&self) -> String {
        if self.unit.is_empty() {
            self.name.to_string()
        } else {
            format!("{} ({})", self.name, self.unit)
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Float(f64),
    Bool(bool),
    Text(String),
}

impl Cell {
    pub fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => fmt_f64(*v),
            Cell::Bool(v) => u8::from(*v).to_string(),
            Cell::Text(s) => s.clone(),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::Bool(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}

/// Leading columns shared by every record file.
pub const KEY_COLUMNS: [Column; 3] = [col("experiment", ""), col("digest", ""), col("seed", "")];

pub fn header_line(columns: &[Column]) -> String {
    let names: Vec<String> = KEY_COLUMNS.iter().chain(columns).map(Column::header).collect();
    encode_row(&names)
}

fn encode_row(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields).expect("in-memory csv write");
    String::from_utf8(w.into_inner().expect("in-memory csv flush")).expect("utf-8 fields")
}

/// Renders one seed's rows, key columns included.
pub fn encode_rows(experiment: &str, digest: &str, seed: u64, rows: &[Vec<Cell>]) -> String {
    let mut out = String::new();
    for r in rows {
        let mut fields = vec![experiment.to_string(), digest.to_string(), seed.to_string()];
        fields.extend(r.iter().map(Cell::render));
        out.push_str(&encode_row(&fields));
    }
    out
}

/// Append-only record file.
pub struct RecordFile {
    path: PathBuf,
    file: File,
}

impl RecordFile {
    /// Opens or creates `path`. A partial trailing line is cut off; an
    /// existing header must equal `header`. Returns the seeds already present.
    pub fn open(path: &Path, header: &str) -> Result<(RecordFile, BTreeSet<u64>), RecordError> {
        let io_err = |source| RecordError::Io { path: path.into(), source };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(io_err)?;
        }
        let mut file = OpenOptions::new().read(true).write(true).create(true).truncate(false).open(path).map_err(io_err)?;
        let mut text = String::new();
        file.read_to_string(&mut text).map_err(io_err)?;
        if !text.is_empty() && !text.ends_with('\n') {
            let keep = text.rfind('\n').map_or(0, |i| i + 1);
            file.set_len(keep as u64).map_err(io_err)?;
            text.truncate(keep);
        }
        if text.is_empty() {
            file.write_all(header.as_bytes()).map_err(io_err)?;
            file.sync_data().map_err(io_err)?;
            return Ok((RecordFile { path: path.into(), file }, BTreeSet::new()));
        }
        let first = text.lines().next().unwrap_or("");
        if format!("{first}\n") != header {
            return Err(RecordError::Header { path: path.into(), found: first.into() });
        }
        let table = read_table_str(path, &text)?;
        let seeds = table.seeds().into_iter().collect();
        file.seek(SeekFrom::End(0)).map_err(io_err)?;
        Ok((RecordFile { path: path.into(), file }, seeds))
    }

    /// Appends one seed's rows in a single write.
    pub fn append(&mut self, text: &str) -> Result<(), RecordError> {
        let io_err = |source| RecordError::Io { path: self.path.clone(), source };
        self.file.write_all(text.as_bytes()).map_err(io_err)?;
        self.file.sync_data().map_err(io_err)
    }
}

/// A record file read back: header names without units, and string rows.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub path: PathBuf,
    pub columns: Vec<String>,
    pub units: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

fn split_header(h: &str) -> (String, String) {
    match h.rfind(" (") {
        Some(i) if h.ends_with(')') => (h[..i].to_string(), h[i + 2..h.len() - 1].to_string()),
        _ => (h.to_string(), String::new()),
    }
}

fn read_table_str(path: &Path, text: &str) -> Result<Table, RecordError> {
    let csv_err = |source| RecordError::Csv { path: path.into(), source };
    let mut r = csv::ReaderBuilder::new().has_headers(true).from_reader(text.as_bytes());
    let (columns, units) = r.headers().map_err(csv_err)?.iter().map(split_header).unzip();
    let mut rows = Vec::new();
    for rec in r.records() {
        rows.push(rec.map_err(csv_err)?.iter().map(str::to_string).collect());
    }
    Ok(Table { path: path.into(), columns, units, rows })
}

/// Reads a record file, ignoring a partial trailing line.
pub fn read_table(path: &Path) -> Result<Table, RecordError> {
    let mut text = fs::read_to_string(path).map_err(|source| RecordError::Io { path: path.into(), source })?;
    if !text.ends_with('\n') {
        text.truncate(text.rfind('\n').map_or(0, |i| i + 1));
    }
    read_table_str(path, &text)
}

impl Table {
    pub fn index(&self, column: &str) -> Result<usize, RecordError> {
        self.columns
            .iter()
            .position(|c| c == column)
            .ok_or_else(|| RecordError::MissingColumn { path: self.path.clone(), column: column.into() })
    }

    pub fn seeds(&self) -> Vec<u64> {
        let i = self.columns.iter().position(|c| c == "seed").unwrap_or(2);
        let mut v: Vec<u64> = self.rows.iter().filter_map(|r| r.get(i)?.parse().ok()).collect();
        v.dedup();
        v
    }

    pub fn floats(&self, column: &str) -> Result<Vec<f64>, RecordError> {
        let i = self.index(column)?;
        self.rows
            .iter()
            .enumerate()
            .map(|(row, r)| {
                r[i].parse::<f64>().map_err(|_| RecordError::BadNumber {
                    path: self.path.clone(),
                    row: row + 1,
                    column: column.into(),
                    value: r[i].clone(),
                })
            })
            .collect()
    }

    pub fn texts(&self, column: &str) -> Result<Vec<&str>, RecordError> {
        let i = self.index(column)?;
        Ok(self.rows.iter().map(|r| r[i].as_str()).collect())
    }

    /// Rows sorted by seed, stable within a seed.
    pub fn sorted_by_seed(mut self) -> Self {
        let i = self.columns.iter().position(|c| c == "seed").unwrap_or(2);
        self.rows.sort_by_key(|r| r[i].parse::<u64>().unwrap_or(u64::MAX));
        self
    }

    /// Everything after the header line, exactly as stored.
    pub fn body(path: &Path) -> Result<String, RecordError> {
        let text = fs::read_to_string(path).map_err(|source| RecordError::Io { path: path.into(), source })?;
        Ok(text.split_once('\n').map(|(_, b)| b.to_string()).unwrap_or_default())
    }
}
