use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde_json::{Map, Value};

pub const OUT_DIR_ENV: &str = "PADIC_SOJOURN_OUT_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

impl Format {
    fn extension(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    U(u64),
    B(bool),
    S(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::F(v)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::U(v)
    }
}

impl From<u32> for Cell {
    fn from(v: u32) -> Self {
        Cell::U(v as u64)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::U(v as u64)
    }
}

impl From<bool> for Cell {
    fn from(v: bool) -> Self {
        Cell::B(v)
    }
}

impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::S(v.to_string())
    }
}

impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::S(v)
    }
}

impl<T: Into<Cell>> From<Option<T>> for Cell {
    fn from(v: Option<T>) -> Self {
        v.map_or(Cell::Empty, Into::into)
    }
}

impl Cell {
    fn text(&self) -> String {
        match self {
            Cell::F(v) if *v != 0.0 && (v.abs() < 1e-4 || v.abs() >= 1e15) => format!("{v:e}"),
            Cell::F(v) => v.to_string(),
            Cell::U(v) => v.to_string(),
            Cell::B(v) => v.to_string(),
            Cell::S(v) => v.clone(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(v) => serde_json::Number::from_f64(*v).map_or(Value::Null, Value::Number),
            Cell::U(v) => Value::from(*v),
            Cell::B(v) => Value::from(*v),
            Cell::S(v) => Value::from(v.as_str()),
            Cell::Empty => Value::Null,
        }
    }
}

/// Rows with a fixed column order.
#[derive(Debug, Clone)]
pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&'static str]) -> Self {
        Self { columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match columns {:?}", self.columns);
        self.rows.push(row);
    }
}

/// Self-describing run header: every parameter, the seed and the tool version.
#[derive(Debug, Clone)]
pub struct Meta {
    entries: Vec<(String, Value)>,
}

impl Meta {
    pub fn new(command: &str) -> Self {
        let mut m = Self { entries: Vec::new() };
        m.set("tool", env!("CARGO_PKG_NAME"));
        m.set("version", env!("CARGO_PKG_VERSION"));
        m.set("command", command);
        m
    }

    pub fn set(&mut self, key: &str, value: impl Into<Value>) -> &mut Self {
        self.entries.push((key.to_string(), value.into()));
        self
    }

    fn csv_lines(&self) -> String {
        self.entries
            .iter()
            .map(|(k, v)| match v {
                Value::String(s) => format!("# {k}={s}\n"),
                other => format!("# {k}={other}\n"),
            })
            .collect()
    }

    fn json(&self) -> Value {
        Value::Object(self.entries.iter().cloned().collect())
    }
}

pub fn render(table: &Table, meta: &Meta, format: Format) -> Result<Vec<u8>> {
    match format {
        Format::Csv => {
            let mut buf = meta.csv_lines().into_bytes();
            let mut w = csv::Writer::from_writer(&mut buf);
            w.write_record(&table.columns)?;
            for row in &table.rows {
                w.write_record(row.iter().map(Cell::text))?;
            }
            w.flush()?;
            drop(w);
            Ok(buf)
        }
        Format::Json => {
            let rows: Vec<Value> = table
                .rows
                .iter()
                .map(|row| {
                    let obj: Map<String, Value> =
                        table.columns.iter().zip(row).map(|(c, cell)| (c.to_string(), cell.json())).collect();
                    Value::Object(obj)
                })
                .collect();
            let doc = serde_json::json!({ "meta": meta.json(), "columns": table.columns, "rows": rows });
            let mut buf = serde_json::to_vec_pretty(&doc)?;
            buf.push(b'\n');
            Ok(buf)
        }
    }
}

/// Where output goes: the explicit path, else `$PADIC_SOJOURN_OUT_DIR/<name>.<ext>`,
/// else standard output.
pub fn destination(out: Option<&Path>, name: &str, format: Format) -> Option<PathBuf> {
    if let Some(p) = out {
        return Some(p.to_path_buf());
    }
    std::env::var_os(OUT_DIR_ENV).filter(|d| !d.is_empty()).map(|d| PathBuf::from(d).join(format!("{name}.{}", format.extension())))
}

/// Writes via a temporary file in the target directory and a rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d.to_path_buf(),
        _ => PathBuf::from("."),
    };
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(&dir).with_context(|| format!("creating a temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn emit(table: &Table, meta: &Meta, format: Format, out: Option<&Path>, name: &str) -> Result<()> {
    let bytes = render(table, meta, format)?;
    match destination(out, name, format) {
        Some(path) => {
            write_atomic(&path, &bytes)?;
            log::info!("wrote {}", path.display());
        }
        None => std::io::stdout().write_all(&bytes)?,
    }
    Ok(())
}
