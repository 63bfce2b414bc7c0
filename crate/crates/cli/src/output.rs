//! Tables, file writers and the run manifest.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    F(f64),
    I(i64),
    S(String),
    B(bool),
}

impl Cell {
    fn csv(&self) -> String {
        match self {
            // 17 significant digits round-trip every double.
            Cell::F(x) => format!("{:.16e}", x + 0.0),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
            Cell::B(b) => u8::from(*b).to_string(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::F(x) => json!(x + 0.0),
            Cell::I(i) => json!(i),
            Cell::S(s) => json!(s),
            Cell::B(b) => json!(b),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::F(x)
    }
}

impl From<usize> for Cell {
    fn from(i: usize) -> Self {
        Cell::I(i as i64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::B(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::S(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::S(s)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    pub name: &'static str,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &'static str, columns: &[&'static str]) -> Self {
        Self { name, columns: columns.to_vec(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width in table {}", self.name);
        self.rows.push(row);
    }
}

/// Row helper: `row![a, b, c]` converts each entry into a [`Cell`].
macro_rules! row {
    ($($x:expr),* $(,)?) => { vec![$($crate::output::Cell::from($x)),*] };
}
pub(crate) use row;

/// What an experiment produces besides the resolved parameters.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    /// Written as `<name>.json` regardless of the table format.
    pub documents: Vec<(&'static str, Value)>,
    pub summary: Value,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Config(format!("cannot write {}: {e}", path.display()))
}

fn write_table(dir: &Path, t: &Table, format: Format) -> Result<String, CliError> {
    match format {
        Format::Csv => {
            let name = format!("{}.csv", t.name);
            let path = dir.join(&name);
            let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            let write = |w: &mut csv::Writer<fs::File>| -> csv::Result<()> {
                w.write_record(&t.columns)?;
                for r in &t.rows {
                    w.write_record(r.iter().map(Cell::csv))?;
                }
                w.flush()?;
                Ok(())
            };
            write(&mut w).map_err(|e| CliError::Config(format!("cannot write {}: {e}", path.display())))?;
            Ok(name)
        }
        Format::Json => {
            let name = format!("{}.json", t.name);
            let rows: Vec<Value> = t.rows.iter().map(|r| Value::Array(r.iter().map(Cell::json).collect())).collect();
            write_json(&dir.join(&name), &json!({ "columns": t.columns, "rows": rows }))?;
            Ok(name)
        }
    }
}

pub fn write_json(path: &Path, v: &Value) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(v).expect("JSON values always serialize");
    text.push('\n');
    fs::write(path, text).map_err(|e| io_err(path, e))
}

/// Static part of the manifest.
pub struct RunInfo<'a> {
    pub group: &'a str,
    pub action: &'a str,
    pub format: Format,
    pub seed: u64,
}

/// Writes every table and document, then `manifest.json`.
pub fn write_run(dir: &Path, info: &RunInfo, params: Value, out: &Outcome) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files = Vec::new();
    for t in &out.tables {
        let name = write_table(dir, t, info.format)?;
        files.push(json!({ "file": name, "rows": t.rows.len(), "columns": t.columns }));
    }
    for (name, doc) in &out.documents {
        let file = format!("{name}.json");
        write_json(&dir.join(&file), doc)?;
        files.push(json!({ "file": file }));
    }
    let manifest = json!({
        "tool": "amprb",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": format!("{} {}", info.group, info.action),
        "status": "ok",
        "format": info.format,
        "seed": info.seed,
        "params": params,
        "summary": out.summary,
        "files": files,
    });
    let _ = fs::remove_file(dir.join("error.json"));
    write_json(&dir.join("manifest.json"), &manifest)
}

/// Machine-readable failure record, `error.json`.
pub fn write_error(dir: &Path, experiment: &str, err: &CliError) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let record = json!({
        "tool": "amprb",
        "version": env!("CARGO_PKG_VERSION"),
        "experiment": experiment,
        "status": "error",
        "kind": err.kind(),
        "exit_code": err.exit_code(),
        "message": err.to_string(),
    });
    let _ = fs::remove_file(dir.join("manifest.json"));
    write_json(&dir.join("error.json"), &record)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, f64::MIN_POSITIVE] {
            let s = Cell::F(x).csv();
            assert_eq!(s.parse::<f64>().unwrap(), x, "{s}");
        }
        assert_eq!(Cell::F(0.0).csv(), "0.0000000000000000e0");
        assert_eq!(Cell::B(true).csv(), "1");
    }

    #[test]
    fn non_finite_json_is_null() {
        assert_eq!(Cell::F(f64::NAN).json(), Value::Null);
    }
}
