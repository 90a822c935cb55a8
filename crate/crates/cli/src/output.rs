//! Artifact routing. With `--out` every file lands in that directory and the summary
//! goes to stdout; without it the primary artifact goes to stdout and the summary to
//! stderr.

use std::io::Write;
use std::path::PathBuf;

use clap::ValueEnum;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Json,
    /// Aligned plain-text table; only for `influence` and `factor-reg`.
    Text,
}

impl Format {
    fn ext(self) -> &'static str {
        match self {
            Format::Csv => "csv",
            Format::Json => "json",
            Format::Text => "txt",
        }
    }
}

/// Column names plus rows of JSON scalars; renders as CSV or as JSON objects.
pub struct Table {
    pub headers: Vec<&'static str>,
    pub rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new(headers: &[&'static str]) -> Self {
        Table {
            headers: headers.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.headers.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self, seed: u64) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.headers)?;
        for row in &self.rows {
            w.write_record(row.iter().map(cell))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Data(e.to_string()))?;
        Ok(format!("# seed: {seed}\n{}", String::from_utf8_lossy(&bytes)))
    }

    pub fn to_json_rows(&self) -> Value {
        Value::Array(
            self.rows
                .iter()
                .map(|row| {
                    Value::Object(
                        self.headers
                            .iter()
                            .zip(row)
                            .map(|(h, v)| (h.to_string(), v.clone()))
                            .collect(),
                    )
                })
                .collect(),
        )
    }
}

fn cell(v: &Value) -> String {
    match v {
        Value::Null => String::new(),
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

/// JSON value of anything serializable; non-finite floats become null.
pub fn json<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).unwrap_or(Value::Null)
}

/// Object with `seed` added; non-objects are wrapped under `key`.
pub fn with_seed(value: Value, key: &str, seed: u64) -> Value {
    let mut obj = match value {
        Value::Object(m) => m,
        other => {
            let mut m = Map::new();
            m.insert(key.to_string(), other);
            m
        }
    };
    obj.insert("seed".into(), Value::from(seed));
    Value::Object(obj)
}

pub fn pretty(value: &Value) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub struct Output {
    pub dir: Option<PathBuf>,
    pub seed: u64,
    written: Vec<PathBuf>,
}

impl Output {
    pub fn new(dir: Option<PathBuf>, seed: u64) -> Result<Self, CliError> {
        if let Some(d) = &dir {
            std::fs::create_dir_all(d).map_err(|e| CliError::Data(format!("{}: {e}", d.display())))?;
        }
        Ok(Output {
            dir,
            seed,
            written: Vec::new(),
        })
    }

    fn write_file(&mut self, name: &str, body: &str) -> Result<(), CliError> {
        if let Some(d) = &self.dir {
            let path = d.join(name);
            std::fs::write(&path, body).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?;
            self.written.push(path);
        }
        Ok(())
    }

    /// The command's main result: `<stem>.<ext>` under `--out`, else stdout.
    pub fn primary(&mut self, stem: &str, format: Format, body: &str) -> Result<(), CliError> {
        if self.dir.is_some() {
            self.write_file(&format!("{stem}.{}", format.ext()), body)
        } else {
            std::io::stdout().write_all(body.as_bytes())?;
            Ok(())
        }
    }

    /// A loadable model artifact, written only under `--out`.
    pub fn artifact(&mut self, name: &str, value: &Value) -> Result<(), CliError> {
        if self.written.iter().any(|p| p.file_name().is_some_and(|f| f == name)) {
            return Ok(());
        }
        let body = pretty(value)?;
        self.write_file(name, &body)
    }

    /// One-line summary: stdout under `--out`, stderr otherwise.
    pub fn summary(&self, line: &str) -> Result<(), CliError> {
        if self.dir.is_some() {
            let files: Vec<String> = self
                .written
                .iter()
                .filter_map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()))
                .collect();
            println!("{line} [{}]", files.join(", "));
        } else {
            eprintln!("{line}");
        }
        Ok(())
    }
}
