use std::fs;
use std::io::{self, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

/// Everything a command prints in JSON mode.
#[derive(Debug, Serialize)]
pub struct OutputRecord {
    pub command: String,
    pub parameters: Value,
    pub results: Value,
    pub version: &'static str,
    pub seed: Option<u64>,
}

impl OutputRecord {
    pub fn new(command: &str, parameters: Value, results: Value, seed: Option<u64>) -> Self {
        Self { command: command.to_string(), parameters, results, version: env!("CARGO_PKG_VERSION"), seed }
    }
}

/// CSV form of a command's results: `#` comment lines, a header and rows.
#[derive(Debug, Default)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    /// Printed after the rows, each prefixed by `# `.
    pub trailer: Vec<String>,
}

impl Table {
    pub fn new(header: &str) -> Self {
        Self { header: split(header), ..Default::default() }
    }

    pub fn push(&mut self, row: impl IntoIterator<Item = impl ToString>) {
        self.rows.push(row.into_iter().map(|c| c.to_string()).collect());
    }

    /// Add a row already joined with commas (no quoting needed).
    pub fn push_joined(&mut self, row: &str) {
        self.rows.push(split(row));
    }

    fn render(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(vec![]);
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let mut out = w.into_inner().context("flushing CSV")?;
        for line in &self.trailer {
            writeln!(out, "# {line}")?;
        }
        Ok(out)
    }
}

fn split(s: &str) -> Vec<String> {
    s.split(',').map(str::to_string).collect()
}

pub struct Emit {
    pub format: Format,
    pub output: Option<PathBuf>,
}

impl Emit {
    pub fn emit(&self, record: &OutputRecord, table: &Table) -> Result<()> {
        let bytes = match self.format {
            Format::Json => {
                let mut b = serde_json::to_vec_pretty(record)?;
                b.push(b'\n');
                b
            }
            Format::Csv => table.render()?,
        };
        match &self.output {
            Some(path) => fs::write(path, bytes).with_context(|| format!("writing {}", path.display())),
            None => io::stdout().write_all(&bytes).context("writing to stdout"),
        }
    }
}
