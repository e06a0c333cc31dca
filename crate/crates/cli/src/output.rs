//! CSV files with a leading `# config_hash=... command=...` line.

use std::fs;
use std::path::Path;

use crate::error::CliError;

/// Float cells use the shortest round-trip form so equal runs write equal bytes;
/// very small or large magnitudes switch to exponent notation.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if a != 0.0 && a.is_finite() && !(1e-4..1e15).contains(&a) {
        format!("{x:e}")
    } else {
        format!("{x}")
    }
}

pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self {
            header: header.iter().map(|h| h.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn with_header(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write(&self, path: &Path, hash: &str, command: &str) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r)?;
        }
        let body = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
        let mut bytes = format!("# config_hash={hash} command={command}\n").into_bytes();
        bytes.extend_from_slice(&body);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        fs::write(path, bytes)?;
        Ok(())
    }
}

/// Row of `check,value,pass`.
pub fn check(name: &str, value: impl ToString, pass: bool) -> Vec<String> {
    vec![name.to_string(), value.to_string(), pass.to_string()]
}
