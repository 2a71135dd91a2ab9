//! Deterministic output emission: CSVs with fixed 17-significant-digit
//! scientific notation (byte-stable across runs and thread counts) and the
//! run.json report.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

/// Fixed-width scientific formatting; 17 significant digits round-trip f64.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub struct CsvWriter {
    buffer: String,
}

impl CsvWriter {
    pub fn new(header: &str) -> Self {
        let mut buffer = String::new();
        buffer.push_str(header);
        buffer.push('\n');
        CsvWriter { buffer }
    }

    pub fn row(&mut self, values: &[f64]) {
        for (i, v) in values.iter().enumerate() {
            if i > 0 {
                self.buffer.push(',');
            }
            let _ = write!(self.buffer, "{}", fmt_float(*v));
        }
        self.buffer.push('\n');
    }

    /// Row with a leading integer column.
    pub fn row_with_int(&mut self, head: u64, values: &[f64]) {
        let _ = write!(self.buffer, "{head}");
        for v in values {
            self.buffer.push(',');
            let _ = write!(self.buffer, "{}", fmt_float(*v));
        }
        self.buffer.push('\n');
    }

    pub fn write_to(&self, path: &Path) -> Result<(), String> {
        fs::write(path, &self.buffer).map_err(|e| format!("writing {}: {e}", path.display()))
    }
}

pub fn write_json(path: &Path, value: &serde_json::Value) -> Result<(), String> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| format!("serializing {}: {e}", path.display()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| format!("writing {}: {e}", path.display()))
}
