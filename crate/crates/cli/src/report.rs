//! Gates, JSON envelopes and CSV input/output.

use std::io::Write;
use std::path::Path;

use serde::Serialize;
use serde_json::Value;

use crate::error::{io_err, CliError, CliResult};

/// A pass/fail decision on one reported number.
#[derive(Clone, Debug, Serialize)]
pub struct Gate {
    pub name: String,
    pub value: f64,
    /// Comparison applied as `value <op> threshold`.
    pub op: &'static str,
    pub threshold: f64,
    pub pass: bool,
}

impl Gate {
    pub fn at_most(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, "<=", threshold, value <= threshold)
    }

    pub fn below(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, "<", threshold, value < threshold)
    }

    pub fn above(name: impl Into<String>, value: f64, threshold: f64) -> Self {
        Self::new(name, value, ">", threshold, value > threshold)
    }

    /// Boolean outcome reported as 1 or 0 against 1.
    pub fn holds(name: impl Into<String>, ok: bool) -> Self {
        Self::new(name, if ok { 1.0 } else { 0.0 }, "==", 1.0, ok)
    }

    fn new(name: impl Into<String>, value: f64, op: &'static str, threshold: f64, pass: bool) -> Self {
        Self {
            name: name.into(),
            value,
            op,
            threshold,
            pass: pass && !value.is_nan(),
        }
    }

    pub fn summary(&self) -> String {
        format!(
            "{} {} {:.6e} {} {:.6e}",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.value,
            self.op,
            self.threshold
        )
    }
}

/// The report written for every verification run. Keys are emitted in
/// sorted order.
pub fn envelope(
    command: &str,
    config: &impl Serialize,
    fingerprint: Option<&str>,
    gates: &[Gate],
    result: Value,
) -> CliResult<Value> {
    let pass = gates.iter().all(|g| g.pass);
    let v = serde_json::json!({
        "command": command,
        "config": to_value(config)?,
        "fingerprint": fingerprint,
        "gates": to_value(&gates)?,
        "pass": pass,
        "result": result,
    });
    Ok(v)
}

pub fn to_value<T: Serialize + ?Sized>(x: &T) -> CliResult<Value> {
    serde_json::to_value(x).map_err(|e| CliError::Config(format!("serialization: {e}")))
}

/// Writes to `path`, or to stdout when `None`.
pub fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, bytes).map_err(io_err(p)),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)
                .and_then(|_| out.flush())
                .map_err(io_err(Path::new("<stdout>")))
        }
    }
}

pub fn write_json(path: Option<&Path>, value: &Value) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Config(e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// A table with a header row; `None` cells are written empty.
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<Option<f64>>>,
}

impl Table {
    pub fn new(header: Vec<String>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Option<f64>>) {
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> CliResult<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|c| c.map(|v| v.to_string()).unwrap_or_default()))?;
        }
        w.into_inner().map_err(|e| CliError::Config(e.to_string()))
    }
}

pub fn coord_names(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}

/// Reads numeric rows from a CSV file with a header row.
pub fn read_points(path: &Path, dim: usize) -> CliResult<Vec<Vec<f64>>> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        if rec.len() != dim {
            return Err(CliError::Config(format!(
                "{} row {}: expected {dim} columns, found {}",
                path.display(),
                i + 1,
                rec.len()
            )));
        }
        let row = rec
            .iter()
            .map(|s| {
                s.parse::<f64>()
                    .map_err(|_| CliError::Config(format!("{} row {}: `{s}` is not a number", path.display(), i + 1)))
            })
            .collect::<CliResult<Vec<f64>>>()?;
        out.push(row);
    }
    Ok(out)
}

/// Row count and column count as little-endian `u64`, then each column in
/// turn as little-endian `f64`.
pub fn f64le_columns(columns: &[Vec<f64>]) -> Vec<u8> {
    let rows = columns.first().map_or(0, Vec::len);
    let mut out = Vec::with_capacity(16 + 8 * rows * columns.len());
    out.extend_from_slice(&(rows as u64).to_le_bytes());
    out.extend_from_slice(&(columns.len() as u64).to_le_bytes());
    for col in columns {
        for v in col {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nan_never_passes() {
        assert!(!Gate::at_most("x", f64::NAN, 1.0).pass);
        assert!(Gate::at_most("x", 1.0, 1.0).pass);
        assert!(!Gate::below("x", 1.0, 1.0).pass);
    }

    #[test]
    fn empty_cells_stay_empty() {
        let mut t = Table::new(vec!["a".into(), "b".into()]);
        t.push(vec![Some(1.5), None]);
        assert_eq!(String::from_utf8(t.to_csv().unwrap()).unwrap(), "a,b\n1.5,\n");
    }

    #[test]
    fn binary_layout() {
        let bytes = f64le_columns(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(bytes.len(), 16 + 32);
        assert_eq!(u64::from_le_bytes(bytes[..8].try_into().unwrap()), 2);
        assert_eq!(f64::from_le_bytes(bytes[40..48].try_into().unwrap()), 4.0);
    }
}
