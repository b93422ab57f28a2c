//! Report envelopes and file writers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::CliError;

pub const TOOL: &str = "sgstein";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A point that could not be computed; the rest of the sweep is unaffected.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gap {
    pub n: usize,
    pub p: f64,
    pub budget: bool,
    pub error: String,
}

impl Gap {
    pub fn new(n: usize, p: f64, e: &subgraph_stein::Error) -> Self {
        Self {
            n,
            p,
            budget: matches!(
                e,
                subgraph_stein::Error::BudgetExceeded { .. } | subgraph_stein::Error::OracleTooLarge { .. }
            ),
            error: e.to_string(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'a str,
    pub config_sha256: &'a str,
    pub seed: u64,
    pub pattern: &'a str,
    pub generator: &'static str,
    pub results: T,
    pub gaps: &'a [Gap],
}

pub fn write_json<T: Serialize>(dir: &Path, name: &str, value: &T) -> Result<PathBuf, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("report serializes");
    text.push('\n');
    write_file(dir, name, text.as_bytes())
}

pub fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
    let path = dir.join(name);
    fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    fs::write(&path, bytes).map_err(|source| CliError::Io {
        path: path.clone(),
        source,
    })?;
    Ok(path)
}

/// 17 significant digits, enough to round-trip any `f64`.
pub fn float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_float(x: Option<f64>) -> String {
    x.map(float).unwrap_or_default()
}

/// CSV with a leading `#` line carrying provenance.
pub fn csv_bytes(provenance: &str, header: &[&str], rows: &[Vec<String>]) -> Vec<u8> {
    let mut out = format!("# {provenance}\n").into_bytes();
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record(header).expect("in-memory write");
        for r in rows {
            w.write_record(r).expect("in-memory write");
        }
        w.flush().expect("in-memory write");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn floats_round_trip() {
        for x in [0.1, 1.0 / 3.0, 6.02e23, -1e-300, 0.0] {
            assert_eq!(float(x).parse::<f64>().unwrap().to_bits(), x.to_bits());
        }
    }

    #[test]
    fn csv_layout() {
        let b = csv_bytes("hash=abc", &["a", "b"], &[vec!["1".into(), "x,y".into()]]);
        assert_eq!(String::from_utf8(b).unwrap(), "# hash=abc\na,b\n1,\"x,y\"\n");
    }
}
