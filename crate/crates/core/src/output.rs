// Copyright 2026 czpulse contributors
// SPDX-License-Identifier: Apache-2.0

//! CSV tables and run manifests.
//!
//! Floats are written with Rust's shortest round-trip formatting, so a table
//! written twice from the same values is byte-identical.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimize::SweepTable;

/// One CSV cell.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Text(String),
}

impl fmt::Display for Cell {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Cell::Num(x) if x.is_nan() => f.write_str("NaN"),
            Cell::Num(x) => write!(f, "{x}"),
            Cell::Text(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_string())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Text(if b { "true" } else { "false" }.into())
    }
}

/// Named table written to `<name>.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str]) -> Self {
        Table { name: name.into(), header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) -> Result<()> {
        if row.len() != self.header.len() {
            return Err(Error::Dimension(format!(
                "table {}: row of {} cells for {} columns",
                self.name,
                row.len(),
                self.header.len()
            )));
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }

    /// Numeric values of a column (NaN for text cells).
    pub fn values(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.column(name)?;
        Some(
            self.rows
                .iter()
                .map(|r| match &r[k] {
                    Cell::Num(x) => *x,
                    Cell::Text(_) => f64::NAN,
                })
                .collect(),
        )
    }

    /// Sweep result with an `error` column holding per-row failure tags.
    pub fn from_sweep(name: &str, sweep: &SweepTable) -> Self {
        let header = sweep.header();
        let rows = sweep
            .rows
            .iter()
            .map(|r| {
                let mut row: Vec<Cell> = r.params.iter().chain(&r.values).map(|&x| Cell::Num(x)).collect();
                row.push(Cell::Text(r.error.clone().unwrap_or_default()));
                row
            })
            .collect();
        Table { name: name.into(), header, rows }
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|c| c.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
        Ok(String::from_utf8(bytes).expect("CSV output is UTF-8"))
    }

    /// Write `<dir>/<name>.csv`, creating `dir` if needed.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.csv", self.name));
        std::fs::write(&path, self.to_csv_string()?)?;
        Ok(path)
    }
}

/// Provenance record stored next to the CSV files of a run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: String,
    pub experiment: String,
    pub out_dir: String,
    pub seed: u64,
    pub version: String,
    pub timestamp: String,
    pub files: Vec<String>,
}

impl RunManifest {
    /// Write `<dir>/<experiment>.manifest.toml`.
    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        std::fs::create_dir_all(dir)?;
        let path = dir.join(format!("{}.manifest.toml", self.experiment));
        let text = toml::to_string(self).map_err(|e| Error::Config(format!("manifest: {e}")))?;
        std::fs::write(&path, text)?;
        Ok(path)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optimize::SweepRow;

    #[test]
    fn rows_must_match_header() {
        let mut t = Table::new("t", &["a", "b"]);
        t.push(vec![1.0.into(), "x".into()]).unwrap();
        assert!(t.push(vec![1.0.into()]).is_err());
    }

    #[test]
    fn float_formatting_round_trips() {
        let mut t = Table::new("t", &["x", "y", "z"]);
        t.push(vec![0.1.into(), 1e-17.into(), f64::NAN.into()]).unwrap();
        let s = t.to_csv_string().unwrap();
        assert_eq!(s, "x,y,z\n0.1,0.00000000000000001,NaN\n");
        let back: f64 = s.lines().nth(1).unwrap().split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(back, 1e-17);
    }

    #[test]
    fn sweep_conversion_keeps_error_tags() {
        let sweep = SweepTable {
            axes: vec!["p".into()],
            columns: vec!["v".into()],
            rows: vec![
                SweepRow { params: vec![1.0], values: vec![2.0], error: None },
                SweepRow { params: vec![2.0], values: vec![f64::NAN], error: Some("calibration failed".into()) },
            ],
        };
        let t = Table::from_sweep("s", &sweep);
        assert_eq!(t.header, vec!["p", "v", "error"]);
        assert_eq!(t.to_csv_string().unwrap(), "p,v,error\n1,2,\n2,NaN,calibration failed\n");
        assert_eq!(t.values("v").unwrap()[0], 2.0);
    }

    #[test]
    fn write_and_manifest() {
        let dir = tempfile::tempdir().unwrap();
        let mut t = Table::new("zeta", &["w"]);
        t.push(vec![7.0.into()]).unwrap();
        let p = t.write(dir.path()).unwrap();
        assert_eq!(std::fs::read_to_string(p).unwrap(), "w\n7\n");
        let m = RunManifest {
            config: "c.toml".into(),
            experiment: "fig2".into(),
            out_dir: dir.path().display().to_string(),
            seed: 3,
            version: "0.1.0".into(),
            timestamp: "2026-01-01T00:00:00Z".into(),
            files: vec!["zeta.csv".into()],
        };
        let p = m.write(dir.path()).unwrap();
        let back: RunManifest = toml::from_str(&std::fs::read_to_string(p).unwrap()).unwrap();
        assert_eq!(back, m);
    }
}
