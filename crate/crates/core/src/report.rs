//! Run reports: named metrics, pass/fail checks and CSV trial tables.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::Result;

/// One pass/fail assertion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), passed, detail: detail.into() }
    }

    /// `value ≤ bound`.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value <= bound, format!("{value} <= {bound}"))
    }

    /// `value ≥ bound`.
    pub fn at_least(name: impl Into<String>, value: f64, bound: f64) -> Self {
        Self::new(name, value >= bound, format!("{value} >= {bound}"))
    }
}

/// Rows for a CSV file.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Named metrics, checks and trial tables produced by one command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub config: serde_json::Value,
    pub metrics: BTreeMap<String, f64>,
    pub assertions: Vec<Check>,
    pub calibration: BTreeMap<String, serde_json::Value>,
    pub wall_time_s: f64,
    #[serde(skip)]
    pub tables: BTreeMap<String, Table>,
}

impl Report {
    pub fn new(command: impl Into<String>, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            config,
            metrics: BTreeMap::new(),
            assertions: Vec::new(),
            calibration: BTreeMap::new(),
            wall_time_s: 0.0,
            tables: BTreeMap::new(),
        }
    }

    pub fn metric(&mut self, name: impl Into<String>, value: f64) {
        self.metrics.insert(name.into(), value);
    }

    pub fn check(&mut self, check: Check) {
        self.assertions.push(check);
    }

    pub fn passed(&self) -> bool {
        self.assertions.iter().all(|c| c.passed)
    }

    /// The metric block alone, serialized; identical across reruns of the
    /// same configuration.
    pub fn metrics_json(&self) -> String {
        serde_json::to_string(&self.metrics).expect("metrics serialize")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Writes `report.json` and one CSV per table into `dir`.
    pub fn write_to(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("report.json"), self.to_json())?;
        for (name, table) in &self.tables {
            table.write_csv(&dir.join(format!("{name}.csv")))?;
        }
        Ok(())
    }
}
