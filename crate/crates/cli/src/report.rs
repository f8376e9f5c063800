//! JSON run reports and CSV traces.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use serde_json::Value;

use crate::config::RunConfig;
use crate::error::CliResult;

pub const REPORT_FILE: &str = "report.json";

/// One CSV field.
#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    F(f64),
    B(bool),
    I(i64),
    S(String),
}

impl Cell {
    /// Floats carry 17 significant digits so that they round-trip exactly.
    pub fn render(&self) -> String {
        match self {
            Cell::F(x) => format!("{x:.16e}"),
            Cell::B(b) => b.to_string(),
            Cell::I(i) => i.to_string(),
            Cell::S(s) => s.clone(),
        }
    }
}

/// A plot-ready table written next to the report.
#[derive(Clone, Debug, PartialEq)]
pub struct Trace {
    pub name: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Trace {
    pub fn new(name: impl Into<String>, header: Vec<&'static str>) -> Self {
        Self {
            name: name.into(),
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn file_name(&self) -> String {
        format!("{}.csv", self.name)
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.header.iter().position(|h| *h == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

/// What a command produced, before it is written out.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    /// `None` for purely descriptive commands.
    pub verdict: Option<bool>,
    pub result: Value,
    pub traces: Vec<Trace>,
}

/// Timing and host details. Excluded when comparing reports for
/// determinism.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunInfo {
    pub timestamp_unix: u64,
    pub wall_time_s: f64,
    pub jobs: usize,
}

impl RunInfo {
    pub fn new(wall: Duration, jobs: usize) -> Self {
        Self {
            timestamp_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map_or(0, |d| d.as_secs()),
            wall_time_s: wall.as_secs_f64(),
            jobs,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RunReport {
    pub command: String,
    pub engine_version: &'static str,
    pub config: RunConfig,
    pub verdict: Option<&'static str>,
    pub result: Value,
    pub traces: Vec<String>,
    pub run_info: RunInfo,
}

impl RunReport {
    pub fn new(command: &str, config: &RunConfig, outcome: &Outcome, run_info: RunInfo) -> Self {
        Self {
            command: command.to_string(),
            engine_version: env!("CARGO_PKG_VERSION"),
            config: config.clone(),
            verdict: outcome.verdict.map(|v| if v { "pass" } else { "fail" }),
            result: outcome.result.clone(),
            traces: outcome.traces.iter().map(Trace::file_name).collect(),
            run_info,
        }
    }
}

/// Writes `report.json` and every trace into `dir`, returning the report path.
pub fn write_all(dir: &Path, report: &RunReport, traces: &[Trace]) -> CliResult<PathBuf> {
    fs::create_dir_all(dir)?;
    for t in traces {
        t.write(&dir.join(t.file_name()))?;
    }
    let path = dir.join(REPORT_FILE);
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    fs::write(&path, text)?;
    Ok(path)
}

/// The report with `run_info` removed, serialized canonically.
pub fn deterministic_view(report_json: &str) -> CliResult<String> {
    let mut v: Value = serde_json::from_str(report_json)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("run_info");
    }
    Ok(serde_json::to_string_pretty(&v)?)
}
