use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::ExperimentConfig;
use crate::CliError;

/// Header plus numeric rows, written as comma-separated text.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn all_finite(&self) -> bool {
        self.rows.iter().flatten().all(|v| v.is_finite())
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(path)
            .map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let io = |e: csv::Error| CliError::Io(format!("{}: {e}", path.display()));
        w.write_record(&self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(|&v| format_number(v))).map_err(io)?;
        }
        w.flush().map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }
}

/// Shortest round-trip decimal; scientific notation outside `[1e-4, 1e15)`.
pub fn format_number(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        v.to_string()
    } else {
        format!("{v:e}")
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Checks(pub Vec<Check>);

impl Checks {
    pub fn record(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        self.0.push(Check { name: name.into(), passed, detail: detail.into() });
    }

    /// Records `value <= bound`.
    pub fn at_most(&mut self, name: &str, value: f64, bound: f64) {
        self.record(name, value <= bound, format!("{value:e} <= {bound:e}"));
    }

    pub fn failures(&self) -> usize {
        self.0.iter().filter(|c| !c.passed).count()
    }
}

/// Everything a subcommand produced, before it is written.
#[derive(Clone, Debug)]
pub struct Outcome {
    pub config: ExperimentConfig,
    /// Main table first; extra tables carry a file-name suffix.
    pub tables: Vec<(Option<&'static str>, Table)>,
    pub metrics: Value,
    pub checks: Checks,
}

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    version: &'a str,
    config: &'a ExperimentConfig,
    files: Vec<String>,
    metrics: &'a Value,
    invariants: &'a [Check],
    passed: bool,
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn table_path(out: &Path, suffix: Option<&str>) -> PathBuf {
    match suffix {
        None => out.to_path_buf(),
        Some(s) => {
            let stem = out.file_stem().map(|s| s.to_string_lossy()).unwrap_or_default();
            let ext = out.extension().map(|e| e.to_string_lossy()).unwrap_or("csv".into());
            out.with_file_name(format!("{stem}_{s}.{ext}"))
        }
    }
}

/// Writes every table and the JSON sidecar; returns the written paths.
pub fn write_outcome(command: &str, out: &Path, outcome: &Outcome) -> Result<Vec<PathBuf>, CliError> {
    if let Some(dir) = out.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    }
    let mut written = Vec::new();
    for (suffix, table) in &outcome.tables {
        let path = table_path(out, *suffix);
        table.write(&path)?;
        written.push(path);
    }
    let sidecar = Sidecar {
        command,
        version: cavfb::VERSION,
        config: &outcome.config,
        files: written
            .iter()
            .map(|p| p.file_name().unwrap_or_default().to_string_lossy().into_owned())
            .collect(),
        metrics: &outcome.metrics,
        invariants: &outcome.checks.0,
        passed: outcome.checks.failures() == 0,
    };
    let mut text = serde_json::to_string_pretty(&sidecar).map_err(|e| CliError::Io(e.to_string()))?;
    text.push('\n');
    let path = sidecar_path(out);
    std::fs::write(&path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    written.push(path);
    Ok(written)
}
