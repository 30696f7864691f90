//! Verdicts and file output.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::Command;
use crate::RunError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Comparison {
    /// `|observed - target| <= tolerance`
    Within,
    /// `observed <= target + tolerance`
    AtMost,
    /// `observed >= target - tolerance`
    AtLeast,
}

/// One pass/fail verdict. A NaN observation always fails.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub observed: f64,
    pub target: f64,
    pub tolerance: f64,
    pub comparison: Comparison,
    pub pass: bool,
}

impl Check {
    pub fn new(name: impl Into<String>, observed: f64, target: f64, tolerance: f64, comparison: Comparison) -> Self {
        let pass = match comparison {
            Comparison::Within => (observed - target).abs() <= tolerance,
            Comparison::AtMost => observed <= target + tolerance,
            Comparison::AtLeast => observed >= target - tolerance,
        };
        Self {
            name: name.into(),
            observed,
            target,
            tolerance,
            comparison,
            pass,
        }
    }

    pub fn within(name: impl Into<String>, observed: f64, target: f64, tolerance: f64) -> Self {
        Self::new(name, observed, target, tolerance, Comparison::Within)
    }

    pub fn at_most(name: impl Into<String>, observed: f64, bound: f64) -> Self {
        Self::new(name, observed, bound, 0.0, Comparison::AtMost)
    }

    /// `lo <= observed <= hi`, stored as a symmetric tolerance around the midpoint.
    pub fn in_range(name: impl Into<String>, observed: f64, lo: f64, hi: f64) -> Self {
        let mut check = Self::within(name, observed, 0.5 * (lo + hi), 0.5 * (hi - lo));
        // the midpoint form can round the endpoints out of the range
        check.pass = (lo..=hi).contains(&observed);
        check
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub command: &'static str,
    pub seed: u64,
    /// The config as given, with the effective seed.
    pub config: Value,
    /// Every parameter after defaults were applied.
    pub resolved: Command,
    pub pass: bool,
    pub checks: Vec<Check>,
    /// Output files, relative to the output directory.
    pub files: Vec<String>,
    pub details: Value,
}

impl ExperimentReport {
    pub fn failed_checks(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.pass)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "NaN".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{x:.16e}")
    }
}

fn format_cell(c: &Cell) -> String {
    match c {
        Cell::Float(x) => format_float(*x),
        Cell::Int(i) => i.to_string(),
        Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
        Cell::Text(s) => s.clone(),
    }
}

/// Writes artifacts into one directory. Every CSV starts with `#` lines
/// carrying the command, seed and config echo, followed by a header row.
pub struct Artifacts {
    dir: PathBuf,
    preamble: String,
    files: Vec<String>,
}

impl Artifacts {
    pub fn new(dir: &Path, command: &str, seed: u64, echo: &Value) -> Result<Self, RunError> {
        fs::create_dir_all(dir).map_err(|e| RunError::io(dir, e))?;
        let preamble = format!("# command: {command}\n# seed: {seed}\n# config: {echo}\n");
        Ok(Self {
            dir: dir.to_path_buf(),
            preamble,
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_csv(&mut self, name: &str, header: &[&str], rows: &[Vec<Cell>]) -> Result<(), RunError> {
        let mut text = self.preamble.clone();
        text.push_str(&header.join(","));
        text.push('\n');
        for row in rows {
            debug_assert_eq!(row.len(), header.len());
            let cells: Vec<String> = row.iter().map(format_cell).collect();
            text.push_str(&cells.join(","));
            text.push('\n');
        }
        self.write(name, text.as_bytes())
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<(), RunError> {
        assert!(!self.files.iter().any(|f| f == name), "duplicate artifact {name}");
        let path = self.dir.join(name);
        let mut f = fs::File::create(&path).map_err(|e| RunError::io(&path, e))?;
        f.write_all(bytes).map_err(|e| RunError::io(&path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    pub fn into_files(self) -> Vec<String> {
        self.files
    }
}

/// `0.05` → `0.05`, `0.001` → `0.001`; safe for file names.
pub fn tag(x: f64) -> String {
    format!("{x}")
}
