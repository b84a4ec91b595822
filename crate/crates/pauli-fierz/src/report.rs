//! Structured run reports and deterministic file output.
//!
//! Every assertion a command makes is recorded as a [`CheckRecord`] carrying
//! both the measured value and the budget it was judged against. Data files
//! are written atomically (temp file, then rename) and all floating-point
//! formatting is fixed-width scientific, so identical configurations and
//! seeds produce byte-identical CSV/JSON artifacts. Wall-clock timings go to
//! the console only, never into the files.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::Serialize;

use crate::error::Result;

/// One verified assertion: what was measured, the budget it had to meet,
/// and whether it did.
#[derive(Debug, Clone, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub measured: f64,
    pub budget: f64,
    pub passed: bool,
    pub detail: String,
}

/// Structured outcome of one command invocation.
#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: String,
    pub crate_version: String,
    pub seed: u64,
    /// Canonical TOML echo of the effective configuration.
    pub config_echo: String,
    pub checks: Vec<CheckRecord>,
    /// Names of the files written, relative to the output directory.
    pub outputs: Vec<String>,
    pub notes: Vec<String>,
    pub passed: bool,
}

impl RunReport {
    pub fn new(command: &str, seed: u64, config_echo: String) -> Self {
        RunReport {
            command: command.to_string(),
            crate_version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            config_echo,
            checks: Vec::new(),
            outputs: Vec::new(),
            notes: Vec::new(),
            passed: true,
        }
    }

    /// Record a check; the report fails when any check fails.
    pub fn check(&mut self, name: &str, measured: f64, budget: f64, detail: String) -> bool {
        let passed = measured <= budget;
        self.checks.push(CheckRecord {
            name: name.to_string(),
            measured,
            budget,
            passed,
            detail,
        });
        self.passed &= passed;
        passed
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.notes.push(text.into());
    }

    pub fn record_output(&mut self, name: &str) {
        self.outputs.push(name.to_string());
    }

    pub fn failed_checks(&self) -> Vec<&CheckRecord> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    /// Human-readable summary, one pass/fail line per check.
    pub fn render_text(&self) -> String {
        let mut out = String::new();
        writeln!(out, "== {} (seed {}) ==", self.command, self.seed).unwrap();
        for c in &self.checks {
            writeln!(
                out,
                "[{}] {:<44} measured {:>12.5e}  budget {:>12.5e}  {}",
                if c.passed { "PASS" } else { "FAIL" },
                c.name,
                c.measured,
                c.budget,
                c.detail
            )
            .unwrap();
        }
        for n in &self.notes {
            writeln!(out, "note: {n}").unwrap();
        }
        for o in &self.outputs {
            writeln!(out, "wrote: {o}").unwrap();
        }
        writeln!(
            out,
            "result: {} ({} checks, {} failed)",
            if self.passed { "PASS" } else { "FAIL" },
            self.checks.len(),
            self.failed_checks().len()
        )
        .unwrap();
        out
    }

    /// Serialize the report as `report.json` in the output directory.
    pub fn write_json(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("report.json");
        let text = serde_json::to_string_pretty(self).expect("report serialization");
        atomic_write(&path, text.as_bytes())?;
        Ok(path)
    }
}

/// Write-temp-then-rename; single-writer atomic replacement.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Fixed-width scientific float formatting shared by every data file.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.17e}")
}

pub fn fmt_complex(z: Complex64) -> String {
    format!("{},{}", fmt_f64(z.re), fmt_f64(z.im))
}

/// Serde-friendly complex number for JSON artifacts.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct JsonComplex {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for JsonComplex {
    fn from(z: Complex64) -> Self {
        JsonComplex { re: z.re, im: z.im }
    }
}
