use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ncorlicz::{AlgElement, Check};
use serde::Serialize;
use serde_json::Value;

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioReport {
    pub scenario: String,
    pub seed: u64,
    pub passed: bool,
    pub checks: Vec<Check>,
    /// Quantities that are recorded but never affect the exit status.
    pub reported: serde_json::Map<String, Value>,
    pub artifacts: Vec<String>,
}

impl ScenarioReport {
    pub fn new(scenario: &str, seed: u64) -> Self {
        ScenarioReport {
            scenario: scenario.to_string(),
            seed,
            passed: true,
            checks: Vec::new(),
            reported: serde_json::Map::new(),
            artifacts: Vec::new(),
        }
    }

    pub fn check(&mut self, check: Check) {
        self.checks.push(check);
    }

    pub fn prefixed(&mut self, prefix: &str, checks: impl IntoIterator<Item = Check>) {
        for c in checks {
            self.checks.push(Check {
                name: format!("{prefix}.{}", c.name),
                ..c
            });
        }
    }

    pub fn report(&mut self, key: &str, value: impl Serialize) {
        self.reported
            .insert(key.to_string(), serde_json::to_value(value).unwrap_or(Value::Null));
    }

    pub fn finish(mut self) -> Self {
        self.passed = self.checks.iter().all(|c| c.passed);
        self
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub command: String,
    pub passed: bool,
    pub scenarios: Vec<ScenarioReport>,
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, bytes).with_context(|| format!("writing {}", path.display()))?;
    fs::rename(&tmp, path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn write_csv(path: &Path, header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(header)?;
    for row in rows {
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| anyhow::anyhow!("csv buffer: {e}"))?;
    write_atomic(path, &bytes)
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Blocks as nested `[re, im]` pairs, row-major.
pub fn element_json(x: &AlgElement) -> Value {
    Value::Array(
        x.blocks()
            .iter()
            .map(|b| {
                Value::Array(
                    (0..b.nrows())
                        .map(|i| {
                            Value::Array(
                                (0..b.ncols())
                                    .map(|j| serde_json::json!([b[(i, j)].re, b[(i, j)].im]))
                                    .collect(),
                            )
                        })
                        .collect(),
                )
            })
            .collect(),
    )
}
