//! Run manifest and per-check records.

use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

/// Where a check first failed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    /// Sample time, if the check is time-resolved.
    pub time: Option<f64>,
    pub margin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Smallest margin seen; `None` when nothing was evaluated.
    pub min_margin: Option<f64>,
    pub first_violation: Option<Violation>,
    pub detail: String,
}

impl CheckResult {
    pub fn new(name: impl Into<String>, margins: &[(Option<f64>, f64)], tolerance: f64, detail: impl Into<String>) -> Self {
        let min_margin = margins.iter().map(|m| m.1).reduce(f64::min).filter(|m| m.is_finite() || *m < 0.0);
        let first_violation = margins
            .iter()
            .find(|(_, m)| m.is_nan() || *m < -tolerance)
            .map(|&(time, margin)| Violation { time, margin });
        Self {
            name: name.into(),
            passed: first_violation.is_none(),
            min_margin,
            first_violation,
            detail: detail.into(),
        }
    }

    /// A pass/fail check without a meaningful margin.
    pub fn flag(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            min_margin: None,
            first_violation: (!passed).then_some(Violation { time: None, margin: -1.0 }),
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub config: Option<String>,
    pub seed: u64,
    pub started_unix_s: f64,
    pub finished_unix_s: f64,
    pub outputs: Vec<String>,
    pub samples: usize,
    pub checks: Vec<CheckResult>,
    pub passed: bool,
    pub exit_code: i32,
    pub error: Option<String>,
}

pub fn unix_now() -> f64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0)
}

impl RunManifest {
    pub fn start(subcommand: &str) -> Self {
        Self {
            schema_version: MANIFEST_SCHEMA_VERSION,
            tool: "ssns".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            config: None,
            seed: 0,
            started_unix_s: unix_now(),
            finished_unix_s: 0.0,
            outputs: Vec::new(),
            samples: 0,
            checks: Vec::new(),
            passed: false,
            exit_code: 1,
            error: None,
        }
    }

    /// Roll the checks up into `passed` and `exit_code`.
    pub fn finish(&mut self, error: Option<(i32, String)>) {
        self.finished_unix_s = unix_now();
        self.outputs.sort();
        self.outputs.dedup();
        let checks_pass = self.checks.iter().all(|c| c.passed);
        match error {
            Some((code, message)) => {
                self.exit_code = code;
                self.error = Some(message);
                self.passed = false;
            }
            None => {
                self.passed = checks_pass;
                self.exit_code = if checks_pass { 0 } else { 2 };
            }
        }
    }

    pub fn first_failure(&self) -> Option<&CheckResult> {
        self.checks.iter().find(|c| !c.passed)
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }
}
