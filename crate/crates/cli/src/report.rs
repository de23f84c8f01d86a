//! Human-readable summary of a run.

use std::fmt::Write;

use crate::manifest::RunManifest;

fn number(x: Option<f64>) -> String {
    match x {
        Some(v) => format!("{v:.3e}"),
        None => "-".into(),
    }
}

/// Summary text and the machine-readable JSON for a finished manifest.
pub fn emit_report(m: &RunManifest) -> (String, String) {
    let mut s = String::new();
    let status = if m.passed { "PASS" } else { "FAIL" };
    let _ = writeln!(s, "ssns {} {}: {status} (exit {})", m.version, m.subcommand, m.exit_code);
    if let Some(e) = &m.error {
        let _ = writeln!(s, "error: {e}");
    }
    if m.samples == 0 {
        let _ = writeln!(s, "trajectory: no samples");
    } else {
        let _ = writeln!(s, "trajectory: {} samples", m.samples);
    }
    if !m.checks.is_empty() {
        let width = m.checks.iter().map(|c| c.name.len()).max().unwrap_or(0).max(5);
        let _ = writeln!(s, "{:<width$}  {:<4}  {:>10}  detail", "check", "ok", "min margin");
        for c in &m.checks {
            let _ = writeln!(
                s,
                "{:<width$}  {:<4}  {:>10}  {}",
                c.name,
                if c.passed { "pass" } else { "FAIL" },
                number(c.min_margin),
                c.detail
            );
        }
    }
    if let Some(c) = m.first_failure() {
        let v = c.first_violation.as_ref();
        let _ = writeln!(
            s,
            "first violation: {} at t={} margin={}",
            c.name,
            v.and_then(|v| v.time).map(|t| t.to_string()).unwrap_or_else(|| "-".into()),
            number(v.map(|v| v.margin))
        );
    }
    (s, m.to_json())
}
