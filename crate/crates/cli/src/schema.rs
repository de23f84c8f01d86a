//! Output schema shipped in `schema/outputs.json`, and drift detection
//! against the headers the code actually writes.

use std::collections::BTreeSet;

use serde_json::Value;
use ssns_core::criteria::CERTIFICATE_CSV_HEADER;
use ssns_core::lorentz::SPLIT_CSV_HEADER;
use ssns_core::solver::TRAJECTORY_CSV_HEADER;

use crate::manifest::{CheckResult, RunManifest};

pub const SCHEMA_TEXT: &str = include_str!("../schema/outputs.json");

/// CSV kinds and the header each one is written with.
pub const CSV_HEADERS: [(&str, &str); 3] = [
    ("trajectory", TRAJECTORY_CSV_HEADER),
    ("certificate", CERTIFICATE_CSV_HEADER),
    ("split", SPLIT_CSV_HEADER),
];

fn names(list: &Value) -> Option<Vec<String>> {
    list.as_array()?
        .iter()
        .map(|c| {
            let name = c.get("name")?.as_str()?;
            let described = c.get("description")?.as_str().is_some_and(|d| !d.trim().is_empty());
            described.then(|| name.to_string())
        })
        .collect()
}

/// Documented columns of a CSV kind, in order.
pub fn documented_columns(schema: &Value, kind: &str) -> Option<Vec<String>> {
    names(schema.get("csv")?.get(kind)?.get("columns")?)
}

/// Compare a schema document against the code. One check per output kind.
pub fn drift_checks(schema_text: &str) -> Vec<CheckResult> {
    let schema: Value = match serde_json::from_str(schema_text) {
        Ok(v) => v,
        Err(e) => return vec![CheckResult::flag("schema parses", false, e.to_string())],
    };
    let mut out = Vec::new();
    for (kind, header) in CSV_HEADERS {
        let written: Vec<String> = header.split(',').map(str::to_string).collect();
        let check = match documented_columns(&schema, kind) {
            Some(doc) if doc == written => CheckResult::flag(format!("schema {kind} columns"), true, ""),
            Some(doc) => CheckResult::flag(
                format!("schema {kind} columns"),
                false,
                format!("documented [{}] but written [{}]", doc.join(","), header),
            ),
            None => CheckResult::flag(format!("schema {kind} columns"), false, "missing or undocumented entry"),
        };
        out.push(check);
    }
    let documented: Option<BTreeSet<String>> = schema
        .get("manifest")
        .and_then(|m| m.get("fields"))
        .and_then(names)
        .map(|v| v.into_iter().collect());
    let written: BTreeSet<String> = match serde_json::to_value(RunManifest::start("selftest")) {
        Ok(Value::Object(map)) => map.keys().cloned().collect(),
        _ => BTreeSet::new(),
    };
    out.push(match documented {
        Some(doc) if doc == written => CheckResult::flag("schema manifest fields", true, ""),
        Some(doc) => CheckResult::flag(
            "schema manifest fields",
            false,
            format!(
                "undocumented {:?}, stale {:?}",
                written.difference(&doc).collect::<Vec<_>>(),
                doc.difference(&written).collect::<Vec<_>>()
            ),
        ),
        None => CheckResult::flag("schema manifest fields", false, "missing or undocumented entry"),
    });
    let version_ok = schema.get("schema_version").and_then(Value::as_u64)
        == Some(crate::manifest::MANIFEST_SCHEMA_VERSION as u64);
    out.push(CheckResult::flag("schema version", version_ok, ""));
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_schema_matches_code() {
        for c in drift_checks(SCHEMA_TEXT) {
            assert!(c.passed, "{}: {}", c.name, c.detail);
        }
    }

    #[test]
    fn renamed_column_is_drift() {
        let edited = SCHEMA_TEXT.replacen("\"max_speed\"", "\"peak_speed\"", 1);
        let failed: Vec<_> = drift_checks(&edited).into_iter().filter(|c| !c.passed).collect();
        assert_eq!(failed.len(), 1);
        assert_eq!(failed[0].name, "schema trajectory columns");
    }

    #[test]
    fn missing_manifest_field_is_drift() {
        let edited = SCHEMA_TEXT.replacen("{ \"name\": \"seed\", \"description\": \"effective seed\" },", "", 1);
        let failed: Vec<_> = drift_checks(&edited).into_iter().filter(|c| !c.passed).collect();
        assert_eq!(failed.len(), 1, "{failed:?}");
        assert!(failed[0].detail.contains("seed"));
    }

    #[test]
    fn blank_description_is_drift() {
        let edited = SCHEMA_TEXT.replacen("\"sample time\"", "\"\"", 1);
        assert!(drift_checks(&edited).iter().any(|c| !c.passed));
    }
}
