//! Orchestration, manifests and reports for the `ssns` binary.

pub mod battery;
pub mod commands;
pub mod manifest;
pub mod report;
pub mod schema;

pub use commands::{run, Command, Options, EXIT_PASS, EXIT_USAGE, EXIT_VIOLATION};
pub use manifest::{CheckResult, RunManifest, Violation};
pub use report::emit_report;
