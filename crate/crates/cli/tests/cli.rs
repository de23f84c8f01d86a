use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const SMALL_TG: &str = "n = 16\nnu = 0.1\ndt = 0.002\nt_end = 0.1\nsample_every = 5\ninit = taylor_green\n";
const SMALL_RANDOM: &str =
    "n = 16\nnu = 0.1\ndt = 0.002\nt_end = 0.1\nsample_every = 5\ninit = random_div_free\nseed = 3\n";

fn ssns(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ssns"));
    cmd.args(args).arg("--quiet");
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let p = dir.join("run.cfg");
    fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn manifest(dir: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap()
}

fn without_wall_times(mut m: Value) -> Value {
    let obj = m.as_object_mut().unwrap();
    obj.remove("started_unix_s");
    obj.remove("finished_unix_s");
    m
}

fn check_names(m: &Value, passed: bool) -> Vec<String> {
    m["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| c["passed"].as_bool() == Some(passed))
        .map(|c| c["name"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn simulate_with_zero_horizon_writes_one_row() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "n = 8\nnu = 0.1\ndt = 0.01\nt_end = 0\ninit = taylor_green\n");
    let out = tmp.path().join("out");
    let o = ssns(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2, "{csv}");
    let m = manifest(&out);
    assert_eq!(m["samples"], 1);
    assert_eq!(m["exit_code"], 0);
}

#[test]
fn simulate_writes_snapshots_and_lists_outputs() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_TG);
    let out = tmp.path().join("out");
    let o = ssns(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    let outputs: Vec<&str> = m["outputs"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    assert!(outputs.contains(&"trajectory.csv"));
    let snaps: Vec<_> = outputs.iter().filter(|o| o.starts_with("snapshots/")).collect();
    assert_eq!(snaps.len(), m["samples"].as_u64().unwrap() as usize);
    for s in snaps {
        assert!(out.join(s).is_file(), "{s}");
    }
    assert!(check_names(&m, false).is_empty());
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("PASS"));
}

#[test]
fn certify_zero_field_passes() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "n = 8\nnu = 0.1\ndt = 0.01\nt_end = 0.05\ninit = zero\n");
    let out = tmp.path().join("out");
    let o = ssns(&["certify", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert!(check_names(&m, true).len() > 10);
}

#[test]
fn certify_writes_certificates_and_passes_on_smooth_flow() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_TG);
    let out = tmp.path().join("out");
    let o = ssns(&["certify", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{:?}", check_names(&manifest(&out), false));
    let certs = fs::read_dir(out.join("certificates")).unwrap().count();
    assert_eq!(certs, 36);
}

#[test]
fn certify_fault_factor_fails_with_violation() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_TG);
    let out = tmp.path().join("out");
    let o = ssns(
        &["certify", "--config", &cfg, "--out", out.to_str().unwrap(), "--fault-factor", "0.5"],
        &[],
    );
    assert_eq!(o.status.code(), Some(2));
    let m = manifest(&out);
    assert!(!check_names(&m, false).is_empty());
    let summary = fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("first violation:"), "{summary}");
}

#[test]
fn certify_without_snapshots_is_a_config_error() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL_TG}snapshot_every = 0\n"));
    let out = tmp.path().join("out");
    let o = ssns(&["certify", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("snapshot_every"));
}

#[test]
fn verify_lorentz_passes_and_fault_names_failing_check() {
    let tmp = TempDir::new().unwrap();
    let ok = tmp.path().join("ok");
    let o = ssns(&["verify-lorentz", "--out", ok.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0));
    assert!(fs::read_to_string(ok.join("split.csv")).unwrap().lines().count() > 1);

    let bad = tmp.path().join("bad");
    let o = ssns(&["verify-lorentz", "--out", bad.to_str().unwrap(), "--fault-factor", "0.5"], &[]);
    assert_eq!(o.status.code(), Some(2));
    let m = manifest(&bad);
    assert!(check_names(&m, false).contains(&"strong truncation bound".to_string()));
    let summary = fs::read_to_string(bad.join("summary.txt")).unwrap();
    assert!(summary.contains("first violation: "), "{summary}");
}

#[test]
fn bad_config_key_exits_one_and_names_key() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL_TG}viscosity = 2\n"));
    let out = tmp.path().join("out");
    let o = ssns(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("viscosity"));
    let m = manifest(&out);
    assert_eq!(m["exit_code"], 1);
    assert!(m["error"].as_str().unwrap().contains("viscosity"));
}

#[test]
fn invalid_value_and_missing_config_exit_one() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), &SMALL_TG.replace("n = 16", "n = 15"));
    let o = ssns(&["simulate", "--config", &cfg, "--out", tmp.path().join("a").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    let o = ssns(&["simulate", "--out", tmp.path().join("b").to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(1));
    let o = ssns(
        &["simulate", "--config", "/nonexistent/run.cfg", "--out", tmp.path().join("c").to_str().unwrap()],
        &[],
    );
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn unknown_flag_or_subcommand_exits_one() {
    assert_eq!(ssns(&["simulate", "--bogus"], &[]).status.code(), Some(1));
    assert_eq!(ssns(&["transmogrify"], &[]).status.code(), Some(1));
    assert_eq!(ssns(&["verify-lorentz", "--fault-factor", "0"], &[]).status.code(), Some(1));
}

#[test]
fn help_exits_zero() {
    let o = Command::new(env!("CARGO_BIN_EXE_ssns")).arg("--help").output().unwrap();
    assert_eq!(o.status.code(), Some(0));
    let text = String::from_utf8_lossy(&o.stdout);
    for sub in ["simulate", "certify", "verify-lorentz", "selftest"] {
        assert!(text.contains(sub), "{text}");
    }
}

#[test]
fn cfl_violation_exits_two_and_still_writes_manifest() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "n = 16\nnu = 0.01\ndt = 1.0\nt_end = 2\ninit = taylor_green\n");
    let out = tmp.path().join("out");
    let o = ssns(&["simulate", "--config", &cfg, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(2), "{}", String::from_utf8_lossy(&o.stderr));
    let m = manifest(&out);
    assert_eq!(m["exit_code"], 2);
    assert_eq!(m["passed"], false);
    assert!(m["error"].is_string());
    assert!(out.join("summary.txt").is_file());
}

#[test]
fn runs_are_deterministic_apart_from_wall_times() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RANDOM);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    for dir in [&a, &b] {
        let o = ssns(&["simulate", "--config", &cfg, "--out", dir.to_str().unwrap()], &[]);
        assert_eq!(o.status.code(), Some(0));
    }
    assert_eq!(without_wall_times(manifest(&a)), without_wall_times(manifest(&b)));
    assert_eq!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(b.join("trajectory.csv")).unwrap());
    assert_eq!(
        fs::read(a.join("snapshots/u_00001.bin")).unwrap(),
        fs::read(b.join("snapshots/u_00001.bin")).unwrap()
    );
}

#[test]
fn thread_count_does_not_change_results() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RANDOM);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let o = ssns(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap()], &[("SSNS_THREADS", "1")]);
    assert_eq!(o.status.code(), Some(0));
    let o = ssns(&["simulate", "--config", &cfg, "--out", b.to_str().unwrap()], &[("SSNS_THREADS", "3")]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(b.join("trajectory.csv")).unwrap());

    let o = ssns(&["verify-lorentz", "--out", tmp.path().join("c").to_str().unwrap()], &[("SSNS_THREADS", "many")]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("SSNS_THREADS"));
}

#[test]
fn seed_flag_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), SMALL_RANDOM);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    ssns(&["simulate", "--config", &cfg, "--out", a.to_str().unwrap()], &[]);
    let o = ssns(&["simulate", "--config", &cfg, "--out", b.to_str().unwrap(), "--seed", "11"], &[]);
    assert_eq!(o.status.code(), Some(0));
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma["seed"], 3);
    assert_eq!(mb["seed"], 11);
    assert!(mb["config"].as_str().unwrap().contains("seed = 11"));
    assert_ne!(fs::read(a.join("trajectory.csv")).unwrap(), fs::read(b.join("trajectory.csv")).unwrap());
}

#[test]
fn manifest_matches_shipped_schema() {
    let schema: Value = serde_json::from_str(include_str!("../schema/outputs.json")).unwrap();
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    ssns(&["verify-lorentz", "--out", out.to_str().unwrap()], &[]);
    let m = manifest(&out);
    let mut documented: Vec<&str> = schema["manifest"]["fields"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| f["name"].as_str().unwrap())
        .collect();
    let mut written: Vec<&str> = m.as_object().unwrap().keys().map(String::as_str).collect();
    documented.sort();
    written.sort();
    assert_eq!(documented, written);
}

#[test]
fn selftest_passes() {
    let tmp = TempDir::new().unwrap();
    let out = tmp.path().join("out");
    let o = ssns(&["selftest", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(o.status.code(), Some(0), "{:?}", check_names(&manifest(&out), false));
}
