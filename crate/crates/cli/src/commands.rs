//! Subcommand orchestration. Every run writes `manifest.json` and
//! `summary.txt`, including runs that fail.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use ssns_core::criteria::{
    certify, certify_weak, endpoint_monitor, weak_convergence_monitor, Certificate, CutoffRule, Diagnostics, Variant,
    MARGIN_TOLERANCE,
};
use ssns_core::fields::{isometry_check, make_field, make_velocity, sobolev_check, sobolev_constant, Field};
use ssns_core::snapshot::{read_snapshot, write_snapshot, SnapshotData};
use ssns_core::solver::{balance_checks, simulate, TrajectoryLog};
use ssns_core::{Error, Fft3, FieldKind, Grid, SolverConfig};

use crate::battery::lorentz_battery;
use crate::manifest::{CheckResult, RunManifest};
use crate::report::emit_report;
use crate::schema::{drift_checks, SCHEMA_TEXT};

pub const EXIT_PASS: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_VIOLATION: i32 = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Simulate,
    Certify,
    VerifyLorentz,
    Selftest,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Simulate => "simulate",
            Command::Certify => "certify",
            Command::VerifyLorentz => "verify-lorentz",
            Command::Selftest => "selftest",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Options {
    pub config: Option<PathBuf>,
    pub out: PathBuf,
    pub seed: Option<u64>,
    pub quiet: bool,
    /// Multiplies every certified bound; below 1 it must cause failures.
    pub fault_factor: f64,
}

impl Default for Options {
    fn default() -> Self {
        Self {
            config: None,
            out: PathBuf::from("ssns-out"),
            seed: None,
            quiet: false,
            fault_factor: 1.0,
        }
    }
}

/// Why a run stopped early.
#[derive(Debug, Clone, PartialEq)]
pub enum Failure {
    Usage(String),
    Violation(String),
}

impl Failure {
    fn code(&self) -> i32 {
        match self {
            Failure::Usage(_) => EXIT_USAGE,
            Failure::Violation(_) => EXIT_VIOLATION,
        }
    }

    fn message(self) -> String {
        match self {
            Failure::Usage(m) | Failure::Violation(m) => m,
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::BlowUp { .. } | Error::Cfl { .. } | Error::NonFinite(_) => Failure::Violation(e.to_string()),
            _ => Failure::Usage(e.to_string()),
        }
    }
}

fn io_failure(path: &Path, e: std::io::Error) -> Failure {
    Failure::Usage(format!("{}: {e}", path.display()))
}

/// Writes files under the output directory and records them.
struct Output<'a> {
    dir: &'a Path,
    manifest: &'a mut RunManifest,
}

impl Output<'_> {
    fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<(), Failure> {
        let path = self.dir.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| io_failure(parent, e))?;
        }
        fs::write(&path, bytes).map_err(|e| io_failure(&path, e))?;
        self.manifest.outputs.push(rel.to_string());
        Ok(())
    }
}

/// Run a subcommand and return its exit status.
pub fn run(command: Command, opts: &Options) -> i32 {
    let mut manifest = RunManifest::start(command.name());
    let result = fs::create_dir_all(&opts.out)
        .map_err(|e| io_failure(&opts.out, e))
        .and_then(|()| {
            let mut out = Output {
                dir: &opts.out,
                manifest: &mut manifest,
            };
            match command {
                Command::Simulate => run_simulate(&mut out, opts),
                Command::Certify => run_certify(&mut out, opts),
                Command::VerifyLorentz => run_verify_lorentz(&mut out, opts),
                Command::Selftest => run_selftest(&mut out, opts),
            }
        });
    manifest.finish(result.err().map(|f| (f.code(), f.message())));
    let (summary, json) = emit_report(&manifest);
    let written = fs::write(opts.out.join("manifest.json"), json)
        .and_then(|()| fs::write(opts.out.join("summary.txt"), &summary));
    if let Err(e) = written {
        eprintln!("ssns: cannot write manifest to {}: {e}", opts.out.display());
    }
    if let Some(err) = &manifest.error {
        eprintln!("ssns: {err}");
    }
    if !opts.quiet {
        print!("{summary}");
    }
    manifest.exit_code
}

fn load_config(out: &mut Output<'_>, opts: &Options) -> Result<SolverConfig, Failure> {
    let path = opts
        .config
        .as_ref()
        .ok_or_else(|| Failure::Usage("--config PATH is required".into()))?;
    let text = fs::read_to_string(path).map_err(|e| io_failure(path, e))?;
    let mut config = SolverConfig::parse(&text)?;
    if let Some(seed) = opts.seed {
        config.seed = seed;
    }
    out.manifest.seed = config.seed;
    out.manifest.config = Some(config.to_string());
    Ok(config)
}

fn write_trajectory(out: &mut Output<'_>, log: &TrajectoryLog) -> Result<(), Failure> {
    out.manifest.samples = log.samples.len();
    out.write("trajectory.csv", log.to_csv().as_bytes())
}

fn write_snapshots(out: &mut Output<'_>, log: &TrajectoryLog) -> Result<(), Failure> {
    let fft = Fft3::new(&log.grid);
    for (i, s) in log.snapshots.iter().enumerate() {
        let mut bytes = Vec::new();
        write_snapshot(&mut bytes, &SnapshotData::velocity(s.t, &s.u, &fft))?;
        out.write(&format!("snapshots/u_{i:05}.bin"), &bytes)?;
    }
    Ok(())
}

/// Energy monotonicity and the balance identities of a trajectory.
fn trajectory_checks(log: &TrajectoryLog) -> Result<Vec<CheckResult>, Failure> {
    let mut checks = Vec::new();
    let e0 = log.samples.first().map(|s| s.energy).unwrap_or(0.0);
    let scale = if e0 > 0.0 { e0 } else { 1.0 };
    let margins: Vec<_> = log
        .samples
        .windows(2)
        .map(|w| (Some(w[1].t), (w[0].energy - w[1].energy) / scale))
        .collect();
    checks.push(CheckResult::new("energy non-increasing", &margins, 1e-12, ""));
    if log.samples.len() < 3 {
        checks.push(CheckResult::flag(
            "balance identities",
            true,
            format!("not evaluated: {} samples, need 3", log.samples.len()),
        ));
        return Ok(checks);
    }
    for id in balance_checks(log, log.nu)?.identities {
        let margins: Vec<_> = id
            .residuals()
            .zip(&id.budget)
            .zip(&id.times)
            .map(|((r, b), t)| (Some(*t), 1.0 - r.abs() / b))
            .collect();
        checks.push(CheckResult::new(
            format!("{} balance", id.name),
            &margins,
            0.0,
            format!("margin = 1 - |residual|/budget, worst ratio {:.3e}", id.worst_ratio()),
        ));
    }
    Ok(checks)
}

fn run_simulate(out: &mut Output<'_>, opts: &Options) -> Result<(), Failure> {
    let config = load_config(out, opts)?;
    let log = simulate(&config)?;
    write_trajectory(out, &log)?;
    write_snapshots(out, &log)?;
    let checks = trajectory_checks(&log)?;
    out.manifest.checks.extend(checks);
    Ok(())
}

/// Strong and weak exponent choices per variant: `(p, q, q′)`.
pub const CERTIFICATE_EXPONENTS: [(Variant, f64, f64, f64); 6] = [
    (Variant::Velocity, 4.0, 6.0, 4.5),
    (Variant::Velocity, 3.0, 9.0, 6.0),
    (Variant::Strain, 2.0, 3.0, 2.0),
    (Variant::Strain, 4.0, 2.0, 1.8),
    (Variant::Vorticity, 2.0, 3.0, 2.0),
    (Variant::Vorticity, 4.0, 2.0, 1.8),
];

pub fn certificate_rules() -> [CutoffRule; 3] {
    [CutoffRule::AllInLq, CutoffRule::AllInLinf, CutoffRule::median()]
}

fn file_label(c: &Certificate) -> String {
    let rule = c.rule.replace(['(', ')', ','], "_").trim_end_matches('_').to_string();
    match c.kind {
        ssns_core::criteria::CertificateKind::Strong => format!("{}_p{}_q{}_{rule}", c.name(), c.p, c.q),
        ssns_core::criteria::CertificateKind::Weak { q_prime, .. } => {
            format!("{}_p{}_q{}_qp{}_{rule}", c.name(), c.p, c.q, q_prime)
        }
    }
}

fn certificate_check(c: &Certificate) -> CheckResult {
    let (m, ml) = (c.margins(), c.levelset_margins());
    let margins: Vec<_> = (0..c.times.len()).map(|i| (Some(c.times[i]), m[i].min(ml[i]))).collect();
    CheckResult::new(
        format!("{} certificate ({})", c.name(), file_label(c)),
        &margins,
        MARGIN_TOLERANCE,
        format!("cp = {}", c.constants.derivation.cp),
    )
}

/// Every certificate, endpoint monitor and the weak-convergence monitor.
fn diagnostics_checks(out: &mut Output<'_>, diag: &Diagnostics, fault: f64) -> Result<(), Failure> {
    let mut specs = Vec::new();
    for rule in certificate_rules() {
        for &(v, p, q, qp) in &CERTIFICATE_EXPONENTS {
            specs.push((v, p, q, None, rule.clone()));
            specs.push((v, p, q, Some(qp), rule.clone()));
        }
    }
    let certs: Vec<Certificate> = specs
        .par_iter()
        .map(|(v, p, q, qp, rule)| match qp {
            None => certify(diag, *v, *p, *q, rule),
            Some(qp) => certify_weak(diag, *v, *p, *q, *qp, rule),
        })
        .collect::<Result<_, _>>()?;
    for c in certs {
        let c = c.scaled(fault);
        out.write(&format!("certificates/{}.csv", file_label(&c)), c.to_csv().as_bytes())?;
        out.manifest.checks.push(certificate_check(&c));
    }

    let excess = diag.pointwise_strain_excess();
    out.manifest.checks.push(CheckResult::new(
        "pointwise strain inequality",
        &[(None, -excess)],
        0.0,
        "-4 det S <= 2 lambda2+ |S|^2 at every grid point",
    ));

    let rule = CutoffRule::Quantile(0.95);
    for v in Variant::ALL {
        let r = endpoint_monitor(diag, v, &rule)?;
        let margins: Vec<_> = r
            .checks
            .iter()
            .map(|(t, d, b, budget)| (Some(*t), 1.0 - (d - b) / budget))
            .collect();
        out.manifest.checks.push(CheckResult::new(
            format!("{v} endpoint"),
            &margins,
            0.0,
            format!(
                "threshold {} = {:.4}, {}/{} samples below threshold",
                r.formula,
                r.threshold,
                r.below_threshold.iter().filter(|b| **b).count(),
                r.times.len()
            ),
        ));
    }

    let h0 = diag.samples.first().map(|s| 0.25 * s.lambda2_plus.max_abs()).unwrap_or(0.0);
    if h0 > 0.0 {
        let r = weak_convergence_monitor(diag, &CutoffRule::Affine { base: h0, slope: h0 })?;
        let mut margins = Vec::new();
        for (_, norms, bounds) in &r.bounds {
            for i in 0..r.times.len() {
                margins.push((Some(r.times[i]), rel_margin(norms[i], bounds[i])));
            }
        }
        for (_, pair, bound) in &r.pairings {
            for i in 0..r.times.len() {
                margins.push((Some(r.times[i]), rel_margin(pair[i], bound[i])));
            }
        }
        out.manifest.checks.push(CheckResult::new(
            "weak-convergence bound",
            &margins,
            ssns_core::criteria::WEAK_CONVERGENCE_SLACK,
            format!("h(t) = {h0:.4e}(1+t)"),
        ));
    } else {
        out.manifest
            .checks
            .push(CheckResult::flag("weak-convergence bound", true, "not evaluated: lambda2+ vanishes at t=0"));
    }
    Ok(())
}

/// `(bound − value)/bound`, zero when both vanish.
fn rel_margin(value: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        (bound - value) / bound
    } else if value > 0.0 {
        f64::NEG_INFINITY
    } else {
        0.0
    }
}

fn run_certify(out: &mut Output<'_>, opts: &Options) -> Result<(), Failure> {
    let config = load_config(out, opts)?;
    if config.snapshot_every == 0 {
        return Err(Error::Config {
            key: "snapshot_every".into(),
            message: "certify needs velocity snapshots; use a value of at least 1".into(),
        }
        .into());
    }
    let log = simulate(&config)?;
    write_trajectory(out, &log)?;
    let checks = trajectory_checks(&log)?;
    out.manifest.checks.extend(checks);
    let diag = Diagnostics::from_log(&log);
    diagnostics_checks(out, &diag, opts.fault_factor)
}

fn run_verify_lorentz(out: &mut Output<'_>, opts: &Options) -> Result<(), Failure> {
    let seed = opts.seed.unwrap_or(0);
    out.manifest.seed = seed;
    let battery = lorentz_battery(seed, opts.fault_factor);
    out.write("split.csv", battery.split_csv.as_bytes())?;
    out.manifest.checks.extend(battery.checks);
    Ok(())
}

fn selftest_config(seed: u64) -> SolverConfig {
    SolverConfig {
        n: 16,
        nu: 0.1,
        dt: 2e-3,
        t_end: 0.2,
        sample_every: 5,
        init: "random_div_free".into(),
        seed,
        dealias: true,
        snapshot_every: 1,
    }
}

fn run_selftest(out: &mut Output<'_>, opts: &Options) -> Result<(), Failure> {
    let seed = opts.seed.unwrap_or(0);
    out.manifest.seed = seed;
    let checks = &mut out.manifest.checks;
    checks.extend(drift_checks(SCHEMA_TEXT));

    let g = Grid::periodic(16)?;
    let fft = Fft3::new(&g);
    let mut margins = Vec::new();
    for s in 0..5 {
        let u = make_velocity(&FieldKind::RandomDivFree { seed: seed + s, slope: -5.0 / 3.0, cutoff: 0 }, g, &fft)?;
        margins.push((None, 1e-10 - isometry_check(&u)?.deviation));
    }
    checks.push(CheckResult::new("gradient isometry", &margins, 0.0, "relative deviation, tol 1e-10"));

    let c = sobolev_constant();
    let mut margins = Vec::new();
    for i in 0..10 {
        let w = g.box_length() / (6.0 + i as f64);
        let center = [0.3 * i as f64, 1.0, 2.0 + 0.1 * i as f64];
        if let Field::Scalar(f) = make_field(&FieldKind::GaussianBump { center, width: w }, g, &fft)? {
            let r = sobolev_check(&f)?;
            margins.push((None, 1.0 - r.lhs_l6 / (c * r.grad_l2 * (1.0 + 1e-6))));
        }
    }
    checks.push(CheckResult::new("sharp Sobolev inequality", &margins, 0.0, "Gaussian bumps"));

    let mut snapshot_ok = true;
    let u = make_velocity(&FieldKind::TaylorGreen, g, &fft)?;
    let data = SnapshotData::velocity(0.5, &u, &fft);
    let mut bytes = Vec::new();
    write_snapshot(&mut bytes, &data)?;
    snapshot_ok &= read_snapshot(bytes.as_slice()).ok().as_ref() == Some(&data);
    let config = selftest_config(seed);
    snapshot_ok &= SolverConfig::parse(&config.to_string()).ok().as_ref() == Some(&config);
    checks.push(CheckResult::flag("snapshot and config round trip", snapshot_ok, ""));

    checks.extend(lorentz_battery(seed, opts.fault_factor).checks);

    let log = simulate(&config)?;
    let again = simulate(&config)?;
    out.manifest.samples = log.samples.len();
    out.manifest.checks.push(CheckResult::flag(
        "determinism",
        log.to_csv() == again.to_csv(),
        "two identical runs produce identical trajectory CSV",
    ));
    let checks = trajectory_checks(&log)?;
    out.manifest.checks.extend(checks);
    let diag = Diagnostics::from_log(&log);
    diagnostics_checks(out, &diag, opts.fault_factor)
}
