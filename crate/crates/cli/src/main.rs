use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ssns_cli::{run, Command, Options, EXIT_USAGE};

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

#[derive(Parser)]
#[command(name = "ssns", version, about = "Navier-Stokes sum-space regularity diagnostics")]
struct Cli {
    #[command(subcommand)]
    command: Sub,
    /// Run configuration (`key = value` lines).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR", default_value = "ssns-out")]
    out: PathBuf,
    /// Seed overriding the config value.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Do not print the summary.
    #[arg(long, global = true)]
    quiet: bool,
    /// Multiply every checked bound by this factor (fault injection).
    #[arg(long, global = true, hide = true, default_value_t = 1.0)]
    fault_factor: f64,
}

#[derive(Subcommand, Clone, Copy)]
enum Sub {
    /// Run the solver; write the trajectory CSV and snapshots.
    Simulate,
    /// Run the solver and evaluate every enstrophy certificate.
    Certify,
    /// Run the Lorentz-space battery on synthetic functions.
    VerifyLorentz,
    /// Run the full invariant suite.
    Selftest,
}

fn threads() -> Result<(), String> {
    let Ok(raw) = std::env::var("SSNS_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| format!("SSNS_THREADS must be a positive integer, got `{raw}`"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    if let Err(e) = threads() {
        eprintln!("ssns: {e}");
        return ExitCode::from(EXIT_USAGE as u8);
    }
    if !(cli.fault_factor > 0.0 && cli.fault_factor.is_finite()) {
        eprintln!("ssns: --fault-factor must be positive");
        return ExitCode::from(EXIT_USAGE as u8);
    }
    let command = match cli.command {
        Sub::Simulate => Command::Simulate,
        Sub::Certify => Command::Certify,
        Sub::VerifyLorentz => Command::VerifyLorentz,
        Sub::Selftest => Command::Selftest,
    };
    let opts = Options {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        quiet: cli.quiet,
        fault_factor: cli.fault_factor,
    };
    ExitCode::from(run(command, &opts) as u8)
}
