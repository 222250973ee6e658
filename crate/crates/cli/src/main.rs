//! `wpme`: configuration-driven runs, checks and convergence studies.
//!
//! Exit codes: 0 pass, 1 check failure, 2 configuration error, 3 runtime failure.

mod checks;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use wpme_core::Error;

use crate::checks::{convergence_rows, run_check, solve, Context};
use crate::config::RunConfig;

/// Environment variable overriding the configured output directory.
pub const OUTPUT_ENV: &str = "WPME_OUTPUT_DIR";

#[derive(Debug, Clone)]
pub enum Failure {
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Self::Config(_) => 2,
            Self::Runtime(_) => 3,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Self::Config(m) => write!(f, "configuration error: {m}"),
            Self::Runtime(m) => write!(f, "runtime failure: {m}"),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParams(_)
            | Error::InvalidGrid(_)
            | Error::InvalidWeight(_)
            | Error::InvalidArgument(_)
            | Error::WeightSingularity { .. }
            | Error::OutsideGrid { .. } => Self::Config(e.to_string()),
            _ => Self::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Self::Runtime(e.to_string())
    }
}

#[derive(Parser)]
#[command(name = "wpme", version, about = "Weighted porous medium solver and estimate checks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the configured data and write one CSV per snapshot plus a manifest.
    Solve {
        #[arg(long)]
        config: PathBuf,
    },
    /// Run one named check and write its report.
    Verify {
        check: String,
        #[arg(long)]
        config: PathBuf,
    },
    /// Run every configured check and write an aggregate report.
    Suite {
        #[arg(long)]
        config: PathBuf,
    },
    /// Error table for the Barenblatt and blow-up comparisons.
    Convergence {
        #[arg(long)]
        config: PathBuf,
    },
}

fn load(path: &PathBuf) -> Result<(RunConfig, PathBuf), Failure> {
    let config = RunConfig::load(path)?;
    let dir = std::env::var_os(OUTPUT_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| config.output_dir.clone());
    std::fs::create_dir_all(&dir).map_err(|e| Failure::Runtime(format!("{}: {e}", dir.display())))?;
    Ok((config, dir))
}

fn execute(command: Command) -> Result<bool, Failure> {
    match command {
        Command::Solve { config } => {
            let (config, dir) = load(&config)?;
            let traj = solve(&config)?;
            let files = output::write_snapshots(&dir, &traj)?;
            output::write_manifest(&dir, &config, &traj, &files)?;
            if let Some(t) = traj.blowup_time() {
                println!("blow-up detected at t = {t:.9e}");
            }
            println!("wrote {} snapshots to {}", files.len(), dir.display());
            Ok(true)
        }
        Command::Verify { check, config } => {
            let (config, dir) = load(&config)?;
            let ctx = Context::new(&config);
            let report = run_check(&ctx, &check)?;
            output::write_report(&dir.join(format!("report_{check}.json")), &config, &report)?;
            println!("{check}: {}", if report.pass { "pass" } else { "FAIL" });
            Ok(report.pass)
        }
        Command::Suite { config } => {
            let (config, dir) = load(&config)?;
            let names = config.checks.configured();
            if names.is_empty() {
                return Err(Failure::Config("checks: no check blocks configured".into()));
            }
            let ctx = Context::new(&config);
            let results: Vec<_> = std::thread::scope(|s| {
                let handles: Vec<_> = names
                    .iter()
                    .map(|name| {
                        let ctx = &ctx;
                        s.spawn(move || run_check(ctx, name))
                    })
                    .collect();
                handles.into_iter().map(|h| h.join().expect("check thread panicked")).collect()
            });
            let mut reports = Vec::new();
            for (name, result) in names.iter().zip(results) {
                let report = result?;
                println!("{name}: {}", if report.pass { "pass" } else { "FAIL" });
                reports.push(report);
            }
            let all = reports.iter().all(|r| r.pass);
            output::write_suite(&dir.join("suite.json"), &config, &reports)?;
            Ok(all)
        }
        Command::Convergence { config } => {
            let (config, dir) = load(&config)?;
            let rows = convergence_rows(&config)?;
            output::write_convergence(&dir.join("convergence.csv"), &rows)?;
            for (study, row) in &rows {
                println!("{study} {:>6} {:.3e} {:.4e} {}", row.cells, row.dt, row.error, row.order.map_or("-".into(), |o| format!("{o:.3}")));
            }
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(f) => {
            eprintln!("wpme: {f}");
            ExitCode::from(f.code())
        }
    }
}
