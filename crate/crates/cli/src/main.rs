mod commands;
mod config;
mod report;
mod scenario;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use commands::CommandKind;
use config::Config;
use report::{write_json, RunReport};
use scenario::Scenario;

/// Experiments on noncommutative Orlicz spaces over finite traced matrix algebras.
#[derive(Parser, Debug)]
#[command(name = "ncorlicz", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML scenario file; the built-in default scenario is used when absent.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory for CSV and JSON artifacts.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Overrides every scenario seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Comma-separated name filters.
    #[arg(long, global = true)]
    scenarios: Option<String>,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Run the invariant suite and the Dunford–Schwartz certificate.
    Verify,
    /// Ergodic averages, limit and convergence record.
    Ergodic,
    /// Maximal projection search and equicontinuity witnesses.
    Maximal,
    /// Boyd index estimates of the Orlicz function.
    Boyd,
    /// Luxemburg norms computed in the algebra and on the singular-value function.
    Norms,
}

impl From<Command> for CommandKind {
    fn from(c: Command) -> Self {
        match c {
            Command::Verify => CommandKind::Verify,
            Command::Ergodic => CommandKind::Ergodic,
            Command::Maximal => CommandKind::Maximal,
            Command::Boyd => CommandKind::Boyd,
            Command::Norms => CommandKind::Norms,
        }
    }
}

fn execute(cli: &Cli) -> Result<bool> {
    let mut config = match &cli.config {
        Some(path) => Config::load(path)?,
        None => Config::default_config(),
    };
    if let Some(filter) = &cli.scenarios {
        config.filter(filter)?;
    }
    let scenarios = config
        .scenario
        .iter()
        .map(|s| Scenario::build(s, cli.seed).with_context(|| format!("scenario '{}'", s.name)))
        .collect::<Result<Vec<_>>>()?;
    std::fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;

    let kind = CommandKind::from(cli.command);
    let mut reports = Vec::with_capacity(scenarios.len());
    for s in &scenarios {
        let start = Instant::now();
        let r = commands::run(kind, s, &cli.out).with_context(|| format!("scenario '{}'", s.name))?;
        let status = if r.passed { "PASS" } else { "FAIL" };
        println!("[{status}] {} {} seed={} ({:.2}s)", kind.name(), s.name, s.seed, start.elapsed().as_secs_f64());
        for name in r.failed_checks() {
            println!("    failed check: {name}");
        }
        reports.push(r);
    }
    let run = RunReport {
        command: kind.name().to_string(),
        passed: reports.iter().all(|r| r.passed),
        scenarios: reports,
    };
    let path = cli.out.join(format!("report_{}.json", kind.name()));
    write_json(&path, &run)?;
    println!("report written to {}", path.display());
    Ok(run.passed)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
