//! `novlab`: ring arithmetic, complex rewriting and holonomy simulation
//! driven by JSON scenarios.

mod commands;
mod error;
mod expr;
mod report;
mod scenario;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{ComplexCmd, Settings, SimCmd};
use error::CliError;
use report::{Header, Report};
use scenario::{Format, Scenario};

#[derive(Debug, Parser)]
#[command(name = "novlab", version, about = "Morse-Novikov workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario JSON file.
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Truncation length, overriding the scenario.
    #[arg(long = "L", global = true)]
    length: Option<f64>,
    /// Numerical tolerance for bisection and locus detection.
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Recorded in the report header.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[arg(long, global = true, value_enum)]
    out: Option<Format>,
    /// Grid size: s-samples for passages and incidence, nodes per axis for
    /// the doubling sweep.
    #[arg(long, global = true)]
    grid: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Evaluate a ring expression such as "(1 + g) * inv(1 - g)".
    Ring { expr: String },
    /// Check d^2 = 0, apply the slide script, or audit it as a loop.
    Complex {
        #[arg(value_enum)]
        action: ComplexCmd,
    },
    /// Run the holonomy simulator.
    Sim {
        #[arg(value_enum)]
        action: SimCmd,
    },
}

impl Command {
    fn name(&self) -> String {
        let v = |a: &dyn std::fmt::Debug| format!("{a:?}").to_lowercase();
        match self {
            Command::Ring { .. } => "ring".into(),
            Command::Complex { action } => format!("complex {}", v(action)),
            Command::Sim { action } => format!("sim {}", v(action)),
        }
    }
}

fn run(cli: &Cli) -> Result<(Report, Header, Format), CliError> {
    if !(cli.tol.is_finite() && cli.tol > 0.0) {
        return Err(CliError::Input("--tol must be positive".into()));
    }
    if cli.grid.is_some_and(|g| g < 2) {
        return Err(CliError::Input("--grid must be at least 2".into()));
    }
    let path = cli.scenario.as_ref().ok_or_else(|| CliError::Input("--scenario FILE is required".into()))?;
    let sc = Scenario::load(path)?;
    let st = Settings { length: cli.length.or(sc.length), tol: cli.tol, grid: cli.grid };
    let (report, length) = match &cli.command {
        Command::Ring { expr } => (commands::ring(expr, &sc, &st)?, st.length),
        Command::Complex { action } => {
            let l = st.length.or(sc.complex.as_ref().map(|c| c.context.length));
            (commands::complex(*action, &sc, &st)?, l)
        }
        Command::Sim { action } => {
            let l = cli.length.or(sc.sim.as_ref().and_then(|s| s.length)).or(sc.length);
            let st = Settings { length: l, ..st };
            (commands::sim(*action, &sc, &st)?, l)
        }
    };
    let header = Header {
        tool: "novlab",
        version: env!("CARGO_PKG_VERSION"),
        command: cli.command.name(),
        length,
        tol: cli.tol,
        seed: cli.seed,
        grid: cli.grid,
    };
    Ok((report, header, cli.out.or(sc.format).unwrap_or_default()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok((report, header, format)) => {
            let mut out = std::io::stdout().lock();
            if out.write_all(report.render(&header, format).as_bytes()).is_err() {
                return ExitCode::from(2);
            }
            if report.passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("novlab: {e}");
            ExitCode::from(2)
        }
    }
}
