use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use granuflow_cli::commands;

/// Gradient-flow solver for 1D quadratic-kernel kinetic granular media.
#[derive(Parser)]
#[command(name = "granuflow", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run a scenario and write trajectory/energy/summary outputs.
    Simulate {
        /// Scenario configuration (JSON, schema 1).
        config: PathBuf,
    },
    /// Run a named validation suite and print its pass/fail table.
    Validate {
        /// One of: ot-oracle, energy-convexity, jko-descent, contraction,
        /// cross-validation, shock-bound.
        suite: String,
    },
    /// Run two scenarios on a shared grid and check the contraction bound.
    Compare {
        config_a: PathBuf,
        config_b: PathBuf,
        /// Allowed relative slack in `max_t d(t) ≤ (1 + slack) d(0)`.
        #[arg(long, default_value_t = 0.05)]
        slack: f64,
    },
    /// Extract the reconstructed phase-space cloud at a time from a
    /// trajectory.csv.
    Reconstruct {
        trajectory: PathBuf,
        #[arg(long)]
        time: f64,
        /// Output CSV path; stdout when omitted.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Simulate { config } => commands::simulate(config),
        Cmd::Validate { suite } => commands::validate(suite),
        Cmd::Compare { config_a, config_b, slack } => {
            commands::compare(config_a, config_b, *slack)
        }
        Cmd::Reconstruct { trajectory, time, output } => {
            commands::reconstruct(trajectory, *time, output.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code as u8)
        }
    }
}
