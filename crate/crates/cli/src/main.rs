// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;
use std::process::ExitCode;

use chaoscope::{run_config, validate_config, write_fixture, CliError, FixtureKind};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "chaoscope", version, about = "Residual-stream and quasi-Lyapunov experiments on a toy decoder")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a JSON config
    Run { config: PathBuf },
    /// Check a config without running it
    Validate { config: PathBuf },
    /// Write a fixture file: fig5-trace, toy-mcq, two-regime-curve or toy-weights
    Fixture { kind: String, out: PathBuf },
}

fn dispatch(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config } => {
            let outcome = run_config(&config)?;
            println!("{} files written to {}", outcome.files.len() + 1, outcome.output_dir.display());
            println!("config hash {}", outcome.config_hash);
        }
        Command::Validate { config } => {
            println!("ok {}", validate_config(&config)?);
        }
        Command::Fixture { kind, out } => {
            write_fixture(kind.parse::<FixtureKind>()?, &out)?;
            println!("wrote {}", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match dispatch(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
