mod embed;
mod gen;
mod io;
mod report;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "graphdd", version, about = "Dynamical-decoupling embedding for scheduled circuits")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Insert decoupling pulses into a scheduled circuit.
    Embed(embed::EmbedArgs),
    /// Check the residual ledger of a circuit against tolerances.
    Verify(verify::VerifyArgs),
    /// Embed benchmark circuits with both strategies and compare them.
    Compare(report::CompareArgs),
    /// Time both strategies across benchmark widths.
    Bench(report::BenchArgs),
    /// Write synthetic devices and benchmark circuits.
    #[command(subcommand)]
    Gen(gen::GenCommand),
}

/// How a command that ran to completion ended.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Passed,
    /// A verification or comparison criterion failed.
    Violated,
}

const EXIT_ERROR: u8 = 1;
const EXIT_VIOLATION: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("GRAPHDD_LOG", "warn")).init();

    // Usage errors exit 1; 2 is reserved for failed checks.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_ERROR)
            } else {
                ExitCode::SUCCESS
            };
        }
    };

    let result = match cli.command {
        Command::Embed(args) => embed::run(&args),
        Command::Verify(args) => verify::run(&args),
        Command::Compare(args) => report::compare(&args),
        Command::Bench(args) => report::bench(&args),
        Command::Gen(cmd) => gen::run(&cmd),
    };
    match result {
        Ok(Outcome::Passed) => ExitCode::SUCCESS,
        Ok(Outcome::Violated) => ExitCode::from(EXIT_VIOLATION),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
