use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use zerocert_cli::commands::{run, Command, OutputOverrides};
use zerocert_cli::config::RunConfig;
use zerocert_cli::selftest::{run_selftest, run_selftest_with};
use zerocert_cli::CliError;
use zerocert_core::certificate::quadratic_domination_constant;

/// Certify, locate and verify zeros of residual maps.
#[derive(Debug, Parser)]
#[command(name = "zerocert", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Check the domination certificate on the configured ball.
    Certify(RunArgs),
    /// Sweep the scaling v -> mu v and certify the transformed problem.
    Search(RunArgs),
    /// Certify (searching when a [transform] table is given), then descend.
    Solve(RunArgs),
    /// Run the built-in consistency suites.
    Selftest {
        /// Perturb the closed-form constant to check that the suites catch it.
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Write the mu sweep as CSV.
    #[arg(long)]
    sweep_csv: Option<PathBuf>,
    /// Write the descent trace as CSV.
    #[arg(long)]
    trace_csv: Option<PathBuf>,
    /// Sampling seed; overrides `certificate.seed` (default 42).
    #[arg(long)]
    seed: Option<u64>,
}

fn execute(command: Command, args: RunArgs) -> Result<Vec<String>, CliError> {
    let config = RunConfig::from_path(&args.config)?;
    let overrides = OutputOverrides {
        report: args.report,
        sweep_csv: args.sweep_csv,
        trace_csv: args.trace_csv,
    };
    Ok(run(command, config, args.seed, overrides)?.lines)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, args) = match cli.command {
        Cmd::Certify(a) => (Command::Certify, a),
        Cmd::Search(a) => (Command::Search, a),
        Cmd::Solve(a) => (Command::Solve, a),
        Cmd::Selftest { inject_fault } => {
            let report = if inject_fault {
                run_selftest_with(&|l, x, r| 1.05 * quadratic_domination_constant(l, x, r))
            } else {
                run_selftest()
            };
            print!("{}", report.table());
            return if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            };
        }
    };
    match execute(command, args) {
        Ok(lines) => {
            for line in lines {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
