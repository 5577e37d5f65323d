//! `rnkit`: runs the Radon-Nikodym pipeline, the EC round trip through RN₀,
//! the invariant suites, and grid exports for plotting.
//!
//! Exit status is 0 on success, 1 when a check fails (a decoded bit or a
//! verify suite), and 2 on any other error such as an exhausted budget.

mod approx;
mod grid;
mod io;
mod reduce;
mod verify;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "rnkit", version, about = "Exact Radon-Nikodym approximation over the dyadic ring of [0,1)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Approximate dμ/dλ and write the pipeline trace.
    Approx(approx::ApproxArgs),
    /// Recover a set from an RN₀ realizer applied to its encoded measure.
    Reduce(reduce::ReduceArgs),
    /// Run the seeded invariant suites.
    Verify(verify::VerifyArgs),
    /// Sample densities or approximants on a dyadic grid as CSV.
    ExportGrid(grid::ExportArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Approx(args) => approx::run(args),
        Command::Reduce(args) => reduce::run(args),
        Command::Verify(args) => verify::run(args),
        Command::ExportGrid(args) => grid::run(args),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(2)
    })
}
