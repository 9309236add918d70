//! `hjc`: effective Hamiltonians, counterexample synthesis and certification.

mod commands;
mod config;

use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::Outcome;
use config::{Overrides, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "hjc", version, about = "Homogenized Hamiltonians of periodic viscous Hamilton-Jacobi equations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Effective Hamiltonian on a theta grid (sweep.csv).
    Sweep,
    /// Build a counterexample potential (bundle.json, bundle_profile.csv).
    Synthesize,
    /// Certify loss of quasiconvexity (certificate.json); exit 2 if none.
    Certify,
    /// Long-time slope of the parabolic problem against the cell solver.
    VerifyPde,
    /// Eigenvalue oracle for G = p^2/2 against the cell solver.
    Oracle,
    /// Separable multi-dimensional construction; exit 2 if not certified.
    Multid,
    /// Plot-ready CSVs for the Hamiltonian, profile, potential and H-bar curve.
    Figures,
}

fn run(cli: &Cli) -> anyhow::Result<Outcome> {
    let cfg = RunConfig::resolve(&cli.overrides)?;
    if let Some(jobs) = cfg.jobs {
        rayon::ThreadPoolBuilder::new().num_threads(jobs).build_global()?;
    }
    match cli.command {
        Command::Sweep => commands::sweep(&cfg),
        Command::Synthesize => commands::synthesize_cmd(&cfg),
        Command::Certify => commands::certify(&cfg),
        Command::VerifyPde => commands::verify_pde(&cfg),
        Command::Oracle => commands::oracle(&cfg),
        Command::Multid => commands::multid(&cfg),
        Command::Figures => commands::figures(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    match run(&cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotCertified) => ExitCode::from(2),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
