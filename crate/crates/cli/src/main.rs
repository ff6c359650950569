use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod io;

use io::CliError;

#[derive(Parser)]
#[command(name = "reslab", version, about = "Transfer-operator resonances of one-dimensional maps")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resonance set of an affine Markov map from the spectra of B_k, ..., B_{k+r}.
    Resonances(commands::ResonancesArgs),
    /// Spectral-gap parameters and exclusion-region boundaries of a smooth full-branch map.
    Regions(commands::RegionsArgs),
    /// Evaluates Xi(z) on a rectangular grid.
    XiScan(commands::XiScanArgs),
    /// Scans an annulus for eigenvalues of the transfer operator.
    Scan(commands::ScanArgs),
    /// Correlation sequence, decay fit and predicted resonance.
    Correlate(commands::CorrelateArgs),
    /// Maximal-entropy measure of a full-branch map by iterating N^{-1} L_0.
    Mme(commands::MmeArgs),
    /// Topological entropy.
    Entropy(commands::EntropyArgs),
    /// Spectrum of a discretized transfer operator at sizes N and 2N.
    Discretize(commands::DiscretizeArgs),
    /// Parses a map spec and prints its validation report.
    Validate(commands::ValidateArgs),
}

fn main() -> ExitCode {
    reslab::init_threads_from_env();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Resonances(a) => commands::resonances(a),
        Command::Regions(a) => commands::regions(a),
        Command::XiScan(a) => commands::xi_scan(a),
        Command::Scan(a) => commands::scan(a),
        Command::Correlate(a) => commands::correlate(a),
        Command::Mme(a) => commands::mme(a),
        Command::Entropy(a) => commands::entropy(a),
        Command::Discretize(a) => commands::discretize(a),
        Command::Validate(a) => commands::validate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.code)
        }
    }
}

impl From<reslab::Error> for CliError {
    fn from(e: reslab::Error) -> Self {
        CliError::from_core(&e)
    }
}
