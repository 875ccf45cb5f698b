//! Command-line surface for ultralow-field spin-cluster simulation and
//! vector-field/rotation estimation.
//!
//! Exit codes: 0 success, 2 configuration error, 3 the estimate is
//! ambiguous (result still written), 4 numerical failure.

mod commands;
mod config;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "spincompass",
    version,
    about = "Simulate strongly-coupled nuclear-spin spectra in ultralow fields and \
             reconstruct field or rotation vectors from them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a spectrum: transition catalogue, time series and FFT data.
    Spectrum(commands::SpectrumArgs),
    /// Estimate a magnetic-field vector from measured line amplitudes.
    Estimate(commands::EstimateArgs),
    /// Estimate a rotation vector from measured line amplitudes.
    EstimateRotation(commands::EstimateArgs),
    /// Monte Carlo orientation-precision benchmark with noise propagation.
    Benchmark(commands::BenchmarkArgs),
    /// Print the analytic per-manifold line positions as JSON.
    ListTransitions(commands::ListArgs),
    /// List the shipped molecule presets.
    Presets,
}

const EXIT_CONFIG: i32 = 2;
const EXIT_AMBIGUOUS: i32 = 3;
const EXIT_NUMERIC: i32 = 4;

fn classify(error: &anyhow::Error) -> i32 {
    if let Some(core) = error.downcast_ref::<spincompass::Error>() {
        use spincompass::Error::*;
        match core {
            MoleculeFile(_) | MeasurementFile(_) | EmptyMeasurements
            | MeasurementShapeMismatch { .. } | InvalidAmplitudes | TooFewTrials { .. }
            | InvalidNoiseSigma(_) | InvalidFieldSpec | InvalidProtonCount(_)
            | ZeroCoupling | InvalidCoherenceTime(_) | InvalidManifold { .. } => EXIT_CONFIG,
            _ => EXIT_NUMERIC,
        }
    } else if error.downcast_ref::<std::io::Error>().is_some()
        || error.downcast_ref::<toml::de::Error>().is_some()
        || error.to_string().contains("config")
        || error.to_string().contains("molecule")
        || error.to_string().contains("measurement")
    {
        EXIT_CONFIG
    } else {
        EXIT_NUMERIC
    }
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Spectrum(args) => commands::run_spectrum(args),
        Command::Estimate(args) => {
            commands::run_estimate(args, spincompass::estimator::EstimationMode::Field)
        }
        Command::EstimateRotation(args) => {
            commands::run_estimate(args, spincompass::estimator::EstimationMode::Rotation)
        }
        Command::Benchmark(args) => commands::run_benchmark(args),
        Command::ListTransitions(args) => commands::run_list_transitions(args),
        Command::Presets => commands::run_presets(),
    };
    match outcome {
        Ok(commands::Outcome::Done) => {}
        Ok(commands::Outcome::Ambiguous) => std::process::exit(EXIT_AMBIGUOUS),
        Err(error) => {
            eprintln!("error: {error:#}");
            std::process::exit(classify(&error));
        }
    }
}
