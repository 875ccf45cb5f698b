//! Command implementations. Each command resolves a serializable config,
//! writes its snapshot into the run directory, and emits deterministic
//! columnar text and JSON outputs.

use anyhow::{Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;

use spincompass::analytic::{rotation_lines, zeeman_lines, SplittingReport};
use spincompass::estimator::{
    load_measurements, magnitude_from_splitting, EstimationMode, EstimationResult, Estimator,
    MonteCarloReport,
};
use spincompass::frame::frame_basis;
use spincompass::hamiltonian::{regime_ratio, total_hamiltonian, FieldVector, RotationVector};
use spincompass::probe::thermal_probe;
use spincompass::spectrum::{
    catalogue_records, fourier_spectrum, labeled_transition_catalogue, render_catalogue_text,
    render_spectrum_text, render_timeseries_text, transition_catalogue, Spectrum,
};
use spincompass::spin_system::{magnetization_operator, Axis, PRESET_NAMES};

use crate::config::{
    load_snapshot, snapshot, star_shape, ModeArg, MoleculeSpec, OutputSpec, ProbeSpec, VectorSpec,
};

/// Command result: finished cleanly, or finished with an ambiguous estimate.
pub enum Outcome {
    Done,
    Ambiguous,
}

/// Print to stdout, exiting quietly when the reader has gone away
/// (e.g. piping into `head`).
fn emit(text: std::fmt::Arguments<'_>) {
    use std::io::Write;
    let mut out = std::io::stdout();
    if let Err(e) = out.write_fmt(text).and_then(|_| writeln!(out)) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
    }
}

macro_rules! emitln {
    ($($arg:tt)*) => { emit(format_args!($($arg)*)) };
}

#[derive(Args)]
pub struct SpectrumArgs {
    /// Re-execute a persisted config snapshot instead of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    molecule: MoleculeSpec,

    /// Field polar angle, rad.
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Field azimuthal angle, rad.
    #[arg(long, default_value_t = 0.0)]
    phi: f64,
    /// Field magnitude, tesla; omit for no static field.
    #[arg(long)]
    field_tesla: Option<f64>,

    /// Rotation polar angle, rad.
    #[arg(long, default_value_t = 0.0)]
    rotation_theta: f64,
    /// Rotation azimuthal angle, rad.
    #[arg(long, default_value_t = 0.0)]
    rotation_phi: f64,
    /// Rotation frequency, Hz; omit for no rotation.
    #[arg(long)]
    rotation_hz: Option<f64>,

    #[command(flatten)]
    probe: ProbeSpec,

    /// Acquisition duration, seconds (default 3 tau_coh).
    #[arg(long)]
    duration_s: Option<f64>,
    /// Sample rate, Hz (default 8x the highest line).
    #[arg(long)]
    sample_rate_hz: Option<f64>,

    #[command(flatten)]
    output: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SpectrumConfig {
    molecule: MoleculeSpec,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    field: Option<VectorSpec>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    rotation: Option<VectorSpec>,
    probe: ProbeSpec,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    duration_s: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    sample_rate_hz: Option<f64>,
    output: OutputSpec,
}

impl SpectrumArgs {
    fn into_config(self) -> Result<SpectrumConfig> {
        if let Some(path) = &self.config {
            return load_snapshot(path);
        }
        Ok(SpectrumConfig {
            field: self.field_tesla.map(|magnitude| VectorSpec {
                theta: self.theta,
                phi: self.phi,
                magnitude,
            }),
            rotation: self.rotation_hz.map(|magnitude| VectorSpec {
                theta: self.rotation_theta,
                phi: self.rotation_phi,
                magnitude,
            }),
            molecule: self.molecule,
            probe: self.probe,
            duration_s: self.duration_s,
            sample_rate_hz: self.sample_rate_hz,
            output: self.output,
        })
    }
}

pub fn run_spectrum(args: SpectrumArgs) -> Result<Outcome> {
    let config = args.into_config()?;
    let system = config.molecule.resolve()?;
    let dir = config.output.run_dir()?;
    snapshot(&dir, &config)?;

    let field = config
        .field
        .map(|v| FieldVector::new(v.theta, v.phi, v.magnitude))
        .transpose()?;
    let rotation = config
        .rotation
        .map(|v| RotationVector::new(v.theta, v.phi, v.magnitude))
        .transpose()?;
    let h = total_hamiltonian(&system, field.as_ref(), rotation.as_ref());
    let probe = thermal_probe(
        &system,
        Axis::from(config.probe.guide),
        config.probe.polarizing_field_tesla,
        config.probe.temperature_k,
    )?;
    let observable = magnetization_operator(&system, Axis::Z);

    if let Some(f) = &field {
        let ratio = regime_ratio(&system, f.magnitude);
        if ratio > 0.1 {
            eprintln!(
                "warning: regime ratio gamma_max B / J = {ratio:.3} exceeds the \
                 strong-coupling bound; first-order formulas degrade"
            );
        }
    }

    // Quantization axis: along the field, else the rotation, else z.
    let (q_theta, q_phi) = field
        .as_ref()
        .map(|f| (f.theta, f.phi))
        .or_else(|| rotation.as_ref().map(|r| (r.theta, r.phi)))
        .unwrap_or((0.0, 0.0));
    let axis = frame_basis(q_theta, q_phi).z_prime;
    let lines = match labeled_transition_catalogue(&system, &h, &probe, &observable, axis) {
        Ok((lines, _)) => lines,
        Err(spincompass::Error::LabelingFailure { .. }) => {
            eprintln!("warning: outside the strong-coupling regime; emitting unlabeled lines");
            transition_catalogue(&system, &h, &probe, &observable)?
        }
        Err(e) => return Err(e.into()),
    };

    let mut spectrum = Spectrum::new(lines, system.coherence_time());
    if let Some(d) = config.duration_s {
        spectrum.acquisition.duration = d;
    }
    if let Some(r) = config.sample_rate_hz {
        spectrum.acquisition.sample_rate = r;
    }
    let series = spectrum.time_signal()?;
    let fspec = fourier_spectrum(&series)?;

    std::fs::write(dir.join("catalogue.txt"), render_catalogue_text(&spectrum.lines))?;
    std::fs::write(
        dir.join("catalogue.json"),
        serde_json::to_string_pretty(&catalogue_records(&spectrum.lines))?,
    )?;
    std::fs::write(dir.join("timeseries.txt"), render_timeseries_text(&series))?;
    std::fs::write(dir.join("spectrum.txt"), render_spectrum_text(&fspec))?;

    // Analytic manifold reports for star molecules under a pure field or a
    // pure rotation.
    if let Ok(star) = star_shape(&system) {
        let reports: Option<Vec<SplittingReport>> = match (&field, &rotation) {
            (Some(f), None) => Some(collect_reports(&star, |n, k, j| {
                zeeman_lines(n, k, j, f.magnitude, system.gammas()[1], system.gammas()[0])
            })?),
            (None, Some(r)) => {
                Some(collect_reports(&star, |n, k, j| rotation_lines(n, k, j, r.magnitude))?)
            }
            _ => None,
        };
        if let Some(reports) = reports {
            std::fs::write(
                dir.join("manifolds.json"),
                serde_json::to_string_pretty(&reports)?,
            )?;
        }
    }

    emitln!(
        "wrote {} lines ({} samples at {:.1} Hz) to {}",
        spectrum.lines.len(),
        series.samples.len(),
        spectrum.acquisition.sample_rate,
        dir.display()
    );
    for line in &spectrum.lines {
        emitln!("  {:>12.4} Hz  magnitude {:.6e}", line.frequency, line.magnitude());
    }
    Ok(Outcome::Done)
}

fn collect_reports(
    star: &crate::config::StarShape,
    build: impl Fn(usize, usize, f64) -> spincompass::Result<SplittingReport>,
) -> Result<Vec<SplittingReport>> {
    let n = star.n_satellites;
    let mut reports = Vec::new();
    for k in 0..=(n / 2) {
        reports.push(build(n, k, star.j_coupling)?);
    }
    Ok(reports)
}

#[derive(Args)]
pub struct EstimateArgs {
    /// Re-execute a persisted config snapshot instead of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    molecule: MoleculeSpec,

    /// Measurement file (TOML); see the README for the format.
    #[arg(long, required_unless_present = "config")]
    measurements: Option<PathBuf>,

    /// Satellite manifold index used for the splitting inversion.
    #[arg(long, default_value_t = 0)]
    manifold_k: usize,

    /// Override the single-quantum splitting, Hz (default: frequency span
    /// of the first measurement or the file's splitting_hz).
    #[arg(long)]
    splitting_hz: Option<f64>,

    #[command(flatten)]
    output: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateConfig {
    molecule: MoleculeSpec,
    measurements: PathBuf,
    manifold_k: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    splitting_hz: Option<f64>,
    mode: ModeArg,
    output: OutputSpec,
}

#[derive(Serialize)]
struct EstimateReport<'a> {
    mode: EstimationMode,
    splitting_hz: f64,
    magnitude: f64,
    result: &'a EstimationResult,
}

pub fn run_estimate(args: EstimateArgs, mode: EstimationMode) -> Result<Outcome> {
    let config = match &args.config {
        Some(path) => load_snapshot(path)?,
        None => EstimateConfig {
            molecule: args.molecule,
            measurements: args
                .measurements
                .clone()
                .context("--measurements is required")?,
            manifold_k: args.manifold_k,
            splitting_hz: args.splitting_hz,
            mode: match mode {
                EstimationMode::Field => ModeArg::Field,
                EstimationMode::Rotation => ModeArg::Rotation,
            },
            output: args.output,
        },
    };
    let mode: EstimationMode = config.mode.into();
    let system = config.molecule.resolve()?;
    let star = star_shape(&system)?;
    let dir = config.output.run_dir()?;
    snapshot(&dir, &config)?;

    let set = load_measurements(&config.measurements)?;
    let delta = config
        .splitting_hz
        .or_else(|| set.splitting())
        .context("no splitting available: supply --splitting-hz or at least two lines")?;
    let magnitude = magnitude_from_splitting(
        delta,
        star.n_satellites,
        config.manifold_k,
        system.gammas()[1],
        system.gammas()[0],
        mode,
    );

    let estimator = match mode {
        EstimationMode::Field => Estimator::for_field(&system, magnitude)?,
        EstimationMode::Rotation => Estimator::for_rotation(&system, magnitude)?,
    };
    let result = estimator.estimate(&set.measurements)?;

    let report = EstimateReport {
        mode,
        splitting_hz: delta,
        magnitude,
        result: &result,
    };
    let json = serde_json::to_string_pretty(&report)?;
    std::fs::write(dir.join("result.json"), &json)?;
    emitln!("{json}");

    if result.is_ambiguous() {
        eprintln!(
            "warning: estimate is ambiguous ({} candidate(s){})",
            result.ambiguity_set.len(),
            if result.degenerate_direction {
                ", flat direction at the minimum"
            } else {
                ""
            }
        );
        return Ok(Outcome::Ambiguous);
    }
    Ok(Outcome::Done)
}

#[derive(Args)]
pub struct BenchmarkArgs {
    /// Re-execute a persisted config snapshot instead of the flags below.
    #[arg(long)]
    config: Option<PathBuf>,

    #[command(flatten)]
    molecule: MoleculeSpec,

    /// Estimation target.
    #[arg(long, value_enum, default_value_t = ModeArg::Field)]
    mode: ModeArg,

    /// True magnitude: tesla (field) or Hz (rotation).
    #[arg(long, default_value_t = 1.0788e-7)]
    magnitude: f64,

    /// True polar angle, rad.
    #[arg(long, default_value_t = 1.289)]
    theta: f64,

    /// True azimuthal angle, rad.
    #[arg(long, default_value_t = 0.047)]
    phi: f64,

    /// Gaussian amplitude-noise sigma (on the normalized entries).
    #[arg(long, default_value_t = 0.01)]
    sigma: f64,

    /// Monte Carlo trials (>= 100).
    #[arg(long, default_value_t = 1000)]
    trials: usize,

    /// RNG seed.
    #[arg(long, default_value_t = 1)]
    seed: u64,

    /// Splitting-fit uncertainty used for the magnitude propagation, Hz.
    #[arg(long, default_value_t = 0.3e-3)]
    sigma_delta_hz: f64,

    /// Histogram bin count.
    #[arg(long, default_value_t = 40)]
    bins: usize,

    #[command(flatten)]
    output: OutputSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BenchmarkConfig {
    molecule: MoleculeSpec,
    mode: ModeArg,
    magnitude: f64,
    theta: f64,
    phi: f64,
    sigma: f64,
    trials: usize,
    seed: u64,
    sigma_delta_hz: f64,
    bins: usize,
    output: OutputSpec,
}

#[derive(Serialize)]
struct PrecisionSummary {
    sigma_theta: f64,
    sigma_phi: f64,
    mean_theta_deviation: f64,
    mean_phi_deviation: f64,
    trials: usize,
    failures: usize,
    noise_sigma: f64,
    seed: u64,
}

pub fn run_benchmark(args: BenchmarkArgs) -> Result<Outcome> {
    let config = match &args.config {
        Some(path) => load_snapshot(path)?,
        None => BenchmarkConfig {
            molecule: args.molecule,
            mode: args.mode,
            magnitude: args.magnitude,
            theta: args.theta,
            phi: args.phi,
            sigma: args.sigma,
            trials: args.trials,
            seed: args.seed,
            sigma_delta_hz: args.sigma_delta_hz,
            bins: args.bins,
            output: args.output,
        },
    };
    let system = config.molecule.resolve()?;
    let star = star_shape(&system)?;
    let dir = config.output.run_dir()?;
    snapshot(&dir, &config)?;

    let estimator = match config.mode {
        ModeArg::Field => Estimator::for_field(&system, config.magnitude)?,
        ModeArg::Rotation => Estimator::for_rotation(&system, config.magnitude)?,
    };
    let report = estimator.monte_carlo_precision(
        config.theta,
        config.phi,
        config.sigma,
        config.trials,
        config.seed,
    )?;

    let summary = PrecisionSummary {
        sigma_theta: report.sigma_theta,
        sigma_phi: report.sigma_phi,
        mean_theta_deviation: report.mean_theta_deviation,
        mean_phi_deviation: report.mean_phi_deviation,
        trials: report.trials,
        failures: report.failures,
        noise_sigma: config.sigma,
        seed: config.seed,
    };
    std::fs::write(
        dir.join("precision.json"),
        serde_json::to_string_pretty(&summary)?,
    )?;
    write_histogram(&dir.join("histogram_theta.txt"), &report.theta_deviations, config.bins)?;
    write_histogram(&dir.join("histogram_phi.txt"), &report.phi_deviations, config.bins)?;

    // Splitting-noise propagation to the magnitude, per manifold.
    let mode: EstimationMode = config.mode.into();
    let mut table = String::from("# manifold_k sigma_delta_hz sigma_magnitude\n");
    for k in 0..=(star.n_satellites / 2) {
        if star.n_satellites as i64 - 2 * k as i64 <= 0 {
            continue;
        }
        let sigma_mag = magnitude_from_splitting(
            config.sigma_delta_hz,
            star.n_satellites,
            k,
            system.gammas()[1],
            system.gammas()[0],
            mode,
        );
        table.push_str(&format!("{k} {:.9e} {:.9e}\n", config.sigma_delta_hz, sigma_mag));
    }
    std::fs::write(dir.join("propagation.txt"), table)?;

    emitln!(
        "sigma_theta = {:.5} rad, sigma_phi = {:.5} rad over {} trials ({} failures) -> {}",
        report.sigma_theta,
        report.sigma_phi,
        report.trials,
        report.failures,
        dir.display()
    );
    Ok(Outcome::Done)
}

fn write_histogram(path: &std::path::Path, values: &[f64], bins: usize) -> Result<()> {
    let mut text = String::from("# bin_center count\n");
    for (center, count) in MonteCarloReport::histogram(values, bins) {
        text.push_str(&format!("{center:.9e} {count}\n"));
    }
    std::fs::write(path, text)?;
    Ok(())
}

#[derive(Args)]
pub struct ListArgs {
    #[command(flatten)]
    molecule: MoleculeSpec,

    /// Target kind for the line positions.
    #[arg(long, value_enum, default_value_t = ModeArg::Field)]
    mode: ModeArg,

    /// Field magnitude (tesla) or rotation frequency (Hz).
    #[arg(long, default_value_t = 1e-7)]
    magnitude: f64,
}

pub fn run_list_transitions(args: ListArgs) -> Result<Outcome> {
    let system = args.molecule.resolve()?;
    let star = star_shape(&system)?;
    let n = star.n_satellites;
    let mut reports = Vec::new();
    for k in 0..=(n / 2) {
        let report = match args.mode {
            ModeArg::Field => zeeman_lines(
                n,
                k,
                star.j_coupling,
                args.magnitude,
                system.gammas()[1],
                system.gammas()[0],
            )?,
            ModeArg::Rotation => rotation_lines(n, k, star.j_coupling, args.magnitude)?,
        };
        if report.regime_warning {
            eprintln!(
                "warning: manifold k={k} regime ratio {:.3} exceeds the strong-coupling bound",
                report.regime_ratio
            );
        }
        reports.push(report);
    }
    emitln!("{}", serde_json::to_string_pretty(&reports)?);
    Ok(Outcome::Done)
}

pub fn run_presets() -> Result<Outcome> {
    emitln!("available molecule presets:");
    for name in PRESET_NAMES {
        let system = spincompass::spin_system::preset(name)?;
        let star = star_shape(&system)?;
        emitln!(
            "  {name:<14} {} satellite proton(s), J = {:.2} Hz, tau_coh = {:.1} s",
            star.n_satellites, star.j_coupling, system.coherence_time()
        );
    }
    Ok(Outcome::Done)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn star_shape_detects_presets() {
        for name in PRESET_NAMES {
            let system = spincompass::spin_system::preset(name).unwrap();
            assert!(star_shape(&system).is_ok());
        }
    }

    #[test]
    fn spectrum_config_roundtrip() {
        let text = r#"
            [molecule]
            molecule = "formic_acid"

            [field]
            theta = 1.289
            phi = 0.047
            magnitude = 1.0788e-7

            [probe]
            guide = "z"
            polarizing_field_tesla = 1.3
            temperature_k = 298.0

            [output]
            run_name = "fig2a"
        "#;
        let config: SpectrumConfig = toml::from_str(text).unwrap();
        assert_eq!(config.output.run_name, "fig2a");
        let back = toml::to_string(&config).unwrap();
        let reparsed: SpectrumConfig = toml::from_str(&back).unwrap();
        assert_eq!(reparsed.field.unwrap().magnitude, 1.0788e-7);
    }
}
