//! Run configurations: every command resolves its flags (or a persisted
//! config file) into one of these serializable structs, snapshots it into
//! the run directory, and executes from the snapshot. Re-running a snapshot
//! with the same seed reproduces the outputs byte for byte.

use anyhow::{bail, Context, Result};
use clap::Args;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use spincompass::constants::{DEFAULT_POLARIZING_FIELD, DEFAULT_TEMPERATURE};
use spincompass::estimator::EstimationMode;
use spincompass::spin_system::{build_star_molecule, load_molecule, preset, SpinSystem};

/// Environment variable holding the default output root.
pub const OUTPUT_ROOT_ENV: &str = "SPINCOMPASS_OUTPUT_ROOT";

/// Spherical vector specification.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct VectorSpec {
    pub theta: f64,
    pub phi: f64,
    pub magnitude: f64,
}

/// Molecule selection plus optional constant overrides (applied to star
/// presets).
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct MoleculeSpec {
    /// Molecule preset name (see `spincompass presets`).
    #[arg(long, default_value = "formic_acid")]
    pub molecule: String,

    /// TOML molecule definition file; overrides --molecule.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub molecule_file: Option<PathBuf>,

    /// Override the star coupling J, Hz.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub j_coupling_hz: Option<f64>,

    /// Override the central-spin gyromagnetic ratio, Hz/T.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma_center: Option<f64>,

    /// Override the satellite gyromagnetic ratio, Hz/T.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub gamma_satellite: Option<f64>,

    /// Override the coherence time, seconds.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub tau_coh_s: Option<f64>,
}

impl MoleculeSpec {
    /// Resolve to a spin system; constant overrides rebuild the star.
    pub fn resolve(&self) -> Result<SpinSystem> {
        if let Some(path) = &self.molecule_file {
            return load_molecule(path)
                .with_context(|| format!("loading molecule file {}", path.display()));
        }
        let base = preset(&self.molecule)?;
        let overridden = self.j_coupling_hz.is_some()
            || self.gamma_center.is_some()
            || self.gamma_satellite.is_some()
            || self.tau_coh_s.is_some();
        if !overridden {
            return Ok(base);
        }
        let star = star_shape(&base)
            .context("constant overrides require a star-topology molecule")?;
        Ok(build_star_molecule(
            star.n_satellites,
            self.j_coupling_hz.unwrap_or(star.j_coupling),
            self.gamma_center.unwrap_or(base.gammas()[0]),
            self.gamma_satellite.unwrap_or(base.gammas()[1]),
            self.tau_coh_s.unwrap_or(base.coherence_time()),
        )?)
    }
}

/// Star-topology summary of a molecule.
pub struct StarShape {
    pub n_satellites: usize,
    pub j_coupling: f64,
}

/// Check that the couplings form a star: a single central spin (index 0)
/// coupled equally to every satellite, no satellite-satellite couplings.
pub fn star_shape(system: &SpinSystem) -> Result<StarShape> {
    let n = system.n_spins();
    if n < 2 {
        bail!("molecule has fewer than two spins");
    }
    let j = system.couplings()[(0, 1)];
    for a in 0..n {
        for b in (a + 1)..n {
            let expected = if a == 0 { j } else { 0.0 };
            if system.couplings()[(a, b)] != expected {
                bail!("molecule is not a star topology");
            }
        }
    }
    if j == 0.0 {
        bail!("star coupling is zero");
    }
    Ok(StarShape {
        n_satellites: n - 1,
        j_coupling: j,
    })
}

/// Output location: root directory (flag, else environment, else ./runs)
/// plus a run name.
#[derive(Debug, Clone, Args, Serialize, Deserialize)]
pub struct OutputSpec {
    /// Output root directory; defaults to $SPINCOMPASS_OUTPUT_ROOT or ./runs.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub out_dir: Option<PathBuf>,

    /// Run name (subdirectory of the output root).
    #[arg(long, default_value = "run")]
    pub run_name: String,
}

impl OutputSpec {
    /// Create and return the run directory.
    pub fn run_dir(&self) -> Result<PathBuf> {
        let root = match &self.out_dir {
            Some(dir) => dir.clone(),
            None => std::env::var_os(OUTPUT_ROOT_ENV)
                .map(PathBuf::from)
                .unwrap_or_else(|| PathBuf::from("runs")),
        };
        let dir = root.join(&self.run_name);
        std::fs::create_dir_all(&dir)
            .with_context(|| format!("creating run directory {}", dir.display()))?;
        Ok(dir)
    }
}

/// Write the resolved config snapshot into the run directory.
pub fn snapshot<T: Serialize>(dir: &Path, config: &T) -> Result<()> {
    let text = toml::to_string_pretty(config).context("serializing config snapshot")?;
    std::fs::write(dir.join("config.toml"), text)?;
    Ok(())
}

/// Load a persisted config snapshot.
pub fn load_snapshot<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

/// Estimation target mode as a CLI value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModeArg {
    Field,
    Rotation,
}

impl From<ModeArg> for EstimationMode {
    fn from(mode: ModeArg) -> Self {
        match mode {
            ModeArg::Field => EstimationMode::Field,
            ModeArg::Rotation => EstimationMode::Rotation,
        }
    }
}

/// Probe preparation settings.
#[derive(Debug, Clone, Copy, Args, Serialize, Deserialize)]
pub struct ProbeSpec {
    /// Guiding-field axis for the initial polarization.
    #[arg(long, default_value = "z")]
    pub guide: GuideArg,

    /// Prepolarizing field, tesla.
    #[arg(long, default_value_t = DEFAULT_POLARIZING_FIELD)]
    pub polarizing_field_tesla: f64,

    /// Sample temperature, kelvin.
    #[arg(long, default_value_t = DEFAULT_TEMPERATURE)]
    pub temperature_k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GuideArg {
    X,
    Y,
    Z,
}

impl From<GuideArg> for spincompass::spin_system::Axis {
    fn from(g: GuideArg) -> Self {
        match g {
            GuideArg::X => spincompass::spin_system::Axis::X,
            GuideArg::Y => spincompass::spin_system::Axis::Y,
            GuideArg::Z => spincompass::spin_system::Axis::Z,
        }
    }
}
