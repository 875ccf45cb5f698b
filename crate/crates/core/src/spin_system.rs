//! Molecules as coupled spin-1/2 networks and their product-space
//! angular-momentum operators.
//!
//! Spin ordering convention: the central (heteronuclear) spin is index 0,
//! satellites follow. Operators are built by Kronecker embedding of
//! sigma/2 into the 2^n product space, with spin 0 as the leftmost factor.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;
use serde::Deserialize;
use std::path::Path;

use crate::constants::{GAMMA_CARBON, GAMMA_PROTON};
use crate::error::{Error, Result};
use crate::linalg::{hermiticity_defect, kron_chain};

/// Hard cap on the number of spins: dense 2^n matrices beyond this are
/// not worth supporting (the molecules of interest have n <= 4).
pub const MAX_SPINS: usize = 12;

/// Cartesian operator axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
    Z,
}

impl Axis {
    /// Unit vector of the axis in the laboratory frame.
    pub fn unit_vector(self) -> [f64; 3] {
        match self {
            Axis::X => [1.0, 0.0, 0.0],
            Axis::Y => [0.0, 1.0, 0.0],
            Axis::Z => [0.0, 0.0, 1.0],
        }
    }

    pub const ALL: [Axis; 3] = [Axis::X, Axis::Y, Axis::Z];
}

impl std::fmt::Display for Axis {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Axis::X => write!(f, "x"),
            Axis::Y => write!(f, "y"),
            Axis::Z => write!(f, "z"),
        }
    }
}

/// A molecule: gyromagnetic ratios, J-coupling network and coherence time.
#[derive(Debug, Clone)]
pub struct SpinSystem {
    /// Gyromagnetic ratios, Hz/T, one per spin.
    gammas: Vec<f64>,
    /// Symmetric coupling matrix J_ij in Hz with zero diagonal.
    couplings: DMatrix<f64>,
    /// Coherence time tau_coh, seconds.
    coherence_time: f64,
    /// Label.
    name: String,
}

impl SpinSystem {
    /// Build a system from explicit ratios and couplings.
    pub fn new(
        name: impl Into<String>,
        gammas: Vec<f64>,
        couplings: DMatrix<f64>,
        coherence_time: f64,
    ) -> Result<Self> {
        let n = gammas.len();
        if n == 0 {
            return Err(Error::InvalidProtonCount(0));
        }
        if n > MAX_SPINS {
            return Err(Error::TooManySpins {
                n_spins: n,
                max: MAX_SPINS,
            });
        }
        if couplings.nrows() != n || couplings.ncols() != n {
            return Err(Error::DimensionMismatch {
                what: "coupling matrix",
                expected: n,
                actual: couplings.nrows(),
            });
        }
        for i in 0..n {
            if couplings[(i, i)] != 0.0 {
                return Err(Error::AsymmetricCouplings);
            }
            for j in 0..n {
                if (couplings[(i, j)] - couplings[(j, i)]).abs() > 0.0 {
                    return Err(Error::AsymmetricCouplings);
                }
            }
        }
        if coherence_time.is_nan() || coherence_time <= 0.0 {
            return Err(Error::InvalidCoherenceTime(coherence_time));
        }
        Ok(Self {
            gammas,
            couplings,
            coherence_time,
            name: name.into(),
        })
    }

    /// Number of spins.
    pub fn n_spins(&self) -> usize {
        self.gammas.len()
    }

    /// Hilbert-space dimension 2^n.
    pub fn dim(&self) -> usize {
        1 << self.n_spins()
    }

    /// Gyromagnetic ratios, Hz/T.
    pub fn gammas(&self) -> &[f64] {
        &self.gammas
    }

    /// Coupling matrix, Hz.
    pub fn couplings(&self) -> &DMatrix<f64> {
        &self.couplings
    }

    /// Coherence time, seconds.
    pub fn coherence_time(&self) -> f64 {
        self.coherence_time
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Number of satellite (proton) spins in a star system.
    pub fn n_protons(&self) -> usize {
        self.n_spins() - 1
    }
}

/// Product-space angular-momentum operator (dense, dimension 2^n).
#[derive(Debug, Clone)]
pub struct SpinOperator {
    matrix: DMatrix<C64>,
    axis: Axis,
    /// Index of the spin the operator acts on; `None` for collective sums.
    spin_index: Option<usize>,
}

impl SpinOperator {
    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn axis(&self) -> Axis {
        self.axis
    }

    pub fn spin_index(&self) -> Option<usize> {
        self.spin_index
    }

    /// Max elementwise deviation from Hermiticity.
    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }
}

fn pauli_half(axis: Axis) -> DMatrix<C64> {
    let z = |re: f64, im: f64| C64::new(re, im);
    match axis {
        Axis::X => DMatrix::from_row_slice(2, 2, &[z(0.0, 0.0), z(0.5, 0.0), z(0.5, 0.0), z(0.0, 0.0)]),
        Axis::Y => DMatrix::from_row_slice(2, 2, &[z(0.0, 0.0), z(0.0, -0.5), z(0.0, 0.5), z(0.0, 0.0)]),
        Axis::Z => DMatrix::from_row_slice(2, 2, &[z(0.5, 0.0), z(0.0, 0.0), z(0.0, 0.0), z(-0.5, 0.0)]),
    }
}

/// Single-spin operator sigma_axis/2 embedded at `spin_index`, identity
/// elsewhere.
pub fn spin_operator(system: &SpinSystem, spin_index: usize, axis: Axis) -> Result<SpinOperator> {
    let n = system.n_spins();
    if spin_index >= n {
        return Err(Error::SpinIndexOutOfRange {
            index: spin_index,
            n_spins: n,
        });
    }
    let factors: Vec<DMatrix<C64>> = (0..n)
        .map(|j| {
            if j == spin_index {
                pauli_half(axis)
            } else {
                DMatrix::identity(2, 2)
            }
        })
        .collect();
    Ok(SpinOperator {
        matrix: kron_chain(&factors),
        axis,
        spin_index: Some(spin_index),
    })
}

/// Weighted sum of per-spin operators along one axis,
/// `sum_j weights[j] * I_j_axis`.
///
/// With `weights = gammas` this is the magnetization observable
/// `O_axis = sum_j gamma_j I_j_axis`; with unit weights it is the total
/// spin component `F_axis`.
pub fn collective_operator(system: &SpinSystem, weights: &[f64], axis: Axis) -> Result<SpinOperator> {
    let n = system.n_spins();
    if weights.len() != n {
        return Err(Error::WeightLengthMismatch {
            expected: n,
            actual: weights.len(),
        });
    }
    let mut sum = DMatrix::<C64>::zeros(system.dim(), system.dim());
    for (j, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        let op = spin_operator(system, j, axis)?;
        sum += op.matrix() * C64::new(w, 0.0);
    }
    Ok(SpinOperator {
        matrix: sum,
        axis,
        spin_index: None,
    })
}

/// Magnetization observable `O_axis = sum_j gamma_j I_j_axis`.
pub fn magnetization_operator(system: &SpinSystem, axis: Axis) -> SpinOperator {
    collective_operator(system, system.gammas(), axis)
        .expect("gammas always match the spin count")
}

/// Total-spin component `F_axis = sum_j I_j_axis`.
pub fn total_spin_operator(system: &SpinSystem, axis: Axis) -> SpinOperator {
    collective_operator(system, &vec![1.0; system.n_spins()], axis)
        .expect("unit weights always match the spin count")
}

/// Star molecule: one central spin coupled with strength `j_coupling` to
/// `n_protons` equivalent satellites (no satellite-satellite coupling).
pub fn build_star_molecule(
    n_protons: usize,
    j_coupling: f64,
    gamma_center: f64,
    gamma_satellite: f64,
    tau_coh: f64,
) -> Result<SpinSystem> {
    if n_protons == 0 {
        return Err(Error::InvalidProtonCount(n_protons as i64));
    }
    if j_coupling == 0.0 {
        return Err(Error::ZeroCoupling);
    }
    let n = n_protons + 1;
    let mut gammas = vec![gamma_satellite; n];
    gammas[0] = gamma_center;
    let mut couplings = DMatrix::zeros(n, n);
    for p in 1..n {
        couplings[(0, p)] = j_coupling;
        couplings[(p, 0)] = j_coupling;
    }
    SpinSystem::new(format!("star-{n_protons}H"), gammas, couplings, tau_coh)
}

/// Named presets with the published coupling constants and coherence times.
///
/// The acetic-acid preset models the three methyl protons as the satellite
/// set (the acidic proton exchanges rapidly and is left out, as for formic
/// acid).
pub fn preset(name: &str) -> Result<SpinSystem> {
    let mut system = match name {
        "formic_acid" => build_star_molecule(1, 222.2, GAMMA_CARBON, GAMMA_PROTON, 10.4)?,
        "formaldehyde" => build_star_molecule(2, 163.9, GAMMA_CARBON, GAMMA_PROTON, 0.8)?,
        "acetonitrile" => build_star_molecule(3, 136.25, GAMMA_CARBON, GAMMA_PROTON, 4.7)?,
        "acetic_acid" => build_star_molecule(3, 129.5, GAMMA_CARBON, GAMMA_PROTON, 8.8)?,
        other => {
            return Err(Error::MoleculeFile(format!(
                "unknown preset '{other}'; available: {}",
                PRESET_NAMES.join(", ")
            )))
        }
    };
    system.name = name.to_string();
    Ok(system)
}

/// Names accepted by [`preset`].
pub const PRESET_NAMES: [&str; 4] = [
    "formic_acid",
    "formaldehyde",
    "acetonitrile",
    "acetic_acid",
];

#[derive(Debug, Deserialize)]
struct MoleculeFile {
    name: String,
    /// Gyromagnetic ratios, Hz/T.
    gammas: Vec<f64>,
    /// Upper-triangular coupling list: [i, j, J_Hz].
    couplings: Vec<(usize, usize, f64)>,
    tau_coh_s: f64,
}

/// Load a molecule definition from a TOML file with fields `name`,
/// `gammas` (Hz/T), `couplings` (list of `[i, j, J_Hz]`) and `tau_coh_s`.
pub fn load_molecule(path: impl AsRef<Path>) -> Result<SpinSystem> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_molecule(&text)
}

/// Parse a molecule definition from TOML text; see [`load_molecule`].
pub fn parse_molecule(text: &str) -> Result<SpinSystem> {
    let parsed: MoleculeFile =
        toml::from_str(text).map_err(|e| Error::MoleculeFile(e.to_string()))?;
    let n = parsed.gammas.len();
    let mut couplings = DMatrix::zeros(n, n);
    for &(i, j, j_hz) in &parsed.couplings {
        if i >= n || j >= n || i == j {
            return Err(Error::MoleculeFile(format!(
                "coupling entry [{i}, {j}] out of range for {n} spins"
            )));
        }
        couplings[(i, j)] = j_hz;
        couplings[(j, i)] = j_hz;
    }
    SpinSystem::new(parsed.name, parsed.gammas, couplings, parsed.tau_coh_s)
}
