//! Total Hamiltonian of a spin system in a magnetic field and/or a
//! rotation pseudo-field, in Hz.
//!
//! Sign convention follows the negative Zeeman form
//! `H_spins = -sum_j gamma_j I_j . B`; tests pin eigenvalue signs so
//! convention drift is caught.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::hermiticity_defect;
use crate::spin_system::{spin_operator, total_spin_operator, Axis, SpinSystem};

/// Magnetic field in spherical parameterization:
/// `B (sin t cos p, sin t sin p, cos t)`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct FieldVector {
    /// Polar angle, rad, in [0, pi].
    pub theta: f64,
    /// Azimuthal angle, rad, in [0, 2 pi).
    pub phi: f64,
    /// Magnitude, tesla, >= 0.
    pub magnitude: f64,
}

impl FieldVector {
    pub fn new(theta: f64, phi: f64, magnitude: f64) -> Result<Self> {
        let valid = magnitude >= 0.0
            && (0.0..=std::f64::consts::PI).contains(&theta)
            && (0.0..std::f64::consts::TAU).contains(&phi);
        if !valid {
            return Err(Error::InvalidFieldSpec);
        }
        Ok(Self {
            theta,
            phi,
            magnitude,
        })
    }

    /// Field along a laboratory axis.
    pub fn along(axis: Axis, magnitude: f64) -> Result<Self> {
        let (theta, phi) = match axis {
            Axis::X => (std::f64::consts::FRAC_PI_2, 0.0),
            Axis::Y => (std::f64::consts::FRAC_PI_2, std::f64::consts::FRAC_PI_2),
            Axis::Z => (0.0, 0.0),
        };
        Self::new(theta, phi, magnitude)
    }

    /// Cartesian components, tesla.
    pub fn cartesian(&self) -> Vector3<f64> {
        let (st, ct) = self.theta.sin_cos();
        let (sp, cp) = self.phi.sin_cos();
        Vector3::new(self.magnitude * st * cp, self.magnitude * st * sp, self.magnitude * ct)
    }
}

/// Rotation vector with the same parameterization as [`FieldVector`];
/// magnitude is the rotation frequency Omega in Hz. Every spin sees the
/// pseudo-field `B_j = Omega / gamma_j`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct RotationVector {
    pub theta: f64,
    pub phi: f64,
    /// Rotation frequency, Hz.
    pub magnitude: f64,
}

impl RotationVector {
    pub fn new(theta: f64, phi: f64, magnitude: f64) -> Result<Self> {
        let field = FieldVector::new(theta, phi, magnitude)?;
        Ok(Self {
            theta: field.theta,
            phi: field.phi,
            magnitude: field.magnitude,
        })
    }

    pub fn along(axis: Axis, magnitude: f64) -> Result<Self> {
        let f = FieldVector::along(axis, magnitude)?;
        Ok(Self {
            theta: f.theta,
            phi: f.phi,
            magnitude: f.magnitude,
        })
    }

    /// Cartesian components, Hz.
    pub fn cartesian(&self) -> Vector3<f64> {
        FieldVector {
            theta: self.theta,
            phi: self.phi,
            magnitude: self.magnitude,
        }
        .cartesian()
    }
}

/// Dense Hermitian Hamiltonian in Hz.
#[derive(Debug, Clone)]
pub struct Hamiltonian {
    matrix: DMatrix<C64>,
}

impl Hamiltonian {
    fn from_matrix(matrix: DMatrix<C64>) -> Self {
        debug_assert!(hermiticity_defect(&matrix) < 1e-10);
        Self { matrix }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.matrix
    }

    pub fn into_matrix(self) -> DMatrix<C64> {
        self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }

    pub fn add(&self, other: &Hamiltonian) -> Hamiltonian {
        Hamiltonian::from_matrix(&self.matrix + &other.matrix)
    }
}

fn dot_with_spins(system: &SpinSystem, weights: &[f64], direction: Vector3<f64>) -> DMatrix<C64> {
    let dim = system.dim();
    let mut sum = DMatrix::<C64>::zeros(dim, dim);
    for (j, &w) in weights.iter().enumerate() {
        if w == 0.0 {
            continue;
        }
        for (axis, &component) in Axis::ALL.iter().zip(direction.iter()) {
            if component == 0.0 {
                continue;
            }
            let op = spin_operator(system, j, *axis).expect("index in range");
            sum += op.matrix() * C64::new(w * component, 0.0);
        }
    }
    sum
}

/// Zeeman term `H_spins = -sum_j gamma_j (I_j . B)`, Hz.
pub fn zeeman_hamiltonian(system: &SpinSystem, field: &FieldVector) -> Hamiltonian {
    let b = field.cartesian();
    let weights: Vec<f64> = system.gammas().iter().map(|&g| -g).collect();
    Hamiltonian::from_matrix(dot_with_spins(system, &weights, b))
}

/// Heisenberg coupling term `H_int = sum_{j>i} J_ij (I_i . I_j)`, Hz.
pub fn coupling_hamiltonian(system: &SpinSystem) -> Hamiltonian {
    let dim = system.dim();
    let mut sum = DMatrix::<C64>::zeros(dim, dim);
    let n = system.n_spins();
    for i in 0..n {
        for j in (i + 1)..n {
            let j_ij = system.couplings()[(i, j)];
            if j_ij == 0.0 {
                continue;
            }
            for axis in Axis::ALL {
                let a = spin_operator(system, i, axis).expect("index in range");
                let b = spin_operator(system, j, axis).expect("index in range");
                sum += a.matrix() * b.matrix() * C64::new(j_ij, 0.0);
            }
        }
    }
    Hamiltonian::from_matrix(sum)
}

/// Rotation pseudo-field term `H_rot = -Omega . F` with `F = sum_j I_j`, Hz.
pub fn rotation_hamiltonian(system: &SpinSystem, rotation: &RotationVector) -> Hamiltonian {
    let omega = rotation.cartesian();
    let dim = system.dim();
    let mut sum = DMatrix::<C64>::zeros(dim, dim);
    for (axis, &component) in Axis::ALL.iter().zip(omega.iter()) {
        if component == 0.0 {
            continue;
        }
        let f = total_spin_operator(system, *axis);
        sum += f.matrix() * C64::new(-component, 0.0);
    }
    Hamiltonian::from_matrix(sum)
}

/// Total Hamiltonian `H = H_rot + H_spins + H_int`; absent field or
/// rotation contributes zero.
pub fn total_hamiltonian(
    system: &SpinSystem,
    field: Option<&FieldVector>,
    rotation: Option<&RotationVector>,
) -> Hamiltonian {
    let mut h = coupling_hamiltonian(system).into_matrix();
    if let Some(f) = field {
        h += zeeman_hamiltonian(system, f).into_matrix();
    }
    if let Some(r) = rotation {
        h += rotation_hamiltonian(system, r).into_matrix();
    }
    Hamiltonian::from_matrix(h)
}

/// Strong-coupling regime ratio `|gamma_max B| / min |J_ij|` over nonzero
/// couplings. The splitting formulas and the factored amplitude model are
/// first-order accurate only when this is << 1.
pub fn regime_ratio(system: &SpinSystem, field_magnitude: f64) -> f64 {
    let gamma_max = system.gammas().iter().fold(0.0f64, |m, &g| m.max(g.abs()));
    let n = system.n_spins();
    let mut j_min = f64::INFINITY;
    for i in 0..n {
        for j in (i + 1)..n {
            let j_ij = system.couplings()[(i, j)].abs();
            if j_ij > 0.0 {
                j_min = j_min.min(j_ij);
            }
        }
    }
    if !j_min.is_finite() {
        return f64::INFINITY;
    }
    (gamma_max * field_magnitude).abs() / j_min
}
