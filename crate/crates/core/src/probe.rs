//! Initial probe density operator prepared by the guiding field.
//!
//! In the high-temperature approximation the state after adiabatic
//! transfer is `rho_0 = 1/2^n - sum_j eps_j (I_j . k_g)` with
//! `eps_j = h gamma_j B_p / (k_B T)`. The identity part carries no signal
//! (it is stationary and traceless observables ignore it), so the traceless
//! deviation is kept separately and used for all amplitude computations.

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64 as C64;

use crate::constants::{BOLTZMANN, PLANCK};
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::linalg::EigenSystem;
use crate::spin_system::{spin_operator, Axis, SpinSystem};

/// Thermal probe state: identity/2^n plus a traceless deviation along the
/// guiding axis.
#[derive(Debug, Clone)]
pub struct ProbeState {
    deviation: DMatrix<C64>,
    guiding_axis: Vector3<f64>,
    polarization_scale: f64,
    dim: usize,
}

impl ProbeState {
    /// Traceless deviation part, `-sum_j eps_j (I_j . k_g)`.
    pub fn deviation(&self) -> &DMatrix<C64> {
        &self.deviation
    }

    /// Full density matrix `1/2^n + deviation`.
    pub fn full_matrix(&self) -> DMatrix<C64> {
        let id = DMatrix::<C64>::identity(self.dim, self.dim);
        id * C64::new(1.0 / self.dim as f64, 0.0) + &self.deviation
    }

    /// Unit vector along the guiding field.
    pub fn guiding_axis(&self) -> Vector3<f64> {
        self.guiding_axis
    }

    /// Common polarization factor `h B_p / (k_B T)`; `eps_j` is this times
    /// `gamma_j`.
    pub fn polarization_scale(&self) -> f64 {
        self.polarization_scale
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
}

/// Guiding-field direction: a lab axis or an arbitrary (normalizable)
/// 3-vector.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum GuidingAxis {
    Lab(Axis),
    Custom([f64; 3]),
}

impl GuidingAxis {
    pub fn unit_vector(&self) -> Result<Vector3<f64>> {
        let v = match self {
            GuidingAxis::Lab(axis) => Vector3::from(axis.unit_vector()),
            GuidingAxis::Custom(v) => Vector3::from(*v),
        };
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::ZeroNormAxis);
        }
        Ok(v / norm)
    }
}

impl From<Axis> for GuidingAxis {
    fn from(axis: Axis) -> Self {
        GuidingAxis::Lab(axis)
    }
}

impl From<[f64; 3]> for GuidingAxis {
    fn from(v: [f64; 3]) -> Self {
        GuidingAxis::Custom(v)
    }
}

/// Thermal probe polarized along `guiding_axis` by a field `polarizing_field`
/// (tesla) at `temperature` (kelvin).
pub fn thermal_probe(
    system: &SpinSystem,
    guiding_axis: impl Into<GuidingAxis>,
    polarizing_field: f64,
    temperature: f64,
) -> Result<ProbeState> {
    let axis = guiding_axis.into().unit_vector()?;
    if polarizing_field.is_nan() || polarizing_field < 0.0 {
        return Err(Error::NegativePolarizingField(polarizing_field));
    }
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(Error::InvalidTemperature(temperature));
    }
    let scale = PLANCK * polarizing_field / (BOLTZMANN * temperature);
    let dim = system.dim();
    let mut deviation = DMatrix::<C64>::zeros(dim, dim);
    for (j, &gamma) in system.gammas().iter().enumerate() {
        let eps = gamma * scale;
        for (ax, &component) in Axis::ALL.iter().zip(axis.iter()) {
            if component == 0.0 {
                continue;
            }
            let op = spin_operator(system, j, *ax).expect("index in range");
            deviation += op.matrix() * C64::new(-eps * component, 0.0);
        }
    }
    Ok(ProbeState {
        deviation,
        guiding_axis: axis,
        polarization_scale: scale,
        dim,
    })
}

/// Evolve the probe for `t` seconds under a Hamiltonian given in Hz
/// (`U = exp(-i 2 pi H t)`), returning the evolved state.
pub fn propagate(probe: &ProbeState, hamiltonian: &Hamiltonian, t: f64) -> ProbeState {
    let eig = EigenSystem::new(hamiltonian.matrix());
    let dim = probe.dim;
    let phases: Vec<C64> = eig
        .energies
        .iter()
        .map(|&e| C64::new(0.0, -std::f64::consts::TAU * e * t).exp())
        .collect();
    // U rho U^dagger via the eigenbasis.
    let v = &eig.vectors;
    let rho_eig = v.adjoint() * &probe.deviation * v;
    let mut evolved = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..dim {
        for j in 0..dim {
            evolved[(i, j)] = phases[i] * rho_eig[(i, j)] * phases[j].conj();
        }
    }
    ProbeState {
        deviation: v * evolved * v.adjoint(),
        guiding_axis: probe.guiding_axis,
        polarization_scale: probe.polarization_scale,
        dim,
    }
}

/// Expectation value `Tr[rho O]` of a traceless observable on the probe
/// (the identity part drops out).
pub fn expectation(probe: &ProbeState, observable: &DMatrix<C64>) -> f64 {
    (observable * probe.deviation()).trace().re
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{total_hamiltonian, FieldVector};
    use crate::linalg::{hermiticity_defect, rotation_unitary};
    use crate::spin_system::{magnetization_operator, preset, total_spin_operator};
    use approx::assert_relative_eq;

    #[test]
    fn epsilon_matches_constants_arithmetic() {
        let sys = preset("formic_acid").unwrap();
        let probe = thermal_probe(&sys, Axis::Z, 1.3, 298.0).unwrap();
        let eps_h = probe.polarization_scale() * 42.5775e6;
        // h * 42.5775e6 * 1.3 / (k_B * 298) ~ 8.9e-6
        assert_relative_eq!(eps_h, 8.915e-6, max_relative = 1e-3);
    }

    #[test]
    fn deviation_is_hermitian_traceless() {
        let sys = preset("acetonitrile").unwrap();
        let probe = thermal_probe(&sys, [0.3, -1.2, 0.5], 1.3, 298.0).unwrap();
        assert!(hermiticity_defect(probe.deviation()) < 1e-12);
        assert!(probe.deviation().trace().norm() < 1e-12);
        let full = probe.full_matrix();
        assert_relative_eq!(full.trace().re, 1.0, max_relative = 1e-12);
        let eig = EigenSystem::new(&full);
        assert!(eig.energies.iter().all(|&p| p > 0.0 && p < 1.0));
    }

    #[test]
    fn x_and_z_probes_related_by_rotation() {
        let sys = preset("formic_acid").unwrap();
        let probe_z = thermal_probe(&sys, Axis::Z, 1.3, 298.0).unwrap();
        let probe_x = thermal_probe(&sys, Axis::X, 1.3, 298.0).unwrap();
        // Global pi/2 rotation about y maps z onto x.
        let fy = total_spin_operator(&sys, Axis::Y).into_matrix();
        let u = rotation_unitary(&fy, std::f64::consts::FRAC_PI_2);
        let rotated = &u * probe_z.deviation() * u.adjoint();
        let defect = (&rotated - probe_x.deviation())
            .iter()
            .map(|z| z.norm())
            .fold(0.0, f64::max);
        assert!(defect < 1e-12 * probe_z.polarization_scale() * 42.5775e6);
    }

    #[test]
    fn zero_polarizing_field_gives_mixed_state() {
        let sys = preset("formic_acid").unwrap();
        let probe = thermal_probe(&sys, Axis::Z, 0.0, 298.0).unwrap();
        assert!(probe.deviation().iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn zero_axis_rejected() {
        let sys = preset("formic_acid").unwrap();
        assert!(matches!(
            thermal_probe(&sys, [0.0, 0.0, 0.0], 1.3, 298.0),
            Err(Error::ZeroNormAxis)
        ));
    }

    #[test]
    fn magnetization_along_guiding_axis() {
        let sys = preset("formic_acid").unwrap();
        let probe = thermal_probe(&sys, Axis::Z, 1.3, 298.0).unwrap();
        let oz = magnetization_operator(&sys, Axis::Z);
        let expected: f64 = -probe.polarization_scale()
            * sys.gammas().iter().map(|g| g * g).sum::<f64>()
            * (sys.dim() as f64 / 4.0);
        assert_relative_eq!(expectation(&probe, oz.matrix()), expected, max_relative = 1e-12);
        assert!(expectation(&probe, oz.matrix()) < 0.0);
        // Orthogonal axes see nothing.
        for axis in [Axis::X, Axis::Y] {
            let o = magnetization_operator(&sys, axis);
            assert!(expectation(&probe, o.matrix()).abs() <= 1e-12 * expected.abs());
        }
    }

    #[test]
    fn unitary_evolution_preserves_spectrum() {
        let sys = preset("formic_acid").unwrap();
        let probe = thermal_probe(&sys, Axis::X, 1.3, 298.0).unwrap();
        let field = FieldVector::new(0.7, 2.1, 1e-7).unwrap();
        let h = total_hamiltonian(&sys, Some(&field), None);
        let evolved = propagate(&probe, &h, 0.137);
        assert!(evolved.deviation().trace().norm() < 1e-15);
        let before = EigenSystem::new(probe.deviation()).energies;
        let after = EigenSystem::new(evolved.deviation()).energies;
        for (a, b) in before.iter().zip(&after) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}
