//! Field-aligned coordinate system and the factored amplitude formula.
//!
//! With the quantization axis `z'` along the field, the transition matrix
//! elements of the primed observables `O'_l' = sum_j gamma_j I_j . e_l'`
//! are independent of the field orientation: the Hamiltonian at any
//! `(theta, phi)` is a global spin rotation of the reference one, and the
//! rotation cancels in the primed elements. A line amplitude then factors
//! into an orientation-independent vector and projections of `P(theta, phi)`:
//!
//! `R = scale * |k_g . P v| * |z . P v|`
//!
//! which is what lets a cheap grid search recover `(theta, phi)`.

use nalgebra::{DMatrix, Matrix3, Vector3};
use num_complex::Complex64 as C64;

use crate::analytic::{assign_state_labels, projected_total_spin, subset_spin_squared, StateLabel};
use crate::error::Result;
use crate::hamiltonian::Hamiltonian;
use crate::linalg::EigenSystem;
use crate::spin_system::{magnetization_operator, Axis, SpinSystem};

/// Below this |sin theta| the azimuthal tangent is singular and the fixed
/// phi = 0 chart is used instead.
const POLE_TOLERANCE: f64 = 1e-12;

/// Orthonormal field-aligned basis and its transformation matrix.
#[derive(Debug, Clone, Copy)]
pub struct FrameBasis {
    pub x_prime: Vector3<f64>,
    pub y_prime: Vector3<f64>,
    pub z_prime: Vector3<f64>,
    /// Columns are (x', y', z'); maps primed components to lab components.
    pub p: Matrix3<f64>,
}

/// Field-aligned basis: `z' = B/B`, `x' = dz'/dtheta`,
/// `y' = (1/sin theta) dz'/dphi`. At the poles the phi = 0 chart is fixed:
/// `x' = (cos theta, 0, -sin theta)`, `y' = (0, 1, 0)`.
pub fn frame_basis(theta: f64, phi: f64) -> FrameBasis {
    let (st, ct) = theta.sin_cos();
    let (x_prime, y_prime, z_prime) = if st.abs() < POLE_TOLERANCE {
        (
            Vector3::new(ct, 0.0, -st),
            Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(st, 0.0, ct),
        )
    } else {
        let (sp, cp) = phi.sin_cos();
        (
            Vector3::new(ct * cp, ct * sp, -st),
            Vector3::new(-sp, cp, 0.0),
            Vector3::new(st * cp, st * sp, ct),
        )
    };
    let p = Matrix3::from_columns(&[x_prime, y_prime, z_prime]);
    FrameBasis {
        x_prime,
        y_prime,
        z_prime,
        p,
    }
}

/// One transition's primed-frame observable matrix element.
#[derive(Debug, Clone)]
pub struct PrimedElement {
    pub bra_index: usize,
    pub ket_index: usize,
    /// Transition frequency `E_ket - E_bra`, Hz.
    pub frequency: f64,
    pub bra_label: StateLabel,
    pub ket_label: StateLabel,
    /// `(<i|O'_x'|j>, <i|O'_y'|j>, <i|O'_z'|j>)`.
    pub vector: Vector3<C64>,
}

/// Table of primed matrix elements for every eigenpair of a Hamiltonian,
/// with the quantization axis along `(theta, phi)`.
///
/// Degenerate eigenspaces are refined by F^2, the satellite Casimir and
/// F_z' so the basis is deterministic and labelable; a labeling failure
/// (weak-coupling regime) propagates as an error.
pub fn primed_matrix_elements(
    system: &SpinSystem,
    hamiltonian: &Hamiltonian,
    theta: f64,
    phi: f64,
) -> Result<Vec<PrimedElement>> {
    let basis = frame_basis(theta, phi);
    let mut eig = EigenSystem::new(hamiltonian.matrix());
    let all: Vec<usize> = (0..system.n_spins()).collect();
    let satellites: Vec<usize> = (1..system.n_spins()).collect();
    let f2 = subset_spin_squared(system, &all);
    let fsat2 = subset_spin_squared(system, &satellites);
    let fq = projected_total_spin(system, basis.z_prime);
    eig.refine(&[&f2, &fsat2, &fq]);
    let labels = assign_state_labels(system, &eig, basis.z_prime)?;

    let lab_ops: [DMatrix<C64>; 3] = [
        magnetization_operator(system, Axis::X).into_matrix(),
        magnetization_operator(system, Axis::Y).into_matrix(),
        magnetization_operator(system, Axis::Z).into_matrix(),
    ];
    let primed_ops: Vec<DMatrix<C64>> = [basis.x_prime, basis.y_prime, basis.z_prime]
        .iter()
        .map(|axis| {
            let mut op = DMatrix::<C64>::zeros(system.dim(), system.dim());
            for (lab, &component) in lab_ops.iter().zip(axis.iter()) {
                if component != 0.0 {
                    op += lab * C64::new(component, 0.0);
                }
            }
            op
        })
        .collect();

    // Elements in the eigenbasis, one matrix product per operator.
    let v = &eig.vectors;
    let in_eigenbasis: Vec<DMatrix<C64>> =
        primed_ops.iter().map(|op| v.adjoint() * op * v).collect();

    let dim = eig.dim();
    let mut table = Vec::with_capacity(dim * (dim - 1) / 2);
    for i in 0..dim {
        for j in (i + 1)..dim {
            table.push(PrimedElement {
                bra_index: i,
                ket_index: j,
                frequency: eig.energies[j] - eig.energies[i],
                bra_label: labels[i],
                ket_label: labels[j],
                vector: Vector3::new(
                    in_eigenbasis[0][(i, j)],
                    in_eigenbasis[1][(i, j)],
                    in_eigenbasis[2][(i, j)],
                ),
            });
        }
    }
    Ok(table)
}

/// Lab-frame projection of a primed element vector: `P(theta, phi) v`.
pub fn lab_vector(theta: f64, phi: f64, primed: &Vector3<C64>) -> Vector3<C64> {
    let p = frame_basis(theta, phi).p;
    let mut out = Vector3::new(C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0));
    for row in 0..3 {
        let mut acc = C64::new(0.0, 0.0);
        for col in 0..3 {
            acc += primed[col] * C64::new(p[(row, col)], 0.0);
        }
        out[row] = acc;
    }
    out
}

/// Factored line amplitude
/// `scale * |k_g . P(theta, phi) v| * |z . P(theta, phi) v|`.
pub fn amplitude_formula(
    theta: f64,
    phi: f64,
    guiding_axis: &Vector3<f64>,
    primed_element: &Vector3<C64>,
    polarization_scale: f64,
) -> f64 {
    pair_amplitude(theta, phi, guiding_axis, primed_element, polarization_scale).norm()
}

/// Complex amplitude of one transition pair,
/// `-scale (k_g . P v) conj(z . P v)`; equals the catalogue amplitude
/// `<i|rho_0|j><j|O_z|i>` and must be summed over degenerate pairs before
/// its magnitude is compared with a merged line.
pub fn pair_amplitude(
    theta: f64,
    phi: f64,
    guiding_axis: &Vector3<f64>,
    primed_element: &Vector3<C64>,
    polarization_scale: f64,
) -> C64 {
    let lab = lab_vector(theta, phi, primed_element);
    let project = |axis: &Vector3<f64>| {
        lab[0] * C64::new(axis[0], 0.0)
            + lab[1] * C64::new(axis[1], 0.0)
            + lab[2] * C64::new(axis[2], 0.0)
    };
    let rho_side = project(guiding_axis);
    let obs_side = project(&Vector3::new(0.0, 0.0, 1.0));
    -rho_side * obs_side.conj() * C64::new(polarization_scale, 0.0)
}

/// Remove the arbitrary global phase of `v` by aligning it against a
/// reference vector (maximizes Re <reference, v>). Complex 3-vectors that
/// differ only by a global eigenvector phase become comparable elementwise.
pub fn align_phase(v: &Vector3<C64>, reference: &Vector3<C64>) -> Vector3<C64> {
    let overlap: C64 = (0..3).map(|i| reference[i].conj() * v[i]).sum();
    if overlap.norm() == 0.0 {
        return *v;
    }
    let correction = (overlap / C64::new(overlap.norm(), 0.0)).conj();
    Vector3::new(v[0] * correction, v[1] * correction, v[2] * correction)
}
