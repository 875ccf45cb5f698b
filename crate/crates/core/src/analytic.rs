//! Closed-form oracle for star-topology spin clusters: quantum-number
//! labeling, selection rules, first-order splitting formulas and the
//! two-spin mixing-angle theory. Used to cross-validate the numerical
//! spectrum pipeline.
//!
//! A star cluster with one central spin and `n` equivalent satellites has
//! good quantum numbers `f` (total spin), `m_f` (projection along the field)
//! and the satellite manifold index `k` with `f_sat = n/2 - k`. Transitions
//! with measurement parallel to the field obey `Delta f = 0, +-1`,
//! `Delta m_f = 0`, `Delta k = 0` (zero-quantum); perpendicular measurement
//! selects `Delta m_f = +-1` (single-quantum).

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64 as C64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::EigenSystem;
use crate::spectrum::TransitionLine;
use crate::spin_system::{spin_operator, Axis, SpinSystem};

/// Labeling fails when an expectation value sits further than this from the
/// nearest valid quantum number.
pub const LABELING_TOLERANCE: f64 = 0.1;

/// Advised upper bound on the strong-coupling regime ratio; reports carry a
/// warning flag above it.
pub const REGIME_RATIO_ADVISED: f64 = 0.1;

/// Quantum numbers of a single eigenstate, `|f m_f; k>`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StateLabel {
    /// Total angular momentum (integer or half-integer).
    pub f: f64,
    /// Projection along the quantization axis.
    pub m_f: f64,
    /// Satellite-manifold index, `f_sat = n_sat/2 - k`.
    pub k: usize,
}

/// Quantum numbers of a transition between `|f m_f; k>` and
/// `|f' m_f'; k'>`. Allowed lines have `Delta f in {0, +-1}` and
/// `Delta k = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TransitionLabel {
    pub f: f64,
    pub m_f: f64,
    pub k: usize,
    pub f_prime: f64,
    pub m_f_prime: f64,
    pub k_prime: usize,
}

impl TransitionLabel {
    pub fn new(bra: StateLabel, ket: StateLabel) -> Self {
        Self {
            f: bra.f,
            m_f: bra.m_f,
            k: bra.k,
            f_prime: ket.f,
            m_f_prime: ket.m_f,
            k_prime: ket.k,
        }
    }

    pub fn delta_f(&self) -> f64 {
        self.f_prime - self.f
    }

    pub fn delta_m(&self) -> f64 {
        self.m_f_prime - self.m_f
    }

    pub fn delta_k(&self) -> i64 {
        self.k_prime as i64 - self.k as i64
    }

    pub fn is_zero_quantum(&self) -> bool {
        self.delta_m().abs() < 0.25
    }

    pub fn is_single_quantum(&self) -> bool {
        (self.delta_m().abs() - 1.0).abs() < 0.25
    }

    /// Selection rules for allowed lines: `Delta f in {0, +-1}`,
    /// `Delta k = 0`, `Delta m_f in {0, +-1}`.
    pub fn is_allowed(&self) -> bool {
        self.delta_f().abs() < 1.25 && self.delta_k() == 0 && self.delta_m().abs() < 1.25
    }
}

/// One analytic line: frequency plus its transition label.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ReportLine {
    pub frequency: f64,
    pub label: TransitionLabel,
}

/// First-order line positions of one satellite manifold.
#[derive(Debug, Clone, Serialize)]
pub struct SplittingReport {
    pub n: usize,
    pub k: usize,
    /// Manifold center `J (1 + n - 2k) / 2`, Hz.
    pub center: f64,
    /// Zero-quantum lines (`n - 2k` entries), sorted by frequency.
    pub zero_quantum: Vec<ReportLine>,
    /// Single-quantum lines (`2 (n - 2k)` entries), sorted by frequency.
    pub single_quantum: Vec<ReportLine>,
    /// Adjacent zero-quantum spacing, Hz.
    pub delta_zq: f64,
    /// Central single-quantum doublet splitting, Hz.
    pub delta_sq: f64,
    /// Number of degenerate copies of this manifold.
    pub multiplicity: usize,
    /// `gamma_max B / J`; formulas are first-order accurate only for << 1.
    pub regime_ratio: f64,
    /// Set when `regime_ratio` exceeds the advised bound.
    pub regime_warning: bool,
}

impl SplittingReport {
    /// Distinct frequencies of a line list under a merge tolerance.
    pub fn distinct_frequencies(lines: &[ReportLine], tol: f64) -> Vec<f64> {
        let mut freqs: Vec<f64> = lines.iter().map(|l| l.frequency).collect();
        freqs.sort_by(f64::total_cmp);
        freqs.dedup_by(|a, b| (*a - *b).abs() <= tol);
        freqs
    }
}

fn check_manifold(n: usize, k: usize) -> Result<()> {
    let k_max = if n.is_multiple_of(2) { n / 2 } else { (n - 1) / 2 };
    if n == 0 || k > k_max {
        return Err(Error::InvalidManifold { n, k });
    }
    Ok(())
}

/// Degenerate copies of the `f_sat = n/2 - k` manifold of `n` equivalent
/// spin-1/2 satellites: `C(n, k) - C(n, k-1)`.
pub fn manifold_multiplicity(n: usize, k: usize) -> usize {
    fn binom(n: usize, k: usize) -> usize {
        if k > n {
            return 0;
        }
        let mut acc = 1usize;
        for i in 0..k {
            acc = acc * (n - i) / (i + 1);
        }
        acc
    }
    if k == 0 {
        1
    } else {
        binom(n, k) - binom(n, k - 1)
    }
}

/// Effective gyromagnetic ratios of the `f = f_sat +- 1/2` multiplets,
/// from the projection theorem. `n_eff = n - 2k`.
fn effective_gammas(n_eff: f64, gamma_h: f64, gamma_c: f64) -> (f64, f64) {
    let d = 1.0 + n_eff;
    let gamma_plus = (n_eff * gamma_h + gamma_c) / d;
    let gamma_minus = ((n_eff + 2.0) * gamma_h - gamma_c) / d;
    (gamma_plus, gamma_minus)
}

/// First-order Zeeman line positions for manifold `k` of a star molecule
/// with `n` satellites, coupling `j` (Hz), field `b` (tesla).
///
/// Energies are `E(f, m) = E_J(f) - m B gamma_eff(f)`, giving zero-quantum
/// lines at `center + 2 m (gamma_h - gamma_c) B / (1 + n - 2k)` and the
/// single-quantum set shifted by `-Delta_m [ (n-2k) gamma_h + gamma_c ] B /
/// (1 + n - 2k)`. The line set is identical to the standard first-order
/// splitting formulas; the `m` labels carried here are the ones that match
/// exact diagonalization with the negative Zeeman sign convention.
pub fn zeeman_lines(
    n: usize,
    k: usize,
    j: f64,
    b: f64,
    gamma_h: f64,
    gamma_c: f64,
) -> Result<SplittingReport> {
    check_manifold(n, k)?;
    let n_eff = (n as f64) - 2.0 * (k as f64);
    let d = 1.0 + n_eff;
    let center = 0.5 * j * d;
    let f_sat = n_eff / 2.0;
    let f_minus = f_sat - 0.5;
    let f_plus = f_sat + 0.5;
    let regime_ratio = (gamma_h.abs().max(gamma_c.abs()) * b / j).abs();

    let mut zero_quantum = Vec::new();
    let mut single_quantum = Vec::new();
    if n_eff >= 1.0 {
        let (gamma_p, gamma_m) = effective_gammas(n_eff, gamma_h, gamma_c);
        let mut m = -f_minus;
        while m <= f_minus + 0.25 {
            let zq_freq = center - b * (m * gamma_p - m * gamma_m);
            zero_quantum.push(ReportLine {
                frequency: zq_freq,
                label: TransitionLabel {
                    f: f_minus,
                    m_f: m,
                    k,
                    f_prime: f_plus,
                    m_f_prime: m,
                    k_prime: k,
                },
            });
            for delta_m in [-1.0, 1.0] {
                let m_prime = m + delta_m;
                let freq = center - b * (m_prime * gamma_p - m * gamma_m);
                single_quantum.push(ReportLine {
                    frequency: freq,
                    label: TransitionLabel {
                        f: f_minus,
                        m_f: m,
                        k,
                        f_prime: f_plus,
                        m_f_prime: m_prime,
                        k_prime: k,
                    },
                });
            }
            m += 1.0;
        }
    }
    zero_quantum.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    single_quantum.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));

    let (delta_zq, delta_sq) = if n_eff >= 1.0 {
        (
            2.0 * (gamma_h - gamma_c) * b / d,
            2.0 * (gamma_h + n_eff * gamma_c) * b / d,
        )
    } else {
        (0.0, 0.0)
    };

    Ok(SplittingReport {
        n,
        k,
        center,
        zero_quantum,
        single_quantum,
        delta_zq,
        delta_sq,
        multiplicity: manifold_multiplicity(n, k),
        regime_ratio,
        regime_warning: regime_ratio > REGIME_RATIO_ADVISED,
    })
}

/// Line positions for manifold `k` under a pure inertial rotation of
/// frequency `omega` (Hz) and zero real field. Both multiplets acquire the
/// same effective shift, so all zero-quantum lines collapse onto the center
/// and the single-quantum lines form a doublet at `center +- omega` exactly.
pub fn rotation_lines(n: usize, k: usize, j: f64, omega: f64) -> Result<SplittingReport> {
    check_manifold(n, k)?;
    let n_eff = (n as f64) - 2.0 * (k as f64);
    let d = 1.0 + n_eff;
    let center = 0.5 * j * d;
    let f_minus = n_eff / 2.0 - 0.5;
    let f_plus = n_eff / 2.0 + 0.5;

    let mut zero_quantum = Vec::new();
    let mut single_quantum = Vec::new();
    if n_eff >= 1.0 {
        let mut m = -f_minus;
        while m <= f_minus + 0.25 {
            zero_quantum.push(ReportLine {
                frequency: center,
                label: TransitionLabel {
                    f: f_minus,
                    m_f: m,
                    k,
                    f_prime: f_plus,
                    m_f_prime: m,
                    k_prime: k,
                },
            });
            for delta_m in [-1.0, 1.0] {
                single_quantum.push(ReportLine {
                    frequency: center - delta_m * omega,
                    label: TransitionLabel {
                        f: f_minus,
                        m_f: m,
                        k,
                        f_prime: f_plus,
                        m_f_prime: m + delta_m,
                        k_prime: k,
                    },
                });
            }
            m += 1.0;
        }
    }
    zero_quantum.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
    single_quantum.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));

    Ok(SplittingReport {
        n,
        k,
        center,
        zero_quantum,
        single_quantum,
        delta_zq: 0.0,
        delta_sq: if n_eff >= 1.0 { 2.0 * omega } else { 0.0 },
        multiplicity: manifold_multiplicity(n, k),
        regime_ratio: 0.0,
        regime_warning: false,
    })
}

/// Two-spin mixing-angle theory.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct TwoSpinTheory {
    /// Singlet-triplet mixing angle, rad, with `tan 2 xi = J / ((g1 - g2) B)`.
    pub xi: f64,
    /// Zero-quantum transition weight `p = |(g1 - g2) sin 2 xi| / 2`, Hz/T.
    pub zq_probability: f64,
}

/// Mixing angle and zero-quantum transition weight of a heteronuclear pair.
///
/// In the strong-coupling limit `p -> |g1 - g2| / 2`; for `J = 0` or in the
/// weak-coupling limit `p -> 0`, so the zero-quantum line disappears.
pub fn two_spin_theory(gamma_1: f64, gamma_2: f64, j: f64, b: f64) -> Result<TwoSpinTheory> {
    if j == 0.0 && b == 0.0 {
        return Err(Error::DegenerateTwoSpin);
    }
    let two_xi = f64::atan2(j, (gamma_1 - gamma_2) * b);
    let xi = 0.5 * two_xi;
    let zq_probability = 0.5 * ((gamma_1 - gamma_2) * two_xi.sin()).abs();
    Ok(TwoSpinTheory { xi, zq_probability })
}

fn round_half_integer(x: f64) -> f64 {
    (2.0 * x).round() / 2.0
}

/// Total-spin-squared operator over a subset of spins.
pub fn subset_spin_squared(system: &SpinSystem, indices: &[usize]) -> DMatrix<C64> {
    let dim = system.dim();
    let mut sum = DMatrix::<C64>::zeros(dim, dim);
    for axis in Axis::ALL {
        let mut component = DMatrix::<C64>::zeros(dim, dim);
        for &j in indices {
            component += spin_operator(system, j, axis).expect("index in range").matrix();
        }
        sum += &component * &component;
    }
    sum
}

/// Total-spin projection along an arbitrary unit axis.
pub fn projected_total_spin(system: &SpinSystem, axis: Vector3<f64>) -> DMatrix<C64> {
    let dim = system.dim();
    let mut sum = DMatrix::<C64>::zeros(dim, dim);
    for (ax, &component) in Axis::ALL.iter().zip(axis.iter()) {
        if component == 0.0 {
            continue;
        }
        for j in 0..system.n_spins() {
            let op = spin_operator(system, j, *ax).expect("index in range");
            sum += op.matrix() * C64::new(component, 0.0);
        }
    }
    sum
}

/// Assign `|f m_f; k>` labels to the eigenstates of a star-molecule
/// Hamiltonian by rounding the expectation values of F^2, F_q (projection
/// on the quantization axis) and the satellite Casimir.
///
/// Fails with [`Error::LabelingFailure`] when any expectation value deviates
/// by more than [`LABELING_TOLERANCE`] from the nearest valid quantum
/// number, which happens outside the strong-coupling regime.
pub fn assign_state_labels(
    system: &SpinSystem,
    eig: &EigenSystem,
    quantization_axis: Vector3<f64>,
) -> Result<Vec<StateLabel>> {
    let axis = {
        let norm = quantization_axis.norm();
        if norm == 0.0 {
            return Err(Error::ZeroNormAxis);
        }
        quantization_axis / norm
    };
    let f2 = subset_spin_squared(system, &(0..system.n_spins()).collect::<Vec<_>>());
    let satellites: Vec<usize> = (1..system.n_spins()).collect();
    let fsat2 = subset_spin_squared(system, &satellites);
    let fq = projected_total_spin(system, axis);
    let n_sat = satellites.len() as f64;

    let mut labels = Vec::with_capacity(eig.dim());
    for i in 0..eig.dim() {
        let e_f2 = eig.expectation(&f2, i);
        let f = round_half_integer((-1.0 + (1.0 + 4.0 * e_f2).sqrt()) / 2.0).max(0.0);
        let dev_f = (f * (f + 1.0) - e_f2).abs();
        if dev_f > LABELING_TOLERANCE {
            return Err(Error::LabelingFailure {
                value: e_f2,
                deviation: dev_f,
            });
        }

        let e_m = eig.expectation(&fq, i);
        let m_f = round_half_integer(e_m);
        let dev_m = (m_f - e_m).abs();
        if dev_m > LABELING_TOLERANCE || m_f.abs() > f + 0.25 {
            return Err(Error::LabelingFailure {
                value: e_m,
                deviation: dev_m,
            });
        }

        let e_fsat2 = eig.expectation(&fsat2, i);
        let f_sat = round_half_integer((-1.0 + (1.0 + 4.0 * e_fsat2).sqrt()) / 2.0).max(0.0);
        let dev_sat = (f_sat * (f_sat + 1.0) - e_fsat2).abs();
        if dev_sat > LABELING_TOLERANCE {
            return Err(Error::LabelingFailure {
                value: e_fsat2,
                deviation: dev_sat,
            });
        }
        let k_float = n_sat / 2.0 - f_sat;
        let k = k_float.round();
        if (k - k_float).abs() > 0.25 || k < -0.25 {
            return Err(Error::LabelingFailure {
                value: k_float,
                deviation: (k - k_float).abs(),
            });
        }

        labels.push(StateLabel {
            f,
            m_f,
            k: k as usize,
        });
    }
    Ok(labels)
}

/// Attach transition labels to catalogue lines using per-state labels
/// (dominant member of each merged line).
pub fn label_lines(labels: &[StateLabel], lines: &mut [TransitionLine]) {
    for line in lines {
        line.labels = Some(TransitionLabel::new(
            labels[line.bra_index],
            labels[line.ket_index],
        ));
    }
}

/// Check every member transition of every catalogue line against the
/// selection rules (`Delta f in {0, +-1}`, `Delta k = 0`) and the expected
/// `|Delta m_f|` set. Returns the offending line frequency on failure.
pub fn audit_selection_rules(
    labels: &[StateLabel],
    lines: &[TransitionLine],
    allowed_delta_m: &[f64],
) -> std::result::Result<(), f64> {
    for line in lines {
        for member in &line.members {
            let label = TransitionLabel::new(labels[member.bra_index], labels[member.ket_index]);
            let dm = label.delta_m();
            let dm_ok = allowed_delta_m.iter().any(|&x| (dm.abs() - x).abs() < 0.25);
            if !dm_ok || label.delta_f().abs() > 1.25 || label.delta_k() != 0 {
                return Err(line.frequency);
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    const GH: f64 = 42.5775e6;
    const GC: f64 = 10.7077e6;

    #[test]
    fn formic_acid_doublet() {
        let rep = zeeman_lines(1, 0, 222.2, 1e-7, GH, GC).unwrap();
        assert_relative_eq!(rep.center, 222.2);
        assert_eq!(rep.zero_quantum.len(), 1);
        assert_eq!(rep.single_quantum.len(), 2);
        assert_relative_eq!(rep.delta_sq, (GH + GC) * 1e-7, max_relative = 1e-12);
        assert_relative_eq!(rep.delta_sq, 5.32852, max_relative = 1e-5);
        let split = rep.single_quantum[1].frequency - rep.single_quantum[0].frequency;
        assert_relative_eq!(split, rep.delta_sq, max_relative = 1e-12);
        assert!(!rep.regime_warning);
    }

    #[test]
    fn zero_field_collapses_to_center() {
        let rep = zeeman_lines(2, 0, 163.9, 0.0, GH, GC).unwrap();
        for line in rep.zero_quantum.iter().chain(&rep.single_quantum) {
            assert_relative_eq!(line.frequency, rep.center);
        }
    }

    #[test]
    fn acetonitrile_counts() {
        let rep = zeeman_lines(3, 0, 136.25, 1e-7, GH, GC).unwrap();
        assert_relative_eq!(rep.center, 272.5);
        assert_eq!(rep.zero_quantum.len(), 3);
        assert_eq!(rep.single_quantum.len(), 6);
        assert_eq!(rep.multiplicity, 1);
        let rep1 = zeeman_lines(3, 1, 136.25, 1e-7, GH, GC).unwrap();
        assert_relative_eq!(rep1.center, 136.25);
        assert_eq!(rep1.zero_quantum.len(), 1);
        assert_eq!(rep1.single_quantum.len(), 2);
        assert_eq!(rep1.multiplicity, 2);
    }

    #[test]
    fn even_satellite_singlet_manifold_is_empty() {
        let rep = zeeman_lines(2, 1, 163.9, 1e-7, GH, GC).unwrap();
        assert!(rep.zero_quantum.is_empty());
        assert!(rep.single_quantum.is_empty());
    }

    #[test]
    fn invalid_manifold_rejected() {
        assert!(zeeman_lines(1, 1, 222.2, 1e-7, GH, GC).is_err());
        assert!(zeeman_lines(3, 2, 136.25, 1e-7, GH, GC).is_err());
        assert!(rotation_lines(2, 2, 163.9, 2.0).is_err());
    }

    #[test]
    fn rotation_doublet() {
        let rep = rotation_lines(1, 0, 222.2, 2.0).unwrap();
        let zq = SplittingReport::distinct_frequencies(&rep.zero_quantum, 1e-9);
        let sq = SplittingReport::distinct_frequencies(&rep.single_quantum, 1e-9);
        assert_eq!(zq, vec![222.2]);
        assert_eq!(sq.len(), 2);
        assert_relative_eq!(sq[0], 220.2);
        assert_relative_eq!(sq[1], 224.2);
        assert_relative_eq!(rep.delta_sq, 4.0);
        assert_relative_eq!(rep.delta_zq, 0.0);
    }

    #[test]
    fn rotation_zero_matches_zero_field() {
        let rot = rotation_lines(3, 0, 136.25, 0.0).unwrap();
        let zee = zeeman_lines(3, 0, 136.25, 0.0, GH, GC).unwrap();
        for (a, b) in rot.zero_quantum.iter().zip(&zee.zero_quantum) {
            assert_relative_eq!(a.frequency, b.frequency);
        }
        for (a, b) in rot.single_quantum.iter().zip(&zee.single_quantum) {
            assert_relative_eq!(a.frequency, b.frequency);
        }
    }

    #[test]
    fn mixing_angle_limits() {
        // Strong coupling: p -> |g1 - g2| / 2.
        let strong = two_spin_theory(GC, GH, 222.2, 1e-12).unwrap();
        assert_relative_eq!(
            strong.zq_probability,
            (GH - GC) / 2.0,
            max_relative = 1e-6
        );
        // No coupling: xi = 0, p = 0.
        let none = two_spin_theory(GH, GC, 0.0, 1e-7).unwrap();
        assert_relative_eq!(none.xi, 0.0);
        assert_relative_eq!(none.zq_probability, 0.0);
        // Equal gammas: xi = pi/4, p = 0.
        let equal = two_spin_theory(GH, GH, 222.2, 1e-7).unwrap();
        assert_relative_eq!(equal.xi, std::f64::consts::FRAC_PI_4);
        assert_relative_eq!(equal.zq_probability, 0.0);
        // Doubly degenerate case rejected.
        assert!(two_spin_theory(GH, GC, 0.0, 0.0).is_err());
    }

    #[test]
    fn labeling_fails_outside_strong_coupling() {
        use crate::hamiltonian::{total_hamiltonian, FieldVector};
        use crate::linalg::EigenSystem;
        use crate::spin_system::preset;
        let sys = preset("formic_acid").unwrap();
        // gamma_h B >> J: eigenstates become product states without sharp f.
        let field = FieldVector::new(0.9, 0.2, 1e-4).unwrap();
        let h = total_hamiltonian(&sys, Some(&field), None);
        let eig = EigenSystem::new(h.matrix());
        let axis = crate::frame::frame_basis(0.9, 0.2).z_prime;
        assert!(matches!(
            assign_state_labels(&sys, &eig, axis),
            Err(Error::LabelingFailure { .. })
        ));
        // The failure propagates through the primed-element table.
        assert!(crate::frame::primed_matrix_elements(&sys, &h, 0.9, 0.2).is_err());
    }

    #[test]
    fn multiplicities() {
        assert_eq!(manifold_multiplicity(1, 0), 1);
        assert_eq!(manifold_multiplicity(2, 0), 1);
        assert_eq!(manifold_multiplicity(2, 1), 1);
        assert_eq!(manifold_multiplicity(3, 0), 1);
        assert_eq!(manifold_multiplicity(3, 1), 2);
        assert_eq!(manifold_multiplicity(4, 2), 2);
    }
}
