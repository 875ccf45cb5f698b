//! Recovery of the field or rotation vector from measured line amplitudes,
//! and Monte Carlo precision benchmarks.
//!
//! The magnitude comes first, from the single-quantum Zeeman splitting.
//! The orientation is then recovered by matching normalized line-amplitude
//! vectors against the factored amplitude model: a coarse grid search over
//! the sphere followed by Nelder-Mead refinement.
//!
//! # Exact orientation symmetry
//!
//! Amplitude magnitudes measured with axis-aligned guides and a z-axis
//! detector are exactly invariant under pi rotations of the field about
//! the laboratory axes *and* under time reversal (complex conjugation,
//! which maps `phi -> -phi` while fixing every magnitude). The eight
//! orientations `{theta, pi - theta} x {phi, -phi, pi + phi, pi - phi}`
//! therefore produce identical data, with any number of guiding axes.
//! Estimates are reported in the canonical domain `theta in [0, pi/2]`,
//! `phi in [0, pi/2]`; the full orbit of equivalent orientations is
//! attached to every result. The ambiguity set lists only minima that are
//! *not* related by this exact symmetry.

use nalgebra::Vector3;
use num_complex::Complex64 as C64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::path::Path;

use crate::error::{Error, Result};
use crate::frame::{pair_amplitude, primed_matrix_elements, PrimedElement};
use crate::hamiltonian::{rotation_hamiltonian, total_hamiltonian, FieldVector, RotationVector};
use crate::probe::GuidingAxis;
use crate::spectrum::MERGE_TOLERANCE;
use crate::spin_system::{Axis, SpinSystem};

/// Default coarse grid step, degrees.
pub const GRID_STEP_DEG: f64 = 2.0;

/// Nelder-Mead convergence tolerance on the simplex size, rad.
pub const REFINE_TOLERANCE: f64 = 1e-8;

/// Default window for matching measured line frequencies to model lines, Hz.
pub const MATCH_WINDOW: f64 = 0.5;

/// Estimation target: a real magnetic field or a rotation pseudo-field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimationMode {
    Field,
    Rotation,
}

/// Normalized line-amplitude vector recorded under one guiding axis.
#[derive(Debug, Clone)]
pub struct AmplitudeVector {
    guiding_axis: Vector3<f64>,
    frequencies: Vec<f64>,
    entries: Vec<f64>,
}

impl AmplitudeVector {
    /// Normalize raw line magnitudes to a unit Euclidean vector. The raw
    /// scale (polarization, gain, temperature) cancels here.
    pub fn new(
        guiding_axis: impl Into<GuidingAxis>,
        frequencies: Vec<f64>,
        raw_amplitudes: Vec<f64>,
    ) -> Result<Self> {
        let axis = guiding_axis.into().unit_vector()?;
        if frequencies.len() != raw_amplitudes.len() {
            return Err(Error::MeasurementShapeMismatch {
                n_freqs: frequencies.len(),
                n_amps: raw_amplitudes.len(),
            });
        }
        let norm = raw_amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt();
        let invalid = raw_amplitudes.iter().any(|&a| a.is_nan() || a < 0.0);
        if invalid || norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidAmplitudes);
        }
        Ok(Self {
            guiding_axis: axis,
            frequencies,
            entries: raw_amplitudes.iter().map(|a| a / norm).collect(),
        })
    }

    pub fn guiding_axis(&self) -> Vector3<f64> {
        self.guiding_axis
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Unit-norm amplitude entries.
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }
}

/// Magnitude of the field (tesla) or rotation (Hz) from the single-quantum
/// splitting of manifold `k`: inverts `Delta_SQ = 2 [gamma_h + (n - 2k)
/// gamma_c] B / (1 + n - 2k)`; for rotations `Delta_SQ = 2 Omega` exactly.
pub fn magnitude_from_splitting(
    delta: f64,
    n: usize,
    k: usize,
    gamma_h: f64,
    gamma_c: f64,
    mode: EstimationMode,
) -> f64 {
    match mode {
        EstimationMode::Rotation => delta / 2.0,
        EstimationMode::Field => {
            let n_eff = (n as f64) - 2.0 * (k as f64);
            delta * (1.0 + n_eff) / (2.0 * (gamma_h + n_eff * gamma_c))
        }
    }
}

/// One candidate orientation minimum.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct OrientationCandidate {
    pub theta: f64,
    pub phi: f64,
    pub residual: f64,
}

/// Solver diagnostics.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Diagnostics {
    pub grid_step_deg: f64,
    /// Best coarse grid cell before refinement.
    pub grid_cell: (f64, f64),
    pub refine_iterations: usize,
    pub objective_evaluations: usize,
}

/// Recovered vector parameters with residual and ambiguity diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct EstimationResult {
    pub mode: EstimationMode,
    /// Canonical polar angle, rad, in [0, pi/2].
    pub theta: f64,
    /// Canonical azimuthal angle, rad, in [0, pi/2].
    pub phi: f64,
    /// Field magnitude (tesla) or rotation frequency (Hz).
    pub magnitude: f64,
    /// Minimized sum over guiding axes of |A_sim - A_exp|^2.
    pub residual: f64,
    /// All distinct minima within twice the global residual, including the
    /// reported one, sorted by (theta, phi). A singleton means the
    /// orientation is unambiguous modulo the exact symmetry orbit.
    pub ambiguity_set: Vec<OrientationCandidate>,
    /// Exact symmetry partners of the reported orientation (identical data
    /// under any axis-aligned guide set).
    pub equivalent_orientations: Vec<(f64, f64)>,
    /// Set when the objective is locally flat around the minimum (e.g. phi
    /// is unidentifiable for an axial field with a z guide only).
    pub degenerate_direction: bool,
    pub diagnostics: Diagnostics,
}

impl EstimationResult {
    /// An estimate is ambiguous when several non-equivalent minima fit the
    /// data or the minimum has a flat direction.
    pub fn is_ambiguous(&self) -> bool {
        self.ambiguity_set.len() > 1 || self.degenerate_direction
    }
}

fn wrap_2pi(x: f64) -> f64 {
    let mut y = x % TAU;
    if y < 0.0 {
        y += TAU;
    }
    y
}

fn wrap_pi_range(x: f64) -> f64 {
    let mut y = x % TAU;
    if y > PI {
        y -= TAU;
    }
    if y <= -PI {
        y += TAU;
    }
    y
}

/// Normalize arbitrary spherical coordinates to `theta in [0, pi]`,
/// `phi in [0, 2 pi)`.
fn normalize_spherical(theta: f64, phi: f64) -> (f64, f64) {
    let mut th = wrap_2pi(theta);
    let mut ph = phi;
    if th > PI {
        th = TAU - th;
        ph += PI;
    }
    (th, wrap_2pi(ph))
}

/// Fold an orientation into the canonical domain `theta in [0, pi/2]`,
/// `phi in [0, pi/2]` of the exact symmetry group.
pub fn canonical_orientation(theta: f64, phi: f64) -> (f64, f64) {
    let (mut th, mut ph) = normalize_spherical(theta, phi);
    if th > FRAC_PI_2 {
        th = PI - th;
    }
    ph %= PI;
    if ph > FRAC_PI_2 {
        ph = PI - ph;
    }
    if th < 1e-12 {
        ph = 0.0;
    }
    (th, ph)
}

/// The eight orientations producing identical axis-guided amplitude data:
/// pi rotations of the vector about the laboratory axes combined with the
/// time-reversal reflection `phi -> -phi`.
pub fn orientation_orbit(theta: f64, phi: f64) -> Vec<(f64, f64)> {
    let raw = [
        (theta, phi),
        (theta, -phi),
        (theta, PI + phi),
        (theta, PI - phi),
        (PI - theta, phi),
        (PI - theta, -phi),
        (PI - theta, PI + phi),
        (PI - theta, PI - phi),
    ];
    let mut orbit: Vec<(f64, f64)> = raw
        .iter()
        .map(|&(t, p)| normalize_spherical(t, p))
        .collect();
    orbit.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
    orbit.dedup_by(|a, b| (a.0 - b.0).abs() < 1e-12 && (a.1 - b.1).abs() < 1e-12);
    orbit
}

/// Deviation of an estimate from a reference orientation, minimized over
/// the estimate's symmetry orbit: returns (d_theta, d_phi).
pub fn orbit_aligned_deviation(estimate: (f64, f64), reference: (f64, f64)) -> (f64, f64) {
    let (rt, rp) = normalize_spherical(reference.0, reference.1);
    orientation_orbit(estimate.0, estimate.1)
        .into_iter()
        .map(|(t, p)| (t - rt, wrap_pi_range(p - rp)))
        .min_by(|a, b| (a.0 * a.0 + a.1 * a.1).total_cmp(&(b.0 * b.0 + b.1 * b.1)))
        .expect("orbit nonempty")
}

/// One merged model line: frequency plus the primed element vectors of all
/// transitions sharing it.
#[derive(Debug, Clone)]
struct ModelLine {
    frequency: f64,
    vectors: Vec<Vector3<C64>>,
    /// Any member crosses manifolds (|delta f| = 1); these are the lines
    /// near the coupling centers that the estimation protocol reads.
    inter_manifold: bool,
}

/// Orientation-independent amplitude model built from the primed matrix
/// elements at the reference orientation.
#[derive(Debug, Clone)]
pub struct SpectralModel {
    lines: Vec<ModelLine>,
    scale: f64,
}

impl SpectralModel {
    fn from_elements(elements: Vec<PrimedElement>) -> Self {
        let mut sorted = elements;
        sorted.sort_by(|a, b| a.frequency.total_cmp(&b.frequency));
        let mut lines: Vec<ModelLine> = Vec::new();
        for e in sorted {
            let crosses = (e.ket_label.f - e.bra_label.f).abs() > 0.75;
            match lines.last_mut() {
                Some(last) if (e.frequency - last.frequency).abs() <= MERGE_TOLERANCE => {
                    last.vectors.push(e.vector);
                    last.inter_manifold |= crosses;
                }
                _ => lines.push(ModelLine {
                    frequency: e.frequency,
                    vectors: vec![e.vector],
                    inter_manifold: crosses,
                }),
            }
        }
        let scale = lines
            .iter()
            .flat_map(|l| l.vectors.iter())
            .map(|v| v.iter().map(|z| z.norm_sqr()).sum::<f64>())
            .fold(0.0, f64::max);
        Self { lines, scale }
    }

    /// Model for a magnetic field of known magnitude (tesla).
    pub fn for_field(system: &SpinSystem, magnitude: f64) -> Result<Self> {
        let field = FieldVector::along(Axis::Z, magnitude)?;
        let h = total_hamiltonian(system, Some(&field), None);
        Ok(Self::from_elements(primed_matrix_elements(
            system, &h, 0.0, 0.0,
        )?))
    }

    /// Model for a rotation pseudo-field of known frequency (Hz).
    pub fn for_rotation(system: &SpinSystem, magnitude: f64) -> Result<Self> {
        let rotation = RotationVector::along(Axis::Z, magnitude)?;
        let h = rotation_hamiltonian(system, &rotation)
            .add(&crate::hamiltonian::coupling_hamiltonian(system));
        Ok(Self::from_elements(primed_matrix_elements(
            system, &h, 0.0, 0.0,
        )?))
    }

    /// Match measured frequencies to model lines (nearest within `window`).
    fn match_lines(&self, frequencies: &[f64], window: f64) -> Result<Vec<usize>> {
        frequencies
            .iter()
            .map(|&f| {
                self.lines
                    .iter()
                    .enumerate()
                    .map(|(i, l)| (i, (l.frequency - f).abs()))
                    .min_by(|a, b| a.1.total_cmp(&b.1))
                    .filter(|&(_, d)| d <= window)
                    .map(|(i, _)| i)
                    .ok_or(Error::LineMatchFailed {
                        frequency: f,
                        window,
                    })
            })
            .collect()
    }

    /// Merged line magnitudes at an orientation for the selected lines
    /// (complex-summed over degenerate transitions, unit scale).
    fn amplitudes(&self, theta: f64, phi: f64, guide: &Vector3<f64>, lines: &[usize]) -> Vec<f64> {
        lines
            .iter()
            .map(|&li| {
                let total: C64 = self.lines[li]
                    .vectors
                    .iter()
                    .map(|v| pair_amplitude(theta, phi, guide, v, 1.0))
                    .sum();
                total.norm()
            })
            .collect()
    }

    /// Normalized simulated amplitude vector; all-zero vectors (invisible
    /// lines at this orientation) are returned as zeros.
    fn normalized_amplitudes(
        &self,
        theta: f64,
        phi: f64,
        guide: &Vector3<f64>,
        lines: &[usize],
    ) -> Vec<f64> {
        let mut amps = self.amplitudes(theta, phi, guide, lines);
        let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
        if norm > 1e-12 * self.scale {
            for a in &mut amps {
                *a /= norm;
            }
        }
        amps
    }
}

struct MatchedMeasurement {
    guide: Vector3<f64>,
    line_indices: Vec<usize>,
    target: Vec<f64>,
}

/// Precomputed normalized model amplitudes on the coarse grid. The grid
/// depends only on the guides and matched lines, not on the measured
/// values, so Monte Carlo trials share one grid.
struct SimGrid {
    /// (theta, phi) per cell.
    cells: Vec<(f64, f64)>,
    /// Normalized amplitudes per cell and measurement.
    sims: Vec<Vec<Vec<f64>>>,
}

/// Estimator for a fixed system, mode and magnitude.
pub struct Estimator {
    model: SpectralModel,
    mode: EstimationMode,
    magnitude: f64,
    grid_step_deg: f64,
    match_window: f64,
}

impl Estimator {
    pub fn for_field(system: &SpinSystem, magnitude: f64) -> Result<Self> {
        Ok(Self {
            model: SpectralModel::for_field(system, magnitude)?,
            mode: EstimationMode::Field,
            magnitude,
            grid_step_deg: GRID_STEP_DEG,
            match_window: MATCH_WINDOW,
        })
    }

    pub fn for_rotation(system: &SpinSystem, magnitude: f64) -> Result<Self> {
        Ok(Self {
            model: SpectralModel::for_rotation(system, magnitude)?,
            mode: EstimationMode::Rotation,
            magnitude,
            grid_step_deg: GRID_STEP_DEG,
            match_window: MATCH_WINDOW,
        })
    }

    pub fn mode(&self) -> EstimationMode {
        self.mode
    }

    pub fn magnitude(&self) -> f64 {
        self.magnitude
    }

    /// Simulated normalized amplitude vectors at an orientation, matching
    /// the line set of the given frequencies; used to synthesize clean
    /// measurements for benchmarks. Guiding axes along which every line is
    /// invisible (zero signal) are skipped.
    pub fn simulate_measurements(
        &self,
        theta: f64,
        phi: f64,
        axes: &[Axis],
        frequencies: &[f64],
    ) -> Result<Vec<AmplitudeVector>> {
        let lines = self.model.match_lines(frequencies, self.match_window)?;
        let floor = 1e-12 * self.model.scale;
        axes.iter()
            .filter_map(|&axis| {
                let guide = Vector3::from(axis.unit_vector());
                let amps = self.model.amplitudes(theta, phi, &guide, &lines);
                let norm = amps.iter().map(|a| a * a).sum::<f64>().sqrt();
                (norm > floor)
                    .then(|| AmplitudeVector::new(axis, frequencies.to_vec(), amps))
            })
            .collect()
    }

    /// Model line frequencies nearest to the given measured frequencies.
    pub fn matched_frequencies(&self, frequencies: &[f64]) -> Result<Vec<f64>> {
        let lines = self.model.match_lines(frequencies, self.match_window)?;
        Ok(lines
            .iter()
            .map(|&i| self.model.lines[i].frequency)
            .collect())
    }

    fn match_measurements(
        &self,
        measurements: &[AmplitudeVector],
    ) -> Result<Vec<MatchedMeasurement>> {
        if measurements.is_empty() {
            return Err(Error::EmptyMeasurements);
        }
        measurements
            .iter()
            .map(|m| {
                Ok(MatchedMeasurement {
                    guide: m.guiding_axis,
                    line_indices: self.model.match_lines(&m.frequencies, self.match_window)?,
                    target: m.entries.clone(),
                })
            })
            .collect()
    }

    fn objective(&self, theta: f64, phi: f64, matched: &[MatchedMeasurement]) -> f64 {
        matched
            .iter()
            .map(|m| {
                let sim = self
                    .model
                    .normalized_amplitudes(theta, phi, &m.guide, &m.line_indices);
                sim.iter()
                    .zip(&m.target)
                    .map(|(s, t)| (s - t) * (s - t))
                    .sum::<f64>()
            })
            .sum()
    }

    /// Estimate the orientation from one or more amplitude vectors.
    pub fn estimate(&self, measurements: &[AmplitudeVector]) -> Result<EstimationResult> {
        let matched = self.match_measurements(measurements)?;
        let grid = self.build_grid(&matched);
        Ok(self.solve(&matched, &grid))
    }

    /// Tabulate normalized model amplitudes over the canonical-domain grid.
    fn build_grid(&self, matched: &[MatchedMeasurement]) -> SimGrid {
        let step = self.grid_step_deg.to_radians();
        let n_theta = (FRAC_PI_2 / step).round() as usize + 1;
        let n_phi = n_theta;
        let mut cells = Vec::with_capacity(n_theta * n_phi);
        let mut sims = Vec::with_capacity(n_theta * n_phi);
        for it in 0..n_theta {
            let theta = (it as f64 * step).min(FRAC_PI_2);
            for ip in 0..n_phi {
                let phi = (ip as f64 * step).min(FRAC_PI_2);
                cells.push((theta, phi));
                sims.push(
                    matched
                        .iter()
                        .map(|m| {
                            self.model
                                .normalized_amplitudes(theta, phi, &m.guide, &m.line_indices)
                        })
                        .collect(),
                );
            }
        }
        SimGrid { cells, sims }
    }

    fn solve(&self, matched: &[MatchedMeasurement], sim_grid: &SimGrid) -> EstimationResult {
        let mut evaluations = 0usize;

        // Coarse scan over the precomputed grid.
        let mut grid: Vec<(f64, f64, f64)> = Vec::with_capacity(sim_grid.cells.len());
        for (&(theta, phi), sims) in sim_grid.cells.iter().zip(&sim_grid.sims) {
            let r: f64 = sims
                .iter()
                .zip(matched)
                .map(|(sim, m)| {
                    sim.iter()
                        .zip(&m.target)
                        .map(|(s, t)| (s - t) * (s - t))
                        .sum::<f64>()
                })
                .sum();
            evaluations += 1;
            grid.push((theta, phi, r));
        }
        let (best_theta, best_phi, r_min) = grid
            .iter()
            .copied()
            .min_by(|a, b| a.2.total_cmp(&b.2))
            .expect("grid nonempty");

        // Candidate cells that could refine into a competitive minimum. The
        // grid-resolution floor (step^2, the residual quantization of a
        // unit-curvature bowl) keeps flat valleys sampled even when the
        // luckiest cell sits numerically on the minimum.
        let step = self.grid_step_deg.to_radians();
        let threshold = (2.0 * r_min).max(r_min + step * step);
        let mut candidates: Vec<(f64, f64, f64)> =
            grid.iter().copied().filter(|c| c.2 <= threshold).collect();
        candidates.sort_by(|a, b| a.2.total_cmp(&b.2));
        let stride = candidates.len().div_ceil(512);
        let candidates: Vec<(f64, f64, f64)> =
            candidates.into_iter().step_by(stride.max(1)).collect();

        // Refine each candidate and fold into the canonical domain.
        let mut minima: Vec<OrientationCandidate> = Vec::new();
        let mut total_iters = 0usize;
        for &(t0, p0, _) in &candidates {
            let (t, p, r, iters, evals) = self.nelder_mead(t0, p0, matched);
            total_iters += iters;
            evaluations += evals;
            let (tc, pc) = canonical_orientation(t, p);
            let exists = minima.iter().any(|m| {
                let (dt, dp) = orbit_aligned_deviation((tc, pc), (m.theta, m.phi));
                dt.abs() < 1e-5 && dp.abs() < 1e-5
            });
            if !exists {
                minima.push(OrientationCandidate {
                    theta: tc,
                    phi: pc,
                    residual: r,
                });
            }
        }
        minima.sort_by(|a, b| a.residual.total_cmp(&b.residual));
        let global = minima.first().copied().unwrap_or(OrientationCandidate {
            theta: best_theta,
            phi: best_phi,
            residual: r_min,
        });

        let keep = (2.0 * global.residual).max(global.residual + 1e-12);
        let mut ambiguity_set: Vec<OrientationCandidate> =
            minima.into_iter().filter(|m| m.residual <= keep).collect();
        ambiguity_set.sort_by(|a, b| a.theta.total_cmp(&b.theta).then(a.phi.total_cmp(&b.phi)));

        // Local flatness probe: a direction along which the objective does
        // not grow marks an unidentifiable combination.
        let probe_radius = 1e-3;
        let mut degenerate = false;
        for i in 0..8 {
            let angle = i as f64 * PI / 4.0;
            let (dt, dp) = (probe_radius * angle.cos(), probe_radius * angle.sin());
            let r_probe = self.objective(global.theta + dt, global.phi + dp, matched);
            evaluations += 1;
            if r_probe - global.residual < (1e-6 * global.residual).max(1e-13) {
                degenerate = true;
                break;
            }
        }

        EstimationResult {
            mode: self.mode,
            theta: global.theta,
            phi: global.phi,
            magnitude: self.magnitude,
            residual: global.residual,
            ambiguity_set,
            equivalent_orientations: orientation_orbit(global.theta, global.phi),
            degenerate_direction: degenerate,
            diagnostics: Diagnostics {
                grid_step_deg: self.grid_step_deg,
                grid_cell: (best_theta, best_phi),
                refine_iterations: total_iters,
                objective_evaluations: evaluations,
            },
        }
    }

    /// Standard 2-D Nelder-Mead; returns (theta, phi, residual, iterations,
    /// evaluations).
    fn nelder_mead(
        &self,
        theta0: f64,
        phi0: f64,
        matched: &[MatchedMeasurement],
    ) -> (f64, f64, f64, usize, usize) {
        let h = 0.5 * self.grid_step_deg.to_radians();
        let mut evals = 0usize;
        let f = |t: f64, p: f64, evals: &mut usize| {
            *evals += 1;
            self.objective(t, p, matched)
        };
        let mut simplex = [
            (theta0, phi0, 0.0),
            (theta0 + h, phi0, 0.0),
            (theta0, phi0 + h, 0.0),
        ];
        for v in &mut simplex {
            v.2 = f(v.0, v.1, &mut evals);
        }
        let (alpha, gamma, rho, sigma) = (1.0, 2.0, 0.5, 0.5);
        let mut iterations = 0;
        for _ in 0..400 {
            iterations += 1;
            simplex.sort_by(|a, b| a.2.total_cmp(&b.2));
            let size = simplex[1..]
                .iter()
                .map(|v| ((v.0 - simplex[0].0).powi(2) + (v.1 - simplex[0].1).powi(2)).sqrt())
                .fold(0.0, f64::max);
            if size < REFINE_TOLERANCE {
                break;
            }
            let centroid = (
                0.5 * (simplex[0].0 + simplex[1].0),
                0.5 * (simplex[0].1 + simplex[1].1),
            );
            let worst = simplex[2];
            let reflected = (
                centroid.0 + alpha * (centroid.0 - worst.0),
                centroid.1 + alpha * (centroid.1 - worst.1),
            );
            let fr = f(reflected.0, reflected.1, &mut evals);
            if fr < simplex[0].2 {
                let expanded = (
                    centroid.0 + gamma * (reflected.0 - centroid.0),
                    centroid.1 + gamma * (reflected.1 - centroid.1),
                );
                let fe = f(expanded.0, expanded.1, &mut evals);
                simplex[2] = if fe < fr {
                    (expanded.0, expanded.1, fe)
                } else {
                    (reflected.0, reflected.1, fr)
                };
            } else if fr < simplex[1].2 {
                simplex[2] = (reflected.0, reflected.1, fr);
            } else {
                let contracted = (
                    centroid.0 + rho * (worst.0 - centroid.0),
                    centroid.1 + rho * (worst.1 - centroid.1),
                );
                let fc = f(contracted.0, contracted.1, &mut evals);
                if fc < worst.2 {
                    simplex[2] = (contracted.0, contracted.1, fc);
                } else {
                    for i in 1..3 {
                        let shrunk = (
                            simplex[0].0 + sigma * (simplex[i].0 - simplex[0].0),
                            simplex[0].1 + sigma * (simplex[i].1 - simplex[0].1),
                        );
                        simplex[i] = (shrunk.0, shrunk.1, f(shrunk.0, shrunk.1, &mut evals));
                    }
                }
            }
        }
        simplex.sort_by(|a, b| a.2.total_cmp(&b.2));
        (simplex[0].0, simplex[0].1, simplex[0].2, iterations, evals)
    }

    /// Monte Carlo orientation precision: perturb the normalized amplitude
    /// entries of clean three-axis measurements at the true orientation
    /// with i.i.d. Gaussian noise, renormalize, re-estimate per trial.
    ///
    /// Per-trial RNG streams come from the same ChaCha seed with the trial
    /// index as the stream id, so parallel and serial runs agree.
    pub fn monte_carlo_precision(
        &self,
        true_theta: f64,
        true_phi: f64,
        noise_sigma: f64,
        trials: usize,
        seed: u64,
    ) -> Result<MonteCarloReport> {
        if trials < 100 {
            return Err(Error::TooFewTrials {
                min: 100,
                actual: trials,
            });
        }
        if noise_sigma.is_nan() || noise_sigma <= 0.0 {
            return Err(Error::InvalidNoiseSigma(noise_sigma));
        }
        let clean = self.clean_protocol_measurements(true_theta, true_phi)?;
        let matched = self.match_measurements(&clean)?;
        let sim_grid = self.build_grid(&matched);
        let normal =
            Normal::new(0.0, noise_sigma).map_err(|_| Error::InvalidNoiseSigma(noise_sigma))?;

        let outcomes: Vec<Option<(f64, f64)>> = (0..trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(trial as u64);
                let noisy: Vec<MatchedMeasurement> = matched
                    .iter()
                    .map(|m| {
                        let mut entries: Vec<f64> = m
                            .target
                            .iter()
                            .map(|&a| a + normal.sample(&mut rng))
                            .collect();
                        let norm = entries.iter().map(|a| a * a).sum::<f64>().sqrt();
                        if norm > 0.0 {
                            for e in &mut entries {
                                *e /= norm;
                            }
                        }
                        MatchedMeasurement {
                            guide: m.guide,
                            line_indices: m.line_indices.clone(),
                            target: entries,
                        }
                    })
                    .collect();
                let result = self.solve(&noisy, &sim_grid);
                if result.residual.is_finite() {
                    let (dt, dp) = orbit_aligned_deviation(
                        (result.theta, result.phi),
                        (true_theta, true_phi),
                    );
                    Some((dt, dp))
                } else {
                    None
                }
            })
            .collect();

        let failures = outcomes.iter().filter(|o| o.is_none()).count();
        if failures * 100 > trials {
            return Err(Error::TooManyTrialFailures {
                failed: failures,
                total: trials,
            });
        }
        let deviations: Vec<(f64, f64)> = outcomes.into_iter().flatten().collect();
        let n = deviations.len() as f64;
        let mean_t = deviations.iter().map(|d| d.0).sum::<f64>() / n;
        let mean_p = deviations.iter().map(|d| d.1).sum::<f64>() / n;
        let sigma_theta =
            (deviations.iter().map(|d| (d.0 - mean_t).powi(2)).sum::<f64>() / n).sqrt();
        let sigma_phi =
            (deviations.iter().map(|d| (d.1 - mean_p).powi(2)).sum::<f64>() / n).sqrt();

        Ok(MonteCarloReport {
            sigma_theta,
            sigma_phi,
            mean_theta_deviation: mean_t,
            mean_phi_deviation: mean_p,
            theta_deviations: deviations.iter().map(|d| d.0).collect(),
            phi_deviations: deviations.iter().map(|d| d.1).collect(),
            trials,
            failures,
        })
    }

    /// Clean three-axis measurements over the three strongest inter-manifold
    /// lines at the given orientation: the zero-quantum line and the
    /// single-quantum doublet straddling the coupling center for a two-spin
    /// system, as in the triplet the estimation protocol reads.
    pub fn clean_protocol_measurements(
        &self,
        theta: f64,
        phi: f64,
    ) -> Result<Vec<AmplitudeVector>> {
        let axes = [Axis::X, Axis::Y, Axis::Z];
        let mut strength: Vec<(usize, f64)> = (0..self.model.lines.len())
            .filter(|&li| self.model.lines[li].inter_manifold)
            .map(|li| {
                let total: f64 = axes
                    .iter()
                    .map(|&axis| {
                        let guide = Vector3::from(axis.unit_vector());
                        self.model.amplitudes(theta, phi, &guide, &[li])[0]
                    })
                    .sum();
                (li, total)
            })
            .collect();
        strength.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut chosen: Vec<usize> = strength.iter().take(3).map(|&(i, _)| i).collect();
        chosen.sort_unstable();
        let freqs: Vec<f64> = chosen
            .iter()
            .map(|&i| self.model.lines[i].frequency)
            .collect();
        self.simulate_measurements(theta, phi, &axes, &freqs)
    }
}

/// Monte Carlo precision report.
#[derive(Debug, Clone, Serialize)]
pub struct MonteCarloReport {
    /// Standard deviation of the orbit-aligned theta deviations, rad.
    pub sigma_theta: f64,
    /// Standard deviation of the orbit-aligned phi deviations, rad.
    pub sigma_phi: f64,
    pub mean_theta_deviation: f64,
    pub mean_phi_deviation: f64,
    pub theta_deviations: Vec<f64>,
    pub phi_deviations: Vec<f64>,
    pub trials: usize,
    pub failures: usize,
}

impl MonteCarloReport {
    /// Histogram of deviations: (bin_center, count) pairs.
    pub fn histogram(values: &[f64], bins: usize) -> Vec<(f64, usize)> {
        if values.is_empty() || bins == 0 {
            return Vec::new();
        }
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let width = ((hi - lo) / bins as f64).max(f64::MIN_POSITIVE);
        let mut counts = vec![0usize; bins];
        for &v in values {
            let idx = (((v - lo) / width) as usize).min(bins - 1);
            counts[idx] += 1;
        }
        counts
            .into_iter()
            .enumerate()
            .map(|(i, c)| (lo + (i as f64 + 0.5) * width, c))
            .collect()
    }
}

/// Measurement set parsed from a TOML file: per-axis line frequencies and
/// raw amplitudes, plus an optional explicit splitting.
#[derive(Debug, Clone)]
pub struct MeasurementSet {
    pub measurements: Vec<AmplitudeVector>,
    pub splitting_hz: Option<f64>,
}

impl MeasurementSet {
    /// The single-quantum splitting: the explicit value when present, else
    /// the span of the first measurement's frequency list.
    pub fn splitting(&self) -> Option<f64> {
        self.splitting_hz.or_else(|| {
            self.measurements.first().and_then(|m| {
                let lo = m.frequencies.iter().copied().fold(f64::INFINITY, f64::min);
                let hi = m
                    .frequencies
                    .iter()
                    .copied()
                    .fold(f64::NEG_INFINITY, f64::max);
                (hi > lo).then_some(hi - lo)
            })
        })
    }
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum AxisSpec {
    Named(String),
    Vector([f64; 3]),
}

#[derive(Debug, Deserialize)]
struct MeasurementEntry {
    guiding_axis: AxisSpec,
    frequencies_hz: Vec<f64>,
    amplitudes: Vec<f64>,
}

#[derive(Debug, Deserialize)]
struct MeasurementFile {
    #[serde(default)]
    splitting_hz: Option<f64>,
    #[serde(rename = "measurement")]
    measurements: Vec<MeasurementEntry>,
}

/// Parse a measurement set from TOML text with `[[measurement]]` tables
/// carrying `guiding_axis` ("x", "y", "z" or a 3-vector), `frequencies_hz`
/// and `amplitudes`.
pub fn parse_measurements(text: &str) -> Result<MeasurementSet> {
    let parsed: MeasurementFile =
        toml::from_str(text).map_err(|e| Error::MeasurementFile(e.to_string()))?;
    if parsed.measurements.is_empty() {
        return Err(Error::EmptyMeasurements);
    }
    let measurements = parsed
        .measurements
        .into_iter()
        .map(|entry| {
            let axis = match entry.guiding_axis {
                AxisSpec::Named(name) => match name.as_str() {
                    "x" => GuidingAxis::Lab(Axis::X),
                    "y" => GuidingAxis::Lab(Axis::Y),
                    "z" => GuidingAxis::Lab(Axis::Z),
                    other => {
                        return Err(Error::MeasurementFile(format!(
                            "unknown guiding axis '{other}'"
                        )))
                    }
                },
                AxisSpec::Vector(v) => GuidingAxis::Custom(v),
            };
            AmplitudeVector::new(axis, entry.frequencies_hz, entry.amplitudes)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasurementSet {
        measurements,
        splitting_hz: parsed.splitting_hz,
    })
}

/// Load a measurement set from a TOML file; see [`parse_measurements`].
pub fn load_measurements(path: impl AsRef<Path>) -> Result<MeasurementSet> {
    let text = std::fs::read_to_string(path.as_ref())?;
    parse_measurements(&text)
}
