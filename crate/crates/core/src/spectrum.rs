//! Transition catalogues, time-domain signals with decoherence, Fourier
//! spectra and line-amplitude extraction.
//!
//! The catalogue route eigendecomposes the Hamiltonian and emits one line
//! per eigenpair `(i < j)` at frequency `E_j - E_i` with complex amplitude
//! `<i|rho_0|j><j|O|i>`. Degenerate transitions interfere, so lines within
//! the merge tolerance are coalesced by complex summation before their
//! magnitude is taken; that magnitude is what a spectrometer sees.

use num_complex::Complex64 as C64;
use rustfft::FftPlanner;
use serde::Serialize;

use nalgebra::DMatrix;

use crate::analytic::TransitionLabel;
use crate::error::{Error, Result};
use crate::hamiltonian::Hamiltonian;
use crate::linalg::EigenSystem;
use crate::probe::ProbeState;
use crate::spin_system::{SpinOperator, SpinSystem};

/// Lines closer than this are coalesced by complex summation, Hz.
pub const MERGE_TOLERANCE: f64 = 1e-6;

/// Lines below this fraction of the strongest magnitude are dropped
/// (numerical noise from eigenvector phases).
pub const AMPLITUDE_FLOOR_REL: f64 = 1e-10;

/// One member transition of a (possibly merged) spectral line.
#[derive(Debug, Clone, Copy)]
pub struct TransitionMember {
    pub bra_index: usize,
    pub ket_index: usize,
    pub amplitude: C64,
}

/// One spectral line after degeneracy merging.
#[derive(Debug, Clone)]
pub struct TransitionLine {
    /// Transition frequency `E_ket - E_bra`, Hz, >= 0.
    pub frequency: f64,
    /// Complex amplitude; magnitude is the observable line strength.
    pub complex_amplitude: C64,
    /// Eigenstate indices of the dominant member.
    pub bra_index: usize,
    pub ket_index: usize,
    /// Quantum-number labels of the dominant member, when assigned.
    pub labels: Option<TransitionLabel>,
    /// All transitions merged into this line.
    pub members: Vec<TransitionMember>,
}

impl TransitionLine {
    pub fn magnitude(&self) -> f64 {
        self.complex_amplitude.norm()
    }

    pub fn phase(&self) -> f64 {
        self.complex_amplitude.arg()
    }
}

/// Serializable view of a line for JSON export.
#[derive(Debug, Serialize)]
pub struct LineRecord {
    pub frequency_hz: f64,
    pub magnitude: f64,
    pub phase_rad: f64,
    pub bra_index: usize,
    pub ket_index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub labels: Option<TransitionLabel>,
}

impl From<&TransitionLine> for LineRecord {
    fn from(line: &TransitionLine) -> Self {
        Self {
            frequency_hz: line.frequency,
            magnitude: line.magnitude(),
            phase_rad: line.phase(),
            bra_index: line.bra_index,
            ket_index: line.ket_index,
            labels: line.labels,
        }
    }
}

/// Acquisition settings for signal synthesis.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct AcquisitionSettings {
    /// Total duration, seconds.
    pub duration: f64,
    /// Sample rate, Hz.
    pub sample_rate: f64,
}

impl AcquisitionSettings {
    /// Defaults: duration `3 tau_coh` (captures the decay), sample rate
    /// 8x the highest line frequency (avoids aliasing with margin).
    pub fn default_for(tau_coh: f64, max_frequency: f64) -> Self {
        Self {
            duration: 3.0 * tau_coh,
            sample_rate: 8.0 * max_frequency.max(1.0),
        }
    }
}

/// Line spectrum: merged catalogue plus the acquisition metadata needed to
/// synthesize and analyze signals.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub lines: Vec<TransitionLine>,
    /// Coherence time, seconds.
    pub tau_coh: f64,
    pub acquisition: AcquisitionSettings,
}

impl Spectrum {
    pub fn new(lines: Vec<TransitionLine>, tau_coh: f64) -> Self {
        let max_freq = lines.iter().map(|l| l.frequency).fold(0.0, f64::max);
        let acquisition = AcquisitionSettings::default_for(tau_coh, max_freq);
        Self {
            lines,
            tau_coh,
            acquisition,
        }
    }

    /// Lorentzian full width at half maximum, `1 / (pi tau_coh)`, Hz.
    pub fn linewidth(&self) -> f64 {
        1.0 / (std::f64::consts::PI * self.tau_coh)
    }

    /// Synthesize the time-domain signal with the stored acquisition.
    pub fn time_signal(&self) -> Result<TimeSeries> {
        time_signal(
            &self.lines,
            self.tau_coh,
            self.acquisition.duration,
            self.acquisition.sample_rate,
        )
    }
}

/// Full transition catalogue of a probe evolving under a Hamiltonian,
/// observed through a Hermitian operator.
pub fn transition_catalogue(
    system: &SpinSystem,
    hamiltonian: &Hamiltonian,
    probe: &ProbeState,
    observable: &SpinOperator,
) -> Result<Vec<TransitionLine>> {
    let dim = system.dim();
    crate::linalg::check_dim(hamiltonian.matrix(), dim, "hamiltonian")?;
    crate::linalg::check_dim(observable.matrix(), dim, "observable")?;
    if probe.dim() != dim {
        return Err(Error::DimensionMismatch {
            what: "probe state",
            expected: dim,
            actual: probe.dim(),
        });
    }
    let eig = EigenSystem::new(hamiltonian.matrix());
    Ok(catalogue_from_eigensystem(
        &eig,
        probe.deviation(),
        observable.matrix(),
    ))
}

/// Transition catalogue with quantum-number labels attached: the
/// eigenbasis is refined by F^2, the satellite Casimir and the total-spin
/// projection along `quantization_axis` so that degenerate multiplets
/// (including the zero-field case) label deterministically. Returns the
/// labeled lines together with the per-eigenstate labels.
pub fn labeled_transition_catalogue(
    system: &SpinSystem,
    hamiltonian: &Hamiltonian,
    probe: &ProbeState,
    observable: &SpinOperator,
    quantization_axis: nalgebra::Vector3<f64>,
) -> Result<(Vec<TransitionLine>, Vec<crate::analytic::StateLabel>)> {
    let dim = system.dim();
    crate::linalg::check_dim(hamiltonian.matrix(), dim, "hamiltonian")?;
    crate::linalg::check_dim(observable.matrix(), dim, "observable")?;
    let mut eig = EigenSystem::new(hamiltonian.matrix());
    let all: Vec<usize> = (0..system.n_spins()).collect();
    let satellites: Vec<usize> = (1..system.n_spins()).collect();
    let f2 = crate::analytic::subset_spin_squared(system, &all);
    let fsat2 = crate::analytic::subset_spin_squared(system, &satellites);
    let fq = crate::analytic::projected_total_spin(system, quantization_axis);
    eig.refine(&[&f2, &fsat2, &fq]);
    let labels = crate::analytic::assign_state_labels(system, &eig, quantization_axis)?;
    let mut lines = catalogue_from_eigensystem(&eig, probe.deviation(), observable.matrix());
    crate::analytic::label_lines(&labels, &mut lines);
    Ok((lines, labels))
}

/// Catalogue from a prebuilt eigensystem; `rho` is the traceless probe
/// deviation and `obs` the observable matrix.
pub fn catalogue_from_eigensystem(
    eig: &EigenSystem,
    rho: &DMatrix<C64>,
    obs: &DMatrix<C64>,
) -> Vec<TransitionLine> {
    let dim = eig.dim();
    let v = &eig.vectors;
    let rho_e = v.adjoint() * rho * v;
    let obs_e = v.adjoint() * obs * v;

    let mut pairs: Vec<(f64, TransitionMember)> = Vec::with_capacity(dim * (dim - 1) / 2);
    for i in 0..dim {
        for j in (i + 1)..dim {
            let amplitude = rho_e[(i, j)] * obs_e[(j, i)];
            pairs.push((
                eig.energies[j] - eig.energies[i],
                TransitionMember {
                    bra_index: i,
                    ket_index: j,
                    amplitude,
                },
            ));
        }
    }
    pairs.sort_by(|a, b| {
        a.0.total_cmp(&b.0)
            .then(a.1.bra_index.cmp(&b.1.bra_index))
            .then(a.1.ket_index.cmp(&b.1.ket_index))
    });

    // Coalesce within the merge tolerance by complex summation.
    let mut lines: Vec<TransitionLine> = Vec::new();
    let mut idx = 0;
    while idx < pairs.len() {
        let mut end = idx + 1;
        while end < pairs.len() && pairs[end].0 - pairs[end - 1].0 <= MERGE_TOLERANCE {
            end += 1;
        }
        let members: Vec<TransitionMember> = pairs[idx..end].iter().map(|p| p.1).collect();
        let total: C64 = members.iter().map(|m| m.amplitude).sum();
        let weight: f64 = members.iter().map(|m| m.amplitude.norm()).sum();
        let frequency = if weight > 0.0 {
            pairs[idx..end]
                .iter()
                .map(|p| p.0 * p.1.amplitude.norm())
                .sum::<f64>()
                / weight
        } else {
            pairs[idx..end].iter().map(|p| p.0).sum::<f64>() / members.len() as f64
        };
        let dominant = members
            .iter()
            .max_by(|a, b| a.amplitude.norm().total_cmp(&b.amplitude.norm()))
            .expect("nonempty group");
        lines.push(TransitionLine {
            frequency,
            complex_amplitude: total,
            bra_index: dominant.bra_index,
            ket_index: dominant.ket_index,
            labels: None,
            members,
        });
        idx = end;
    }

    let max_mag = lines.iter().map(|l| l.magnitude()).fold(0.0, f64::max);
    lines.retain(|l| l.magnitude() > AMPLITUDE_FLOOR_REL * max_mag);
    lines.sort_by(|a, b| {
        a.frequency
            .total_cmp(&b.frequency)
            .then(a.bra_index.cmp(&b.bra_index))
            .then(a.ket_index.cmp(&b.ket_index))
    });
    lines
}

/// Sampled real signal.
#[derive(Debug, Clone)]
pub struct TimeSeries {
    /// Sample spacing, seconds.
    pub dt: f64,
    pub samples: Vec<f64>,
    /// Decay constant used in synthesis, seconds.
    pub tau_coh: f64,
}

impl TimeSeries {
    pub fn duration(&self) -> f64 {
        self.dt * self.samples.len() as f64
    }

    /// Signal energy `sum s^2 dt`.
    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum::<f64>() * self.dt
    }
}

/// Synthesize `S(t) = sum_lines R cos(Phi - 2 pi nu t) exp(-t / tau)`
/// sampled at `sample_rate` for `duration` seconds.
pub fn time_signal(
    lines: &[TransitionLine],
    tau_coh: f64,
    duration: f64,
    sample_rate: f64,
) -> Result<TimeSeries> {
    let positive = duration > 0.0 && sample_rate > 0.0 && tau_coh > 0.0;
    if !positive {
        return Err(Error::InvalidAcquisition);
    }
    for line in lines {
        if sample_rate <= 2.0 * line.frequency {
            return Err(Error::NyquistViolation {
                frequency: line.frequency,
                sample_rate,
            });
        }
    }
    let dt = 1.0 / sample_rate;
    let n = (duration * sample_rate).round().max(1.0) as usize;
    let mut samples = vec![0.0f64; n];
    for line in lines {
        let magnitude = line.magnitude();
        if magnitude == 0.0 {
            continue;
        }
        let phase = line.phase();
        let omega = std::f64::consts::TAU * line.frequency;
        for (i, s) in samples.iter_mut().enumerate() {
            let t = i as f64 * dt;
            *s += magnitude * (phase - omega * t).cos() * (-t / tau_coh).exp();
        }
    }
    Ok(TimeSeries {
        dt,
        samples,
        tau_coh,
    })
}

/// One-sided discrete Fourier spectrum; complex values are scaled by `dt`
/// so they approximate the continuous transform.
#[derive(Debug, Clone)]
pub struct FrequencySpectrum {
    /// Bin frequencies, Hz, from 0 to the Nyquist frequency.
    pub freqs: Vec<f64>,
    /// Complex bin values (dt-scaled DFT).
    pub values: Vec<C64>,
    /// Bin spacing, Hz.
    pub df: f64,
    /// Sample spacing of the originating series, seconds.
    pub dt: f64,
    /// Sample count of the originating series.
    pub n_samples: usize,
    /// Decay constant of the originating series, seconds.
    pub tau_coh: f64,
}

impl FrequencySpectrum {
    pub fn magnitudes(&self) -> Vec<f64> {
        self.values.iter().map(|z| z.norm()).collect()
    }

    /// Spectral energy `integral |S(f)|^2 df` over the full (two-sided)
    /// spectrum, equal to the time-domain energy by Parseval's identity.
    pub fn energy(&self) -> f64 {
        let mut sum = 0.0;
        let last = self.values.len() - 1;
        for (k, z) in self.values.iter().enumerate() {
            let self_conjugate = k == 0 || (self.n_samples.is_multiple_of(2) && k == last);
            let weight = if self_conjugate { 1.0 } else { 2.0 };
            sum += weight * z.norm_sqr();
        }
        // values = X_k dt, so |S|^2 df sums to sum |X_k|^2 dt / N.
        sum * self.df
    }

    /// Index of the bin nearest to a frequency.
    pub fn nearest_bin(&self, frequency: f64) -> usize {
        ((frequency / self.df).round() as usize).min(self.freqs.len() - 1)
    }
}

/// Discrete Fourier transform of a real series, one-sided.
pub fn fourier_spectrum(series: &TimeSeries) -> Result<FrequencySpectrum> {
    let n = series.samples.len();
    if n == 0 {
        return Err(Error::EmptySeries);
    }
    let mut buf: Vec<C64> = series.samples.iter().map(|&s| C64::new(s, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let n_keep = n / 2 + 1;
    let df = 1.0 / (n as f64 * series.dt);
    let values: Vec<C64> = buf[..n_keep]
        .iter()
        .map(|z| z * C64::new(series.dt, 0.0))
        .collect();
    let freqs: Vec<f64> = (0..n_keep).map(|k| k as f64 * df).collect();
    Ok(FrequencySpectrum {
        freqs,
        values,
        df,
        dt: series.dt,
        n_samples: n,
        tau_coh: series.tau_coh,
    })
}

/// Result of fitting one requested line.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ExtractedLine {
    /// Refined line frequency, Hz (the target frequency when missing).
    pub frequency: f64,
    /// Fitted line magnitude (the `R` of the synthesis model).
    pub magnitude: f64,
    /// 1-sigma fit uncertainty of the magnitude; infinite when missing.
    pub uncertainty: f64,
    /// Set when no peak rose above the noise floor inside the window.
    pub missing: bool,
}

/// Exact dt-scaled DFT of `exp(-t/tau) exp(-i 2 pi x t)` over the sampled
/// window (geometric series).
fn window_kernel(x_hz: f64, n: usize, dt: f64, tau: f64) -> C64 {
    let r = C64::from_polar((-dt / tau).exp(), -std::f64::consts::TAU * x_hz * dt);
    let denom = C64::new(1.0, 0.0) - r;
    if denom.norm() < 1e-12 {
        C64::new(n as f64 * dt, 0.0)
    } else {
        (C64::new(1.0, 0.0) - r.powu(n as u32)) / denom * C64::new(dt, 0.0)
    }
}

struct FitProblem<'a> {
    spectrum: &'a FrequencySpectrum,
    bins: Vec<usize>,
}

impl FitProblem<'_> {
    /// Solve the linear least-squares problem for the complex amplitudes of
    /// lines at the given frequencies; returns (amplitudes, ssr, variances).
    fn solve(&self, line_freqs: &[f64]) -> (Vec<C64>, f64, Vec<f64>) {
        let spec = self.spectrum;
        let m = self.bins.len();
        let k = line_freqs.len();
        let mut design = nalgebra::DMatrix::<f64>::zeros(2 * m, 2 * k);
        let mut rhs = nalgebra::DVector::<f64>::zeros(2 * m);
        for (row, &bin) in self.bins.iter().enumerate() {
            let f = spec.freqs[bin];
            let data = spec.values[bin];
            rhs[2 * row] = data.re;
            rhs[2 * row + 1] = data.im;
            for (col, &nu) in line_freqs.iter().enumerate() {
                let g1 = window_kernel(f - nu, spec.n_samples, spec.dt, spec.tau_coh);
                let g2 = window_kernel(f + nu, spec.n_samples, spec.dt, spec.tau_coh);
                // Model: c * G1 + conj(c) * G2 with c = a + i b.
                let u = g1 + g2;
                let w = C64::new(0.0, 1.0) * (g1 - g2);
                design[(2 * row, 2 * col)] = u.re;
                design[(2 * row + 1, 2 * col)] = u.im;
                design[(2 * row, 2 * col + 1)] = w.re;
                design[(2 * row + 1, 2 * col + 1)] = w.im;
            }
        }
        let svd = design.clone().svd(true, true);
        let x = svd.solve(&rhs, 1e-12).expect("svd computed with vectors");
        let residual = &design * &x - &rhs;
        let ssr = residual.norm_squared();

        let dof = (2 * m).saturating_sub(2 * k).max(1) as f64;
        let noise_var = ssr / dof;
        let gram = design.transpose() * &design;
        let variances = match gram.try_inverse() {
            Some(inv) => (0..k)
                .map(|c| noise_var * (inv[(2 * c, 2 * c)] + inv[(2 * c + 1, 2 * c + 1)]))
                .collect(),
            None => vec![f64::INFINITY; k],
        };
        let amps = (0..k).map(|c| C64::new(x[2 * c], x[2 * c + 1])).collect();
        (amps, ssr, variances)
    }
}

/// Fit line magnitudes at the target frequencies from a Fourier spectrum.
///
/// All detected targets are fitted jointly with the exact finite-window
/// Lorentzian kernel (shared decay constant from the acquisition), with the
/// line frequencies refined inside `+-window`. Targets whose windows show
/// no peak above the local floor are flagged missing with zero magnitude
/// and infinite uncertainty; targets that refine onto the same underlying
/// line report the same fitted peak.
pub fn extract_line_amplitudes(
    spectrum: &FrequencySpectrum,
    target_frequencies: &[f64],
    window: f64,
) -> Result<Vec<ExtractedLine>> {
    if spectrum.values.is_empty() {
        return Err(Error::EmptySeries);
    }
    let df = spectrum.df;
    let global_max = spectrum.values.iter().map(|z| z.norm()).fold(0.0, f64::max);

    // Peak-pick per target; decide presence. A real line shows up as an
    // interior local maximum rising above the off-peak baseline; the
    // monotone Lorentzian tails of distant lines peak at a window edge and
    // stay near the baseline.
    let linewidth = 1.0 / (std::f64::consts::TAU * spectrum.tau_coh);
    let mut initial: Vec<Option<f64>> = Vec::with_capacity(target_frequencies.len());
    for &target in target_frequencies {
        let lo = ((target - window) / df).ceil().max(0.0) as usize;
        let hi = (((target + window) / df).floor() as usize).min(spectrum.freqs.len() - 1);
        if lo > hi {
            initial.push(None);
            continue;
        }
        let mags: Vec<f64> = (lo..=hi).map(|i| spectrum.values[i].norm()).collect();
        let peak_offset = mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap_or(0);
        let peak = mags[peak_offset];
        let interior = peak_offset > 0 && peak_offset + 1 < mags.len();
        let mut baseline: Vec<f64> = mags
            .iter()
            .enumerate()
            .filter(|(i, _)| {
                (*i as f64 - peak_offset as f64).abs() * df > 5.0 * linewidth
            })
            .map(|(_, &m)| m)
            .collect();
        baseline.sort_by(f64::total_cmp);
        let floor = if baseline.len() >= 3 {
            baseline[baseline.len() / 2]
        } else {
            mags.iter().copied().fold(f64::INFINITY, f64::min)
        };
        // Truncation-sidelobe ripple on a smooth tail stays within ~15% of
        // the baseline, while even a line 40x weaker than its neighbors
        // rises well above 1.5x; monotone tails peak at a window edge.
        let present = peak > 1e-9 * global_max && interior && peak >= 1.5 * floor;
        if !present {
            initial.push(None);
            continue;
        }
        let peak_bin = lo + peak_offset;
        // Parabolic refinement on the magnitude around the peak bin.
        let refined = if peak_bin > 0 && peak_bin + 1 < spectrum.values.len() {
            let (ym, y0, yp) = (
                spectrum.values[peak_bin - 1].norm(),
                peak,
                spectrum.values[peak_bin + 1].norm(),
            );
            let denom = ym - 2.0 * y0 + yp;
            let shift = if denom.abs() > 0.0 {
                (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5)
            } else {
                0.0
            };
            spectrum.freqs[peak_bin] + shift * df
        } else {
            spectrum.freqs[peak_bin]
        };
        initial.push(Some(refined));
    }

    // Group targets that resolved onto the same line.
    let mut line_freqs: Vec<f64> = Vec::new();
    let mut target_to_line: Vec<Option<usize>> = Vec::with_capacity(initial.len());
    for freq in &initial {
        match freq {
            None => target_to_line.push(None),
            Some(nu) => {
                let found = line_freqs.iter().position(|&x| (x - nu).abs() <= df / 2.0);
                match found {
                    Some(idx) => target_to_line.push(Some(idx)),
                    None => {
                        line_freqs.push(*nu);
                        target_to_line.push(Some(line_freqs.len() - 1));
                    }
                }
            }
        }
    }

    if line_freqs.is_empty() {
        return Ok(target_frequencies
            .iter()
            .map(|&f| ExtractedLine {
                frequency: f,
                magnitude: 0.0,
                uncertainty: f64::INFINITY,
                missing: true,
            })
            .collect());
    }

    // Union of fit bins over all detected targets.
    let mut bins: Vec<usize> = Vec::new();
    for (t, &target) in target_frequencies.iter().enumerate() {
        if target_to_line[t].is_none() {
            continue;
        }
        let lo = ((target - window) / df).ceil().max(0.0) as usize;
        let hi = (((target + window) / df).floor() as usize).min(spectrum.freqs.len() - 1);
        bins.extend(lo..=hi);
    }
    bins.sort_unstable();
    bins.dedup();
    let problem = FitProblem { spectrum, bins };

    // Coordinate refinement of each line frequency against the joint fit.
    for _pass in 0..3 {
        for li in 0..line_freqs.len() {
            let mut best = (line_freqs[li], f64::INFINITY);
            let mut probe_freqs = line_freqs.clone();
            // Golden-section over one bin width around the current estimate.
            let (mut a, mut b) = (line_freqs[li] - df, line_freqs[li] + df);
            let inv_phi = 0.618_033_988_749_894_9;
            let mut x1 = b - inv_phi * (b - a);
            let mut x2 = a + inv_phi * (b - a);
            let eval = |freqs: &mut Vec<f64>, nu: f64, problem: &FitProblem| {
                freqs[li] = nu;
                problem.solve(freqs).1
            };
            let mut f1 = eval(&mut probe_freqs, x1, &problem);
            let mut f2 = eval(&mut probe_freqs, x2, &problem);
            for _ in 0..40 {
                if f1 < f2 {
                    b = x2;
                    x2 = x1;
                    f2 = f1;
                    x1 = b - inv_phi * (b - a);
                    f1 = eval(&mut probe_freqs, x1, &problem);
                } else {
                    a = x1;
                    x1 = x2;
                    f1 = f2;
                    x2 = a + inv_phi * (b - a);
                    f2 = eval(&mut probe_freqs, x2, &problem);
                }
            }
            let mid = 0.5 * (a + b);
            let fmid = eval(&mut probe_freqs, mid, &problem);
            if fmid < best.1 {
                best = (mid, fmid);
            }
            line_freqs[li] = best.0;
        }
    }

    let (amps, _ssr, variances) = problem.solve(&line_freqs);

    Ok(target_frequencies
        .iter()
        .enumerate()
        .map(|(t, &target)| match target_to_line[t] {
            None => ExtractedLine {
                frequency: target,
                magnitude: 0.0,
                uncertainty: f64::INFINITY,
                missing: true,
            },
            Some(li) => ExtractedLine {
                frequency: line_freqs[li],
                // Model amplitude c = R exp(-i Phi) / 2.
                magnitude: 2.0 * amps[li].norm(),
                uncertainty: 2.0 * variances[li].sqrt(),
                missing: false,
            },
        })
        .collect())
}

/// Columnar text view of a catalogue: `frequency_Hz magnitude phase_rad`.
pub fn render_catalogue_text(lines: &[TransitionLine]) -> String {
    let mut out = String::from("# frequency_Hz magnitude phase_rad\n");
    for line in lines {
        out.push_str(&format!(
            "{:.9e} {:.9e} {:.9e}\n",
            line.frequency,
            line.magnitude(),
            line.phase()
        ));
    }
    out
}

/// JSON view of a catalogue including quantum-number labels.
pub fn catalogue_records(lines: &[TransitionLine]) -> Vec<LineRecord> {
    lines.iter().map(LineRecord::from).collect()
}

/// Columnar text view of a time series: `t_s signal`.
pub fn render_timeseries_text(series: &TimeSeries) -> String {
    let mut out = String::from("# t_s signal\n");
    for (i, s) in series.samples.iter().enumerate() {
        out.push_str(&format!("{:.9e} {:.9e}\n", i as f64 * series.dt, s));
    }
    out
}

/// Columnar text view of a Fourier spectrum: `frequency_Hz magnitude
/// phase_rad` per bin.
pub fn render_spectrum_text(spectrum: &FrequencySpectrum) -> String {
    let mut out = String::from("# frequency_Hz magnitude phase_rad\n");
    for (f, z) in spectrum.freqs.iter().zip(&spectrum.values) {
        out.push_str(&format!("{:.9e} {:.9e} {:.9e}\n", f, z.norm(), z.arg()));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamiltonian::{total_hamiltonian, FieldVector};
    use crate::linalg::matrix_exp;
    use crate::probe::thermal_probe;
    use crate::spin_system::{magnetization_operator, preset, Axis, SpinSystem};
    use approx::assert_relative_eq;

    const GH: f64 = 42.5775e6;
    const GC: f64 = 10.7077e6;

    fn formic_catalogue(theta: f64, phi: f64, b: f64, guide: Axis) -> Vec<TransitionLine> {
        let sys = preset("formic_acid").unwrap();
        let field = FieldVector::new(theta, phi, b).unwrap();
        let h = total_hamiltonian(&sys, Some(&field), None);
        let probe = thermal_probe(&sys, guide, 1.3, 298.0).unwrap();
        let obs = magnetization_operator(&sys, Axis::Z);
        transition_catalogue(&sys, &h, &probe, &obs).unwrap()
    }

    #[test]
    fn parallel_field_gives_single_line() {
        let lines = formic_catalogue(0.0, 0.0, 1e-7, Axis::Z);
        assert_eq!(lines.len(), 1, "lines: {:?}", lines.iter().map(|l| l.frequency).collect::<Vec<_>>());
        // sqrt(J^2 + (dgamma B)^2)
        let dgb = (GH - GC) * 1e-7;
        assert_relative_eq!(lines[0].frequency, (222.2f64.powi(2) + dgb * dgb).sqrt(), max_relative = 1e-9);
    }

    #[test]
    fn perpendicular_field_gives_doublet() {
        let lines = formic_catalogue(std::f64::consts::FRAC_PI_2, 0.0, 1e-7, Axis::Z);
        // Doublet near J plus low-frequency triplet-triplet lines.
        let near_j: Vec<&TransitionLine> =
            lines.iter().filter(|l| l.frequency > 100.0).collect();
        assert_eq!(near_j.len(), 2);
        let split = near_j[1].frequency - near_j[0].frequency;
        assert_relative_eq!(split, (GH + GC) * 1e-7, max_relative = 1e-9);
        assert_relative_eq!(split, 5.32852, max_relative = 1e-5);
        // The two lines straddle the J line symmetrically to second order.
        let center = 0.5 * (near_j[0].frequency + near_j[1].frequency);
        assert!((center - 222.2).abs() < 0.1);
    }

    #[test]
    fn uncoupled_spins_have_no_zero_quantum_line() {
        // J = 0: spectrum contains only Larmor lines; any line with
        // zero-quantum (delta m = 0) character would appear near
        // |gamma_h - gamma_c| B. None may survive the floor.
        let sys = SpinSystem::new(
            "uncoupled",
            vec![GC, GH],
            nalgebra::DMatrix::zeros(2, 2),
            10.0,
        )
        .unwrap();
        let field = FieldVector::new(0.9, 0.4, 1e-7).unwrap();
        let h = total_hamiltonian(&sys, Some(&field), None);
        let probe = thermal_probe(&sys, Axis::Z, 1.3, 298.0).unwrap();
        let obs = magnetization_operator(&sys, Axis::Z);
        let lines = transition_catalogue(&sys, &h, &probe, &obs).unwrap();
        let larmor_c = GC * 1e-7;
        let larmor_h = GH * 1e-7;
        let max_mag = lines.iter().map(|l| l.magnitude()).fold(0.0, f64::max);
        for line in &lines {
            let is_larmor = (line.frequency - larmor_c).abs() < 1e-6
                || (line.frequency - larmor_h).abs() < 1e-6;
            assert!(
                is_larmor,
                "unexpected line at {} Hz with relative magnitude {}",
                line.frequency,
                line.magnitude() / max_mag
            );
        }
    }

    #[test]
    fn catalogue_matches_independent_propagation() {
        // Reconstruct Tr[rho(t) O] from the catalogue (including the static
        // diagonal part) and compare against direct propagation with a
        // Taylor-series matrix exponential.
        let sys = preset("formic_acid").unwrap();
        let field = FieldVector::new(0.9, 0.5, 8e-8).unwrap();
        let h = total_hamiltonian(&sys, Some(&field), None);
        let probe = thermal_probe(&sys, Axis::X, 1.3, 298.0).unwrap();
        let obs = magnetization_operator(&sys, Axis::Z);
        let lines = transition_catalogue(&sys, &h, &probe, &obs).unwrap();

        let eig = EigenSystem::new(h.matrix());
        let v = &eig.vectors;
        let rho_e = v.adjoint() * probe.deviation() * v;
        let obs_e = v.adjoint() * obs.matrix() * v;
        let dc: f64 = (0..4).map(|i| (rho_e[(i, i)] * obs_e[(i, i)]).re).sum();

        let dt = 1e-4;
        let u = matrix_exp(&(h.matrix() * C64::new(0.0, -std::f64::consts::TAU * dt)));
        let mut rho = probe.deviation().clone();
        let scale = lines.iter().map(|l| l.magnitude()).fold(0.0, f64::max);
        for step in 0..200 {
            let t = step as f64 * dt;
            let direct = (obs.matrix() * &rho).trace().re;
            let from_catalogue: f64 = dc
                + lines
                    .iter()
                    .map(|l| {
                        2.0 * l.magnitude()
                            * (l.phase() + std::f64::consts::TAU * l.frequency * t).cos()
                    })
                    .sum::<f64>();
            assert!(
                (direct - from_catalogue).abs() < 1e-9 * scale,
                "mismatch at t={t}: {direct} vs {from_catalogue}"
            );
            rho = &u * rho * u.adjoint();
        }
    }

    #[test]
    fn single_line_signal_is_pure_cosine() {
        let line = TransitionLine {
            frequency: 100.0,
            complex_amplitude: C64::new(1.0, 0.0),
            bra_index: 0,
            ket_index: 1,
            labels: None,
            members: vec![],
        };
        let series = time_signal(&[line], 1e12, 0.1, 1000.0).unwrap();
        for (i, s) in series.samples.iter().enumerate() {
            let t = i as f64 * series.dt;
            assert_relative_eq!(
                *s,
                (std::f64::consts::TAU * 100.0 * t).cos(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn empty_catalogue_gives_zero_signal() {
        let series = time_signal(&[], 1.0, 0.5, 100.0).unwrap();
        assert!(series.samples.iter().all(|&s| s == 0.0));
    }

    #[test]
    fn nyquist_violation_names_line() {
        let line = TransitionLine {
            frequency: 600.0,
            complex_amplitude: C64::new(1.0, 0.0),
            bra_index: 0,
            ket_index: 1,
            labels: None,
            members: vec![],
        };
        match time_signal(&[line], 1.0, 0.1, 1000.0) {
            Err(Error::NyquistViolation { frequency, .. }) => {
                assert_relative_eq!(frequency, 600.0)
            }
            other => panic!("expected Nyquist error, got {other:?}"),
        }
    }

    #[test]
    fn fft_peak_at_line_frequency() {
        let series = TimeSeries {
            dt: 1e-3,
            samples: (0..1000)
                .map(|i| (std::f64::consts::TAU * 100.0 * i as f64 * 1e-3).cos())
                .collect(),
            tau_coh: 1e12,
        };
        let spec = fourier_spectrum(&series).unwrap();
        let peak = spec
            .freqs
            .iter()
            .zip(spec.magnitudes())
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(f, _)| *f)
            .unwrap();
        assert_relative_eq!(peak, 100.0, epsilon = 1e-9);

        // DC series peaks at zero.
        let dc = TimeSeries {
            dt: 1e-3,
            samples: vec![1.0; 256],
            tau_coh: 1e12,
        };
        let spec_dc = fourier_spectrum(&dc).unwrap();
        let peak_dc = spec_dc
            .freqs
            .iter()
            .zip(spec_dc.magnitudes())
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(f, _)| *f)
            .unwrap();
        assert_relative_eq!(peak_dc, 0.0);
    }

    #[test]
    fn fft_linewidth_matches_coherence_time() {
        // A decaying cosine has a Lorentzian line of FWHM 1/(pi tau).
        let tau = 1.0;
        let line = TransitionLine {
            frequency: 50.0,
            complex_amplitude: C64::new(1.0, 0.0),
            bra_index: 0,
            ket_index: 1,
            labels: None,
            members: vec![],
        };
        let series = time_signal(&[line], tau, 20.0, 400.0).unwrap();
        let spec = fourier_spectrum(&series).unwrap();
        // 1/(pi tau) is the width of the phased (absorption-mode) line;
        // the magnitude spectrum is sqrt(3) broader.
        let peak_bin0 = spec
            .magnitudes()
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .map(|(i, _)| i)
            .unwrap();
        let phase = spec.values[peak_bin0].arg();
        let rotate = C64::from_polar(1.0, -phase);
        let mags: Vec<f64> = spec.values.iter().map(|z| (z * rotate).re).collect();
        let (peak_bin, &peak) = mags
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let half = peak / 2.0;
        let crossing = |range: &mut dyn Iterator<Item = usize>| -> f64 {
            let mut prev = peak_bin;
            for i in range {
                if mags[i] < half {
                    // Linear interpolation between bins.
                    let frac = (mags[prev] - half) / (mags[prev] - mags[i]);
                    return spec.freqs[prev] + frac * (spec.freqs[i] - spec.freqs[prev]);
                }
                prev = i;
            }
            panic!("no half-max crossing");
        };
        let upper = crossing(&mut ((peak_bin + 1)..mags.len()));
        let lower = crossing(&mut (0..peak_bin).rev());
        let fwhm = upper - lower;
        let expected = 1.0 / (std::f64::consts::PI * tau);
        assert!(
            (fwhm - expected).abs() / expected < 0.05,
            "FWHM {fwhm} vs {expected}"
        );
    }

    #[test]
    fn parseval_identity() {
        let sys = preset("formic_acid").unwrap();
        let field = FieldVector::new(1.1, 0.3, 1e-7).unwrap();
        let h = total_hamiltonian(&sys, Some(&field), None);
        let probe = thermal_probe(&sys, Axis::Z, 1.3, 298.0).unwrap();
        let obs = magnetization_operator(&sys, Axis::Z);
        let lines = transition_catalogue(&sys, &h, &probe, &obs).unwrap();
        for n_samples in [4096usize, 4097] {
            let rate = 2000.0;
            let series = time_signal(&lines, 10.4, n_samples as f64 / rate, rate).unwrap();
            assert_eq!(series.samples.len(), n_samples);
            let spec = fourier_spectrum(&series).unwrap();
            assert_relative_eq!(series.energy(), spec.energy(), max_relative = 1e-9);
        }
    }

    #[test]
    fn roundtrip_extraction_recovers_magnitudes() {
        let lines = formic_catalogue(1.289, 0.047, 1.0788e-7, Axis::X);
        let spectrum = Spectrum::new(lines.clone(), 10.4);
        let series = spectrum.time_signal().unwrap();
        let fspec = fourier_spectrum(&series).unwrap();
        let strong: Vec<&TransitionLine> = lines.iter().filter(|l| l.frequency > 100.0).collect();
        assert_eq!(strong.len(), 3);
        let targets: Vec<f64> = strong.iter().map(|l| l.frequency).collect();
        let fits = extract_line_amplitudes(&fspec, &targets, 1.0).unwrap();
        for (fit, line) in fits.iter().zip(&strong) {
            assert!(!fit.missing);
            assert_relative_eq!(fit.magnitude, line.magnitude(), max_relative = 0.01);
            assert!((fit.frequency - line.frequency).abs() < 1e-3);
        }
    }

    #[test]
    fn extraction_flags_empty_window() {
        let lines = formic_catalogue(0.0, 0.0, 1e-7, Axis::Z);
        let spectrum = Spectrum::new(lines, 10.4);
        let series = spectrum.time_signal().unwrap();
        let fspec = fourier_spectrum(&series).unwrap();
        let fits = extract_line_amplitudes(&fspec, &[150.0], 2.0).unwrap();
        assert!(fits[0].missing);
        assert_eq!(fits[0].magnitude, 0.0);
        assert!(fits[0].uncertainty.is_infinite());
    }

    #[test]
    fn overlapping_targets_report_same_peak() {
        let lines = formic_catalogue(0.0, 0.0, 2.9e-8, Axis::Z);
        let spectrum = Spectrum::new(lines.clone(), 10.4);
        let series = spectrum.time_signal().unwrap();
        let fspec = fourier_spectrum(&series).unwrap();
        let nu = lines.last().unwrap().frequency;
        let fits = extract_line_amplitudes(&fspec, &[nu - 0.005, nu + 0.005], 0.5).unwrap();
        assert!(!fits[0].missing && !fits[1].missing);
        assert_relative_eq!(fits[0].magnitude, fits[1].magnitude);
        assert_relative_eq!(fits[0].frequency, fits[1].frequency);
    }

    #[test]
    fn hermitian_pairing_makes_signal_real() {
        // The signal built from i < j pairs only is real by construction;
        // verify the complex amplitudes of conjugate pairs match.
        let sys = preset("formic_acid").unwrap();
        let field = FieldVector::new(0.8, 1.9, 1e-7).unwrap();
        let h = total_hamiltonian(&sys, Some(&field), None);
        let probe = thermal_probe(&sys, Axis::Y, 1.3, 298.0).unwrap();
        let obs = magnetization_operator(&sys, Axis::Z);
        let eig = EigenSystem::new(h.matrix());
        let v = &eig.vectors;
        let rho_e = v.adjoint() * probe.deviation() * v;
        let obs_e = v.adjoint() * obs.matrix() * v;
        let scale = rho_e.iter().map(|z| z.norm()).fold(0.0, f64::max)
            * obs_e.iter().map(|z| z.norm()).fold(0.0, f64::max);
        for i in 0..4 {
            for j in (i + 1)..4 {
                let a_ij = rho_e[(i, j)] * obs_e[(j, i)];
                let a_ji = rho_e[(j, i)] * obs_e[(i, j)];
                assert!((a_ij - a_ji.conj()).norm() < 1e-12 * scale);
            }
        }
    }

    #[test]
    fn merged_lines_respect_tolerance() {
        let lines = formic_catalogue(1.0, 0.5, 1e-7, Axis::X);
        for pair in lines.windows(2) {
            assert!(pair[1].frequency - pair[0].frequency > MERGE_TOLERANCE);
        }
    }

    #[test]
    fn line_frequencies_are_eigenvalue_gaps() {
        let sys = preset("acetonitrile").unwrap();
        let field = FieldVector::new(0.7, 0.3, 1e-7).unwrap();
        let h = total_hamiltonian(&sys, Some(&field), None);
        let probe = thermal_probe(&sys, Axis::X, 1.3, 298.0).unwrap();
        let obs = magnetization_operator(&sys, Axis::Z);
        let lines = transition_catalogue(&sys, &h, &probe, &obs).unwrap();
        let eig = EigenSystem::new(h.matrix());
        for line in &lines {
            for member in &line.members {
                let gap = eig.energies[member.ket_index] - eig.energies[member.bra_index];
                assert!((gap - line.frequency).abs() < 1e-6 + 1e-9 * line.frequency);
            }
        }
    }
}
