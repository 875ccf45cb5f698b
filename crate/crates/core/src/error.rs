//! Error type shared across the crate.

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("spin index {index} out of range for {n_spins}-spin system")]
    SpinIndexOutOfRange { index: usize, n_spins: usize },

    #[error("expected {expected} weights, got {actual}")]
    WeightLengthMismatch { expected: usize, actual: usize },

    #[error("system has {n_spins} spins, exceeding the {max} dense-matrix cap")]
    TooManySpins { n_spins: usize, max: usize },

    #[error("number of protons must be >= 1, got {0}")]
    InvalidProtonCount(i64),

    #[error("coupling J must be nonzero")]
    ZeroCoupling,

    #[error("coherence time must be positive, got {0}")]
    InvalidCoherenceTime(f64),

    #[error("coupling matrix must be symmetric with zero diagonal")]
    AsymmetricCouplings,

    #[error("{what} has dimension {actual}, expected {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        actual: usize,
    },

    #[error("guiding axis has zero norm")]
    ZeroNormAxis,

    #[error("polarizing field must be >= 0, got {0}")]
    NegativePolarizingField(f64),

    #[error("temperature must be positive, got {0}")]
    InvalidTemperature(f64),

    #[error("field magnitude must be >= 0 and theta in [0, pi], phi in [0, 2 pi)")]
    InvalidFieldSpec,

    #[error(
        "line at {frequency} Hz violates Nyquist limit for sample rate {sample_rate} Hz"
    )]
    NyquistViolation { frequency: f64, sample_rate: f64 },

    #[error("signal duration and sample rate must be positive")]
    InvalidAcquisition,

    #[error("empty time series")]
    EmptySeries,

    #[error("proton manifold k={k} invalid for n={n} protons")]
    InvalidManifold { n: usize, k: usize },

    #[error("degenerate two-spin problem: J = 0 and B = 0")]
    DegenerateTwoSpin,

    #[error(
        "eigenstate labeling failed: expectation {value} is {deviation} away from \
         the nearest valid quantum number (threshold 0.1)"
    )]
    LabelingFailure { value: f64, deviation: f64 },

    #[error("no measurements supplied")]
    EmptyMeasurements,

    #[error("measurement has {n_freqs} frequencies but {n_amps} amplitudes")]
    MeasurementShapeMismatch { n_freqs: usize, n_amps: usize },

    #[error("amplitude entries must be non-negative with nonzero norm")]
    InvalidAmplitudes,

    #[error("no simulated line within {window} Hz of measured line at {frequency} Hz")]
    LineMatchFailed { frequency: f64, window: f64 },

    #[error("Monte Carlo requires at least {min} trials, got {actual}")]
    TooFewTrials { min: usize, actual: usize },

    #[error("noise sigma must be positive, got {0}")]
    InvalidNoiseSigma(f64),

    #[error("{failed} of {total} Monte Carlo trials failed (more than 1%)")]
    TooManyTrialFailures { failed: usize, total: usize },

    #[error("molecule file: {0}")]
    MoleculeFile(String),

    #[error("measurement file: {0}")]
    MeasurementFile(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
