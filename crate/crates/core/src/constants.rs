//! Physical constants (2019 SI exact values) and default sample parameters.

/// Planck constant, J s.
pub const PLANCK: f64 = 6.626_070_15e-34;

/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380_649e-23;

/// Gyromagnetic ratio of 13C, Hz/T.
pub const GAMMA_CARBON: f64 = 10.7077e6;

/// Gyromagnetic ratio of 1H, Hz/T.
pub const GAMMA_PROTON: f64 = 42.5775e6;

/// Default polarizing-magnet field, tesla (Halbach prepolarization).
pub const DEFAULT_POLARIZING_FIELD: f64 = 1.3;

/// Default sample temperature, kelvin (room temperature; the amplitude
/// normalization used by the estimator cancels this overall scale).
pub const DEFAULT_TEMPERATURE: f64 = 298.0;
