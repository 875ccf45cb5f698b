//! Simulation and estimation toolkit for strongly-coupled nuclear-spin
//! clusters in ultralow magnetic fields.
//!
//! In the regime where the scalar spin-spin couplings dominate the Larmor
//! frequencies (|J| >> |gamma B|), the spectrum of a coupled spin cluster
//! carries information about *all three* components of the applied magnetic
//! field, or of an inertial-rotation pseudo-field. This crate models that
//! physics end to end:
//!
//! * [`spin_system`] — molecules as coupled spin-1/2 networks and their
//!   product-space angular-momentum operators;
//! * [`hamiltonian`] — Zeeman + Heisenberg-coupling + rotation Hamiltonians;
//! * [`probe`] — thermal probe states prepared by a guiding field;
//! * [`spectrum`] — transition catalogues, time-domain signals, FFT spectra
//!   and line-amplitude extraction;
//! * [`analytic`] — closed-form splitting formulas, selection rules and
//!   quantum-number labeling used to cross-validate the numerics;
//! * [`frame`] — the field-aligned coordinate system and the factored
//!   amplitude formula;
//! * [`estimator`] — recovery of (theta, phi, B) or (theta, phi, Omega) from
//!   line amplitudes, with Monte Carlo precision benchmarks.
//!
//! All frequencies are stored in Hz and gyromagnetic ratios in Hz/T; the
//! 2*pi factors appear only at time-propagation boundaries (phase =
//! 2*pi*nu*t).

pub mod analytic;
pub mod constants;
pub mod error;
pub mod estimator;
pub mod frame;
pub mod hamiltonian;
pub mod linalg;
pub mod probe;
pub mod spectrum;
pub mod spin_system;

pub use error::{Error, Result};
