//! Modelling and analysis toolkit for cavity-QED single-photon sources.
//!
//! The crate is organised around the pieces needed to design and characterise
//! a quantum dot in a polarisation-split open microcavity:
//!
//! * [`quantum`] – dense complex matrices and the emitter ⊗ Fock operators.
//! * [`pulse`] – Gaussian laser pulses and their filtering by a detuned cavity mode.
//! * [`lindblad`] – master-equation dynamics, Rabi maps and π-pulse search.
//! * [`cavity`] – transfer-matrix mirror/cavity modelling and Gaussian mode fits.
//! * [`metrics`] – closed-form figures of merit (Purcell, β, η, efficiency budget).
//! * [`stats`] – g², Hong-Ou-Mandel visibility and detector calibration.
//!
//! Rates are quoted everywhere as ordinary frequencies `x/(2π)` in GHz; times
//! are in picoseconds unless a name says otherwise.

pub mod cavity;
pub mod error;
pub mod format;
pub mod lindblad;
pub mod metrics;
pub mod ode;
pub mod optimize;
pub mod parallel;
pub mod pulse;
pub mod quantum;
pub mod stats;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
pub use parallel::Execution;
