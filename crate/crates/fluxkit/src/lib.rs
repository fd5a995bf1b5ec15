//! Fluxonium circuit toolkit: spectrum simulation from the single-mode
//! circuit Hamiltonian, nonlinear least-squares recovery of circuit
//! parameters from measured spectra, readout/reflection modeling, and
//! time-domain qubit data analysis (quantum jumps, Ramsey beating, RTN power
//! spectra, decoherence budgets).
//!
//! Unit conventions: energies as frequencies in GHz (E/h), rates quoted as
//! f = ω/2π unless noted, times in µs, flux in units of Φ0.

pub mod cli;
pub mod constants;
pub mod coupled;
pub mod error;
pub mod fitting;
pub mod hamiltonian;
pub mod params;
pub mod synth;
pub mod timeseries;

pub use error::{Error, Result};
pub use hamiltonian::CphiRModel;
pub use params::{CircuitParams, ResonatorParams};
