//! Physical constants, CODATA 2018 (SI exact values since the 2019
//! redefinition).
//!
//! Internal unit system used throughout the crate: energies are stored as
//! frequencies in GHz (E/h), times in µs, external flux in units of the flux
//! quantum. Every conversion between laboratory units (fF, nH, mK) and this
//! system goes through the constants below.

/// Planck constant h (J·s), exact.
pub const PLANCK_H: f64 = 6.626_070_15e-34;

/// Elementary charge e (C), exact.
pub const ELEMENTARY_CHARGE: f64 = 1.602_176_634e-19;

/// Boltzmann constant k_B (J/K), exact.
pub const BOLTZMANN_KB: f64 = 1.380_649e-23;

/// Superconducting flux quantum Φ0 = h/2e (Wb).
pub const FLUX_QUANTUM: f64 = PLANCK_H / (2.0 * ELEMENTARY_CHARGE);

/// h/k_B in K per GHz: multiply a frequency in GHz by this to get the
/// equivalent temperature in kelvin.
pub const KELVIN_PER_GHZ: f64 = PLANCK_H * 1e9 / BOLTZMANN_KB;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flux_quantum_value() {
        // h/2e = 2.067833848...e-15 Wb
        let rel = (FLUX_QUANTUM - 2.067_833_848_461_9e-15).abs() / FLUX_QUANTUM;
        assert!(rel < 1e-12, "flux quantum off: {rel}");
    }

    #[test]
    fn kelvin_per_ghz_value() {
        // 1 GHz <-> 47.992 mK
        assert!((KELVIN_PER_GHZ - 0.047_992_430_733).abs() < 1e-9);
    }
}
