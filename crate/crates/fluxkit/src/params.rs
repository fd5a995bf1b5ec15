//! Circuit parameter containers, unit conversions, and validation.
//!
//! Energies live in GHz (E/h). The charging-energy convention is
//! E_C = e²/2C, so the kinetic term of the circuit Hamiltonian reads
//! 4·E_C·n². The Fig.-style parameter pair 1.26 fF ↔ 15.4 GHz pins this
//! convention; see the tests.

use serde::{Deserialize, Serialize};

use crate::constants::{ELEMENTARY_CHARGE, FLUX_QUANTUM, PLANCK_H};
use crate::error::{Error, Result};

/// Fluxonium circuit parameters in the internal unit system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CircuitParams {
    /// Josephson energy E_J/h (GHz), defined by the first Josephson harmonic.
    pub e_j: f64,
    /// Total charging energy E_C^Σ/h (GHz), convention E_C = e²/2C_Σ.
    pub e_c_sigma: f64,
    /// Inductive energy E_L/h (GHz), E_L = (Φ0/2π)²/L_q.
    pub e_l: f64,
    /// External flux through the loop in units of Φ0.
    pub phi_ext: f64,
}

impl CircuitParams {
    pub fn new(e_j: f64, e_c_sigma: f64, e_l: f64, phi_ext: f64) -> Result<Self> {
        validate(CircuitParams { e_j, e_c_sigma, e_l, phi_ext })
    }

    /// Same circuit at a different flux bias.
    pub fn at_flux(mut self, phi_ext: f64) -> Self {
        self.phi_ext = phi_ext;
        self
    }

    /// Plasma frequency of the bare L-C mode, √(8·E_C·E_L) (GHz).
    pub fn lc_frequency(&self) -> f64 {
        (8.0 * self.e_c_sigma * self.e_l).sqrt()
    }

    /// Zero-point phase spread of the L-C mode, (2·E_C/E_L)^¼.
    pub fn phi_zpf(&self) -> f64 {
        (2.0 * self.e_c_sigma / self.e_l).powf(0.25)
    }
}

/// Split of the total shunt capacitance into coplanar and junction parts.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CapacitanceDecomposition {
    /// Coplanar shunt capacitance C_q (fF).
    pub c_q: f64,
    /// Intrinsic junction capacitance C_J (fF).
    pub c_j: f64,
    /// Total C_Σ = C_q + C_J (fF), stored as the exact float sum.
    pub c_sigma: f64,
}

impl CapacitanceDecomposition {
    pub fn new(c_q: f64, c_j: f64) -> Result<Self> {
        if !(c_q >= 0.0) || !c_q.is_finite() {
            return Err(Error::domain("c_q", format!("must be ≥ 0, got {c_q}")));
        }
        if !(c_j >= 0.0) || !c_j.is_finite() {
            return Err(Error::domain("c_j", format!("must be ≥ 0, got {c_j}")));
        }
        Ok(CapacitanceDecomposition { c_q, c_j, c_sigma: c_q + c_j })
    }

    /// Recover C_J from a known total and coplanar part.
    pub fn from_total(c_sigma: f64, c_q: f64) -> Result<Self> {
        if !(c_sigma > 0.0) {
            return Err(Error::domain("c_sigma", format!("must be > 0, got {c_sigma}")));
        }
        if !(0.0..=c_sigma).contains(&c_q) {
            return Err(Error::domain("c_q", format!("must lie in [0, c_sigma], got {c_q}")));
        }
        let c_j = c_sigma - c_q;
        Ok(CapacitanceDecomposition { c_q, c_j, c_sigma: c_q + c_j })
    }
}

/// Readout resonator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResonatorParams {
    /// Bare resonator frequency (GHz).
    pub f_r: f64,
    /// Total linewidth κ/2π (MHz).
    pub kappa: f64,
    /// Effective qubit–resonator coupling (GHz).
    pub g: f64,
    /// Mean photon number n̄.
    pub n_photon: f64,
}

impl ResonatorParams {
    pub fn new(f_r: f64, kappa: f64, g: f64, n_photon: f64) -> Result<Self> {
        let p = ResonatorParams { f_r, kappa, g, n_photon };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.f_r > 0.0) {
            return Err(Error::domain("f_r", format!("must be > 0, got {}", self.f_r)));
        }
        if !(self.kappa > 0.0) {
            return Err(Error::domain("kappa", format!("must be > 0, got {}", self.kappa)));
        }
        if !(self.g >= 0.0) {
            return Err(Error::domain("g", format!("must be ≥ 0, got {}", self.g)));
        }
        if !(self.n_photon >= 0.0) {
            return Err(Error::domain("n_photon", format!("must be ≥ 0, got {}", self.n_photon)));
        }
        Ok(())
    }
}

/// E_C/h in GHz from a capacitance in fF, convention E_C = e²/2C.
pub fn charging_energy_from_capacitance(c_ff: f64) -> Result<f64> {
    if !(c_ff > 0.0) {
        return Err(Error::domain("capacitance", format!("must be > 0 fF, got {c_ff}")));
    }
    let c_farad = c_ff * 1e-15;
    Ok(ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * c_farad * PLANCK_H) * 1e-9)
}

/// Capacitance in fF from E_C/h in GHz (inverse of the above).
pub fn capacitance_from_charging_energy(e_c_ghz: f64) -> Result<f64> {
    if !(e_c_ghz > 0.0) {
        return Err(Error::domain("e_c_sigma", format!("must be > 0 GHz, got {e_c_ghz}")));
    }
    let c_farad = ELEMENTARY_CHARGE * ELEMENTARY_CHARGE / (2.0 * e_c_ghz * 1e9 * PLANCK_H);
    Ok(c_farad * 1e15)
}

/// E_L/h in GHz from an inductance in nH, E_L = (Φ0/2π)²/L.
pub fn inductive_energy_from_inductance(l_nh: f64) -> Result<f64> {
    if !(l_nh > 0.0) {
        return Err(Error::domain("inductance", format!("must be > 0 nH, got {l_nh}")));
    }
    let l_henry = l_nh * 1e-9;
    let phi0_over_2pi = FLUX_QUANTUM / (2.0 * std::f64::consts::PI);
    Ok(phi0_over_2pi * phi0_over_2pi / (l_henry * PLANCK_H) * 1e-9)
}

/// Inductance in nH from E_L/h in GHz (inverse of the above).
pub fn inductance_from_inductive_energy(e_l_ghz: f64) -> Result<f64> {
    if !(e_l_ghz > 0.0) {
        return Err(Error::domain("e_l", format!("must be > 0 GHz, got {e_l_ghz}")));
    }
    let phi0_over_2pi = FLUX_QUANTUM / (2.0 * std::f64::consts::PI);
    let l_henry = phi0_over_2pi * phi0_over_2pi / (e_l_ghz * 1e9 * PLANCK_H);
    Ok(l_henry * 1e9)
}

/// Check all invariants, returning the parameters unchanged if they hold.
pub fn validate(params: CircuitParams) -> Result<CircuitParams> {
    if !(params.e_j > 0.0) || !params.e_j.is_finite() {
        return Err(Error::domain("e_j", format!("must be > 0 GHz, got {}", params.e_j)));
    }
    if !(params.e_c_sigma > 0.0) || !params.e_c_sigma.is_finite() {
        return Err(Error::domain("e_c_sigma", format!("must be > 0 GHz, got {}", params.e_c_sigma)));
    }
    if !(params.e_l > 0.0) || !params.e_l.is_finite() {
        return Err(Error::domain("e_l", format!("must be > 0 GHz, got {}", params.e_l)));
    }
    if !params.phi_ext.is_finite() {
        return Err(Error::domain("phi_ext", format!("must be finite, got {}", params.phi_ext)));
    }
    Ok(params)
}

/// On-disk parameter file. Keys carry explicit units; unknown keys are
/// rejected. Exactly one of (`e_c_sigma_ghz`, `c_sigma_ff`) and one of
/// (`e_l_ghz`, `l_q_nh`) must be present.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsFile {
    pub e_j_ghz: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_c_sigma_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c_sigma_ff: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub e_l_ghz: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub l_q_nh: Option<f64>,
    #[serde(default)]
    pub phi_ext_phi0: f64,
    /// Josephson-harmonic coefficients of the current-phase relation;
    /// defaults to a pure sinusoid.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cphir_harmonics: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub resonator: Option<ResonatorFile>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResonatorFile {
    pub f_r_ghz: f64,
    pub kappa_mhz: f64,
    #[serde(default)]
    pub g_ghz: f64,
    #[serde(default)]
    pub n_photon: f64,
}

impl ParamsFile {
    pub fn parse(json: &str) -> Result<Self> {
        serde_json::from_str(json)
            .map_err(|e| Error::Json { context: "parameter file".into(), source: e })
    }

    pub fn circuit_params(&self) -> Result<CircuitParams> {
        let e_c = match (self.e_c_sigma_ghz, self.c_sigma_ff) {
            (Some(e), None) => e,
            (None, Some(c)) => charging_energy_from_capacitance(c)?,
            (Some(_), Some(_)) => {
                return Err(Error::Config(
                    "give exactly one of e_c_sigma_ghz / c_sigma_ff, not both".into(),
                ))
            }
            (None, None) => {
                return Err(Error::Config("missing e_c_sigma_ghz or c_sigma_ff".into()))
            }
        };
        let e_l = match (self.e_l_ghz, self.l_q_nh) {
            (Some(e), None) => e,
            (None, Some(l)) => inductive_energy_from_inductance(l)?,
            (Some(_), Some(_)) => {
                return Err(Error::Config("give exactly one of e_l_ghz / l_q_nh, not both".into()))
            }
            (None, None) => return Err(Error::Config("missing e_l_ghz or l_q_nh".into())),
        };
        CircuitParams::new(self.e_j_ghz, e_c, e_l, self.phi_ext_phi0)
    }

    pub fn resonator_params(&self) -> Result<Option<ResonatorParams>> {
        match &self.resonator {
            None => Ok(None),
            Some(r) => Ok(Some(ResonatorParams::new(r.f_r_ghz, r.kappa_mhz, r.g_ghz, r.n_photon)?)),
        }
    }
}
