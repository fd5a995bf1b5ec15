//! Current-phase relation of the weak link as a Josephson-harmonic series.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Current-phase relation I(φ) = I_c Σ c_n sin(nφ), n = 1..N, with the
/// corresponding Josephson potential U(φ) = −E_J Σ (c_n/n) cos(nφ) up to a
/// φ-independent constant. The first harmonic is pinned to 1 so that E_J is
/// defined by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CphiRModel {
    harmonics: Vec<f64>,
}

impl CphiRModel {
    pub fn new(harmonics: Vec<f64>) -> Result<Self> {
        if harmonics.is_empty() {
            return Err(Error::domain("harmonics", "need at least the first harmonic"));
        }
        if harmonics[0] != 1.0 {
            return Err(Error::domain(
                "harmonics",
                format!("c_1 must equal 1 (E_J normalization), got {}", harmonics[0]),
            ));
        }
        if let Some(bad) = harmonics.iter().find(|c| !c.is_finite()) {
            return Err(Error::domain("harmonics", format!("non-finite coefficient {bad}")));
        }
        Ok(CphiRModel { harmonics })
    }

    /// Ideal SIS junction: I = I_c sin φ.
    pub fn sinusoidal() -> Self {
        CphiRModel { harmonics: vec![1.0] }
    }

    /// Slanted relation I = I_c(sin φ − 0.25 sin 2φ + 0.05 sin 3φ).
    pub fn slanted() -> Self {
        CphiRModel { harmonics: vec![1.0, -0.25, 0.05] }
    }

    /// Sawtooth-like relation I = I_c Σ (−1)^(n+1) sin(nφ)/n up to `n_max`.
    pub fn sawtooth(n_max: usize) -> Self {
        let harmonics =
            (1..=n_max.max(1)).map(|n| if n % 2 == 1 { 1.0 } else { -1.0 } / n as f64).collect();
        CphiRModel { harmonics }
    }

    pub fn harmonics(&self) -> &[f64] {
        &self.harmonics
    }

    pub fn n_harmonics(&self) -> usize {
        self.harmonics.len()
    }

    /// Supercurrent in units of I_c.
    pub fn current(&self, phi: f64) -> f64 {
        self.harmonics
            .iter()
            .enumerate()
            .map(|(i, c)| c * ((i + 1) as f64 * phi).sin())
            .sum()
    }

    /// Josephson potential in units of E_J (i.e. −Σ (c_n/n) cos(nφ)).
    pub fn potential(&self, phi: f64) -> f64 {
        -self
            .harmonics
            .iter()
            .enumerate()
            .map(|(i, c)| {
                let n = (i + 1) as f64;
                c / n * (n * phi).cos()
            })
            .sum::<f64>()
    }
}

impl Default for CphiRModel {
    fn default() -> Self {
        CphiRModel::sinusoidal()
    }
}
