//! Time-domain analysis: exponential decay fits, two-frequency Ramsey fits,
//! IQ histogramming, latching-filter jump detection with dwell-time MLE, and
//! RTN power-spectrum estimation.

mod decay;
mod jumps;
mod psd;
mod ramsey;

pub use decay::{fit_exponential_decay, DecayFit};
pub use jumps::{
    dwell_mle, histogram_iq, latch_filter, DoubleGaussianFit, DwellMle, LatchParams,
};
pub use psd::{estimate_psd, fit_rtn_psd, PsdEstimate, RtnPsdFit, SampledSeries};
pub use ramsey::{fit_ramsey_two_tone, frequency_jump, RamseyFit};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Demodulated readout time series in √photon units.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IQTrace {
    /// Complex samples (I + iQ).
    pub samples: Vec<Complex64>,
    /// Demodulation window per sample (µs).
    pub dt: f64,
    /// Acquisition tags.
    #[serde(default)]
    pub meta: BTreeMap<String, String>,
}

impl IQTrace {
    pub fn new(samples: Vec<Complex64>, dt: f64) -> Result<Self> {
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::domain("dt", format!("must be > 0 µs, got {dt}")));
        }
        if samples.iter().any(|s| !s.re.is_finite() || !s.im.is_finite()) {
            return Err(Error::Data("non-finite IQ sample".into()));
        }
        Ok(IQTrace { samples, dt, meta: BTreeMap::new() })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Total duration (µs).
    pub fn duration(&self) -> f64 {
        self.len() as f64 * self.dt
    }
}

/// Direction of a qubit-state transition.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    /// g → e
    Up,
    /// e → g
    Down,
}

/// Segmented qubit-state trajectory from the latching filter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JumpRecord {
    /// Per-sample state labels: 0 = g, 1 = e.
    pub states: Vec<u8>,
    /// (sample index of the first sample in the new state, direction).
    pub transitions: Vec<(usize, Direction)>,
    /// Dwell durations (µs) in g, in trace order, including the censored
    /// first/last dwells.
    pub dwell_g: Vec<f64>,
    /// Dwell durations (µs) in e, in trace order, including censored ends.
    pub dwell_e: Vec<f64>,
    pub filter_params: LatchParams,
    /// Sample spacing (µs).
    pub dt: f64,
}

impl JumpRecord {
    /// Rebuild the state sequence from the initial state plus dwells; the
    /// dwell lists must reconstruct it exactly.
    pub fn reconstruct_states(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(self.states.len());
        let first = *self.states.first().unwrap_or(&0);
        let mut state = first;
        let (mut ig, mut ie) = (0usize, 0usize);
        while out.len() < self.states.len() {
            let d = if state == 0 {
                let v = self.dwell_g.get(ig).copied();
                ig += 1;
                v
            } else {
                let v = self.dwell_e.get(ie).copied();
                ie += 1;
                v
            };
            let Some(d) = d else { break };
            let n = (d / self.dt).round() as usize;
            for _ in 0..n {
                if out.len() < self.states.len() {
                    out.push(state);
                }
            }
            state = 1 - state;
        }
        out
    }
}
