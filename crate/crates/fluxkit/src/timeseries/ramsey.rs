//! Ramsey fringe fitting with a two-frequency beating model.
//!
//! Model: A·e^(−t/T2*)·[cos(2πf₁t + φ₁) + r·cos(2πf₂t + φ₂)] + B, with a
//! single-tone fallback selected by an F-test at α = 0.01 when the second
//! tone is insignificant. Times in µs, frequencies in MHz (1 MHz = 1/µs).

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, FisherSnedecor};

use crate::error::{Error, Result};
use crate::fitting::lm::{self, LmOptions};

#[derive(Debug, Clone, Serialize)]
pub struct RamseyFit {
    /// Primary tone (MHz).
    pub f1: f64,
    /// Secondary tone (MHz) when the two-tone model is selected.
    pub f2: Option<f64>,
    /// Dephasing time T2* (µs).
    pub t2_star: f64,
    pub amplitude: f64,
    /// Amplitude ratio of the second tone (two-tone model only).
    pub amplitude_ratio: Option<f64>,
    pub phase1: f64,
    pub phase2: Option<f64>,
    pub offset: f64,
    /// |f1 − f2| (MHz), absent for single-tone fits.
    pub f_beating: Option<f64>,
    /// Whether the record is long enough to resolve the beating
    /// (span ≥ 1.5 / f_beating).
    pub beating_resolved: bool,
    pub rms_residual: f64,
}

impl RamseyFit {
    /// Average qubit frequency (MHz): the mean of the two tones for a
    /// beating record, otherwise the single tone.
    pub fn mean_frequency(&self) -> f64 {
        match self.f2 {
            Some(f2) => 0.5 * (self.f1 + f2),
            None => self.f1,
        }
    }
}

/// Jump of the average qubit frequency between two repeats (MHz).
pub fn frequency_jump(a: &RamseyFit, b: &RamseyFit) -> f64 {
    (a.mean_frequency() - b.mean_frequency()).abs()
}

/// Coarse periodogram peak (MHz) for initialization.
fn dominant_frequency(times: &[f64], signal: &[f64]) -> f64 {
    let n = times.len();
    let span = times[n - 1] - times[0];
    let mean = signal.iter().sum::<f64>() / n as f64;
    let fmax = 0.5 * (n as f64 - 1.0) / span; // ~Nyquist for uniform sampling
    let mut best = (0.0, 0.0);
    let n_scan = 2048.min(20 * n);
    for k in 1..n_scan {
        let f = fmax * k as f64 / n_scan as f64;
        let (mut c, mut s) = (0.0, 0.0);
        for (&t, &y) in times.iter().zip(signal) {
            let arg = 2.0 * std::f64::consts::PI * f * (t - times[0]);
            c += (y - mean) * arg.cos();
            s += (y - mean) * arg.sin();
        }
        let p = c * c + s * s;
        if p > best.1 {
            best = (f, p);
        }
    }
    best.0
}

struct ToneFit {
    x: Vec<f64>,
    rss: f64,
    residuals: Vec<f64>,
    converged: bool,
}

fn fit_single(times: &[f64], signal: &[f64], f_init: f64, span: f64) -> Result<ToneFit> {
    // Variables: [A, ln T2, f (MHz), φ, B]
    let mean = signal.iter().sum::<f64>() / signal.len() as f64;
    let amp0 = signal.iter().map(|y| (y - mean).abs()).fold(0.0_f64, f64::max);
    let x0 = [amp0, (span / 2.0).ln(), f_init, 0.0, mean];
    let res = lm::minimize(
        |p, out| {
            let (a, t2, f, ph, b) = (p[0], p[1].exp(), p[2], p[3], p[4]);
            out.clear();
            for (&t, &y) in times.iter().zip(signal) {
                let tau = t - times[0];
                let m = a
                    * (-tau / t2).exp()
                    * (2.0 * std::f64::consts::PI * f * tau + ph).cos()
                    + b;
                out.push(m - y);
            }
            Ok(())
        },
        &x0,
        &LmOptions { max_iterations: 400, ..Default::default() },
    )?;
    Ok(ToneFit {
        rss: 2.0 * res.cost,
        x: res.x,
        residuals: res.residuals,
        converged: res.converged,
    })
}

fn fit_double(
    times: &[f64],
    signal: &[f64],
    single: &ToneFit,
    f2_init: f64,
) -> Result<ToneFit> {
    // Variables: [A, ln T2, f1, φ1, ln r, f2, φ2, B]
    let x0 = [
        single.x[0],
        single.x[1],
        single.x[2],
        single.x[3],
        0.0_f64, // r = 1: equal-weight beating
        f2_init,
        0.0,
        single.x[4],
    ];
    let res = lm::minimize(
        |p, out| {
            let (a, t2, f1, p1, r, f2, p2, b) =
                (p[0], p[1].exp(), p[2], p[3], p[4].exp(), p[5], p[6], p[7]);
            out.clear();
            for (&t, &y) in times.iter().zip(signal) {
                let tau = t - times[0];
                let w = 2.0 * std::f64::consts::PI;
                let m = a
                    * (-tau / t2).exp()
                    * ((w * f1 * tau + p1).cos() + r * (w * f2 * tau + p2).cos())
                    + b;
                out.push(m - y);
            }
            Ok(())
        },
        &x0,
        &LmOptions { max_iterations: 600, ..Default::default() },
    )?;
    Ok(ToneFit {
        rss: 2.0 * res.cost,
        x: res.x,
        residuals: res.residuals,
        converged: res.converged,
    })
}

/// Fit Ramsey fringes; picks the two-tone model only when the F-test finds
/// the second tone significant at α = 0.01.
pub fn fit_ramsey_two_tone(times: &[f64], signal: &[f64]) -> Result<RamseyFit> {
    if times.len() != signal.len() {
        return Err(Error::Data("times and signal differ in length".into()));
    }
    if times.len() < 16 {
        return Err(Error::InsufficientData(format!("{} points, need ≥ 16", times.len())));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Data("times must be strictly increasing".into()));
    }
    let span = times[times.len() - 1] - times[0];
    let f_init = dominant_frequency(times, signal);
    let single = fit_single(times, signal, f_init, span)?;

    // Second-tone seed from the periodogram of the single-tone residuals.
    let f2_init = dominant_frequency(times, &single.residuals);
    let double = fit_double(times, signal, &single, f2_init)?;

    let n = times.len();
    let (p1, p2) = (5usize, 8usize);
    let two_tone_significant = if double.converged && double.rss < single.rss && n > p2 {
        let fstat = ((single.rss - double.rss) / (p2 - p1) as f64)
            / (double.rss / (n - p2) as f64);
        let dist = FisherSnedecor::new((p2 - p1) as f64, (n - p2) as f64).map_err(|e| {
            Error::Data(format!("F-test setup failed: {e}"))
        })?;
        let p_value = 1.0 - dist.cdf(fstat.max(0.0));
        p_value < 0.01
    } else {
        false
    };

    let rms = |r: &[f64]| (r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64).sqrt();

    if two_tone_significant {
        let x = &double.x;
        let (mut f1, mut p1v, mut r, mut f2, mut p2v) =
            (x[2].abs(), x[3], x[4].exp(), x[5].abs(), x[6]);
        // Report tones in ascending frequency with the ratio referred to the
        // first.
        if f2 < f1 {
            std::mem::swap(&mut f1, &mut f2);
            std::mem::swap(&mut p1v, &mut p2v);
            r = 1.0 / r;
        }
        let f_beat = (f2 - f1).abs();
        Ok(RamseyFit {
            f1,
            f2: Some(f2),
            t2_star: x[1].exp(),
            amplitude: x[0],
            amplitude_ratio: Some(r),
            phase1: p1v,
            phase2: Some(p2v),
            offset: x[7],
            f_beating: Some(f_beat),
            beating_resolved: f_beat > 0.0 && span >= 1.5 / f_beat,
            rms_residual: rms(&double.residuals),
        })
    } else {
        if !single.converged {
            return Err(Error::Convergence {
                what: "Ramsey fit",
                details: "neither the single- nor two-tone model converged".into(),
            });
        }
        let x = &single.x;
        Ok(RamseyFit {
            f1: x[2].abs(),
            f2: None,
            t2_star: x[1].exp(),
            amplitude: x[0],
            amplitude_ratio: None,
            phase1: x[3],
            phase2: None,
            offset: x[4],
            f_beating: None,
            beating_resolved: true,
            rms_residual: rms(&single.residuals),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn beating_signal(f1: f64, f2: f64, t2: f64, noise: f64, n: usize, dt: f64) -> (Vec<f64>, Vec<f64>) {
        let times: Vec<f64> = (0..n).map(|i| i as f64 * dt).collect();
        let signal: Vec<f64> = times
            .iter()
            .enumerate()
            .map(|(i, &t)| {
                let w = 2.0 * std::f64::consts::PI;
                let det = if i % 2 == 0 { noise } else { -noise };
                0.5 * (-t / t2).exp() * ((w * f1 * t).cos() + (w * f2 * t).cos()) + 0.5 + det
            })
            .collect();
        (times, signal)
    }

    #[test]
    fn recovers_beating_tones() {
        let (t, y) = beating_signal(2.0, 2.2, 5.0, 0.0, 400, 0.05);
        let fit = fit_ramsey_two_tone(&t, &y).unwrap();
        assert!(fit.f2.is_some(), "two-tone model not selected");
        assert_relative_eq!(fit.f1, 2.0, max_relative = 0.02);
        assert_relative_eq!(fit.f2.unwrap(), 2.2, max_relative = 0.02);
        assert_relative_eq!(fit.t2_star, 5.0, max_relative = 0.02);
        assert_relative_eq!(fit.f_beating.unwrap(), 0.2, max_relative = 0.05);
        assert!(fit.beating_resolved);
    }

    #[test]
    fn single_tone_fallback() {
        let times: Vec<f64> = (0..300).map(|i| i as f64 * 0.05).collect();
        let signal: Vec<f64> = times
            .iter()
            .map(|&t| {
                0.5 * (-t / 4.0).exp() * (2.0 * std::f64::consts::PI * 2.0 * t).cos() + 0.5
            })
            .collect();
        let fit = fit_ramsey_two_tone(&times, &signal).unwrap();
        assert!(fit.f2.is_none(), "second tone should be insignificant");
        assert!(fit.f_beating.is_none());
        assert_relative_eq!(fit.f1, 2.0, max_relative = 1e-3);
    }

    #[test]
    fn frequency_jump_between_repeats() {
        let (t, y) = beating_signal(2.0, 2.2, 5.0, 1e-3, 400, 0.05);
        let a = fit_ramsey_two_tone(&t, &y).unwrap();
        let (t2, y2) = beating_signal(3.5, 3.7, 5.0, 1e-3, 400, 0.05);
        let b = fit_ramsey_two_tone(&t2, &y2).unwrap();
        assert_relative_eq!(frequency_jump(&a, &b), 1.5, max_relative = 0.02);
    }
}
