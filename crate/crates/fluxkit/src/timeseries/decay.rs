//! Single-exponential decay fits (T1, T2-echo style data).

use serde::Serialize;

use crate::error::{Error, Result};
use crate::fitting::lm::{self, LmOptions};

#[derive(Debug, Clone, Copy, Serialize)]
pub struct DecayFit {
    /// Decay time (same unit as the input times).
    pub t: f64,
    pub amplitude: f64,
    pub offset: f64,
    pub rms_residual: f64,
}

/// Least-squares fit of A·exp(−t/T) + B.
pub fn fit_exponential_decay(times: &[f64], populations: &[f64]) -> Result<DecayFit> {
    if times.len() != populations.len() {
        return Err(Error::Data("times and populations differ in length".into()));
    }
    if times.len() < 6 {
        return Err(Error::InsufficientData(format!("{} points, need ≥ 6", times.len())));
    }
    if times.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Data("times must be strictly increasing".into()));
    }
    let span = times[times.len() - 1] - times[0];
    // Tail mean estimates the offset; the head sets the amplitude sign.
    let n_tail = (times.len() / 5).max(2);
    let tail: f64 =
        populations[populations.len() - n_tail..].iter().sum::<f64>() / n_tail as f64;
    let head: f64 = populations[..n_tail].iter().sum::<f64>() / n_tail as f64;
    let a0 = head - tail;
    let x0 = [a0, (span / 3.0).ln(), tail];
    let res = lm::minimize(
        |p, out| {
            let (a, t, b) = (p[0], p[1].exp(), p[2]);
            out.clear();
            for (&ti, &yi) in times.iter().zip(populations) {
                out.push(a * (-(ti - times[0]) / t).exp() + b - yi);
            }
            Ok(())
        },
        &x0,
        &LmOptions { max_iterations: 300, ..Default::default() },
    )?;
    let t = res.x[1].exp();
    let amplitude = res.x[0];
    let scale = populations.iter().fold(0.0_f64, |m, y| m.max(y.abs())).max(1e-300);
    if t > 1e4 * span {
        return Err(Error::Data(format!(
            "no decay on the sampled window (fitted T = {t:.3e} vs span {span:.3e})"
        )));
    }
    if amplitude.abs() < 1e-9 * scale {
        return Err(Error::Data("amplitude ≈ 0: decay time unidentifiable".into()));
    }
    if !res.converged {
        return Err(Error::Convergence {
            what: "exponential decay fit",
            details: format!("no convergence after {} evals", res.n_evals),
        });
    }
    let rms =
        (res.residuals.iter().map(|r| r * r).sum::<f64>() / res.residuals.len() as f64).sqrt();
    Ok(DecayFit { t, amplitude, offset: res.x[2], rms_residual: rms })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn noiseless_decay_is_exact() {
        let times: Vec<f64> = (0..60).map(|i| i as f64 * 0.8).collect();
        let y: Vec<f64> = times.iter().map(|&t| 0.9 * (-t / 10.5).exp() + 0.05).collect();
        let fit = fit_exponential_decay(&times, &y).unwrap();
        assert_relative_eq!(fit.t, 10.5, max_relative = 1e-8);
        assert_relative_eq!(fit.amplitude, 0.9, max_relative = 1e-8);
        assert_relative_eq!(fit.offset, 0.05, max_relative = 1e-6);
    }

    #[test]
    fn constant_data_is_an_error() {
        let times: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y = vec![0.4; 20];
        assert!(fit_exponential_decay(&times, &y).is_err());
    }

    #[test]
    fn too_few_points_rejected() {
        let times = [0.0, 1.0, 2.0, 3.0];
        let y = [1.0, 0.5, 0.25, 0.125];
        assert!(matches!(
            fit_exponential_decay(&times, &y),
            Err(Error::InsufficientData(_))
        ));
    }

    #[test]
    fn unit_rescaling_invariance() {
        // Fitting in ns must give 1000× the µs decay time.
        let times_us: Vec<f64> = (0..50).map(|i| i as f64 * 0.7).collect();
        let y: Vec<f64> = times_us
            .iter()
            .enumerate()
            .map(|(i, &t)| 0.8 * (-t / 11.4).exp() + 0.1 + if i % 2 == 0 { 2e-3 } else { -2e-3 })
            .collect();
        let fit_us = fit_exponential_decay(&times_us, &y).unwrap();
        let times_ns: Vec<f64> = times_us.iter().map(|t| t * 1e3).collect();
        let fit_ns = fit_exponential_decay(&times_ns, &y).unwrap();
        assert_relative_eq!(fit_ns.t, fit_us.t * 1e3, max_relative = 1e-6);
    }
}
