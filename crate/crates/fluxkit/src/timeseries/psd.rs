//! Power spectral density estimation and Lorentzian RTN fitting.
//!
//! Convention: one-sided, Parseval-normalized. With the normalized DFT
//! F(f_j) = |X_j|/N of a mean-subtracted series of duration T the density is
//! S(f_j) = 2T·F²(f_j) for 0 < f_j < f_Nyquist (the Nyquist bin, when
//! present, carries T·F² once), so that Σ S·Δf reproduces the signal
//! variance exactly. White noise of variance σ² then sits at 2σ²Δt.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fitting::lm::{self, LmOptions};

/// A uniformly sampled time series with explicit timestamps (seconds).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampledSeries {
    pub t_s: Vec<f64>,
    pub values: Vec<f64>,
}

impl SampledSeries {
    pub fn from_values(values: Vec<f64>, dt_s: f64) -> Self {
        let t_s = (0..values.len()).map(|i| i as f64 * dt_s).collect();
        SampledSeries { t_s, values }
    }

    /// Sample spacing, validated uniform to 1e-6 relative.
    pub fn dt(&self) -> Result<f64> {
        if self.t_s.len() != self.values.len() {
            return Err(Error::Data("timestamp/value length mismatch".into()));
        }
        if self.t_s.len() < 4 {
            return Err(Error::InsufficientData("need ≥ 4 samples".into()));
        }
        let dt = self.t_s[1] - self.t_s[0];
        if !(dt > 0.0) {
            return Err(Error::Data("timestamps not increasing".into()));
        }
        for w in self.t_s.windows(2) {
            let d = w[1] - w[0];
            if (d - dt).abs() > 1e-6 * dt {
                return Err(Error::Data(format!(
                    "non-uniform timestamps: step {d} vs {dt}"
                )));
            }
        }
        Ok(dt)
    }
}

/// One-sided averaged periodogram.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdEstimate {
    /// Frequencies (Hz), excluding DC.
    pub frequencies: Vec<f64>,
    /// Power density (input-unit² per Hz).
    pub power: Vec<f64>,
    pub n_averages: usize,
    /// Per-trace duration (s).
    pub total_duration: f64,
}

impl PsdEstimate {
    /// ∫S df by the bin sum (equals the mean signal variance).
    pub fn integrated_power(&self) -> f64 {
        let df = 1.0 / self.total_duration;
        self.power.iter().sum::<f64>() * df
    }
}

/// Average the one-sided periodograms of equally long, uniformly sampled
/// traces. The per-trace mean is removed (the DC bin is not reported).
pub fn estimate_psd(traces: &[SampledSeries]) -> Result<PsdEstimate> {
    if traces.is_empty() {
        return Err(Error::InsufficientData("no traces".into()));
    }
    let dt = traces[0].dt()?;
    let n = traces[0].values.len();
    for (k, tr) in traces.iter().enumerate() {
        let d = tr.dt()?;
        if tr.values.len() != n || (d - dt).abs() > 1e-6 * dt {
            return Err(Error::Data(format!("trace {k} has different length or spacing")));
        }
    }
    let duration = n as f64 * dt;
    let n_bins = n / 2; // bins 1..=n/2 (Nyquist included for even n)
    let mut acc = vec![0.0; n_bins];
    let mut planner = FftPlanner::<f64>::new();
    let fft = planner.plan_fft_forward(n);
    for tr in traces {
        let mean = tr.values.iter().sum::<f64>() / n as f64;
        let mut buf: Vec<Complex<f64>> =
            tr.values.iter().map(|v| Complex::new(v - mean, 0.0)).collect();
        fft.process(&mut buf);
        for j in 1..=n_bins {
            let f2 = buf[j].norm_sqr() / (n as f64 * n as f64); // F² = |X/N|²
            let one_sided = if n % 2 == 0 && j == n_bins {
                duration * f2 // Nyquist bin appears once
            } else {
                2.0 * duration * f2
            };
            acc[j - 1] += one_sided;
        }
    }
    let n_averages = traces.len();
    for v in &mut acc {
        *v /= n_averages as f64;
    }
    let frequencies = (1..=n_bins).map(|j| j as f64 / duration).collect();
    Ok(PsdEstimate { frequencies, power: acc, n_averages, total_duration: duration })
}

/// Lorentzian RTN spectrum fit S(f) = b·Γ²/(f² + Γ²) + S0.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RtnPsdFit {
    /// Switching rate Γ (Hz): the Lorentzian knee frequency.
    pub gamma_rtn: f64,
    /// Lorentzian amplitude (unit²/Hz).
    pub b: f64,
    /// White noise floor (unit²/Hz).
    pub s0: f64,
    pub rms_log_residual: f64,
    pub converged: bool,
}

/// Weighted least squares in log power. The measured band must bracket the
/// knee with at least a decade of margin overall.
pub fn fit_rtn_psd(psd: &PsdEstimate) -> Result<RtnPsdFit> {
    let m = psd.frequencies.len();
    if m < 8 {
        return Err(Error::InsufficientData(format!("{m} PSD bins, need ≥ 8")));
    }
    if psd.power.iter().any(|&p| !(p > 0.0)) {
        return Err(Error::Data("non-positive PSD bin".into()));
    }
    let f_min = psd.frequencies[0];
    let f_max = psd.frequencies[m - 1];
    if f_max / f_min < 10.0 {
        return Err(Error::Data(format!(
            "PSD band [{f_min:.3e}, {f_max:.3e}] Hz spans less than a decade"
        )));
    }
    // Flat-spectrum guard: without a visible knee Γ is unidentifiable.
    let tail_start = m - (m / 4).max(2);
    let mut tail: Vec<f64> = psd.power[tail_start..].to_vec();
    tail.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let s0_init = tail[tail.len() / 2];
    let mut head: Vec<f64> = psd.power[..(m / 8).max(3)].to_vec();
    head.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let low_level = head[head.len() / 2];
    if low_level < 3.0 * s0_init {
        return Err(Error::Data(
            "spectrum is flat within the band: RTN switching rate unidentifiable".into(),
        ));
    }
    let b_init = (low_level - s0_init).max(s0_init);
    // Knee guess: first bin where the excess power halves.
    let gamma_init = psd
        .frequencies
        .iter()
        .zip(&psd.power)
        .find(|(_, &p)| p - s0_init < b_init / 2.0)
        .map(|(&f, _)| f)
        .unwrap_or(f_max / 3.0);

    let x0 = [gamma_init.ln(), b_init.ln(), s0_init.ln()];
    let res = lm::minimize(
        |p, out| {
            let (g, b, s0) = (p[0].exp(), p[1].exp(), p[2].exp());
            out.clear();
            for (&f, &pw) in psd.frequencies.iter().zip(&psd.power) {
                let model = b * g * g / (f * f + g * g) + s0;
                out.push(model.ln() - pw.ln());
            }
            Ok(())
        },
        &x0,
        &LmOptions { max_iterations: 400, ..Default::default() },
    )?;
    let gamma = res.x[0].exp();
    if gamma < f_min || gamma > f_max {
        return Err(Error::Data(format!(
            "fitted knee {gamma:.3e} Hz lies outside the measured band \
             [{f_min:.3e}, {f_max:.3e}] Hz"
        )));
    }
    let rms =
        (res.residuals.iter().map(|r| r * r).sum::<f64>() / res.residuals.len() as f64).sqrt();
    Ok(RtnPsdFit {
        gamma_rtn: gamma,
        b: res.x[1].exp(),
        s0: res.x[2].exp(),
        rms_log_residual: rms,
        converged: res.converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn parseval_exact_for_any_series() {
        let values: Vec<f64> =
            (0..256).map(|i| ((i * 37) % 17) as f64 * 0.3 - 1.1).collect();
        let var = {
            let m = values.iter().sum::<f64>() / values.len() as f64;
            values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / values.len() as f64
        };
        let psd = estimate_psd(&[SampledSeries::from_values(values, 0.5)]).unwrap();
        assert_relative_eq!(psd.integrated_power(), var, max_relative = 1e-10);
    }

    #[test]
    fn sinusoid_concentrates_in_one_bin() {
        let n = 512;
        let dt = 0.1;
        let duration = n as f64 * dt;
        let f0 = 16.0 / duration; // exactly bin 16
        let amp = 0.7;
        let values: Vec<f64> = (0..n)
            .map(|i| amp * (2.0 * std::f64::consts::PI * f0 * i as f64 * dt).sin())
            .collect();
        let psd = estimate_psd(&[SampledSeries::from_values(values, dt)]).unwrap();
        // Total power = amp²/2; all of it in bin 16.
        assert_relative_eq!(psd.integrated_power(), amp * amp / 2.0, max_relative = 1e-10);
        let peak_idx =
            psd.power.iter().enumerate().max_by(|a, b| a.1.partial_cmp(b.1).unwrap()).unwrap().0;
        assert_eq!(peak_idx, 15); // frequencies start at bin 1
        let df = 1.0 / duration;
        assert_relative_eq!(psd.power[15] * df, amp * amp / 2.0, max_relative = 1e-9);
    }

    #[test]
    fn non_uniform_timestamps_rejected() {
        let mut s = SampledSeries::from_values(vec![0.0; 16], 1.0);
        s.t_s[7] += 0.3;
        assert!(matches!(estimate_psd(&[s]), Err(Error::Data(_))));
    }

    #[test]
    fn flat_spectrum_is_unidentifiable() {
        let psd = PsdEstimate {
            frequencies: (1..=64).map(|j| j as f64 * 0.01).collect(),
            power: vec![1.0; 64],
            n_averages: 10,
            total_duration: 100.0,
        };
        assert!(fit_rtn_psd(&psd).is_err());
    }

    #[test]
    fn lorentzian_tail_slope_is_minus_two() {
        // Noiseless Lorentzian samples: fit recovers parameters and the
        // f ≫ Γ tail falls as 1/f² after floor subtraction.
        let gamma = 0.01_f64;
        let b = 1e13;
        let s0 = 1e11;
        let frequencies: Vec<f64> = (1..=400).map(|j| j as f64 * 1.2e-3).collect();
        let power: Vec<f64> =
            frequencies.iter().map(|&f| b * gamma * gamma / (f * f + gamma * gamma) + s0).collect();
        let psd = PsdEstimate { frequencies, power, n_averages: 85, total_duration: 832.0 };
        let fit = fit_rtn_psd(&psd).unwrap();
        assert_relative_eq!(fit.gamma_rtn, gamma, max_relative = 1e-6);
        assert_relative_eq!(fit.b, b, max_relative = 1e-6);
        assert_relative_eq!(fit.s0, s0, max_relative = 1e-4);
        // Tail log-log slope within 10% of −2.
        let tail: Vec<(f64, f64)> = psd
            .frequencies
            .iter()
            .zip(&psd.power)
            .filter(|(&f, _)| f > 10.0 * gamma)
            .map(|(&f, &p)| (f.ln(), (p - fit.s0).max(1e-300).ln()))
            .collect();
        let n = tail.len() as f64;
        let mx = tail.iter().map(|p| p.0).sum::<f64>() / n;
        let my = tail.iter().map(|p| p.1).sum::<f64>() / n;
        let slope: f64 = tail.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum::<f64>()
            / tail.iter().map(|p| (p.0 - mx).powi(2)).sum::<f64>();
        assert!((slope + 2.0).abs() < 0.2, "tail slope {slope}");
    }
}
