//! Quantum-jump trace analysis: IQ histogramming (double-Gaussian fit),
//! two-point latching filter, and dwell-time maximum likelihood.

use serde::{Deserialize, Serialize};

use super::{Direction, IQTrace, JumpRecord};
use crate::constants::KELVIN_PER_GHZ;
use crate::error::{Error, Result};

/// Double-Gaussian decomposition of the rotated I-quadrature histogram.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct DoubleGaussianFit {
    /// IQ-plane rotation that puts the state information on I (radians).
    pub angle: f64,
    /// Mean of the majority (ground) component, √photon.
    pub mu_g: f64,
    pub mu_e: f64,
    pub sigma_g: f64,
    pub sigma_e: f64,
    /// Populations, p_g + p_e = 1.
    pub p_g: f64,
    pub p_e: f64,
    /// Set when the minority weight fell below 1e-3 (single visible state).
    pub single_component: bool,
}

impl DoubleGaussianFit {
    /// Project a sample onto the fitted I axis.
    pub fn project(&self, s: num_complex::Complex64) -> f64 {
        s.re * self.angle.cos() + s.im * self.angle.sin()
    }
}

/// Rotate the IQ plane so the two blobs separate along I, then fit a
/// two-component Gaussian mixture to that quadrature by EM.
///
/// Conventions: the majority component is labeled g; the axis sign is chosen
/// so that μ_g > μ_e. For equal populations the component with the larger
/// mean is called g. These choices make the result invariant under
/// pre-rotations of the input data.
pub fn histogram_iq(trace: &IQTrace) -> Result<DoubleGaussianFit> {
    if trace.len() < 10_000 {
        return Err(Error::InsufficientData(format!(
            "{} samples; a stable double-Gaussian fit needs ≥ 1e4",
            trace.len()
        )));
    }
    // Principal axis of the IQ covariance = separation direction.
    let n = trace.len() as f64;
    let (mut mi, mut mq) = (0.0, 0.0);
    for s in &trace.samples {
        mi += s.re;
        mq += s.im;
    }
    mi /= n;
    mq /= n;
    let (mut cii, mut ciq, mut cqq) = (0.0, 0.0, 0.0);
    for s in &trace.samples {
        let (di, dq) = (s.re - mi, s.im - mq);
        cii += di * di;
        ciq += di * dq;
        cqq += dq * dq;
    }
    // Leading eigenvector angle of [[cii, ciq], [ciq, cqq]].
    let angle = 0.5 * (2.0 * ciq).atan2(cii - cqq);
    let proj: Vec<f64> =
        trace.samples.iter().map(|s| s.re * angle.cos() + s.im * angle.sin()).collect();

    // EM for a 1D two-component mixture.
    let mean = proj.iter().sum::<f64>() / n;
    let var = proj.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    let sd = var.sqrt().max(1e-12);
    let (mut mu1, mut mu2) = (mean + sd, mean - sd);
    let (mut s1, mut s2) = (sd / 2.0, sd / 2.0);
    let (mut w1, mut w2) = (0.5, 0.5);
    let mut resp = vec![0.0; proj.len()];
    for _ in 0..300 {
        // E step.
        let mut changed = 0.0_f64;
        for (k, &x) in proj.iter().enumerate() {
            let g1 = w1 * gauss(x, mu1, s1);
            let g2 = w2 * gauss(x, mu2, s2);
            let r = if g1 + g2 > 0.0 { g1 / (g1 + g2) } else { 0.5 };
            changed = changed.max((r - resp[k]).abs());
            resp[k] = r;
        }
        // M step.
        let n1: f64 = resp.iter().sum();
        let n2 = n - n1;
        if n1 < 1.0 || n2 < 1.0 {
            break;
        }
        mu1 = proj.iter().zip(&resp).map(|(x, r)| x * r).sum::<f64>() / n1;
        mu2 = proj.iter().zip(&resp).map(|(x, r)| x * (1.0 - r)).sum::<f64>() / n2;
        s1 = (proj.iter().zip(&resp).map(|(x, r)| r * (x - mu1).powi(2)).sum::<f64>() / n1)
            .sqrt()
            .max(1e-9);
        s2 = (proj
            .iter()
            .zip(&resp)
            .map(|(x, r)| (1.0 - r) * (x - mu2).powi(2))
            .sum::<f64>()
            / n2)
            .sqrt()
            .max(1e-9);
        w1 = n1 / n;
        w2 = n2 / n;
        if changed < 1e-10 {
            break;
        }
    }
    // Majority component is g.
    let ((mut mu_g, mut sg, mut pg), (mut mu_e, mut se, mut pe)) = if w1 >= w2 {
        ((mu1, s1, w1), (mu2, s2, w2))
    } else {
        ((mu2, s2, w2), (mu1, s1, w1))
    };
    // Equal-weight tie: the larger mean is g.
    if (pg - pe).abs() < 1e-6 && mu_g < mu_e {
        std::mem::swap(&mut mu_g, &mut mu_e);
        std::mem::swap(&mut sg, &mut se);
        std::mem::swap(&mut pg, &mut pe);
    }
    // Canonical axis orientation: μ_g > μ_e.
    let mut angle = angle;
    if mu_g < mu_e {
        angle += std::f64::consts::PI;
        mu_g = -mu_g;
        mu_e = -mu_e;
    }
    Ok(DoubleGaussianFit {
        angle,
        mu_g,
        mu_e,
        sigma_g: sg,
        sigma_e: se,
        p_g: pg,
        p_e: pe,
        single_component: pe.min(pg) < 1e-3,
    })
}

fn gauss(x: f64, mu: f64, sigma: f64) -> f64 {
    let z = (x - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Latching-filter configuration.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct LatchParams {
    pub mu_g: f64,
    pub mu_e: f64,
    /// Pooled per-state standard deviation.
    pub sigma: f64,
    /// Band half-width in units of σ.
    pub band: f64,
}

/// Two-point latching filter: the state changes only when the in-phase value
/// enters the μ ± band·σ acceptance band of the *other* state. The initial
/// state is the nearer mean of the first sample.
pub fn latch_filter(trace: &IQTrace, fit: &DoubleGaussianFit, band: f64) -> Result<JumpRecord> {
    if trace.is_empty() {
        return Err(Error::InsufficientData("empty trace".into()));
    }
    let sigma = 0.5 * (fit.sigma_g + fit.sigma_e);
    let params = LatchParams { mu_g: fit.mu_g, mu_e: fit.mu_e, sigma, band };
    if (fit.mu_g - fit.mu_e).abs() <= 2.0 * band * sigma {
        return Err(Error::Snr(format!(
            "acceptance bands overlap: |Δμ| = {:.3} ≤ 2·{band}·σ = {:.3}",
            (fit.mu_g - fit.mu_e).abs(),
            2.0 * band * sigma
        )));
    }
    let proj: Vec<f64> = trace.samples.iter().map(|s| fit.project(*s)).collect();
    let mut state: u8 =
        u8::from((proj[0] - fit.mu_e).abs() < (proj[0] - fit.mu_g).abs());
    let mut states = Vec::with_capacity(proj.len());
    let mut transitions = Vec::new();
    for (k, &x) in proj.iter().enumerate() {
        let other_mu = if state == 0 { fit.mu_e } else { fit.mu_g };
        if (x - other_mu).abs() <= band * sigma {
            state = 1 - state;
            if k > 0 {
                transitions.push((
                    k,
                    if state == 1 { Direction::Up } else { Direction::Down },
                ));
            }
        }
        states.push(state);
    }
    // Dwells from the transition indices, censored ends included.
    let mut dwell_g = Vec::new();
    let mut dwell_e = Vec::new();
    let mut start = 0usize;
    let mut cur = states[0];
    for &(idx, _) in &transitions {
        let d = (idx - start) as f64 * trace.dt;
        if cur == 0 {
            dwell_g.push(d);
        } else {
            dwell_e.push(d);
        }
        start = idx;
        cur = 1 - cur;
    }
    let d = (states.len() - start) as f64 * trace.dt;
    if cur == 0 {
        dwell_g.push(d);
    } else {
        dwell_e.push(d);
    }
    Ok(JumpRecord { states, transitions, dwell_g, dwell_e, filter_params: params, dt: trace.dt })
}

/// Dwell-time maximum-likelihood estimates.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DwellMle {
    /// Mean dwell in e before relaxation (µs).
    pub t_down: f64,
    /// Mean dwell in g before excitation (µs).
    pub t_up: f64,
    /// Composite relaxation time (T↓⁻¹ + T↑⁻¹)⁻¹ (µs).
    pub t1_composite: f64,
    /// Effective temperature (mK) from detailed balance, when a qubit
    /// frequency was supplied and T↑ > T↓; `None` means unbounded.
    pub t_eff_mk: Option<f64>,
    pub n_down: usize,
    pub n_up: usize,
}

/// Exponential MLE on complete dwells (the censored first and last dwells
/// are discarded). The per-sample discretization biases each mean by
/// O(dt/2T); with dwell times well above the demodulation window this is
/// below the statistical error and no correction is applied.
///
/// The effective temperature uses detailed balance:
/// T_eff = h·f01 / (k_B·ln(T↑/T↓)).
pub fn dwell_mle(record: &JumpRecord, f01_ghz: Option<f64>) -> Result<DwellMle> {
    // Complete dwells: drop the first and last dwell of the trace.
    let first_state = *record.states.first().unwrap_or(&0);
    let last_state = *record.states.last().unwrap_or(&0);
    let census = |dwells: &[f64], state: u8| -> Vec<f64> {
        let mut v = dwells.to_vec();
        if first_state == state && !v.is_empty() {
            v.remove(0);
        }
        if last_state == state && !v.is_empty() {
            v.pop();
        }
        v
    };
    let complete_g = census(&record.dwell_g, 0);
    let complete_e = census(&record.dwell_e, 1);
    if complete_g.len() < 20 || complete_e.len() < 20 {
        return Err(Error::InsufficientData(format!(
            "complete dwells: {} in g, {} in e (need ≥ 20 each)",
            complete_g.len(),
            complete_e.len()
        )));
    }
    let t_up = complete_g.iter().sum::<f64>() / complete_g.len() as f64;
    let t_down = complete_e.iter().sum::<f64>() / complete_e.len() as f64;
    let t1 = 1.0 / (1.0 / t_down + 1.0 / t_up);
    let t_eff = f01_ghz.and_then(|f| {
        let ratio = t_up / t_down;
        if ratio > 1.0 {
            Some(f * KELVIN_PER_GHZ / ratio.ln() * 1e3)
        } else {
            None // unbounded (no detailed-balance temperature)
        }
    });
    Ok(DwellMle {
        t_down,
        t_up,
        t1_composite: t1,
        t_eff_mk: t_eff,
        n_down: complete_e.len(),
        n_up: complete_g.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use num_complex::Complex64;

    fn telegraph_trace(pattern: &[(u8, usize)], mu: f64, dt: f64) -> IQTrace {
        let mut samples = Vec::new();
        for &(state, n) in pattern {
            let m = if state == 0 { mu } else { -mu };
            samples.extend(std::iter::repeat_n(Complex64::new(m, 0.0), n));
        }
        IQTrace::new(samples, dt).unwrap()
    }

    fn noiseless_fit(mu: f64) -> DoubleGaussianFit {
        DoubleGaussianFit {
            angle: 0.0,
            mu_g: mu,
            mu_e: -mu,
            sigma_g: 1.0,
            sigma_e: 1.0,
            p_g: 0.99,
            p_e: 0.01,
            single_component: false,
        }
    }

    #[test]
    fn noiseless_transitions_exact() {
        let trace = telegraph_trace(&[(0, 50), (1, 30), (0, 70), (1, 20), (0, 40)], 5.0, 1.0);
        let rec = latch_filter(&trace, &noiseless_fit(5.0), 2.0).unwrap();
        let idx: Vec<usize> = rec.transitions.iter().map(|t| t.0).collect();
        assert_eq!(idx, vec![50, 80, 150, 170]);
        assert_eq!(rec.transitions[0].1, Direction::Up);
        assert_eq!(rec.transitions[1].1, Direction::Down);
        assert_eq!(rec.dwell_g, vec![50.0, 70.0, 40.0]);
        assert_eq!(rec.dwell_e, vec![30.0, 20.0]);
        assert_eq!(rec.reconstruct_states(), rec.states);
    }

    #[test]
    fn latch_filter_is_deterministic() {
        let trace = telegraph_trace(&[(0, 100), (1, 50), (0, 100)], 3.0, 0.784);
        let a = latch_filter(&trace, &noiseless_fit(3.0), 2.0).unwrap();
        let b = latch_filter(&trace, &noiseless_fit(3.0), 2.0).unwrap();
        assert_eq!(a.states, b.states);
        assert_eq!(a.transitions, b.transitions);
    }

    #[test]
    fn overlapping_bands_rejected() {
        let trace = telegraph_trace(&[(0, 100)], 1.5, 1.0);
        // |Δμ| = 3.0 ≤ 2·2σ = 4.0.
        let err = latch_filter(&trace, &noiseless_fit(1.5), 2.0).unwrap_err();
        assert!(matches!(err, Error::Snr(_)));
    }

    #[test]
    fn dwell_mle_excludes_censored_and_counts() {
        // 21 complete dwells per state plus censored ends.
        let mut pattern = vec![(0u8, 7usize)];
        for _ in 0..22 {
            pattern.push((1, 3));
            pattern.push((0, 5));
        }
        let trace = telegraph_trace(&pattern, 5.0, 1.0);
        let rec = latch_filter(&trace, &noiseless_fit(5.0), 2.0).unwrap();
        let mle = dwell_mle(&rec, None).unwrap();
        assert_eq!(mle.n_up, 21); // 23 g-dwells minus censored first and last
        assert_eq!(mle.n_down, 22);
        assert!((mle.t_up - 5.0).abs() < 1e-12);
        assert!((mle.t_down - 3.0).abs() < 1e-12);
        let expect_t1 = 1.0 / (1.0 / 3.0 + 1.0 / 5.0);
        assert!((mle.t1_composite - expect_t1).abs() < 1e-12);
    }

    #[test]
    fn effective_temperature_detailed_balance() {
        let mut pattern = vec![(0u8, 111usize), (1, 1)];
        for _ in 0..25 {
            pattern.push((0, 111));
            pattern.push((1, 1));
        }
        pattern.push((0, 111));
        let trace = telegraph_trace(&pattern, 5.0, 1.0);
        let rec = latch_filter(&trace, &noiseless_fit(5.0), 2.0).unwrap();
        let mle = dwell_mle(&rec, Some(3.63)).unwrap();
        // ratio = 111: T_eff = h·f01/(k_B·ln 111)
        let expect = 3.63 * KELVIN_PER_GHZ / 111.0_f64.ln() * 1e3;
        assert!((mle.t_eff_mk.unwrap() - expect).abs() < 1e-9);
        // Equal dwell times → unbounded temperature.
        let sym: Vec<(u8, usize)> = (0..50).flat_map(|_| [(0u8, 4usize), (1, 4)]).collect();
        let trace = telegraph_trace(&sym, 5.0, 1.0);
        let rec = latch_filter(&trace, &noiseless_fit(5.0), 2.0).unwrap();
        let mle = dwell_mle(&rec, Some(3.63)).unwrap();
        assert!(mle.t_eff_mk.is_none());
    }
}
