//! Synthetic-data generators used as independent oracles for the analysis
//! modules: telegraph processes, noisy IQ jump traces, noisy spectroscopy
//! datasets, decaying/beating time-domain signals, and S11 phase sweeps.
//!
//! Reproducibility: all generators draw from ChaCha12 seeded with a `u64`
//! (`rand_chacha::ChaCha12Rng::seed_from_u64`); identical (seed, spec) pairs
//! give bit-identical output on every platform. Parallel generation derives
//! per-task generators by `ChaCha12Rng::seed_from_u64(seed ^ task_index)`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};

use crate::coupled::{reflection_phase, QubitState, ReflectionModel};
use crate::error::{Error, Result};
use crate::fitting::{SpecPoint, SpectroscopyDataset, TransitionLabel};
use crate::hamiltonian::{CphiRModel, SolveOptions, SpectrumModel};
use crate::params::CircuitParams;
use crate::timeseries::IQTrace;

/// PRNG algorithm identifier stored in generated metadata.
pub const PRNG_ALGORITHM: &str = "chacha12";

pub fn rng_for(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Generator specification: a seed plus one concrete generator kind. This is
/// the schema of the CLI `generate` command's JSON input.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorSpec {
    pub seed: u64,
    #[serde(flatten)]
    pub kind: GeneratorKind,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GeneratorKind {
    Telegraph {
        t_down_us: f64,
        t_up_us: f64,
        dt_us: f64,
        n_samples: usize,
    },
    IqTrace {
        t_down_us: f64,
        t_up_us: f64,
        dt_us: f64,
        n_samples: usize,
        mu_g: f64,
        mu_e: f64,
        sigma: f64,
    },
    Spectrum {
        e_j_ghz: f64,
        e_c_sigma_ghz: f64,
        e_l_ghz: f64,
        phi_start: f64,
        phi_stop: f64,
        n_points: usize,
        sigma_f_mhz: f64,
        #[serde(default)]
        include_gf: bool,
        #[serde(default)]
        delta_e_j_mhz: Option<f64>,
        #[serde(default)]
        cphir_harmonics: Option<Vec<f64>>,
    },
    Ramsey {
        f1_mhz: f64,
        #[serde(default)]
        f2_mhz: Option<f64>,
        t2_star_us: f64,
        dt_us: f64,
        n_samples: usize,
        sigma: f64,
    },
    Decay {
        t_us: f64,
        amplitude: f64,
        offset: f64,
        dt_us: f64,
        n_samples: usize,
        sigma: f64,
    },
    S11 {
        f0_ghz: f64,
        kappa_mhz: f64,
        chi_mhz: f64,
        coupling_ratio: f64,
        f_start_ghz: f64,
        f_stop_ghz: f64,
        n_points: usize,
        phase_noise_rad: f64,
    },
}

/// A generated two-state trajectory.
#[derive(Debug, Clone)]
pub struct TelegraphTrace {
    /// Per-sample states: 0 = g, 1 = e.
    pub states: Vec<u8>,
    pub dt: f64,
    /// Set when dt is coarser than min(T↓, T↑)/3 (dwell statistics biased).
    pub coarse_dt: bool,
}

impl TelegraphTrace {
    pub fn occupancy_e(&self) -> f64 {
        self.states.iter().map(|&s| s as f64).sum::<f64>() / self.states.len() as f64
    }
}

/// Two-state Markov trajectory with exponential dwell times, produced by
/// exact dwell sampling and then point-sampled at t_k = k·dt (no per-step
/// Bernoulli approximation). `t_down_us` is the mean dwell in e, `t_up_us`
/// the mean dwell in g; the initial state is drawn from the stationary
/// occupancy P_e = T↓/(T↓+T↑).
pub fn gen_telegraph(
    t_down_us: f64,
    t_up_us: f64,
    dt_us: f64,
    n_samples: usize,
    rng: &mut impl Rng,
) -> Result<TelegraphTrace> {
    for (name, v) in [("t_down_us", t_down_us), ("t_up_us", t_up_us), ("dt_us", dt_us)] {
        if !(v > 0.0) || !v.is_finite() {
            return Err(Error::Data(format!("{name} must be positive, got {v}")));
        }
    }
    if n_samples == 0 {
        return Err(Error::Data("n_samples must be ≥ 1".into()));
    }
    let coarse_dt = dt_us > t_down_us.min(t_up_us) / 3.0;
    let p_e = t_down_us / (t_down_us + t_up_us);
    let mut state: u8 = u8::from(rng.random::<f64>() < p_e);
    let exp_down = Exp::new(1.0 / t_down_us).expect("positive rate");
    let exp_up = Exp::new(1.0 / t_up_us).expect("positive rate");
    let mut states = Vec::with_capacity(n_samples);
    // Switching times generated exactly; the state at each sample instant is
    // read off the piecewise trajectory.
    let mut t_switch = if state == 1 { exp_down.sample(rng) } else { exp_up.sample(rng) };
    for k in 0..n_samples {
        let t = k as f64 * dt_us;
        while t >= t_switch {
            state = 1 - state;
            t_switch += if state == 1 { exp_down.sample(rng) } else { exp_up.sample(rng) };
        }
        states.push(state);
    }
    Ok(TelegraphTrace { states, dt: dt_us, coarse_dt })
}

/// Dress a telegraph trajectory with per-sample complex Gaussian noise
/// around the state-dependent mean (information on I, noise on both
/// quadratures).
pub fn gen_iq_trace(
    telegraph: &TelegraphTrace,
    mu_g: f64,
    mu_e: f64,
    sigma: f64,
    rng: &mut impl Rng,
) -> Result<IQTrace> {
    if !(sigma >= 0.0) || !sigma.is_finite() {
        return Err(Error::Data(format!("sigma must be ≥ 0, got {sigma}")));
    }
    let normal = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("positive sigma");
    let samples: Vec<Complex64> = telegraph
        .states
        .iter()
        .map(|&s| {
            let mu = if s == 0 { mu_g } else { mu_e };
            let (ni, nq) =
                if sigma > 0.0 { (normal.sample(rng), normal.sample(rng)) } else { (0.0, 0.0) };
            Complex64::new(mu + ni, nq)
        })
        .collect();
    let mut trace = IQTrace::new(samples, telegraph.dt)?;
    trace.meta.insert("prng".into(), PRNG_ALGORITHM.into());
    Ok(trace)
}

/// Options for synthetic spectroscopy data.
#[derive(Debug, Clone)]
pub struct SpectrumGenOptions {
    /// Gaussian frequency noise, GHz.
    pub sigma_f: f64,
    /// Also emit g→f points.
    pub include_gf: bool,
    /// Interleave two branches with E_J ± ΔE_J/2, labeled unassigned.
    pub delta_e_j: Option<f64>,
}

impl Default for SpectrumGenOptions {
    fn default() -> Self {
        SpectrumGenOptions { sigma_f: 0.0, include_gf: true, delta_e_j: None }
    }
}

/// Transition frequencies from the circuit Hamiltonian plus Gaussian noise.
/// With `delta_e_j` set, each flux point yields one point per E_J branch,
/// labeled `Unassigned` (interleaved split-spectrum data).
pub fn gen_spectrum(
    params: &CircuitParams,
    cphir: &CphiRModel,
    phis: &[f64],
    opts: &SpectrumGenOptions,
    rng: &mut impl Rng,
) -> Result<SpectroscopyDataset> {
    let noise = Normal::new(0.0, opts.sigma_f.max(f64::MIN_POSITIVE))
        .map_err(|e| Error::Data(format!("bad sigma_f: {e}")))?;
    let draw = |rng: &mut dyn rand::RngCore| -> f64 {
        if opts.sigma_f > 0.0 {
            noise.sample(rng)
        } else {
            0.0
        }
    };
    let n_levels = if opts.include_gf { 3 } else { 2 };
    let mut points = Vec::new();
    match opts.delta_e_j {
        None => {
            let model = SpectrumModel::new(params, cphir, n_levels, &SolveOptions::default())?;
            for &phi in phis {
                let e = model.levels_at(phi)?;
                points.push(SpecPoint {
                    phi_ext: phi,
                    freq: e[1] - e[0] + draw(rng),
                    label: TransitionLabel::Ge,
                    weight: 1.0,
                });
                if opts.include_gf {
                    points.push(SpecPoint {
                        phi_ext: phi,
                        freq: e[2] - e[0] + draw(rng),
                        label: TransitionLabel::Gf,
                        weight: 1.0,
                    });
                }
            }
        }
        Some(delta) => {
            let lo = CircuitParams::new(
                params.e_j - delta / 2.0,
                params.e_c_sigma,
                params.e_l,
                params.phi_ext,
            )?;
            let hi = CircuitParams::new(
                params.e_j + delta / 2.0,
                params.e_c_sigma,
                params.e_l,
                params.phi_ext,
            )?;
            let m_lo = SpectrumModel::new(&lo, cphir, 2, &SolveOptions::default())?;
            let m_hi = SpectrumModel::new(&hi, cphir, 2, &SolveOptions::default())?;
            for &phi in phis {
                for m in [&m_lo, &m_hi] {
                    let e = m.levels_at(phi)?;
                    points.push(SpecPoint {
                        phi_ext: phi,
                        freq: e[1] - e[0] + draw(rng),
                        label: TransitionLabel::Unassigned,
                        weight: 1.0,
                    });
                }
            }
        }
    }
    SpectroscopyDataset::new(points)
}

/// Exponential decay samples with Gaussian noise: (times µs, populations).
pub fn gen_decay(
    t_us: f64,
    amplitude: f64,
    offset: f64,
    dt_us: f64,
    n: usize,
    sigma: f64,
    rng: &mut impl Rng,
) -> (Vec<f64>, Vec<f64>) {
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("positive sigma");
    let times: Vec<f64> = (0..n).map(|i| i as f64 * dt_us).collect();
    let pops = times
        .iter()
        .map(|&t| {
            amplitude * (-t / t_us).exp()
                + offset
                + if sigma > 0.0 { noise.sample(rng) } else { 0.0 }
        })
        .collect();
    (times, pops)
}

/// Ramsey signal with one or two tones: (times µs, signal).
#[allow(clippy::too_many_arguments)]
pub fn gen_ramsey(
    f1_mhz: f64,
    f2_mhz: Option<f64>,
    t2_star_us: f64,
    dt_us: f64,
    n: usize,
    sigma: f64,
    rng: &mut impl Rng,
) -> (Vec<f64>, Vec<f64>) {
    let noise = Normal::new(0.0, sigma.max(f64::MIN_POSITIVE)).expect("positive sigma");
    let times: Vec<f64> = (0..n).map(|i| i as f64 * dt_us).collect();
    let w = 2.0 * std::f64::consts::PI;
    let signal = times
        .iter()
        .map(|&t| {
            let mut osc = (w * f1_mhz * t).cos();
            if let Some(f2) = f2_mhz {
                osc += (w * f2 * t).cos();
            }
            0.5 * (-t / t2_star_us).exp() * osc
                + 0.5
                + if sigma > 0.0 { noise.sample(rng) } else { 0.0 }
        })
        .collect();
    (times, signal)
}

/// S11 phase sweeps for qubit in g and e with optional phase noise:
/// (freq GHz, phase rad) per branch.
pub fn gen_s11_phases(
    model: &ReflectionModel,
    f_start: f64,
    f_stop: f64,
    n: usize,
    phase_noise_rad: f64,
    rng: &mut impl Rng,
) -> (Vec<(f64, f64)>, Vec<(f64, f64)>) {
    let noise = Normal::new(0.0, phase_noise_rad.max(f64::MIN_POSITIVE)).expect("positive sigma");
    let grid: Vec<f64> =
        (0..n).map(|i| f_start + (f_stop - f_start) * i as f64 / (n - 1).max(1) as f64).collect();
    let make = |state: QubitState, rng: &mut dyn rand::RngCore| {
        grid.iter()
            .map(|&f| {
                let th = reflection_phase(model, f, state)
                    + if phase_noise_rad > 0.0 { noise.sample(rng) } else { 0.0 };
                (f, th)
            })
            .collect::<Vec<_>>()
    };
    let g = make(QubitState::G, rng);
    let e = make(QubitState::E, rng);
    (g, e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn telegraph_is_deterministic_by_seed() {
        let a = gen_telegraph(9.9, 1100.0, 0.784, 20_000, &mut rng_for(42)).unwrap();
        let b = gen_telegraph(9.9, 1100.0, 0.784, 20_000, &mut rng_for(42)).unwrap();
        assert_eq!(a.states, b.states);
        let c = gen_telegraph(9.9, 1100.0, 0.784, 20_000, &mut rng_for(43)).unwrap();
        assert_ne!(a.states, c.states);
    }

    #[test]
    fn telegraph_occupancy_matches_stationary_law() {
        // T↓ = 9.9 µs, T↑ = 1.1 ms → P_e ≈ 0.00892, check within ±20%.
        let tr = gen_telegraph(9.9, 1100.0, 0.784, 10_000_000, &mut rng_for(7)).unwrap();
        let p = tr.occupancy_e();
        let expect = 9.9 / (9.9 + 1100.0);
        assert!((p / expect - 1.0).abs() < 0.2, "P_e = {p}, expect ≈ {expect}");
        assert!(!tr.coarse_dt);
    }

    #[test]
    fn symmetric_telegraph_is_half_occupied() {
        let tr = gen_telegraph(5.0, 5.0, 0.5, 400_000, &mut rng_for(11)).unwrap();
        assert!((tr.occupancy_e() - 0.5).abs() < 0.02);
    }

    #[test]
    fn coarse_dt_flagged() {
        let tr = gen_telegraph(1.0, 1.0, 0.5, 100, &mut rng_for(1)).unwrap();
        assert!(tr.coarse_dt);
    }

    #[test]
    fn dwell_distribution_is_exponential() {
        // Kolmogorov–Smirnov test of complete e-dwells against Exp(T↓),
        // using the asymptotic Kolmogorov distribution at a fixed seed.
        // Sampled run lengths are geometric (the discretized exponential);
        // the midpoint correction (k − ½)·dt removes the leading-order
        // discretization bias, and dt ≪ T↓ keeps the short-dwell censoring
        // (fraction ≈ dt/2T↓) below the KS resolution at this sample size.
        let t_down = 9.9;
        let tr = gen_telegraph(t_down, 40.0, 0.1, 2_500_000, &mut rng_for(5)).unwrap();
        let mut dwells = Vec::new();
        let mut run = 0usize;
        for &s in &tr.states {
            if s == 1 {
                run += 1;
            } else if run > 0 {
                dwells.push((run as f64 - 0.5) * tr.dt);
                run = 0;
            }
        }
        if run > 0 {
            dwells.pop(); // censored tail
        }
        assert!(dwells.len() > 1000);
        let mean = dwells.iter().sum::<f64>() / dwells.len() as f64;
        dwells.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let n = dwells.len() as f64;
        let mut d_stat = 0.0_f64;
        for (i, &x) in dwells.iter().enumerate() {
            let cdf = 1.0 - (-x / mean).exp();
            let lo = i as f64 / n;
            let hi = (i + 1) as f64 / n;
            d_stat = d_stat.max((cdf - lo).abs()).max((cdf - hi).abs());
        }
        // Asymptotic Kolmogorov p-value.
        let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d_stat;
        let mut p = 0.0;
        for k in 1..=100 {
            let kf = k as f64;
            p += 2.0 * (-1.0_f64).powi(k as i32 + 1) * (-2.0 * kf * kf * lambda * lambda).exp();
        }
        assert!(p > 0.01, "KS p = {p:.4} (D = {d_stat:.4}, n = {n})");
    }

    #[test]
    fn iq_trace_noise_level() {
        let tg = gen_telegraph(50.0, 50.0, 1.0, 100_000, &mut rng_for(3)).unwrap();
        let trace = gen_iq_trace(&tg, 3.0, -3.0, 1.0, &mut rng_for(4)).unwrap();
        // Q quadrature is pure noise with σ = 1.
        let q: Vec<f64> = trace.samples.iter().map(|s| s.im).collect();
        let var = q.iter().map(|x| x * x).sum::<f64>() / q.len() as f64;
        assert!((var - 1.0).abs() < 0.03, "Q variance {var}");
        assert_eq!(trace.meta.get("prng").map(String::as_str), Some(PRNG_ALGORITHM));
    }

    #[test]
    fn sigma_zero_reproduces_states_exactly() {
        let tg = gen_telegraph(5.0, 5.0, 0.5, 5_000, &mut rng_for(9)).unwrap();
        let trace = gen_iq_trace(&tg, 3.0, -3.0, 0.0, &mut rng_for(10)).unwrap();
        for (s, iq) in tg.states.iter().zip(&trace.samples) {
            let expect = if *s == 0 { 3.0 } else { -3.0 };
            assert_eq!(iq.re, expect);
            assert_eq!(iq.im, 0.0);
        }
    }
}
