//! Nonlinear least-squares recovery of circuit parameters from measured
//! transition frequencies, current-phase-relation model comparison, the
//! split-spectrum (two-E_J) fit, and the reflection phase-response fit.
//!
//! Positive circuit parameters are fit in log space (positivity for free),
//! with Latin-hypercube multi-start around the initial guess to cope with
//! the multi-well fit landscape.

pub mod lm;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coupled::{reflection_phase, QubitState, ReflectionModel};
use crate::error::{Error, Result};
use crate::hamiltonian::{
    diagonalize, oscillator::OscillatorOperators, phase_grid, CphiRModel, SolveOptions,
    SpectrumModel,
};
use crate::params::{
    capacitance_from_charging_energy, charging_energy_from_capacitance,
    inductance_from_inductive_energy, inductive_energy_from_inductance, CircuitParams,
};
use lm::{LmOptions, LmResult};

/// Which transition a spectroscopy point belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransitionLabel {
    Ge,
    Gf,
    Unassigned,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SpecPoint {
    /// External flux (Φ0 units).
    pub phi_ext: f64,
    /// Transition frequency (GHz).
    pub freq: f64,
    pub label: TransitionLabel,
    /// Multiplies the residual; 0 excludes the point.
    pub weight: f64,
}

/// A spectroscopy dataset: transition frequencies vs flux with optional
/// flux exclusion windows (e.g. around avoided level crossings).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SpectroscopyDataset {
    pub points: Vec<SpecPoint>,
    /// Disjoint flux intervals (lo, hi) whose points are excluded from fits.
    pub exclusion_windows: Vec<(f64, f64)>,
}

impl SpectroscopyDataset {
    pub fn new(points: Vec<SpecPoint>) -> Result<Self> {
        let d = SpectroscopyDataset { points, exclusion_windows: Vec::new() };
        d.validate()?;
        Ok(d)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, p) in self.points.iter().enumerate() {
            if !(p.freq > 0.0) || !p.freq.is_finite() {
                return Err(Error::Data(format!("point {i}: frequency must be positive, got {}", p.freq)));
            }
            if !p.phi_ext.is_finite() {
                return Err(Error::Data(format!("point {i}: non-finite flux")));
            }
            if !(p.weight >= 0.0) || !p.weight.is_finite() {
                return Err(Error::Data(format!("point {i}: weight must be ≥ 0, got {}", p.weight)));
            }
        }
        let mut w = self.exclusion_windows.clone();
        w.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        for pair in w.windows(2) {
            if pair[0].1 > pair[1].0 {
                return Err(Error::Data(format!(
                    "overlapping exclusion windows {:?} and {:?}",
                    pair[0], pair[1]
                )));
            }
        }
        Ok(())
    }

    pub fn add_exclusion_window(&mut self, lo: f64, hi: f64) -> Result<()> {
        self.exclusion_windows.push((lo.min(hi), lo.max(hi)));
        self.validate()
    }

    /// Flux windows covering runs of points whose frequency falls inside the
    /// band (used to mask avoided-crossing regions by frequency).
    pub fn flux_windows_for_frequency_band(&self, band: (f64, f64)) -> Vec<(f64, f64)> {
        let mut phis: Vec<f64> = self
            .points
            .iter()
            .filter(|p| p.freq >= band.0 && p.freq <= band.1)
            .map(|p| p.phi_ext)
            .collect();
        phis.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut windows = Vec::new();
        // Typical flux pitch sets the cluster gap threshold.
        let mut all: Vec<f64> = self.points.iter().map(|p| p.phi_ext).collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let pitch = all
            .windows(2)
            .map(|w| w[1] - w[0])
            .filter(|d| *d > 0.0)
            .fold(f64::INFINITY, f64::min);
        let gap = if pitch.is_finite() { 3.0 * pitch } else { 0.02 };
        let mut start: Option<(f64, f64)> = None;
        for &phi in &phis {
            match start {
                None => start = Some((phi, phi)),
                Some((s, e)) if phi - e <= gap => start = Some((s, phi)),
                Some((s, e)) => {
                    windows.push((s - gap / 2.0, e + gap / 2.0));
                    start = Some((phi, phi));
                }
            }
        }
        if let Some((s, e)) = start {
            windows.push((s - gap / 2.0, e + gap / 2.0));
        }
        windows
    }

    fn in_window(&self, phi: f64) -> bool {
        self.exclusion_windows.iter().any(|&(lo, hi)| phi >= lo && phi <= hi)
    }

    /// Indices of points that enter a fit.
    pub fn active_indices(&self) -> Vec<usize> {
        self.points
            .iter()
            .enumerate()
            .filter(|(_, p)| p.weight > 0.0 && !self.in_window(p.phi_ext))
            .map(|(i, _)| i)
            .collect()
    }
}

/// Free-parameter mask for spectrum fits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FreeParams {
    pub e_j: bool,
    pub e_c_sigma: bool,
    pub e_l: bool,
}

impl Default for FreeParams {
    fn default() -> Self {
        FreeParams { e_j: true, e_c_sigma: true, e_l: true }
    }
}

impl FreeParams {
    pub fn count(&self) -> usize {
        self.e_j as usize + self.e_c_sigma as usize + self.e_l as usize
    }

    pub fn names(&self) -> Vec<&'static str> {
        let mut v = Vec::new();
        if self.e_j {
            v.push("e_j");
        }
        if self.e_c_sigma {
            v.push("e_c_sigma");
        }
        if self.e_l {
            v.push("e_l");
        }
        v
    }
}

/// Coordinates used for the fit variables; the physical optimum must not
/// depend on this choice (log-space fitting makes the two exactly dual).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Parameterization {
    /// (E_J, E_C^Σ, E_L), all in GHz.
    #[default]
    Energy,
    /// (E_J GHz, C_Σ fF, L_q nH).
    Geometric,
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub free: FreeParams,
    pub parameterization: Parameterization,
    /// Multi-start budget (first start is the provided init).
    pub multi_start: usize,
    /// Log-space half-width of the Latin-hypercube around init.
    pub spread: f64,
    /// Early-exit threshold: once a converged start reaches this rms (GHz),
    /// remaining starts are skipped. Defaults to the 2 MHz measurement
    /// resolution of typical two-tone spectroscopy.
    pub accept_rms: Option<f64>,
    pub seed: u64,
    pub lm: LmOptions,
    /// Qubit levels entering the model (3 covers g→e and g→f).
    pub n_levels: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            free: FreeParams::default(),
            parameterization: Parameterization::default(),
            multi_start: 16,
            spread: 1.5_f64.ln(),
            accept_rms: Some(2e-3),
            seed: 0xF1C5,
            lm: LmOptions::default(),
            n_levels: 3,
        }
    }
}

/// Fit outcome: recovered parameters, residuals, and diagnostics.
#[derive(Debug, Clone, Serialize)]
pub struct FitReport {
    pub params_hat: CircuitParams,
    /// Derived geometric parameters (C_Σ fF, L_q nH) for convenience.
    pub c_sigma_ff: f64,
    pub l_q_nh: f64,
    /// Residual (model − data, GHz) per active point.
    pub residuals: Vec<f64>,
    /// (flux, label) of each active point, aligned with `residuals`.
    pub residual_points: Vec<(f64, TransitionLabel)>,
    pub rms_residual: f64,
    /// Covariance over the free parameters, row-major, ordered as
    /// `free_names`.
    pub covariance: Vec<Vec<f64>>,
    pub free_names: Vec<String>,
    pub n_evals: usize,
    pub converged: bool,
    /// Degenerate Jacobian at the optimum (correlated parameters).
    pub degenerate: bool,
    pub cphir: CphiRModel,
}

impl FitReport {
    /// 1σ standard error of a free parameter (physical units).
    pub fn std_error(&self, name: &str) -> Option<f64> {
        let i = self.free_names.iter().position(|n| n == name)?;
        Some(self.covariance[i][i].max(0.0).sqrt())
    }
}

fn rms(residuals: &[f64]) -> f64 {
    if residuals.is_empty() {
        return 0.0;
    }
    (residuals.iter().map(|r| r * r).sum::<f64>() / residuals.len() as f64).sqrt()
}

/// Fixed-basis evaluator used inside fit loops: the basis size is probed for
/// convergence once at the initial parameters and then frozen (with margin).
#[derive(Debug, Clone)]
struct SpectrumEvaluator {
    dim: usize,
    n_levels: usize,
    cphir: CphiRModel,
}

impl SpectrumEvaluator {
    fn new(init: &CircuitParams, cphir: &CphiRModel, n_levels: usize) -> Result<Self> {
        let model = SpectrumModel::new(init, cphir, n_levels, &SolveOptions::default())?;
        Ok(SpectrumEvaluator { dim: model.dim(), n_levels, cphir: cphir.clone() })
    }

    /// Ground-state transition frequencies at each (flux, level-index) pair.
    fn transitions(&self, params: &CircuitParams, jobs: &[(f64, usize)]) -> Result<Vec<f64>> {
        let ops = OscillatorOperators::build(params, self.cphir.n_harmonics(), self.dim);
        jobs.par_iter()
            .map(|&(phi, level)| {
                let p = params.at_flux(phi);
                let (_, u_min) = phase_grid::potential_minimum(&p, &self.cphir);
                let h = ops.hamiltonian(&p, &self.cphir, u_min);
                let (e, _) = diagonalize(&h, self.n_levels)?;
                if level >= e.len() {
                    return Err(Error::Truncation(format!("level {level} not available")));
                }
                Ok(e[level] - e[0])
            })
            .collect()
    }

    /// Convergence re-check at a parameter point: worst level movement when
    /// the basis is doubled, probed at the most demanding flux biases.
    fn convergence_delta(&self, params: &CircuitParams) -> Result<f64> {
        let mut worst = 0.0_f64;
        let big = SpectrumEvaluator {
            dim: self.dim * 2,
            n_levels: self.n_levels,
            cphir: self.cphir.clone(),
        };
        for phi in [0.0, 0.31, 0.5] {
            let jobs: Vec<(f64, usize)> = (1..self.n_levels).map(|l| (phi, l)).collect();
            let a = self.transitions(params, &jobs)?;
            let b = big.transitions(params, &jobs)?;
            for (x, y) in a.iter().zip(&b) {
                worst = worst.max((x - y).abs());
            }
        }
        Ok(worst)
    }
}

fn label_level(label: TransitionLabel) -> usize {
    match label {
        TransitionLabel::Ge => 1,
        TransitionLabel::Gf => 2,
        TransitionLabel::Unassigned => 1,
    }
}

/// Pack the free parameters into log-space fit variables.
fn pack(init: &CircuitParams, free: &FreeParams, param: Parameterization) -> Vec<f64> {
    let mut v = Vec::new();
    if free.e_j {
        v.push(init.e_j.ln());
    }
    match param {
        Parameterization::Energy => {
            if free.e_c_sigma {
                v.push(init.e_c_sigma.ln());
            }
            if free.e_l {
                v.push(init.e_l.ln());
            }
        }
        Parameterization::Geometric => {
            if free.e_c_sigma {
                v.push(capacitance_from_charging_energy(init.e_c_sigma).unwrap().ln());
            }
            if free.e_l {
                v.push(inductance_from_inductive_energy(init.e_l).unwrap().ln());
            }
        }
    }
    v
}

/// Unpack fit variables back into circuit parameters.
fn unpack(
    x: &[f64],
    init: &CircuitParams,
    free: &FreeParams,
    param: Parameterization,
) -> Result<CircuitParams> {
    let mut it = x.iter();
    let e_j = if free.e_j { it.next().unwrap().exp() } else { init.e_j };
    let e_c = if free.e_c_sigma {
        let v = it.next().unwrap().exp();
        match param {
            Parameterization::Energy => v,
            Parameterization::Geometric => charging_energy_from_capacitance(v)?,
        }
    } else {
        init.e_c_sigma
    };
    let e_l = if free.e_l {
        let v = it.next().unwrap().exp();
        match param {
            Parameterization::Energy => v,
            Parameterization::Geometric => inductive_energy_from_inductance(v)?,
        }
    } else {
        init.e_l
    };
    CircuitParams::new(e_j, e_c, e_l, init.phi_ext)
}

/// Map the log-space covariance onto physical parameter covariance by the
/// delta method: cov_θ = D·cov_u·D with D = diag(θ).
fn physical_covariance(
    lm: &LmResult,
    theta: &[f64],
) -> Vec<Vec<f64>> {
    let p = theta.len();
    let mut out = vec![vec![0.0; p]; p];
    if let Some(cov) = &lm.covariance {
        for i in 0..p {
            for j in 0..p {
                out[i][j] = cov[(i, j)] * theta[i] * theta[j];
            }
        }
    }
    out
}

fn physical_values(params: &CircuitParams, free: &FreeParams, param: Parameterization) -> Vec<f64> {
    let mut v = Vec::new();
    if free.e_j {
        v.push(params.e_j);
    }
    if free.e_c_sigma {
        v.push(match param {
            Parameterization::Energy => params.e_c_sigma,
            Parameterization::Geometric => {
                capacitance_from_charging_energy(params.e_c_sigma).unwrap()
            }
        });
    }
    if free.e_l {
        v.push(match param {
            Parameterization::Energy => params.e_l,
            Parameterization::Geometric => inductance_from_inductive_energy(params.e_l).unwrap(),
        });
    }
    v
}

/// Joint least-squares fit of the circuit parameters to labeled transition
/// data. Unassigned points are matched to the nearest model transition at
/// each evaluation.
pub fn fit_spectrum(
    data: &SpectroscopyDataset,
    cphir: &CphiRModel,
    init: &CircuitParams,
    opts: &FitOptions,
) -> Result<FitReport> {
    data.validate()?;
    crate::params::validate(*init)?;
    let active = data.active_indices();
    if active.len() < 2 * opts.free.count() {
        return Err(Error::InsufficientData(format!(
            "{} active points for {} free parameters (need ≥ 2×)",
            active.len(),
            opts.free.count()
        )));
    }
    let needs_f = active
        .iter()
        .any(|&i| !matches!(data.points[i].label, TransitionLabel::Ge));
    let n_levels = if needs_f { opts.n_levels.max(3) } else { 2 };
    let eval = SpectrumEvaluator::new(init, cphir, n_levels)?;

    let jobs: Vec<(f64, usize)> = active
        .iter()
        .map(|&i| (data.points[i].phi_ext, label_level(data.points[i].label)))
        .collect();
    let weights: Vec<f64> = active.iter().map(|&i| data.points[i].weight).collect();
    let freqs: Vec<f64> = active.iter().map(|&i| data.points[i].freq).collect();
    let unassigned: Vec<bool> = active
        .iter()
        .map(|&i| matches!(data.points[i].label, TransitionLabel::Unassigned))
        .collect();

    let residual_fn = |x: &[f64], out: &mut Vec<f64>| -> Result<()> {
        let params = unpack(x, init, &opts.free, opts.parameterization)?;
        let model = eval.transitions(&params, &jobs)?;
        // Unassigned points: nearest of the available transitions.
        let alt: Option<Vec<f64>> = if unassigned.iter().any(|&u| u) {
            let alt_jobs: Vec<(f64, usize)> =
                jobs.iter().map(|&(phi, _)| (phi, 2.min(n_levels - 1))).collect();
            Some(eval.transitions(&params, &alt_jobs)?)
        } else {
            None
        };
        out.clear();
        for i in 0..model.len() {
            let mut m = model[i];
            if unassigned[i] {
                if let Some(alt) = &alt {
                    if (alt[i] - freqs[i]).abs() < (m - freqs[i]).abs() {
                        m = alt[i];
                    }
                }
            }
            out.push((m - freqs[i]) * weights[i]);
        }
        Ok(())
    };

    let x0 = pack(init, &opts.free, opts.parameterization);
    let m = active.len();
    let accept_cost = opts.accept_rms.map(|r| 0.5 * m as f64 * r * r);
    let lm_res = lm::minimize_multistart(
        residual_fn,
        &x0,
        opts.spread,
        opts.multi_start,
        accept_cost,
        opts.seed,
        &opts.lm,
    )?;
    let params_hat = unpack(&lm_res.x, init, &opts.free, opts.parameterization)?;

    // Basis-convergence audit at the optimum.
    let delta = eval.convergence_delta(&params_hat)?;
    let converged = lm_res.converged && delta < 10.0 * crate::hamiltonian::ENERGY_TOL_GHZ;

    let theta = physical_values(&params_hat, &opts.free, opts.parameterization);
    Ok(FitReport {
        params_hat,
        c_sigma_ff: capacitance_from_charging_energy(params_hat.e_c_sigma)?,
        l_q_nh: inductance_from_inductive_energy(params_hat.e_l)?,
        rms_residual: rms(&lm_res.residuals),
        residual_points: active
            .iter()
            .map(|&i| (data.points[i].phi_ext, data.points[i].label))
            .collect(),
        residuals: lm_res.residuals.clone(),
        covariance: physical_covariance(&lm_res, &theta),
        free_names: opts.free.names().iter().map(|s| s.to_string()).collect(),
        n_evals: lm_res.n_evals,
        converged,
        degenerate: lm_res.degenerate_jacobian,
        cphir: cphir.clone(),
    })
}

/// Per-model refit for current-phase-relation comparison.
#[derive(Debug, Clone, Serialize)]
pub struct CphirComparison {
    pub name: String,
    pub report: FitReport,
    /// Residual-vs-flux curve: (phi_ext, residual GHz, label).
    pub curve: Vec<(f64, f64, TransitionLabel)>,
}

/// Refit each candidate current-phase relation independently and export the
/// residual curves for plotting.
pub fn compare_cphir(
    data: &SpectroscopyDataset,
    models: &[(String, CphiRModel)],
    init: &CircuitParams,
    opts: &FitOptions,
) -> Result<Vec<CphirComparison>> {
    models
        .iter()
        .map(|(name, cphir)| {
            let report = fit_spectrum(data, cphir, init, opts)?;
            let curve = report
                .residual_points
                .iter()
                .zip(&report.residuals)
                .map(|(&(phi, label), &r)| (phi, r, label))
                .collect();
            Ok(CphirComparison { name: name.clone(), report, curve })
        })
        .collect()
}

/// Split-spectrum fit: two interleaved branches sharing all parameters
/// except E_J.
#[derive(Debug, Clone, Serialize)]
pub struct TwoEjFit {
    /// Branch with the smaller E_J.
    pub params_lo: CircuitParams,
    /// Branch with the larger E_J.
    pub params_hi: CircuitParams,
    /// E_J difference (GHz).
    pub delta_e_j: f64,
    /// Flux where the two g→e branches cross, if inside (0, 0.5).
    pub crossing_phi: Option<f64>,
    /// Branch index (0 = lo, 1 = hi) per active point.
    pub assignments: Vec<u8>,
    pub residuals: Vec<f64>,
    pub rms_residual: f64,
    /// Joint covariance over (E_J_lo, E_J_hi, E_C, E_L).
    pub covariance: Vec<Vec<f64>>,
    pub n_assignment_rounds: usize,
    pub converged: bool,
}

/// Joint fit with shared (E_C, E_L) and two E_J values; hard nearest-model
/// branch assignment iterated to a fixed point (≤ 10 rounds), ties broken
/// toward the lower-E_J branch.
pub fn fit_two_ej(
    data: &SpectroscopyDataset,
    init: &CircuitParams,
    opts: &FitOptions,
) -> Result<TwoEjFit> {
    data.validate()?;
    crate::params::validate(*init)?;
    let active = data.active_indices();
    if active.len() < 8 {
        return Err(Error::InsufficientData(format!(
            "{} active points for the 4-parameter two-branch fit",
            active.len()
        )));
    }
    let eval = SpectrumEvaluator::new(init, &CphiRModel::sinusoidal(), 2)?;
    let jobs: Vec<(f64, usize)> =
        active.iter().map(|&i| (data.points[i].phi_ext, 1usize)).collect();
    let freqs: Vec<f64> = active.iter().map(|&i| data.points[i].freq).collect();
    let weights: Vec<f64> = active.iter().map(|&i| data.points[i].weight).collect();

    // Initial split: ±0.5% around the init E_J.
    let mut x = vec![
        (init.e_j * 0.995).ln(),
        (init.e_j * 1.005).ln(),
        init.e_c_sigma.ln(),
        init.e_l.ln(),
    ];
    let branch_freqs = |x: &[f64]| -> Result<(Vec<f64>, Vec<f64>)> {
        let p_lo = CircuitParams::new(x[0].exp(), x[2].exp(), x[3].exp(), init.phi_ext)?;
        let p_hi = CircuitParams::new(x[1].exp(), x[2].exp(), x[3].exp(), init.phi_ext)?;
        Ok((eval.transitions(&p_lo, &jobs)?, eval.transitions(&p_hi, &jobs)?))
    };

    let assign = |f_lo: &[f64], f_hi: &[f64]| -> Vec<u8> {
        freqs
            .iter()
            .enumerate()
            .map(|(i, &f)| {
                let d_lo = (f_lo[i] - f).abs();
                let d_hi = (f_hi[i] - f).abs();
                // Ties go to the lower-E_J branch.
                u8::from(d_hi < d_lo)
            })
            .collect()
    };

    let (f_lo, f_hi) = branch_freqs(&x)?;
    let mut assignment = assign(&f_lo, &f_hi);
    let mut seen = vec![assignment.clone()];
    let mut last: Option<LmResult>;
    let mut rounds = 0usize;
    const MAX_ROUNDS: usize = 10;
    loop {
        rounds += 1;
        let asg = assignment.clone();
        let res = lm::minimize(
            |x, out| {
                let (f_lo, f_hi) = branch_freqs(x)?;
                out.clear();
                for i in 0..freqs.len() {
                    let m = if asg[i] == 0 { f_lo[i] } else { f_hi[i] };
                    out.push((m - freqs[i]) * weights[i]);
                }
                Ok(())
            },
            &x,
            &opts.lm,
        )?;
        x = res.x.clone();
        let (f_lo, f_hi) = branch_freqs(&x)?;
        let next = assign(&f_lo, &f_hi);
        let stable = next == assignment;
        assignment = next;
        last = Some(res);
        if stable {
            break;
        }
        if rounds >= MAX_ROUNDS {
            return Err(Error::Convergence {
                what: "two-E_J branch assignment",
                details: format!(
                    "assignment still oscillating after {MAX_ROUNDS} rounds \
                     (last assignment: {assignment:?})"
                ),
            });
        }
        if seen.contains(&assignment) && seen.last() != Some(&assignment) {
            // Cycle without fixed point.
            return Err(Error::Convergence {
                what: "two-E_J branch assignment",
                details: format!("assignment cycles (last: {assignment:?})"),
            });
        }
        seen.push(assignment.clone());
    }
    let res = last.expect("at least one LM round");
    // Order branches by E_J.
    let (ej_a, ej_b) = (x[0].exp(), x[1].exp());
    let (ej_lo, ej_hi, flip) =
        if ej_a <= ej_b { (ej_a, ej_b, false) } else { (ej_b, ej_a, true) };
    let e_c = x[2].exp();
    let e_l = x[3].exp();
    let params_lo = CircuitParams::new(ej_lo, e_c, e_l, init.phi_ext)?;
    let params_hi = CircuitParams::new(ej_hi, e_c, e_l, init.phi_ext)?;
    let assignments: Vec<u8> =
        if flip { assignment.iter().map(|&a| 1 - a).collect() } else { assignment };

    let theta = vec![ej_lo, ej_hi, e_c, e_l];
    let covariance = physical_covariance(&res, &theta);
    let crossing_phi = branch_crossing(&eval, &params_lo, &params_hi)?;

    Ok(TwoEjFit {
        params_lo,
        params_hi,
        delta_e_j: ej_hi - ej_lo,
        crossing_phi,
        assignments,
        rms_residual: rms(&res.residuals),
        residuals: res.residuals,
        covariance,
        n_assignment_rounds: rounds,
        converged: res.converged,
    })
}

/// Flux in (0, 0.5) where the two branches' g→e curves intersect.
fn branch_crossing(
    eval: &SpectrumEvaluator,
    lo: &CircuitParams,
    hi: &CircuitParams,
) -> Result<Option<f64>> {
    let diff = |phi: f64| -> Result<f64> {
        let jobs = [(phi, 1usize)];
        Ok(eval.transitions(hi, &jobs)?[0] - eval.transitions(lo, &jobs)?[0])
    };
    let n = 25;
    let mut prev_phi = 0.01;
    let mut prev = diff(prev_phi)?;
    for i in 1..=n {
        let phi = 0.01 + (0.49 - 0.01) * i as f64 / n as f64;
        let cur = diff(phi)?;
        if prev.signum() != cur.signum() {
            // Bisect.
            let (mut a, mut b, mut fa) = (prev_phi, phi, prev);
            for _ in 0..40 {
                let m = 0.5 * (a + b);
                let fm = diff(m)?;
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
                if b - a < 1e-5 {
                    break;
                }
            }
            return Ok(Some(0.5 * (a + b)));
        }
        prev_phi = phi;
        prev = cur;
    }
    Ok(None)
}

/// Reflection-fit result.
#[derive(Debug, Clone, Serialize)]
pub struct ReflectionFit {
    pub model: ReflectionModel,
    /// RMS phase residual (radians).
    pub rms_phase: f64,
    pub converged: bool,
    pub n_evals: usize,
}

/// Fit (f0, κ, χ, κ_ext/κ) to phase-vs-frequency data for the qubit in g and
/// e. Frequencies in GHz, phases in radians.
pub fn fit_reflection(
    data_g: &[(f64, f64)],
    data_e: &[(f64, f64)],
) -> Result<ReflectionFit> {
    for (name, d) in [("g", data_g), ("e", data_e)] {
        if d.len() < 6 {
            return Err(Error::InsufficientData(format!(
                "{name} branch has {} points (need ≥ 6)",
                d.len()
            )));
        }
    }
    // Resonance position per branch from the steepest phase slope.
    let steepest = |d: &[(f64, f64)]| -> Result<f64> {
        let mut best = (0usize, 0.0f64);
        for i in 1..d.len() {
            let slope =
                ((wrap(d[i].1 - d[i - 1].1)) / (d[i].0 - d[i - 1].0)).abs();
            if slope > best.1 {
                best = (i, slope);
            }
        }
        if best.0 <= 1 || best.0 >= d.len() - 1 {
            return Err(Error::Data(
                "phase data does not span the resonance (steepest slope at the edge)".into(),
            ));
        }
        Ok(0.5 * (d[best.0].0 + d[best.0 - 1].0))
    };
    let f_g = steepest(data_g)?;
    let f_e = steepest(data_e)?;
    let f0_init = 0.5 * (f_g + f_e);
    let chi_init_mhz = (f_e - f_g) * 1e3;
    let span = data_g.last().unwrap().0 - data_g.first().unwrap().0;
    let kappa_init_mhz = (span * 1e3 / 20.0).max(chi_init_mhz.abs() / 2.0).max(1e-3);

    // Variables: [f0 GHz, ln(κ MHz), χ MHz, s] with κ_ext/κ = sigmoid(s).
    let x0 = vec![f0_init, kappa_init_mhz.ln(), chi_init_mhz, 2.0];
    let model_of = |x: &[f64]| -> Result<ReflectionModel> {
        let s = x[3].clamp(-30.0, 30.0);
        let ratio = 1.0 / (1.0 + (-s).exp());
        ReflectionModel::new(x[0], x[1].exp(), x[2], ratio)
    };
    let res = lm::minimize(
        |x, out| {
            let m = model_of(x)?;
            out.clear();
            for &(f, th) in data_g {
                out.push(wrap(reflection_phase(&m, f, QubitState::G) - th));
            }
            for &(f, th) in data_e {
                out.push(wrap(reflection_phase(&m, f, QubitState::E) - th));
            }
            Ok(())
        },
        &x0,
        &LmOptions { max_iterations: 400, ..Default::default() },
    )?;
    let model = model_of(&res.x)?;
    Ok(ReflectionFit {
        model,
        rms_phase: rms(&res.residuals),
        converged: res.converged,
        n_evals: res.n_evals,
    })
}

/// Principal-value angle difference.
fn wrap(d: f64) -> f64 {
    let mut x = d % (2.0 * std::f64::consts::PI);
    if x > std::f64::consts::PI {
        x -= 2.0 * std::f64::consts::PI;
    } else if x < -std::f64::consts::PI {
        x += 2.0 * std::f64::consts::PI;
    }
    x
}
