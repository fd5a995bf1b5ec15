//! Qubit–resonator coupled spectra, dispersive shift, and the single-port
//! reflection response used for readout modeling.
//!
//! Coupling operator: H_c = g·n̂⊗(a + a†) (charge form; a phase-coupling
//! variant is available behind the same interface). In the qubit eigenbasis
//! n̂ = i·A with A real antisymmetric, so a resonator phase rotation
//! a → i·a maps the coupled Hamiltonian onto the real-symmetric matrix
//! H = E_q ⊕ ω_r·a†a − g·A⊗(a† − a), which is what gets diagonalized.

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hamiltonian::{self, BasisSpec, CphiRModel, Operator, SolveOptions};
use crate::params::{CircuitParams, ResonatorParams};

/// Which bilinear coupling operator enters H_c.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CouplingKind {
    /// g·n̂⊗(a + a†)
    #[default]
    Charge,
    /// g·(φ̂−⟨φ̂⟩)⊗(a + a†)
    Phase,
}

/// Coupled-system specification.
#[derive(Debug, Clone)]
pub struct CoupledSpec {
    pub qubit: CircuitParams,
    pub cphir: CphiRModel,
    pub resonator: ResonatorParams,
    /// Resonator Fock truncation.
    pub n_fock: usize,
    /// Qubit levels kept in the coupled problem.
    pub n_qubit_levels: usize,
    pub coupling: CouplingKind,
}

impl CoupledSpec {
    pub fn new(
        qubit: CircuitParams,
        cphir: CphiRModel,
        resonator: ResonatorParams,
        n_fock: usize,
        n_qubit_levels: usize,
    ) -> Result<Self> {
        if n_fock < 5 {
            return Err(Error::domain("n_fock", format!("need ≥ 5, got {n_fock}")));
        }
        if n_qubit_levels < 4 {
            return Err(Error::domain(
                "n_qubit_levels",
                format!("need ≥ 4, got {n_qubit_levels}"),
            ));
        }
        resonator.validate()?;
        Ok(CoupledSpec {
            qubit,
            cphir,
            resonator,
            n_fock,
            n_qubit_levels,
            coupling: CouplingKind::Charge,
        })
    }
}

/// Dressed levels at one flux bias, labeled by their dominant bare state.
#[derive(Debug, Clone, Serialize)]
pub struct DressedLevels {
    pub phi_ext: f64,
    /// Energies (GHz) relative to the dressed ground state, ascending.
    pub energies: Vec<f64>,
    /// (qubit level, photon number) of the dominant bare component.
    pub labels: Vec<(usize, usize)>,
}

impl DressedLevels {
    /// Energy of the dressed state labeled (qubit, photons).
    pub fn energy_of(&self, qubit: usize, photons: usize) -> Option<f64> {
        self.labels
            .iter()
            .position(|&l| l == (qubit, photons))
            .map(|i| self.energies[i])
    }
}

fn dressed_at_flux(spec: &CoupledSpec, phi_ext: f64, nq: usize, nf: usize) -> Result<DressedLevels> {
    let params = spec.qubit.at_flux(phi_ext);
    // Converged qubit eigenbasis with the coupling operator elements.
    let basis = BasisSpec::oscillator((8 * nq).max(48))?;
    let sol = hamiltonian::solve(&params, &spec.cphir, &basis, nq, &SolveOptions::default())?;
    // Coupling matrix in the qubit eigenbasis: real antisymmetric A for the
    // charge form (n̂ = i·A), real symmetric for the phase form.
    let mut a = DMatrix::<f64>::zeros(nq, nq);
    for i in 0..nq {
        for j in 0..nq {
            let el = match spec.coupling {
                CouplingKind::Charge => {
                    hamiltonian::matrix_element(&sol, Operator::N, i, j)?.im
                }
                CouplingKind::Phase => {
                    let mut v = hamiltonian::matrix_element(&sol, Operator::Phi, i, j)?.re;
                    if i == j {
                        v = 0.0; // subtract the diagonal offset ⟨φ⟩
                    }
                    v
                }
            };
            a[(i, j)] = el;
        }
    }
    let dim = nq * nf;
    let mut h = DMatrix::<f64>::zeros(dim, dim);
    let fr = spec.resonator.f_r;
    let g = spec.resonator.g;
    for q in 0..nq {
        for n in 0..nf {
            let row = q * nf + n;
            h[(row, row)] = (sol.energies[q] - sol.energies[0]) + fr * n as f64;
        }
    }
    // Charge coupling after the resonator rotation: −g·A⊗(a†−a); the phase
    // form keeps g·A⊗(a+a†) directly (both real symmetric).
    for q1 in 0..nq {
        for q2 in 0..nq {
            if a[(q1, q2)] == 0.0 {
                continue;
            }
            for n in 0..nf - 1 {
                let amp = ((n + 1) as f64).sqrt();
                let (row_up, col) = (q1 * nf + n + 1, q2 * nf + n);
                let (row_dn, col_dn) = (q1 * nf + n, q2 * nf + n + 1);
                match spec.coupling {
                    CouplingKind::Charge => {
                        // a† part: −g·A[q1,q2]·√(n+1); a part: +g·A[q1,q2]·√(n+1)
                        h[(row_up, col)] += -g * a[(q1, q2)] * amp;
                        h[(row_dn, col_dn)] += g * a[(q1, q2)] * amp;
                    }
                    CouplingKind::Phase => {
                        h[(row_up, col)] += g * a[(q1, q2)] * amp;
                        h[(row_dn, col_dn)] += g * a[(q1, q2)] * amp;
                    }
                }
            }
        }
    }
    let n_report = dim / 4;
    let (energies, vectors) = hamiltonian::diagonalize(&h, n_report.max(4))?;
    // Label dressed states by dominant bare component.
    let mut labels = Vec::with_capacity(energies.len());
    for k in 0..energies.len() {
        let col = vectors.column(k);
        let mut best = (0usize, 0.0f64);
        for idx in 0..dim {
            let w = col[idx] * col[idx];
            if w > best.1 {
                best = (idx, w);
            }
        }
        labels.push((best.0 / nf, best.0 % nf));
    }
    let e0 = energies[0];
    Ok(DressedLevels {
        phi_ext,
        energies: energies.iter().map(|e| e - e0).collect(),
        labels,
    })
}

/// Dressed spectrum over a flux grid, parallel across flux points, with the
/// truncations verified by a 50% enlargement at the first point.
pub fn coupled_spectrum(spec: &CoupledSpec, phi_sweep: &[f64]) -> Result<Vec<DressedLevels>> {
    use rayon::prelude::*;
    if phi_sweep.is_empty() {
        return Err(Error::Config("empty flux grid".into()));
    }
    check_truncation(spec, phi_sweep[0])?;
    phi_sweep
        .par_iter()
        .map(|&phx| dressed_at_flux(spec, phx, spec.n_qubit_levels, spec.n_fock))
        .collect()
}

fn check_truncation(spec: &CoupledSpec, phi_probe: f64) -> Result<()> {
    let base = dressed_at_flux(spec, phi_probe, spec.n_qubit_levels, spec.n_fock)?;
    let grown = dressed_at_flux(
        spec,
        phi_probe,
        spec.n_qubit_levels + spec.n_qubit_levels / 2,
        spec.n_fock + spec.n_fock / 2,
    )?;
    let n = base.energies.len().min(grown.energies.len()).min(6);
    let delta = base.energies[..n]
        .iter()
        .zip(&grown.energies[..n])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0_f64, f64::max);
    if delta > 1e-6 {
        return Err(Error::Convergence {
            what: "coupled-system truncation",
            details: format!(
                "dressed energies move {delta:.2e} GHz under 50% truncation growth; \
                 raise n_fock/n_qubit_levels"
            ),
        });
    }
    Ok(())
}

/// Result of a dispersive-shift computation.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct DispersiveShift {
    /// χ/2π in MHz.
    pub chi_mhz: f64,
    /// Set when the qubit is within 3g of the resonator (dispersive
    /// approximation unreliable).
    pub near_resonant: bool,
}

/// Dispersive shift χ = [E(e,1)−E(e,0)] − [E(g,1)−E(g,0)] from dressed
/// energies.
pub fn dispersive_shift(spec: &CoupledSpec) -> Result<DispersiveShift> {
    check_truncation(spec, spec.qubit.phi_ext)?;
    let d = dressed_at_flux(spec, spec.qubit.phi_ext, spec.n_qubit_levels, spec.n_fock)?;
    let pick = |q: usize, n: usize| -> Result<f64> {
        d.energy_of(q, n).ok_or_else(|| Error::Convergence {
            what: "dressed-state labeling",
            details: format!("no dressed state labeled (q={q}, n={n}) among the reported levels"),
        })
    };
    let chi_ghz = (pick(1, 1)? - pick(1, 0)?) - (pick(0, 1)? - pick(0, 0)?);
    // Near-resonance warning: |f_ge − f_r| < 3g.
    let basis = BasisSpec::oscillator(64)?;
    let sol = hamiltonian::solve(
        &spec.qubit,
        &spec.cphir,
        &basis,
        2,
        &SolveOptions::default(),
    )?;
    let f_ge = sol.energies[1] - sol.energies[0];
    let near = (f_ge - spec.resonator.f_r).abs() < 3.0 * spec.resonator.g;
    Ok(DispersiveShift { chi_mhz: chi_ghz * 1e3, near_resonant: near })
}

/// Single-port reflection model with the dressed resonator parameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReflectionModel {
    /// Dressed resonator midpoint frequency (GHz).
    pub f0: f64,
    /// Total linewidth κ/2π (MHz).
    pub kappa: f64,
    /// Dispersive shift χ/2π (MHz).
    pub chi: f64,
    /// κ_ext/κ ∈ (0, 1].
    pub coupling_ratio: f64,
}

impl ReflectionModel {
    pub fn new(f0: f64, kappa: f64, chi: f64, coupling_ratio: f64) -> Result<Self> {
        if !(kappa > 0.0) {
            return Err(Error::domain("kappa", format!("must be > 0 MHz, got {kappa}")));
        }
        if !(coupling_ratio > 0.0 && coupling_ratio <= 1.0) {
            return Err(Error::domain(
                "coupling_ratio",
                format!("must lie in (0, 1], got {coupling_ratio}"),
            ));
        }
        if !(f0 > 0.0) {
            return Err(Error::domain("f0", format!("must be > 0 GHz, got {f0}")));
        }
        Ok(ReflectionModel { f0, kappa, chi, coupling_ratio })
    }

    /// True when the dispersive shift exceeds the linewidth (the regime that
    /// enables single-shot-style readout contrast).
    pub fn chi_exceeds_kappa(&self) -> bool {
        self.chi.abs() > self.kappa
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitState {
    G,
    E,
}

/// S11(f) for the resonator dressed by the given qubit state.
///
/// Sign convention: the qubit-in-g resonance sits at f0 − χ/2 and qubit-in-e
/// at f0 + χ/2, so a negative χ puts the e-resonance below the g-resonance.
pub fn reflection_coefficient(
    model: &ReflectionModel,
    f_probe: f64,
    state: QubitState,
) -> Complex64 {
    let kappa_ghz = model.kappa * 1e-3;
    let chi_ghz = model.chi * 1e-3;
    let kappa_ext = model.coupling_ratio * kappa_ghz;
    let center = match state {
        QubitState::G => model.f0 - chi_ghz / 2.0,
        QubitState::E => model.f0 + chi_ghz / 2.0,
    };
    let den = Complex64::new(kappa_ghz / 2.0, f_probe - center);
    Complex64::new(1.0, 0.0) - kappa_ext / den
}

/// S11 phase (radians, principal value) — the observable fitted in practice.
pub fn reflection_phase(model: &ReflectionModel, f_probe: f64, state: QubitState) -> f64 {
    reflection_coefficient(model, f_probe, state).arg()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn device(phi_ext: f64) -> CircuitParams {
        CircuitParams::new(23.4, 15.373_197_876_713_588, 0.573_549_167_743_091_7, phi_ext)
            .unwrap()
    }

    fn device_resonator(g: f64) -> ResonatorParams {
        ResonatorParams::new(7.4086, 1.0, g, 10.0).unwrap()
    }

    #[test]
    fn decoupled_limit_energies_are_bare_sums() {
        let spec = CoupledSpec::new(
            device(0.5),
            CphiRModel::sinusoidal(),
            device_resonator(0.0),
            6,
            4,
        )
        .unwrap();
        let d = dressed_at_flux(&spec, 0.5, 4, 6).unwrap();
        // Bare qubit levels.
        let basis = BasisSpec::oscillator(64).unwrap();
        let sol = hamiltonian::solve(
            &spec.qubit,
            &spec.cphir,
            &basis,
            4,
            &SolveOptions::default(),
        )
        .unwrap();
        for (k, &(q, n)) in d.labels.iter().enumerate() {
            let expect = (sol.energies[q] - sol.energies[0]) + spec.resonator.f_r * n as f64;
            assert_relative_eq!(d.energies[k], expect, epsilon = 1e-9);
        }
    }

    #[test]
    fn dispersive_shift_zero_at_zero_coupling() {
        let spec = CoupledSpec::new(
            device(0.5),
            CphiRModel::sinusoidal(),
            device_resonator(0.0),
            6,
            4,
        )
        .unwrap();
        let chi = dispersive_shift(&spec).unwrap();
        assert!(chi.chi_mhz.abs() < 1e-9);
        assert!(!chi.near_resonant);
    }

    #[test]
    fn s11_analytic_points() {
        let m = ReflectionModel::new(7.4086, 1.0, 0.0, 1.0).unwrap();
        // Critically coupled on resonance: S11 = −1.
        let s = reflection_coefficient(&m, 7.4086, QubitState::G);
        assert_relative_eq!(s.re, -1.0, epsilon = 1e-12);
        assert_relative_eq!(s.im, 0.0, epsilon = 1e-12);
        // Far detuned: S11 → 1, phase → 0.
        let far = reflection_coefficient(&m, 7.4086 + 0.5, QubitState::G);
        assert!((far - Complex64::new(1.0, 0.0)).norm() < 1e-2);
        assert!(reflection_phase(&m, 7.4086 + 0.5, QubitState::G).abs() < 1e-2);
    }

    #[test]
    fn s11_unitarity_bound() {
        for ratio in [0.3, 0.7, 1.0] {
            let m = ReflectionModel::new(7.4, 1.0, -1.72, ratio).unwrap();
            for i in 0..400 {
                let f = 7.39 + i as f64 * 5e-5;
                for st in [QubitState::G, QubitState::E] {
                    let s = reflection_coefficient(&m, f, st).norm();
                    assert!(s <= 1.0 + 1e-12, "|S11| = {s} at f = {f}");
                }
            }
        }
    }

    #[test]
    fn g_and_e_resonances_split_by_chi() {
        let m = ReflectionModel::new(7.4086, 1.0, -1.72, 1.0).unwrap();
        // Resonance = phase passing through ±π (S11 real negative).
        let find_min = |state: QubitState| {
            let mut best = (0.0, f64::INFINITY);
            for i in 0..20_000 {
                let f = 7.4036 + i as f64 * 5e-7;
                let s = reflection_coefficient(&m, f, state).norm();
                if s < best.1 {
                    best = (f, s);
                }
            }
            best.0
        };
        let fg = find_min(QubitState::G);
        let fe = find_min(QubitState::E);
        // χ < 0: e-resonance below g-resonance, split by |χ|.
        assert!(fe < fg);
        assert_relative_eq!((fg - fe) * 1e3, 1.72, epsilon = 1e-2);
    }
}
