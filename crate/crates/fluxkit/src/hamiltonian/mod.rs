//! Single-mode circuit Hamiltonian: construction, diagonalization,
//! transition frequencies, matrix elements, and wavefunctions.
//!
//! H = 4·E_C^Σ·n² + ½·E_L·(φ − 2π·Φ_ext/Φ0)² − E_J·Σ (c_k/k)·cos(kφ)
//!
//! Two solvers are kept side by side: the harmonic-oscillator basis of the
//! L-C mode (primary, exponentially convergent) and a phase-grid central-
//! difference solver (permanent independent oracle). Energies from both use
//! the same zero: the minimum of the full potential.

mod cphir;
pub mod oscillator;
pub mod phase_grid;

pub use cphir::CphiRModel;
pub use phase_grid::{GridOptions, GridSolution};

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::CircuitParams;
use oscillator::OscillatorOperators;

/// Convergence tolerance on reported energies (GHz): doubling the basis size
/// must move no reported level by more than this.
pub const ENERGY_TOL_GHZ: f64 = 1e-6;

/// Basis selection for diagonalization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    /// Oscillator levels or grid points.
    pub dim: usize,
    /// Full length of the φ window (phase-grid only), radians.
    pub phase_window: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    Oscillator,
    PhaseGrid,
}

impl BasisSpec {
    pub fn oscillator(dim: usize) -> Result<Self> {
        let spec = BasisSpec { kind: BasisKind::Oscillator, dim, phase_window: 0.0 };
        spec.validate()?;
        Ok(spec)
    }

    pub fn phase_grid(dim: usize, phase_window: f64) -> Result<Self> {
        let spec = BasisSpec { kind: BasisKind::PhaseGrid, dim, phase_window };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim < 16 {
            return Err(Error::domain("dim", format!("basis needs ≥ 16 states, got {}", self.dim)));
        }
        if self.kind == BasisKind::PhaseGrid && self.phase_window < 6.0 * std::f64::consts::PI {
            return Err(Error::domain(
                "phase_window",
                format!(
                    "window must cover ≥ 3 potential wells (≥ 6π), got {}",
                    self.phase_window
                ),
            ));
        }
        Ok(())
    }
}

impl Default for BasisSpec {
    /// Default truncation: 200 oscillator levels.
    fn default() -> Self {
        BasisSpec { kind: BasisKind::Oscillator, dim: 200, phase_window: 0.0 }
    }
}

/// How the basis was actually realized after convergence.
#[derive(Debug, Clone)]
pub enum BasisRealization {
    Oscillator { dim: usize, phi_zpf: f64, phi_center: f64 },
    PhaseGrid { phi: Vec<f64> },
}

/// Eigenvalues/eigenvectors of the circuit Hamiltonian plus basis metadata.
#[derive(Debug, Clone)]
pub struct EigenSolution {
    /// Converged energies (GHz), ascending, relative to the potential minimum.
    pub energies: Vec<f64>,
    /// Eigenvectors in the realized basis, one column per level.
    pub vectors: DMatrix<f64>,
    /// The basis that was requested.
    pub basis: BasisSpec,
    /// The basis realized after auto-doubling / window expansion.
    pub realization: BasisRealization,
    pub params: CircuitParams,
    pub cphir: CphiRModel,
    /// Largest movement of any reported level during the final doubling (GHz).
    pub convergence_delta: f64,
}

impl EigenSolution {
    pub fn n_levels(&self) -> usize {
        self.energies.len()
    }
}

/// Build the Hamiltonian matrix in the requested basis. The matrix is real
/// symmetric in both bases (the oscillator construction keeps it real by
/// gauge-shifting the flux into the harmonic angles).
pub fn build_hamiltonian(
    params: &CircuitParams,
    cphir: &CphiRModel,
    basis: &BasisSpec,
) -> Result<DMatrix<f64>> {
    crate::params::validate(*params)?;
    basis.validate()?;
    let (_, u_min) = phase_grid::potential_minimum(params, cphir);
    match basis.kind {
        BasisKind::Oscillator => {
            let ops = OscillatorOperators::build(params, cphir.n_harmonics(), basis.dim);
            Ok(ops.hamiltonian(params, cphir, u_min))
        }
        BasisKind::PhaseGrid => {
            let phi_e = 2.0 * std::f64::consts::PI * params.phi_ext;
            let half = basis.phase_window / 2.0;
            let n = basis.dim;
            let dphi = 2.0 * half / (n - 1) as f64;
            let t = 4.0 * params.e_c_sigma / (dphi * dphi);
            let mut h = DMatrix::<f64>::zeros(n, n);
            for i in 0..n {
                let phi = phi_e - half + i as f64 * dphi;
                h[(i, i)] = phase_grid::potential(params, cphir, u_min, phi) + 2.0 * t;
                if i + 1 < n {
                    h[(i, i + 1)] = -t;
                    h[(i + 1, i)] = -t;
                }
            }
            Ok(h)
        }
    }
}

/// Dense symmetric diagonalization of a prebuilt matrix, with eigenpair
/// residual verification. `n_levels ≤ dim/4` keeps a convergence margin for
/// truncated-basis matrices.
pub fn diagonalize(h: &DMatrix<f64>, n_levels: usize) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let dim = h.nrows();
    if n_levels > dim / 4 {
        return Err(Error::Truncation(format!(
            "{n_levels} levels requested from a dim-{dim} basis (need dim ≥ 4·levels)"
        )));
    }
    let (energies, vectors) = eigh_lowest(h, n_levels);
    // Residual check ‖Hv − Ev‖ < 1e-8·‖H‖ per level.
    let h_norm = h.amax() * dim as f64;
    for k in 0..n_levels {
        let v = vectors.column(k);
        let r = h * v - energies[k] * v;
        let res = r.norm();
        if res > 1e-8 * h_norm.max(1.0) {
            return Err(Error::Convergence {
                what: "dense eigensolver",
                details: format!("residual {res:.3e} on level {k} exceeds 1e-8·‖H‖"),
            });
        }
    }
    Ok((energies, vectors))
}

/// Sorted lowest eigenpairs of a real-symmetric matrix, with near-degenerate
/// pairs ordered even parity first for deterministic output.
fn eigh_lowest(h: &DMatrix<f64>, n_levels: usize) -> (Vec<f64>, DMatrix<f64>) {
    let se = h.clone().symmetric_eigen();
    let dim = h.nrows();
    let mut idx: Vec<usize> = (0..dim).collect();
    idx.sort_by(|&a, &b| se.eigenvalues[a].partial_cmp(&se.eigenvalues[b]).unwrap());
    let mut order: Vec<usize> = idx.into_iter().take(n_levels).collect();
    // Deterministic tie-break: even-parity member of a degenerate pair first.
    for k in 0..order.len().saturating_sub(1) {
        let (a, b) = (order[k], order[k + 1]);
        if (se.eigenvalues[a] - se.eigenvalues[b]).abs() < 1e-9 {
            let pa = oscillator_parity_score(&se.eigenvectors.column(a).iter().cloned().collect::<Vec<_>>());
            let pb = oscillator_parity_score(&se.eigenvectors.column(b).iter().cloned().collect::<Vec<_>>());
            if pb > pa {
                order.swap(k, k + 1);
            }
        }
    }
    let energies: Vec<f64> = order.iter().map(|&i| se.eigenvalues[i]).collect();
    let mut vectors = DMatrix::<f64>::zeros(dim, n_levels);
    for (col, &i) in order.iter().enumerate() {
        let mut v: Vec<f64> = se.eigenvectors.column(i).iter().cloned().collect();
        // Sign convention: largest-magnitude component positive.
        let mut mx = 0.0_f64;
        for &x in &v {
            if x.abs() > mx.abs() {
                mx = x;
            }
        }
        if mx < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        for (row, val) in v.into_iter().enumerate() {
            vectors[(row, col)] = val;
        }
    }
    (energies, vectors)
}

/// Even-minus-odd weight of an oscillator-basis vector (even Fock components
/// carry even φ-parity about the potential center).
fn oscillator_parity_score(v: &[f64]) -> f64 {
    let mut even = 0.0;
    let mut odd = 0.0;
    for (m, &c) in v.iter().enumerate() {
        if m % 2 == 0 {
            even += c * c;
        } else {
            odd += c * c;
        }
    }
    even - odd
}

/// Options for the auto-converging solver.
#[derive(Debug, Clone, Copy)]
pub struct SolveOptions {
    pub tol: f64,
    /// Oscillator dim ceiling for auto-doubling.
    pub max_dim: usize,
    pub grid: GridOptions,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions { tol: ENERGY_TOL_GHZ, max_dim: 3200, grid: GridOptions::default() }
    }
}

/// Diagonalize with automatic basis enlargement until every reported level
/// is converged to `opts.tol`.
pub fn solve(
    params: &CircuitParams,
    cphir: &CphiRModel,
    basis: &BasisSpec,
    n_levels: usize,
    opts: &SolveOptions,
) -> Result<EigenSolution> {
    crate::params::validate(*params)?;
    basis.validate()?;
    if n_levels == 0 {
        return Err(Error::Truncation("requested zero levels".into()));
    }
    match basis.kind {
        BasisKind::Oscillator => solve_oscillator(params, cphir, basis, n_levels, opts),
        BasisKind::PhaseGrid => {
            let grid_opts = GridOptions {
                initial_points: basis.dim,
                half_window: basis.phase_window / 2.0,
                tol: opts.tol,
                ..opts.grid
            };
            let gs = phase_grid::solve(params, cphir, n_levels, &grid_opts)?;
            let n = gs.phi.len();
            let mut vectors = DMatrix::<f64>::zeros(n, n_levels);
            for (col, v) in gs.vectors.iter().enumerate() {
                for (row, &val) in v.iter().enumerate() {
                    vectors[(row, col)] = val;
                }
            }
            Ok(EigenSolution {
                energies: gs.energies,
                vectors,
                basis: *basis,
                realization: BasisRealization::PhaseGrid { phi: gs.phi },
                params: *params,
                cphir: cphir.clone(),
                convergence_delta: opts.tol,
            })
        }
    }
}

fn solve_oscillator(
    params: &CircuitParams,
    cphir: &CphiRModel,
    basis: &BasisSpec,
    n_levels: usize,
    opts: &SolveOptions,
) -> Result<EigenSolution> {
    let (_, u_min) = phase_grid::potential_minimum(params, cphir);
    let mut dim = basis.dim.max(4 * n_levels);
    let mut prev: Option<Vec<f64>> = None;
    while dim <= opts.max_dim {
        let ops = OscillatorOperators::build(params, cphir.n_harmonics(), dim);
        let h = ops.hamiltonian(params, cphir, u_min);
        let (energies, vectors) = diagonalize(&h, n_levels)?;
        if let Some(p) = &prev {
            let delta = energies
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);
            if delta < opts.tol {
                let phi_e = 2.0 * std::f64::consts::PI * params.phi_ext;
                return Ok(EigenSolution {
                    energies,
                    vectors,
                    basis: *basis,
                    realization: BasisRealization::Oscillator {
                        dim,
                        phi_zpf: params.phi_zpf(),
                        phi_center: phi_e,
                    },
                    params: *params,
                    cphir: cphir.clone(),
                    convergence_delta: delta,
                });
            }
        }
        prev = Some(energies);
        dim *= 2;
    }
    Err(Error::Convergence {
        what: "oscillator-basis solver",
        details: format!(
            "levels not converged to {} GHz at dim ceiling {} (last estimates {:?})",
            opts.tol, opts.max_dim, prev
        ),
    })
}

/// Transition frequency E_j − E_i (GHz), j > i.
pub fn transition_frequency(sol: &EigenSolution, i: usize, j: usize) -> Result<f64> {
    if j <= i {
        return Err(Error::domain("levels", format!("need j > i, got i={i}, j={j}")));
    }
    if j >= sol.n_levels() {
        return Err(Error::Truncation(format!(
            "level {j} not converged (solution holds {} levels)",
            sol.n_levels()
        )));
    }
    Ok(sol.energies[j] - sol.energies[i])
}

/// Operators with matrix elements available in the qubit eigenbasis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operator {
    /// Cooper-pair number operator n.
    N,
    /// Phase operator φ (physical frame, including the flux offset).
    Phi,
}

/// ⟨i|op|j⟩ in the eigenbasis. Hermitian-symmetric by construction:
/// elem(i, j) = conj(elem(j, i)).
pub fn matrix_element(sol: &EigenSolution, op: Operator, i: usize, j: usize) -> Result<Complex64> {
    let n = sol.n_levels();
    if i >= n || j >= n {
        return Err(Error::Truncation(format!("levels ({i},{j}) exceed converged count {n}")));
    }
    let vi = sol.vectors.column(i);
    let vj = sol.vectors.column(j);
    match (&sol.realization, op) {
        (BasisRealization::Oscillator { dim, phi_zpf, phi_center }, Operator::N) => {
            // n = i·n_zpf·(a† − a): real antisymmetric ladder structure times i.
            let n_zpf = 1.0 / (2.0 * phi_zpf);
            let mut acc = 0.0;
            for m in 0..dim - 1 {
                let w = n_zpf * ((m + 1) as f64).sqrt();
                // A[m+1, m] = +w, A[m, m+1] = -w
                acc += w * (vi[m + 1] * vj[m] - vi[m] * vj[m + 1]);
            }
            let _ = phi_center;
            Ok(Complex64::new(0.0, acc))
        }
        (BasisRealization::Oscillator { dim, phi_zpf, phi_center }, Operator::Phi) => {
            let mut acc = 0.0;
            for m in 0..dim - 1 {
                let w = phi_zpf * ((m + 1) as f64).sqrt();
                acc += w * (vi[m + 1] * vj[m] + vi[m] * vj[m + 1]);
            }
            if i == j {
                acc += phi_center;
            }
            Ok(Complex64::new(acc, 0.0))
        }
        (BasisRealization::PhaseGrid { phi }, Operator::N) => {
            // n = −i ∂/∂φ by central difference.
            let dphi = phi[1] - phi[0];
            let len = phi.len();
            let mut acc = 0.0;
            for l in 1..len - 1 {
                acc += vi[l] * (vj[l + 1] - vj[l - 1]) / (2.0 * dphi);
            }
            Ok(Complex64::new(0.0, -acc))
        }
        (BasisRealization::PhaseGrid { phi }, Operator::Phi) => {
            let acc: f64 = phi.iter().enumerate().map(|(l, &p)| vi[l] * p * vj[l]).sum();
            Ok(Complex64::new(acc, 0.0))
        }
    }
}

/// Wavefunction samples with the potential curve exported alongside.
#[derive(Debug, Clone, Serialize)]
pub struct WavefunctionSamples {
    pub phi: Vec<f64>,
    pub potential_ghz: Vec<f64>,
    pub psi: Vec<f64>,
}

/// Sample ψ_level(φ) on `grid` (oscillator basis: analytic Hermite
/// functions; phase-grid basis: the solver's own grid, `grid` ignored may be
/// empty). Errors if the grid fails to cover the support.
pub fn wavefunction(sol: &EigenSolution, level: usize, grid: &[f64]) -> Result<WavefunctionSamples> {
    if level >= sol.n_levels() {
        return Err(Error::Truncation(format!(
            "level {level} not converged (solution holds {})",
            sol.n_levels()
        )));
    }
    let (_, u_min) = phase_grid::potential_minimum(&sol.params, &sol.cphir);
    match &sol.realization {
        BasisRealization::Oscillator { dim, phi_zpf, phi_center } => {
            if grid.len() < 2 {
                return Err(Error::Window("sampling grid needs ≥ 2 points".into()));
            }
            let coeffs = sol.vectors.column(level);
            let psi: Vec<f64> = grid
                .iter()
                .map(|&p| {
                    let mut val = 0.0;
                    // Evaluate Σ c_m u_m(φ) with one recurrence pass.
                    let xi = (p - phi_center) / (std::f64::consts::SQRT_2 * phi_zpf);
                    let norm0 =
                        (2.0 * std::f64::consts::PI * phi_zpf * phi_zpf).powf(-0.25);
                    let mut u_prev = 0.0;
                    let mut u = norm0 * (-0.5 * xi * xi).exp();
                    val += coeffs[0] * u;
                    for m in 1..*dim {
                        let mf = m as f64;
                        let u_next =
                            xi * (2.0 / mf).sqrt() * u - ((mf - 1.0) / mf).sqrt() * u_prev;
                        u_prev = u;
                        u = u_next;
                        val += coeffs[m] * u;
                    }
                    val
                })
                .collect();
            let samples = WavefunctionSamples {
                potential_ghz: grid
                    .iter()
                    .map(|&p| phase_grid::potential(&sol.params, &sol.cphir, u_min, p))
                    .collect(),
                phi: grid.to_vec(),
                psi,
            };
            check_window_and_norm(&samples)?;
            Ok(samples)
        }
        BasisRealization::PhaseGrid { phi } => {
            let dphi = phi[1] - phi[0];
            let col = sol.vectors.column(level);
            // ℓ²-normalized grid vector → continuum normalization ψ = v/√Δφ.
            let psi: Vec<f64> = col.iter().map(|v| v / dphi.sqrt()).collect();
            let samples = WavefunctionSamples {
                potential_ghz: phi
                    .iter()
                    .map(|&p| phase_grid::potential(&sol.params, &sol.cphir, u_min, p))
                    .collect(),
                phi: phi.clone(),
                psi,
            };
            check_window_and_norm(&samples)?;
            Ok(samples)
        }
    }
}

fn check_window_and_norm(s: &WavefunctionSamples) -> Result<()> {
    let peak = s.psi.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let edge = s.psi[0].abs().max(s.psi[s.psi.len() - 1].abs());
    if edge > 1e-6 * peak.max(1.0) {
        return Err(Error::Window(format!(
            "wavefunction amplitude {edge:.2e} at the grid edge (peak {peak:.2e})"
        )));
    }
    Ok(())
}

/// Phase-slip-rate approximation to the half-flux splitting:
/// ν = (4/√π)·(8·E_J³·E_C^Σ)^¼·exp(−√(8·E_J/E_C^Σ)), in GHz.
pub fn phase_slip_frequency(params: &CircuitParams) -> Result<f64> {
    if !(params.e_j > 0.0) {
        return Err(Error::domain("e_j", format!("must be > 0, got {}", params.e_j)));
    }
    if !(params.e_c_sigma > 0.0) {
        return Err(Error::domain("e_c_sigma", format!("must be > 0, got {}", params.e_c_sigma)));
    }
    let ej = params.e_j;
    let ec = params.e_c_sigma;
    let prefactor = 4.0 / std::f64::consts::PI.sqrt() * (8.0 * ej * ej * ej * ec).powf(0.25);
    Ok(prefactor * (-(8.0 * ej / ec).sqrt()).exp())
}

/// Fast repeated-diagonalization path for flux sweeps and spectrum fits:
/// the flux-independent oscillator operator matrices are built once at a
/// basis size probed for convergence, then reused for every flux point.
#[derive(Debug, Clone)]
pub struct SpectrumModel {
    params: CircuitParams,
    cphir: CphiRModel,
    ops: OscillatorOperators,
    n_levels: usize,
}

impl SpectrumModel {
    /// Probe convergence at a few representative flux biases, then freeze
    /// the basis size (with one extra doubling of margin).
    pub fn new(
        params: &CircuitParams,
        cphir: &CphiRModel,
        n_levels: usize,
        opts: &SolveOptions,
    ) -> Result<Self> {
        crate::params::validate(*params)?;
        let mut dim = (4 * n_levels).max(48);
        let probes = [0.0, 0.31, 0.5];
        'outer: while dim <= opts.max_dim {
            let ops = OscillatorOperators::build(params, cphir.n_harmonics(), dim);
            let ops2 = OscillatorOperators::build(params, cphir.n_harmonics(), dim * 2);
            for &phx in &probes {
                let p = params.at_flux(phx);
                let (_, u_min) = phase_grid::potential_minimum(&p, cphir);
                let (e1, _) = diagonalize(&ops.hamiltonian(&p, cphir, u_min), n_levels)?;
                let (e2, _) = diagonalize(&ops2.hamiltonian(&p, cphir, u_min), n_levels)?;
                let delta =
                    e1.iter().zip(&e2).map(|(a, b)| (a - b).abs()).fold(0.0_f64, f64::max);
                if delta >= opts.tol {
                    dim *= 2;
                    continue 'outer;
                }
            }
            // Keep the doubled basis as margin for parameter excursions
            // during fits.
            return Ok(SpectrumModel {
                params: *params,
                cphir: cphir.clone(),
                ops: ops2,
                n_levels,
            });
        }
        Err(Error::Convergence {
            what: "spectrum model basis probe",
            details: format!("no converged dim ≤ {}", opts.max_dim),
        })
    }

    pub fn n_levels(&self) -> usize {
        self.n_levels
    }

    pub fn params(&self) -> &CircuitParams {
        &self.params
    }

    /// Frozen basis size (includes the convergence margin).
    pub fn dim(&self) -> usize {
        self.ops.dim
    }

    /// Energies (relative to the ground state) at one flux bias.
    pub fn levels_at(&self, phi_ext: f64) -> Result<Vec<f64>> {
        let p = self.params.at_flux(phi_ext);
        let (_, u_min) = phase_grid::potential_minimum(&p, &self.cphir);
        let h = self.ops.hamiltonian(&p, &self.cphir, u_min);
        let (energies, _) = diagonalize(&h, self.n_levels)?;
        Ok(energies)
    }

    /// Transition frequency f(i→j) at one flux bias.
    pub fn transition_at(&self, phi_ext: f64, i: usize, j: usize) -> Result<f64> {
        let e = self.levels_at(phi_ext)?;
        if j >= e.len() || j <= i {
            return Err(Error::Truncation(format!("transition ({i},{j}) out of range")));
        }
        Ok(e[j] - e[i])
    }
}

/// One row of a flux sweep: transitions from the ground state.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub phi_ext: f64,
    /// f(g→k) for k = 1..n_levels (GHz).
    pub transitions: Vec<f64>,
}

/// Flux sweep of ground-state transitions, parallel across flux points.
pub fn flux_sweep(
    params: &CircuitParams,
    cphir: &CphiRModel,
    phis: &[f64],
    n_levels: usize,
    opts: &SolveOptions,
) -> Result<Vec<SweepRow>> {
    use rayon::prelude::*;
    let model = SpectrumModel::new(params, cphir, n_levels, opts)?;
    phis.par_iter()
        .map(|&phx| {
            let e = model.levels_at(phx)?;
            Ok(SweepRow {
                phi_ext: phx,
                transitions: e[1..].iter().map(|x| x - e[0]).collect(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
