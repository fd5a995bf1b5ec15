//! Phase-grid finite-difference solver.
//!
//! Central-difference discretization of H = −4E_C ∂²/∂φ² + U(φ) on a uniform
//! grid with Dirichlet walls, kept as a permanent independent oracle for the
//! oscillator-basis solver. The tridiagonal eigenproblem is solved by Sturm
//! bisection plus inverse iteration — deliberately not sharing any code with
//! the dense eigensolver used for the oscillator basis.
//!
//! The O(Δφ²) discretization error is removed by Richardson extrapolation
//! over grid doublings until the requested tolerance is met; the window is
//! widened whenever a requested eigenvector still has weight at the walls.

use super::cphir::CphiRModel;
use crate::error::{Error, Result};
use crate::params::CircuitParams;

#[derive(Debug, Clone, Copy)]
pub struct GridOptions {
    /// Initial number of grid points.
    pub initial_points: usize,
    /// Half-width of the φ window, centered on the inductive minimum.
    pub half_window: f64,
    /// Convergence tolerance on each reported energy (GHz).
    pub tol: f64,
    /// Maximum number of grid doublings.
    pub max_doublings: usize,
    /// Maximum number of window expansions.
    pub max_window_expansions: usize,
}

impl Default for GridOptions {
    fn default() -> Self {
        GridOptions {
            initial_points: 2001,
            half_window: 6.0 * std::f64::consts::PI,
            tol: 1e-7,
            max_doublings: 7,
            max_window_expansions: 6,
        }
    }
}

/// Converged solution on the finest grid used.
#[derive(Debug, Clone)]
pub struct GridSolution {
    /// Richardson-extrapolated energies (GHz), ascending.
    pub energies: Vec<f64>,
    /// Eigenvectors on the grid, ℓ²-normalized, one column per level.
    pub vectors: Vec<Vec<f64>>,
    /// Grid points φ_i.
    pub phi: Vec<f64>,
}

impl GridSolution {
    pub fn dphi(&self) -> f64 {
        self.phi[1] - self.phi[0]
    }
}

/// Full potential U(φ) = ½E_L(φ−φ_e)² + E_J·u_J(φ) − offset, in GHz.
pub fn potential(params: &CircuitParams, cphir: &CphiRModel, offset: f64, phi: f64) -> f64 {
    let phi_e = 2.0 * std::f64::consts::PI * params.phi_ext;
    let d = phi - phi_e;
    0.5 * params.e_l * d * d + params.e_j * cphir.potential(phi) - offset
}

/// Location and value of the global potential minimum (grid scan plus
/// safeguarded Newton refinement). Shared by both solvers so that their
/// energy zeros agree exactly.
pub fn potential_minimum(params: &CircuitParams, cphir: &CphiRModel) -> (f64, f64) {
    let phi_e = 2.0 * std::f64::consts::PI * params.phi_ext;
    let sum_abs: f64 =
        cphir.harmonics().iter().enumerate().map(|(i, c)| c.abs() / (i + 1) as f64).sum();
    // The quadratic term bounds how far the minimum can sit from φ_e.
    let reach = (4.0 * params.e_j * sum_abs / params.e_l).sqrt() + std::f64::consts::PI;
    let n = 4096;
    let mut best_phi = phi_e;
    let mut best_u = f64::INFINITY;
    for i in 0..=n {
        let phi = phi_e - reach + 2.0 * reach * i as f64 / n as f64;
        let u = potential(params, cphir, 0.0, phi);
        if u < best_u {
            best_u = u;
            best_phi = phi;
        }
    }
    // Newton refinement on U'(φ) = 0.
    let mut phi = best_phi;
    for _ in 0..40 {
        let d = phi - phi_e;
        let mut du = params.e_l * d;
        let mut d2u = params.e_l;
        for (i, &c) in cphir.harmonics().iter().enumerate() {
            let k = (i + 1) as f64;
            du += params.e_j * c * (k * phi).sin();
            d2u += params.e_j * c * k * (k * phi).cos();
        }
        if d2u <= 0.0 {
            break;
        }
        let step = du / d2u;
        phi -= step;
        if step.abs() < 1e-14 {
            break;
        }
    }
    let u_refined = potential(params, cphir, 0.0, phi);
    if u_refined < best_u {
        (phi, u_refined)
    } else {
        (best_phi, best_u)
    }
}

/// Solve for the lowest `n_levels` eigenpairs.
pub fn solve(
    params: &CircuitParams,
    cphir: &CphiRModel,
    n_levels: usize,
    opts: &GridOptions,
) -> Result<GridSolution> {
    if n_levels == 0 {
        return Err(Error::Truncation("requested zero levels".into()));
    }
    let (_, u_min) = potential_minimum(params, cphir);
    let phi_e = 2.0 * std::f64::consts::PI * params.phi_ext;
    let mut half_window = opts.half_window;

    'window: for expansion in 0..=opts.max_window_expansions {
        let mut n = opts.initial_points;
        let mut coarse = eigenvalues_at(params, cphir, u_min, phi_e, half_window, n, n_levels);
        let mut prev_extrap: Option<Vec<f64>> = None;
        for _ in 0..=opts.max_doublings {
            let fine_n = 2 * n - 1;
            let fine = eigenvalues_at(params, cphir, u_min, phi_e, half_window, fine_n, n_levels);
            let extrap: Vec<f64> =
                coarse.iter().zip(&fine).map(|(c, f)| (4.0 * f - c) / 3.0).collect();
            let converged = match &prev_extrap {
                Some(p) => extrap
                    .iter()
                    .zip(p)
                    .all(|(a, b)| (a - b).abs() < opts.tol),
                None => false,
            };
            if converged {
                let (vectors, phi) =
                    eigenvectors_at(params, cphir, u_min, phi_e, half_window, fine_n, &fine)?;
                // Wall check on the most extended requested state.
                let edge = vectors
                    .iter()
                    .map(|v| {
                        let vmax = v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
                        (v[0].abs().max(v[v.len() - 1].abs())) / vmax
                    })
                    .fold(0.0_f64, f64::max);
                if edge > 1e-8 && expansion < opts.max_window_expansions {
                    half_window *= 1.5;
                    continue 'window;
                }
                return Ok(GridSolution { energies: extrap, vectors, phi });
            }
            prev_extrap = Some(extrap);
            coarse = fine;
            n = fine_n;
        }
        return Err(Error::Convergence {
            what: "phase-grid eigensolver",
            details: format!(
                "energies not converged to {} GHz after {} doublings (last two: {:?} / {:?})",
                opts.tol,
                opts.max_doublings,
                prev_extrap,
                coarse
            ),
        });
    }
    Err(Error::Window(format!(
        "wavefunction reaches the window edge even at half-width {half_window:.1} rad"
    )))
}

fn assemble(
    params: &CircuitParams,
    cphir: &CphiRModel,
    u_min: f64,
    phi_e: f64,
    half_window: f64,
    n: usize,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let dphi = 2.0 * half_window / (n - 1) as f64;
    let t = 4.0 * params.e_c_sigma / (dphi * dphi);
    let mut phi = Vec::with_capacity(n);
    let mut diag = Vec::with_capacity(n);
    for i in 0..n {
        let p = phi_e - half_window + i as f64 * dphi;
        phi.push(p);
        diag.push(potential(params, cphir, u_min, p) + 2.0 * t);
    }
    let off = vec![-t; n - 1];
    (phi, diag, off)
}

fn eigenvalues_at(
    params: &CircuitParams,
    cphir: &CphiRModel,
    u_min: f64,
    phi_e: f64,
    half_window: f64,
    n: usize,
    n_levels: usize,
) -> Vec<f64> {
    let (_, diag, off) = assemble(params, cphir, u_min, phi_e, half_window, n);
    lowest_eigenvalues(&diag, &off, n_levels)
}

fn eigenvectors_at(
    params: &CircuitParams,
    cphir: &CphiRModel,
    u_min: f64,
    phi_e: f64,
    half_window: f64,
    n: usize,
    eigenvalues: &[f64],
) -> Result<(Vec<Vec<f64>>, Vec<f64>)> {
    let (phi, diag, off) = assemble(params, cphir, u_min, phi_e, half_window, n);
    let mut vectors: Vec<Vec<f64>> = Vec::with_capacity(eigenvalues.len());
    let scale = matrix_scale(&diag, &off);
    for (k, &lambda) in eigenvalues.iter().enumerate() {
        // Members of a near-degenerate cluster must be orthogonalized
        // against each other during the iteration.
        let cluster_start = (0..k)
            .rev()
            .take_while(|&j| (eigenvalues[j + 1] - eigenvalues[j]).abs() < 1e-6 * scale.max(1.0))
            .last()
            .unwrap_or(k);
        let prior = &vectors[cluster_start..k];
        let v = inverse_iteration(&diag, &off, lambda, prior, scale)?;
        vectors.push(v);
    }
    Ok((vectors, phi))
}

fn matrix_scale(diag: &[f64], off: &[f64]) -> f64 {
    let d = diag.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let e = off.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    d + 2.0 * e
}

/// Number of eigenvalues of the symmetric tridiagonal matrix strictly below
/// `x`, from the sign count of the LDLᵀ pivots.
fn sturm_count(diag: &[f64], off: &[f64], x: f64) -> usize {
    let n = diag.len();
    let tiny = f64::MIN_POSITIVE / f64::EPSILON;
    let mut count = 0usize;
    let mut q = diag[0] - x;
    if q < 0.0 {
        count += 1;
    }
    for i in 1..n {
        let denom = if q.abs() < tiny { if q < 0.0 { -tiny } else { tiny } } else { q };
        q = diag[i] - x - off[i - 1] * off[i - 1] / denom;
        if q < 0.0 {
            count += 1;
        }
    }
    count
}

/// Lowest `k` eigenvalues by bisection on the Sturm count.
fn lowest_eigenvalues(diag: &[f64], off: &[f64], k: usize) -> Vec<f64> {
    // Gershgorin bounds.
    let n = diag.len();
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for i in 0..n {
        let r = (if i > 0 { off[i - 1].abs() } else { 0.0 })
            + (if i + 1 < n { off[i].abs() } else { 0.0 });
        lo = lo.min(diag[i] - r);
        hi = hi.max(diag[i] + r);
    }
    let mut out = Vec::with_capacity(k);
    for idx in 0..k {
        let (mut a, mut b) = (lo, hi);
        // λ_idx = inf { x : count(x) ≥ idx+1 }
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            if sturm_count(diag, off, mid) >= idx + 1 {
                b = mid;
            } else {
                a = mid;
            }
            if (b - a).abs() <= f64::EPSILON * (a.abs().max(b.abs()) + 1.0) {
                break;
            }
        }
        out.push(0.5 * (a + b));
    }
    out
}

/// One eigenvector by inverse iteration with the factorization
/// (T − λI) = LU (partial pivoting, tridiagonal with one fill-in band).
fn inverse_iteration(
    diag: &[f64],
    off: &[f64],
    lambda: f64,
    orthogonalize_against: &[Vec<f64>],
    scale: f64,
) -> Result<Vec<f64>> {
    let n = diag.len();
    // A deterministic, sign-varying start vector.
    let mut v: Vec<f64> = (0..n)
        .map(|i| {
            let x = (i as f64 * 0.754_877_666_246_7).fract() - 0.5;
            x + 0.25
        })
        .collect();
    normalize(&mut v);
    let factor = TridiagLu::factor(diag, off, lambda, scale);
    let mut last_norm = 0.0;
    for _ in 0..8 {
        for w in orthogonalize_against {
            let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
            v.iter_mut().zip(w).for_each(|(a, b)| *a -= dot * b);
        }
        let mut y = factor.solve(&v);
        last_norm = y.iter().map(|x| x * x).sum::<f64>().sqrt();
        normalize(&mut y);
        v = y;
        // Growth of the solve norm signals convergence of inverse iteration.
        if last_norm > 1.0 / (f64::EPSILON * 100.0) {
            break;
        }
    }
    for w in orthogonalize_against {
        let dot: f64 = v.iter().zip(w).map(|(a, b)| a * b).sum();
        v.iter_mut().zip(w).for_each(|(a, b)| *a -= dot * b);
    }
    normalize(&mut v);
    // Residual sanity: ‖Tv − λv‖ relative to the matrix scale.
    let mut res = 0.0_f64;
    for i in 0..n {
        let mut r = (diag[i] - lambda) * v[i];
        if i > 0 {
            r += off[i - 1] * v[i - 1];
        }
        if i + 1 < n {
            r += off[i] * v[i + 1];
        }
        res += r * r;
    }
    let res = res.sqrt();
    if res > 1e-8 * scale {
        return Err(Error::Convergence {
            what: "inverse iteration",
            details: format!("residual {res:.3e} at λ = {lambda} (solve norm {last_norm:.3e})"),
        });
    }
    // Fix overall sign: make the largest-magnitude entry positive.
    if let Some(m) = v.iter().cloned().reduce(|a, b| if a.abs() >= b.abs() { a } else { b }) {
        if m < 0.0 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
    }
    Ok(v)
}

fn normalize(v: &mut [f64]) {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm > 0.0 {
        v.iter_mut().for_each(|x| *x /= norm);
    }
}

/// LU factorization of (T − λI) with partial pivoting. Row swaps introduce a
/// second superdiagonal, stored in `u2`.
struct TridiagLu {
    n: usize,
    u0: Vec<f64>,
    u1: Vec<f64>,
    u2: Vec<f64>,
    l: Vec<f64>,
    swapped: Vec<bool>,
}

impl TridiagLu {
    fn factor(diag: &[f64], off: &[f64], lambda: f64, scale: f64) -> Self {
        let pivot_floor = scale.max(1.0) * f64::EPSILON * 1e-3;
        let n = diag.len();
        // Working rows: each row has up to 3 entries (current, +1, +2).
        let mut u0 = vec![0.0; n];
        let mut u1 = vec![0.0; n];
        let mut u2 = vec![0.0; n];
        let mut l = vec![0.0; n];
        let mut swapped = vec![false; n];
        // row_cur holds the active row i of the remaining matrix.
        let mut cur0 = diag[0] - lambda;
        let mut cur1 = if n > 1 { off[0] } else { 0.0 };
        let mut cur2 = 0.0;
        for i in 0..n {
            if i == n - 1 {
                u0[i] = if cur0.abs() < pivot_floor {
                    if cur0 < 0.0 {
                        -pivot_floor
                    } else {
                        pivot_floor
                    }
                } else {
                    cur0
                };
                break;
            }
            // Next row of the original matrix (row i+1): [off[i], diag[i+1]-λ, off[i+1]]
            let mut nxt0 = off[i];
            let mut nxt1 = diag[i + 1] - lambda;
            let mut nxt2 = if i + 2 < n { off[i + 1] } else { 0.0 };
            if nxt0.abs() > cur0.abs() {
                swapped[i] = true;
                std::mem::swap(&mut cur0, &mut nxt0);
                std::mem::swap(&mut cur1, &mut nxt1);
                std::mem::swap(&mut cur2, &mut nxt2);
            }
            let piv = if cur0.abs() < pivot_floor {
                if cur0 < 0.0 {
                    -pivot_floor
                } else {
                    pivot_floor
                }
            } else {
                cur0
            };
            let m = nxt0 / piv;
            u0[i] = piv;
            u1[i] = cur1;
            u2[i] = cur2;
            l[i] = m;
            cur0 = nxt1 - m * cur1;
            cur1 = nxt2 - m * cur2;
            cur2 = 0.0;
        }
        TridiagLu { n, u0, u1, u2, l, swapped }
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut y = b.to_vec();
        // Forward sweep, replaying the row swaps.
        for i in 0..n - 1 {
            if self.swapped[i] {
                y.swap(i, i + 1);
            }
            y[i + 1] -= self.l[i] * y[i];
        }
        // Back substitution with two superdiagonals.
        let mut x = vec![0.0; n];
        for i in (0..n).rev() {
            let mut s = y[i];
            if i + 1 < n {
                s -= self.u1[i] * x[i + 1];
            }
            if i + 2 < n {
                s -= self.u2[i] * x[i + 2];
            }
            x[i] = s / self.u0[i];
        }
        x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::CircuitParams;

    #[test]
    fn sturm_count_simple_matrix() {
        // T = [[2,-1],[-1,2]] has eigenvalues 1 and 3.
        let diag = vec![2.0, 2.0];
        let off = vec![-1.0];
        assert_eq!(sturm_count(&diag, &off, 0.5), 0);
        assert_eq!(sturm_count(&diag, &off, 2.0), 1);
        assert_eq!(sturm_count(&diag, &off, 3.5), 2);
        let ev = lowest_eigenvalues(&diag, &off, 2);
        assert!((ev[0] - 1.0).abs() < 1e-12);
        assert!((ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn laplacian_eigenvalues_analytic() {
        // -d²/dx² on (0, L) with Dirichlet walls: λ_k = (kπ/L)², discretized
        // version (2−2cos(kπh/L))/h² with n interior points.
        let n = 500;
        let l = 1.0_f64;
        let h = l / (n as f64 + 1.0);
        let diag = vec![2.0 / (h * h); n];
        let off = vec![-1.0 / (h * h); n - 1];
        let ev = lowest_eigenvalues(&diag, &off, 3);
        for (k, &e) in ev.iter().enumerate() {
            let kf = (k + 1) as f64;
            let exact = (2.0 - 2.0 * (kf * std::f64::consts::PI * h / l).cos()) / (h * h);
            assert!((e - exact).abs() < 1e-7 * exact, "level {k}: {e} vs {exact}");
        }
    }

    #[test]
    fn inverse_iteration_recovers_eigenvectors() {
        let n = 200;
        let diag: Vec<f64> = (0..n).map(|i| 2.0 + 0.01 * i as f64).collect();
        let off = vec![-1.0; n - 1];
        let ev = lowest_eigenvalues(&diag, &off, 4);
        let scale = matrix_scale(&diag, &off);
        let mut vecs: Vec<Vec<f64>> = Vec::new();
        for &lam in &ev {
            let v = inverse_iteration(&diag, &off, lam, &vecs, scale).unwrap();
            vecs.push(v);
        }
        // Orthonormality.
        for i in 0..vecs.len() {
            for j in 0..=i {
                let dot: f64 = vecs[i].iter().zip(&vecs[j]).map(|(a, b)| a * b).sum();
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((dot - expect).abs() < 1e-9, "({i},{j}) dot {dot}");
            }
        }
    }

    #[test]
    fn harmonic_limit_levels() {
        // Tiny E_J: levels of the bare L-C oscillator, spacing √(8 E_C E_L).
        let params = CircuitParams::new(1e-12, 2.0, 0.5, 0.3).unwrap();
        let cphir = CphiRModel::sinusoidal();
        let sol = solve(&params, &cphir, 4, &GridOptions::default()).unwrap();
        let w = params.lc_frequency();
        for k in 0..3 {
            let gap = sol.energies[k + 1] - sol.energies[k];
            assert!((gap - w).abs() < 1e-6, "gap {k}: {gap} vs {w}");
        }
    }
}
