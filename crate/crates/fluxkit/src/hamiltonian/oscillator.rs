//! Harmonic-oscillator basis for the single-mode circuit Hamiltonian.
//!
//! The L-C mode defines the basis: ω = √(8·E_C·E_L), φ_zpf = (2E_C/E_L)^¼.
//! The Josephson terms cos(kφ) and sin(kφ) are assembled from displacement-
//! operator matrix elements ⟨m|e^{ikφ}|n⟩ = i^{m−n}·g(n, m−n), where the real
//! amplitude g is generated by a scaled associated-Laguerre recurrence that
//! keeps every intermediate bounded by 1.
//!
//! The external flux is removed by the gauge shift φ → φ + φ_ext, which moves
//! the flux dependence into the harmonic angles cos(k·φ_ext), sin(k·φ_ext)
//! and leaves the operator matrices flux-independent. A flux sweep therefore
//! reuses the same cos/sin matrices and only re-assembles a linear
//! combination per flux point.

use nalgebra::DMatrix;

use super::cphir::CphiRModel;
use crate::params::CircuitParams;

/// Flux-independent operator matrices for one (E_C, E_L, dim) combination.
#[derive(Debug, Clone)]
pub struct OscillatorOperators {
    pub dim: usize,
    pub phi_zpf: f64,
    pub omega: f64,
    /// cos(kφ) for k = 1..=n_harmonics.
    pub cos_k: Vec<DMatrix<f64>>,
    /// sin(kφ) for k = 1..=n_harmonics.
    pub sin_k: Vec<DMatrix<f64>>,
}

impl OscillatorOperators {
    pub fn build(params: &CircuitParams, n_harmonics: usize, dim: usize) -> Self {
        let phi_zpf = params.phi_zpf();
        let omega = params.lc_frequency();
        let mut cos_k = Vec::with_capacity(n_harmonics);
        let mut sin_k = Vec::with_capacity(n_harmonics);
        for k in 1..=n_harmonics {
            let (c, s) = cos_sin_matrices(k as f64 * phi_zpf, dim);
            cos_k.push(c);
            sin_k.push(s);
        }
        OscillatorOperators { dim, phi_zpf, omega, cos_k, sin_k }
    }

    /// Assemble the (real-symmetric) Hamiltonian matrix at a flux bias.
    /// `u_offset` is subtracted from the diagonal (potential-zero convention).
    pub fn hamiltonian(
        &self,
        params: &CircuitParams,
        cphir: &CphiRModel,
        u_offset: f64,
    ) -> DMatrix<f64> {
        let dim = self.dim;
        let phi_e = 2.0 * std::f64::consts::PI * params.phi_ext;
        let mut h = DMatrix::<f64>::zeros(dim, dim);
        for m in 0..dim {
            h[(m, m)] = self.omega * (m as f64 + 0.5) - u_offset;
        }
        for (idx, &c) in cphir.harmonics().iter().enumerate() {
            if c == 0.0 {
                continue;
            }
            let k = (idx + 1) as f64;
            let (ck, sk) = ((k * phi_e).cos(), (k * phi_e).sin());
            let w = -params.e_j * c / k;
            // -E_J (c/k) cos(k(φ+φ_e)) = w·[cos(kφ_e)·C_k − sin(kφ_e)·S_k]
            h.axpy_mut(w * ck, &self.cos_k[idx]);
            h.axpy_mut(-w * sk, &self.sin_k[idx]);
        }
        h
    }
}

trait AxpyMat {
    fn axpy_mut(&mut self, alpha: f64, other: &DMatrix<f64>);
}

impl AxpyMat for DMatrix<f64> {
    fn axpy_mut(&mut self, alpha: f64, other: &DMatrix<f64>) {
        self.zip_apply(other, |a, b| *a += alpha * b);
    }
}

/// Matrices of cos(kφ) and sin(kφ) with λ = k·φ_zpf, both real symmetric.
///
/// Nonzero pattern: cos on even |m−n|, sin on odd |m−n|; the signs alternate
/// with ⌊d/2⌋ as dictated by the i^d phase of the displacement element.
pub fn cos_sin_matrices(lambda: f64, dim: usize) -> (DMatrix<f64>, DMatrix<f64>) {
    let g = displacement_amplitudes(lambda, dim);
    let mut cos = DMatrix::<f64>::zeros(dim, dim);
    let mut sin = DMatrix::<f64>::zeros(dim, dim);
    for n in 0..dim {
        for d in 0..dim - n {
            let m = n + d;
            let val = g[(n, d)];
            if d % 2 == 0 {
                let sign = if (d / 2) % 2 == 0 { 1.0 } else { -1.0 };
                cos[(m, n)] = sign * val;
                cos[(n, m)] = sign * val;
            } else {
                let sign = if ((d - 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
                sin[(m, n)] = sign * val;
                sin[(n, m)] = sign * val;
            }
        }
    }
    (cos, sin)
}

/// g(n, d) = ⟨n+d|e^{iλ(a+a†)}|n⟩ / i^d
///         = √(n!/(n+d)!)·λ^d·e^{−λ²/2}·L_n^{(d)}(λ²).
///
/// Computed by a recurrence on the scaled quantity itself; every g is a
/// unitary matrix element, so |g| ≤ 1 and the forward recurrence cannot
/// overflow. Stored as a (n, d) lower-triangle-by-diagonal table.
fn displacement_amplitudes(lambda: f64, dim: usize) -> GTable {
    let x = lambda * lambda;
    let mut g = GTable::new(dim);
    // seed row n = 0: g(0,d) = λ^d e^{−x/2} / √(d!)
    let mut seed = (-0.5 * x).exp();
    g.set(0, 0, seed);
    for d in 1..dim {
        seed *= lambda / (d as f64).sqrt();
        g.set(0, d, seed);
    }
    for d in 0..dim {
        for n in 0..dim - d - 1 {
            let nf = n as f64;
            let df = d as f64;
            let prev = if n == 0 { 0.0 } else { g.get(n - 1, d) };
            let num = (2.0 * nf + 1.0 + df - x) * g.get(n, d) - (nf * (nf + df)).sqrt() * prev;
            let next = num / ((nf + 1.0) * (nf + 1.0 + df)).sqrt();
            g.set(n + 1, d, next);
        }
    }
    g
}

/// Dense (n, d) table with d ranging over 0..dim−n.
struct GTable {
    dim: usize,
    data: Vec<f64>,
}

impl GTable {
    fn new(dim: usize) -> Self {
        GTable { dim, data: vec![0.0; dim * dim] }
    }
    #[inline]
    fn get(&self, n: usize, d: usize) -> f64 {
        self.data[n * self.dim + d]
    }
    #[inline]
    fn set(&mut self, n: usize, d: usize, v: f64) {
        self.data[n * self.dim + d] = v;
    }
}

impl std::ops::Index<(usize, usize)> for GTable {
    type Output = f64;
    fn index(&self, (n, d): (usize, usize)) -> &f64 {
        &self.data[n * self.dim + d]
    }
}

/// Sampled oscillator eigenfunction u_m(φ) for the mode centered at
/// `phi_center` with zero-point spread `phi_zpf`, evaluated by the stable
/// normalized Hermite-function recurrence.
pub fn hermite_function(m: usize, phi_zpf: f64, phi_center: f64, phi: f64) -> f64 {
    let xi = (phi - phi_center) / (std::f64::consts::SQRT_2 * phi_zpf);
    let norm0 = (2.0 * std::f64::consts::PI * phi_zpf * phi_zpf).powf(-0.25);
    let mut u_prev = 0.0;
    let mut u = norm0 * (-0.5 * xi * xi).exp();
    for j in 1..=m {
        let jf = j as f64;
        let u_next = xi * (2.0 / jf).sqrt() * u - ((jf - 1.0) / jf).sqrt() * u_prev;
        u_prev = u;
        u = u_next;
    }
    u
}
