//! Damped least-squares (Levenberg–Marquardt) minimizer with numerical
//! Jacobians, plus Latin-hypercube multi-start.
//!
//! Positive physical parameters are fit in log space by the callers; this
//! module only sees the unconstrained vector.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LmOptions {
    pub max_iterations: usize,
    /// Relative cost-decrease convergence threshold.
    pub ftol: f64,
    /// Step-size convergence threshold.
    pub xtol: f64,
    /// Gradient infinity-norm convergence threshold.
    pub gtol: f64,
    /// Initial damping.
    pub lambda0: f64,
    /// Relative finite-difference step.
    pub fd_step: f64,
}

impl Default for LmOptions {
    fn default() -> Self {
        LmOptions {
            max_iterations: 200,
            ftol: 1e-12,
            xtol: 1e-11,
            gtol: 1e-10,
            lambda0: 1e-3,
            fd_step: 2e-7,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmResult {
    pub x: Vec<f64>,
    /// ½‖r‖² at the optimum.
    pub cost: f64,
    pub residuals: Vec<f64>,
    /// Parameter covariance from the Jacobian at the optimum, scaled by the
    /// residual variance; `None` when m ≤ p or the normal matrix is singular.
    pub covariance: Option<DMatrix<f64>>,
    pub n_evals: usize,
    pub n_iterations: usize,
    pub converged: bool,
    /// Set when the normal matrix was near-singular at the optimum
    /// (strongly correlated or unidentifiable parameters).
    pub degenerate_jacobian: bool,
}

/// Minimize ½‖f(x)‖² starting from `x0`. The callback clears and fills the
/// residual buffer; the residual count must stay fixed across calls.
pub fn minimize<F>(mut f: F, x0: &[f64], opts: &LmOptions) -> Result<LmResult>
where
    F: FnMut(&[f64], &mut Vec<f64>) -> Result<()>,
{
    let p = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut n_evals = 0usize;

    let mut buf: Vec<f64> = Vec::new();
    let mut eval = |x: &DVector<f64>,
                    buf: &mut Vec<f64>,
                    n_evals: &mut usize|
     -> Result<DVector<f64>> {
        buf.clear();
        f(x.as_slice(), buf)?;
        if buf.iter().any(|v| !v.is_finite()) {
            return Err(Error::Data("non-finite residual".into()));
        }
        *n_evals += 1;
        Ok(DVector::from_column_slice(buf))
    };

    let mut r = eval(&x, &mut buf, &mut n_evals)?;
    let m = r.len();
    if m == 0 {
        return Err(Error::InsufficientData("no residuals to minimize".into()));
    }
    let mut cost = 0.5 * r.norm_squared();
    let mut lambda = opts.lambda0;
    let mut converged = false;
    let mut iterations = 0usize;

    let mut jac = DMatrix::<f64>::zeros(m, p);
    for iter in 0..opts.max_iterations {
        iterations = iter + 1;
        // Forward-difference Jacobian.
        for j in 0..p {
            let h = opts.fd_step * x[j].abs().max(1.0);
            let mut xp = x.clone();
            xp[j] += h;
            let rp = eval(&xp, &mut buf, &mut n_evals)?;
            if rp.len() != m {
                return Err(Error::Data("residual count changed during fit".into()));
            }
            for i in 0..m {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
        let jt = jac.transpose();
        let jtj = &jt * &jac;
        let g = &jt * &r;
        if g.amax() < opts.gtol {
            converged = true;
            break;
        }
        // Marquardt scaling with a floor on the diagonal.
        let diag_max = (0..p).map(|i| jtj[(i, i)]).fold(0.0_f64, f64::max);
        let floor = (diag_max * 1e-14).max(f64::MIN_POSITIVE);
        let mut improved = false;
        for _ in 0..30 {
            let mut a = jtj.clone();
            for i in 0..p {
                a[(i, i)] += lambda * jtj[(i, i)].max(floor);
            }
            let step = match Cholesky::new(a) {
                Some(ch) => ch.solve(&(-&g)),
                None => {
                    lambda *= 10.0;
                    continue;
                }
            };
            let x_new = &x + &step;
            let r_new = match eval(&x_new, &mut buf, &mut n_evals) {
                Ok(v) => v,
                Err(_) => {
                    // Step left the model's domain; retreat.
                    lambda *= 10.0;
                    continue;
                }
            };
            let cost_new = 0.5 * r_new.norm_squared();
            if cost_new < cost {
                let rel_decrease = (cost - cost_new) / cost.max(f64::MIN_POSITIVE);
                let step_small = step.norm() < opts.xtol * (x.norm() + opts.xtol);
                x = x_new;
                r = r_new;
                cost = cost_new;
                lambda = (lambda * 0.3).max(1e-12);
                improved = true;
                if rel_decrease < opts.ftol || step_small {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
            if lambda > 1e12 {
                break;
            }
        }
        if !improved {
            // No downhill step found at any damping: local optimum.
            converged = cost.is_finite();
            break;
        }
        if converged {
            break;
        }
    }

    // Covariance at the optimum: σ²·(JᵀJ)⁻¹ with σ² = 2·cost/(m−p).
    for j in 0..p {
        let h = opts.fd_step * x[j].abs().max(1.0);
        let mut xp = x.clone();
        xp[j] += h;
        if let Ok(rp) = eval(&xp, &mut buf, &mut n_evals) {
            for i in 0..m {
                jac[(i, j)] = (rp[i] - r[i]) / h;
            }
        }
    }
    let jtj = jac.transpose() * &jac;
    let mut degenerate = false;
    let covariance = if m > p {
        let sigma2 = 2.0 * cost / (m - p) as f64;
        match Cholesky::new(jtj.clone()) {
            Some(ch) => {
                let cond_floor = (0..p).map(|i| jtj[(i, i)]).fold(f64::INFINITY, f64::min);
                let cond_ceil = (0..p).map(|i| jtj[(i, i)]).fold(0.0_f64, f64::max);
                if cond_floor <= cond_ceil * 1e-14 {
                    degenerate = true;
                }
                let inv = ch.inverse();
                Some(inv * sigma2)
            }
            None => {
                degenerate = true;
                None
            }
        }
    } else {
        None
    };

    Ok(LmResult {
        x: x.as_slice().to_vec(),
        cost,
        residuals: r.as_slice().to_vec(),
        covariance,
        n_evals,
        n_iterations: iterations,
        converged,
        degenerate_jacobian: degenerate,
    })
}

/// Latin-hypercube sample of `n` points around `center`, each coordinate
/// within ±`spread` (intended for log-space parameters).
pub fn latin_hypercube(
    center: &[f64],
    spread: f64,
    n: usize,
    rng: &mut impl Rng,
) -> Vec<Vec<f64>> {
    let p = center.len();
    // One random permutation of strata per dimension.
    let mut perms: Vec<Vec<usize>> = Vec::with_capacity(p);
    for _ in 0..p {
        let mut idx: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.random_range(0..=i);
            idx.swap(i, j);
        }
        perms.push(idx);
    }
    (0..n)
        .map(|k| {
            (0..p)
                .map(|j| {
                    let stratum = perms[j][k] as f64;
                    let u: f64 = rng.random();
                    let frac = (stratum + u) / n as f64; // in (0, 1)
                    center[j] + spread * (2.0 * frac - 1.0)
                })
                .collect()
        })
        .collect()
}

/// Multi-start driver: run from `x0` first, then from Latin-hypercube
/// starts, keeping the best converged result. Stops early once a converged
/// run reaches `accept_cost`.
pub fn minimize_multistart<F>(
    f: F,
    x0: &[f64],
    spread: f64,
    n_starts: usize,
    accept_cost: Option<f64>,
    seed: u64,
    opts: &LmOptions,
) -> Result<LmResult>
where
    F: Fn(&[f64], &mut Vec<f64>) -> Result<()>,
{
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(seed);
    let mut starts = vec![x0.to_vec()];
    if n_starts > 1 {
        starts.extend(latin_hypercube(x0, spread, n_starts - 1, &mut rng));
    }
    let mut best: Option<LmResult> = None;
    let mut total_evals = 0usize;
    for start in &starts {
        match minimize(|x, r| f(x, r), start, opts) {
            Ok(res) => {
                total_evals += res.n_evals;
                let better = match &best {
                    None => true,
                    Some(b) => res.cost < b.cost,
                };
                if better {
                    best = Some(res);
                }
                if let (Some(acc), Some(b)) = (accept_cost, &best) {
                    if b.converged && b.cost <= acc {
                        break;
                    }
                }
            }
            Err(_) => continue,
        }
    }
    let mut best = best.ok_or_else(|| Error::Convergence {
        what: "multi-start least squares",
        details: format!("all {} starts failed", starts.len()),
    })?;
    best.n_evals = total_evals;
    Ok(best)
}
