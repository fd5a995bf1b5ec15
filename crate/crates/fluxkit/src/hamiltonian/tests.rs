use approx::assert_relative_eq;

use super::*;
use crate::params::CircuitParams;

/// Paper-style device parameters: E_J = 23.4 GHz, C_Σ = 1.26 fF,
/// L_q = 285 nH converted with exact-SI constants.
pub fn device_params(phi_ext: f64) -> CircuitParams {
    CircuitParams::new(23.4, 15.373_197_876_713_588, 0.573_549_167_743_091_7, phi_ext).unwrap()
}

fn small_osc_basis() -> BasisSpec {
    BasisSpec::oscillator(64).unwrap()
}

#[test]
fn harmonic_limit_is_exact() {
    // E_J → 0: pure L-C oscillator with spacing √(8·E_C·E_L).
    let params = CircuitParams::new(1e-14, 3.0, 0.7, 0.37).unwrap();
    let cphir = CphiRModel::sinusoidal();
    let sol =
        solve(&params, &cphir, &small_osc_basis(), 6, &SolveOptions::default()).unwrap();
    let w = params.lc_frequency();
    for k in 1..6 {
        let gap = sol.energies[k] - sol.energies[0];
        assert_relative_eq!(gap, k as f64 * w, max_relative = 1e-8);
    }
}

#[test]
fn hamiltonian_is_symmetric_and_harmonic_terms_compose() {
    let params = device_params(0.23);
    let basis = small_osc_basis();
    let h_sin = build_hamiltonian(&params, &CphiRModel::sinusoidal(), &basis).unwrap();
    // Hermiticity defect (here: symmetry defect) below 1e-12 of the largest
    // element.
    let defect = (&h_sin - h_sin.transpose()).amax();
    assert!(defect <= 1e-12 * h_sin.amax());

    // Zeroing the higher harmonics of the slanted model restores the
    // sinusoidal matrix exactly.
    let degenerate_slant = CphiRModel::new(vec![1.0, 0.0, 0.0]).unwrap();
    let h_slant0 = build_hamiltonian(&params, &degenerate_slant, &basis).unwrap();
    assert_eq!(h_sin, h_slant0);

    // The slanted model differs only through the cos(2φ), cos(3φ) terms.
    let h_slant = build_hamiltonian(&params, &CphiRModel::slanted(), &basis).unwrap();
    assert!((&h_slant - &h_sin).amax() > 0.0);
}

#[test]
fn device_frequencies_match_frozen_cross_checked_values() {
    // Frozen from the dual-solver cross-check at these exact inputs.
    let cphir = CphiRModel::sinusoidal();
    let opts = SolveOptions::default();
    let sol = solve(&device_params(0.5), &cphir, &small_osc_basis(), 3, &opts).unwrap();
    let f_ge = transition_frequency(&sol, 0, 1).unwrap();
    let f_gf = transition_frequency(&sol, 0, 2).unwrap();
    assert_relative_eq!(f_ge, 4.041_875, epsilon = 1e-4);
    assert_relative_eq!(f_gf, 22.839_470, epsilon = 1e-4);

    let sol0 = solve(&device_params(0.0), &cphir, &small_osc_basis(), 3, &opts).unwrap();
    assert_relative_eq!(transition_frequency(&sol0, 0, 1).unwrap(), 10.804_721, epsilon = 1e-4);
    assert_relative_eq!(transition_frequency(&sol0, 0, 2).unwrap(), 12.285_061, epsilon = 1e-4);
}

#[test]
fn oscillator_and_grid_agree_on_device() {
    let cphir = CphiRModel::sinusoidal();
    let opts = SolveOptions::default();
    for phx in [0.0, 0.21, 0.5] {
        let p = device_params(phx);
        let so = solve(&p, &cphir, &small_osc_basis(), 5, &opts).unwrap();
        let gb = BasisSpec::phase_grid(2001, 16.0 * std::f64::consts::PI).unwrap();
        let sg = solve(&p, &cphir, &gb, 5, &opts).unwrap();
        for k in 0..5 {
            assert!(
                (so.energies[k] - sg.energies[k]).abs() < 1e-6,
                "phx={phx} level {k}: {} vs {}",
                so.energies[k],
                sg.energies[k]
            );
        }
    }
}

#[test]
fn transition_identities() {
    let cphir = CphiRModel::sinusoidal();
    let opts = SolveOptions::default();
    let sol = solve(&device_params(0.37), &cphir, &small_osc_basis(), 4, &opts).unwrap();
    let ge = transition_frequency(&sol, 0, 1).unwrap();
    let ef = transition_frequency(&sol, 1, 2).unwrap();
    let gf = transition_frequency(&sol, 0, 2).unwrap();
    assert_relative_eq!(gf, ge + ef, max_relative = 1e-12);
    assert!(ge > 0.0);

    // Flux symmetry: φ_ext and 1 − φ_ext give identical spectra.
    let mirrored = solve(&device_params(0.63), &cphir, &small_osc_basis(), 4, &opts).unwrap();
    for k in 0..4 {
        assert_relative_eq!(sol.energies[k], mirrored.energies[k], epsilon = 1e-9);
    }

    assert!(transition_frequency(&sol, 2, 1).is_err());
    assert!(transition_frequency(&sol, 0, 7).is_err());
}

#[test]
fn flux_periodicity() {
    let cphir = CphiRModel::sinusoidal();
    let opts = SolveOptions::default();
    for phx in [0.13, 0.5] {
        let a = solve(&device_params(phx), &cphir, &small_osc_basis(), 4, &opts).unwrap();
        let b = solve(&device_params(phx + 1.0), &cphir, &small_osc_basis(), 4, &opts).unwrap();
        for k in 0..4 {
            assert!((a.energies[k] - b.energies[k]).abs() < 1e-9);
        }
    }
}

#[test]
fn selection_rule_suppression_near_zero_flux() {
    // At both sweet spots the potential is parity-symmetric and ⟨g|n|f⟩ is
    // exactly zero; the visibility statement is about the vicinity of zero
    // flux, where the element stays suppressed, versus a generic bias close
    // to half flux where it is fully developed.
    let cphir = CphiRModel::sinusoidal();
    let opts = SolveOptions::default();
    let s0 = solve(&device_params(0.0), &cphir, &small_osc_basis(), 3, &opts).unwrap();
    let generic = solve(&device_params(0.45), &cphir, &small_osc_basis(), 3, &opts).unwrap();
    let gf_zero = matrix_element(&s0, Operator::N, 0, 2).unwrap().norm();
    let gf_generic = matrix_element(&generic, Operator::N, 0, 2).unwrap().norm();
    assert!(gf_zero < 1e-10, "parity zero violated: {gf_zero}");
    assert!(gf_generic > 0.01, "reference element unexpectedly small: {gf_generic}");
    assert!(
        gf_zero * 10.0 <= gf_generic,
        "g→f charge element not suppressed at zero flux: {gf_zero} vs {gf_generic}"
    );
    // The allowed g→e element stays finite at zero flux.
    let ge_zero = matrix_element(&s0, Operator::N, 0, 1).unwrap().norm();
    assert!(ge_zero > 0.01);
}

#[test]
fn matrix_elements_hermitian_and_diagonal_real() {
    let cphir = CphiRModel::sinusoidal();
    let opts = SolveOptions::default();
    let sol = solve(&device_params(0.29), &cphir, &small_osc_basis(), 4, &opts).unwrap();
    for op in [Operator::N, Operator::Phi] {
        for i in 0..3 {
            for j in 0..3 {
                let a = matrix_element(&sol, op, i, j).unwrap();
                let b = matrix_element(&sol, op, j, i).unwrap();
                assert_relative_eq!(a.re, b.re, epsilon = 1e-12);
                assert_relative_eq!(a.im, -b.im, epsilon = 1e-12);
            }
        }
        let d = matrix_element(&sol, op, 1, 1).unwrap();
        assert!(d.im.abs() < 1e-12);
    }
}

#[test]
fn grid_eigenvectors_have_definite_parity_at_zero_flux() {
    // At φ_ext = 0 the potential is even; eigenstates carry definite parity,
    // so n (parity-odd) only connects states of opposite parity.
    let cphir = CphiRModel::sinusoidal();
    let gb = BasisSpec::phase_grid(2001, 16.0 * std::f64::consts::PI).unwrap();
    let sol = solve(&device_params(0.0), &cphir, &gb, 4, &SolveOptions::default()).unwrap();
    if let BasisRealization::PhaseGrid { phi } = &sol.realization {
        let n = phi.len();
        for lev in 0..4 {
            let v = sol.vectors.column(lev);
            let mut sym = 0.0;
            let mut asym = 0.0;
            for l in 0..n {
                let mirror = v[n - 1 - l];
                sym += (v[l] + mirror).powi(2);
                asym += (v[l] - mirror).powi(2);
            }
            let parity_defined = sym < 1e-10 * asym || asym < 1e-10 * sym;
            assert!(parity_defined, "level {lev}: sym {sym:.3e} asym {asym:.3e}");
        }
    } else {
        panic!("expected phase-grid realization");
    }
    // Cross-op consistency: ⟨g|n|e⟩ nonzero requires ⟨g|φ−⟨φ⟩|e⟩ also
    // connecting opposite parity; both must be simultaneously allowed.
    let n_ge = matrix_element(&sol, Operator::N, 0, 1).unwrap().norm();
    let phi_ge = matrix_element(&sol, Operator::Phi, 0, 1).unwrap().norm();
    assert!(n_ge > 1e-6);
    assert!(phi_ge > 1e-6);
}

#[test]
fn wavefunction_normalization_and_gaussian_limit() {
    // E_J → 0 ground state: Gaussian of width (8·E_C/E_L)^¼.
    let params = CircuitParams::new(1e-14, 2.5, 0.9, 0.0).unwrap();
    let cphir = CphiRModel::sinusoidal();
    let sol =
        solve(&params, &cphir, &small_osc_basis(), 2, &SolveOptions::default()).unwrap();
    let grid: Vec<f64> = (0..4001).map(|i| -20.0 + i as f64 * 0.01).collect();
    let wf = wavefunction(&sol, 0, &grid).unwrap();
    let dphi = 0.01;
    let norm: f64 = wf.psi.iter().map(|p| p * p * dphi).sum();
    assert!((norm - 1.0).abs() < 1e-8, "norm {norm}");
    // ψ0(φ) = (2πσ²)^(−1/4)·exp(−φ²/4σ²) with σ = φ_zpf = (2E_C/E_L)^¼.
    let sigma = params.phi_zpf();
    for (i, &phi) in wf.phi.iter().enumerate() {
        let expect = (2.0 * std::f64::consts::PI * sigma * sigma).powf(-0.25)
            * (-phi * phi / (4.0 * sigma * sigma)).exp();
        assert!((wf.psi[i].abs() - expect).abs() < 1e-6, "φ={phi}");
    }
    // The probability density falls to 1/e of its peak at (8E_C/E_L)^¼.
    let w = (8.0 * params.e_c_sigma / params.e_l).powf(0.25);
    let at = |phi: f64| {
        let i = wf.phi.iter().position(|&p| (p - phi).abs() < 5e-3).unwrap();
        wf.psi[i] * wf.psi[i]
    };
    assert_relative_eq!(at(w) / at(0.0), (-1.0_f64).exp(), max_relative = 1e-2);
}

#[test]
fn zero_flux_device_wavefunctions_delocalized_over_three_wells() {
    // The first four states spread over three potential wells.
    let cphir = CphiRModel::sinusoidal();
    let gb = BasisSpec::phase_grid(2001, 16.0 * std::f64::consts::PI).unwrap();
    let sol = solve(&device_params(0.0), &cphir, &gb, 4, &SolveOptions::default()).unwrap();
    let two_pi = 2.0 * std::f64::consts::PI;
    for lev in 0..4 {
        let wf = wavefunction(&sol, lev, &[]).unwrap();
        let dphi = wf.phi[1] - wf.phi[0];
        // Probability inside each well [-π,π] + 2πk: at least three wells
        // carry visible weight and no single well dominates completely.
        let mut wells = 0;
        let mut max_p = 0.0_f64;
        for k in -2i32..=2 {
            let center = two_pi * k as f64;
            let p: f64 = wf
                .phi
                .iter()
                .zip(&wf.psi)
                .filter(|(phi, _)| (**phi - center).abs() <= std::f64::consts::PI)
                .map(|(_, psi)| psi * psi * dphi)
                .sum();
            if p > 0.02 {
                wells += 1;
            }
            max_p = max_p.max(p);
        }
        assert!(wells >= 3, "level {lev} localized in {wells} wells");
        assert!(max_p < 0.95, "level {lev} effectively single-well ({max_p:.3})");
    }
}

#[test]
fn half_flux_doublet_symmetric_antisymmetric() {
    let cphir = CphiRModel::sinusoidal();
    let gb = BasisSpec::phase_grid(2001, 16.0 * std::f64::consts::PI).unwrap();
    let sol = solve(&device_params(0.5), &cphir, &gb, 2, &SolveOptions::default()).unwrap();
    if let BasisRealization::PhaseGrid { phi } = &sol.realization {
        let n = phi.len();
        // Parity about the window center φ_e = π.
        let score = |lev: usize| {
            let v = sol.vectors.column(lev);
            let mut s = 0.0;
            for l in 0..n {
                s += v[l] * v[n - 1 - l];
            }
            s
        };
        let s0 = score(0);
        let s1 = score(1);
        assert!(s0 > 0.99, "ground state not symmetric: {s0}");
        assert!(s1 < -0.99, "excited state not antisymmetric: {s1}");
    }
}

#[test]
fn wavefunction_window_error() {
    let params = CircuitParams::new(1e-14, 2.5, 0.9, 0.0).unwrap();
    let cphir = CphiRModel::sinusoidal();
    let sol =
        solve(&params, &cphir, &small_osc_basis(), 2, &SolveOptions::default()).unwrap();
    // Grid stops inside the support of the ground state.
    let grid: Vec<f64> = (0..101).map(|i| -1.0 + i as f64 * 0.02).collect();
    assert!(matches!(wavefunction(&sol, 0, &grid), Err(Error::Window(_))));
}

#[test]
fn phase_slip_frozen_value_and_properties() {
    // Independent evaluation of the rate formula at E_J = 23.4, E_C = 15.4.
    let p = CircuitParams::new(23.4, 15.4, 0.5, 0.5).unwrap();
    let nu = phase_slip_frequency(&p).unwrap();
    assert_relative_eq!(nu, 2.448_340_575_262_349, max_relative = 1e-12);

    // Strictly decreasing in E_J at fixed E_C once E_J/E_C > 9/32.
    for ej in [6.0, 10.0, 20.0, 40.0] {
        let lo = phase_slip_frequency(&CircuitParams::new(ej, 15.4, 0.5, 0.5).unwrap()).unwrap();
        let hi = phase_slip_frequency(&CircuitParams::new(ej + 1e-4, 15.4, 0.5, 0.5).unwrap())
            .unwrap();
        assert!(hi < lo, "ν not decreasing at E_J = {ej}");
    }

    // Dimensional homogeneity: scaling both energies scales ν.
    let s = phase_slip_frequency(&CircuitParams::new(46.8, 30.8, 0.5, 0.5).unwrap()).unwrap();
    assert_relative_eq!(s, 2.0 * nu, max_relative = 1e-12);
}

#[test]
fn truncation_and_zero_level_errors() {
    let params = device_params(0.5);
    let h = build_hamiltonian(&params, &CphiRModel::sinusoidal(), &small_osc_basis()).unwrap();
    assert!(matches!(diagonalize(&h, 20), Err(Error::Truncation(_))));
    assert!(BasisSpec::oscillator(8).is_err());
    assert!(BasisSpec::phase_grid(500, 3.0).is_err());
}

#[test]
fn half_flux_is_first_order_flux_insensitive() {
    let cphir = CphiRModel::sinusoidal();
    let opts = SolveOptions::default();
    let model = SpectrumModel::new(&device_params(0.5), &cphir, 2, &opts).unwrap();
    let h = 1e-3;
    let up = model.transition_at(0.5 + h, 0, 1).unwrap();
    let dn = model.transition_at(0.5 - h, 0, 1).unwrap();
    let slope = (up - dn) / (2.0 * h);
    assert!(slope.abs() < 1e-4, "∂f/∂φ at half flux: {slope}");
}
