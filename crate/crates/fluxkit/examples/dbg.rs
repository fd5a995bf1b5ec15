use fluxkit::hamiltonian::*;
use fluxkit::params::CircuitParams;

fn main() {
    let dev = |phx: f64| CircuitParams::new(23.4, 15.373_197_876_713_588, 0.573_549_167_743_091_7, phx).unwrap();
    let cphir = CphiRModel::sinusoidal();
    let opts = SolveOptions::default();

    // selection rule debug
    let basis = BasisSpec::oscillator(64).unwrap();
    let s0 = solve(&dev(0.0), &cphir, &basis, 3, &opts).unwrap();
    let s5 = solve(&dev(0.5), &cphir, &basis, 3, &opts).unwrap();
    for (i, j) in [(0usize, 1usize), (0, 2), (1, 2)] {
        let a = matrix_element(&s0, Operator::N, i, j).unwrap().norm();
        let b = matrix_element(&s5, Operator::N, i, j).unwrap().norm();
        println!("n({i},{j}): phx=0 {a:.6e}  phx=0.5 {b:.6e}");
    }
    println!("E(0) = {:?}", s0.energies);
    println!("E(0.5) = {:?}", s5.energies);

    // wavefunction gaussian debug
    let params = CircuitParams::new(1e-14, 2.5, 0.9, 0.0).unwrap();
    let sol = solve(&params, &cphir, &basis, 2, &opts).unwrap();
    let grid: Vec<f64> = (0..4001).map(|i| -20.0 + i as f64 * 0.01).collect();
    let wf = wavefunction(&sol, 0, &grid).unwrap();
    let dphi = 0.01;
    let norm: f64 = wf.psi.iter().map(|p| p * p * dphi).sum();
    println!("norm = {norm}");
    let width = (8.0 * params.e_c_sigma / params.e_l).powf(0.25);
    let mut worst = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (i, &phi) in wf.phi.iter().enumerate() {
        let expect = (2.0 * std::f64::consts::PI * width * width).powf(-0.25)
            * (-phi * phi / (4.0 * width * width)).exp();
        let d = (wf.psi[i].abs() - expect).abs();
        if d > worst.0 { worst = (d, phi, wf.psi[i], expect); }
    }
    println!("worst dev {:?} width={width}", worst);

    // wells debug
    let gb = BasisSpec::phase_grid(2001, 16.0 * std::f64::consts::PI).unwrap();
    let sol = solve(&dev(0.0), &cphir, &gb, 4, &opts).unwrap();
    let two_pi = 2.0 * std::f64::consts::PI;
    for lev in 0..4 {
        let wf = wavefunction(&sol, lev, &[]).unwrap();
        let dphi = wf.phi[1] - wf.phi[0];
        let mut probs = vec![];
        for k in -3i32..=3 {
            let center = two_pi * k as f64;
            let p: f64 = wf.phi.iter().zip(&wf.psi)
                .filter(|(phi, _)| (**phi - center).abs() <= std::f64::consts::PI)
                .map(|(_, psi)| psi * psi * dphi).sum();
            probs.push(p);
        }
        println!("level {lev}: wells {:?}", probs.iter().map(|p| format!("{p:.4}")).collect::<Vec<_>>());
    }
}
