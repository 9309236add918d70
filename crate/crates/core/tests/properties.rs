use hjc_core::cell::{CellConfig, CellProblem};
use hjc_core::diagnostics::{certify_nonquasiconvex, compute_i};
use hjc_core::hamiltonian::catalog;
use hjc_core::io::{read_bundle, write_bundle};
use hjc_core::potential::FourierTerm;
use hjc_core::synth::synthesize_bundle;
use hjc_core::{Hamiltonian1D, PeriodicPotential};
use proptest::prelude::*;

fn smooth_potential(a1: f64, b1: f64, a2: f64) -> PeriodicPotential {
    PeriodicPotential::fourier(
        "prop",
        0.0,
        vec![FourierTerm { k: 1, a: a1, b: b1 }, FourierTerm { k: 2, a: a2, b: 0.0 }],
    )
    .unwrap()
}

fn cheap() -> CellConfig {
    CellConfig { n: 1024, min_per_piece: 64, ..CellConfig::default() }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 24, ..ProptestConfig::default() })]

    #[test]
    fn constant_shift_of_potential_shifts_hbar(
        a1 in -3.0..3.0f64, b1 in -3.0..3.0f64, a2 in -2.0..2.0f64, k in -5.0..5.0f64, theta in -2.0..2.0f64,
    ) {
        let v = smooth_potential(a1, b1, a2);
        let shifted = PeriodicPotential::fourier(
            "prop_shifted",
            k,
            vec![FourierTerm { k: 1, a: a1, b: b1 }, FourierTerm { k: 2, a: a2, b: 0.0 }],
        ).unwrap();
        let g = Hamiltonian1D::quadratic();
        let h0 = CellProblem::new(g.clone(), v, cheap()).unwrap().solve(theta).unwrap().hbar;
        let h1 = CellProblem::new(g, shifted, cheap()).unwrap().solve(theta).unwrap().hbar;
        prop_assert!((h1 - h0 - k).abs() < 1e-9 * (1.0 + h0.abs()));
    }

    #[test]
    fn reflection_maps_theta_to_minus_theta(
        a1 in -3.0..3.0f64, b1 in -3.0..3.0f64, a2 in -2.0..2.0f64, theta in -1.5..1.5f64,
    ) {
        let g = catalog("fig2_bump").unwrap().hamiltonian;
        let v = smooth_potential(a1, b1, a2);
        let h = CellProblem::new(g.clone(), v.clone(), cheap()).unwrap().solve(theta).unwrap().hbar;
        let hr = CellProblem::new(g.reflected(), v.reflected(), cheap()).unwrap().solve(-theta).unwrap().hbar;
        prop_assert!((h - hr).abs() < 1e-8 * (1.0 + h.abs()), "{} vs {}", h, hr);
    }

    #[test]
    fn hbar_dominates_mean_potential_bound(
        a1 in -3.0..3.0f64, b1 in -3.0..3.0f64, a2 in -2.0..2.0f64, theta in -2.0..2.0f64,
    ) {
        // Jensen: for convex G, H̄(θ) >= G(θ) + mean V.
        let v = smooth_potential(a1, b1, a2);
        let g = Hamiltonian1D::quadratic();
        let cell = CellProblem::new(g.clone(), v.clone(), cheap()).unwrap();
        let sol = cell.solve(theta).unwrap();
        prop_assert!(sol.hbar >= g.eval(theta) + v.mean() - 1e-9);
        prop_assert!(cell.check_invariants(&sol).ok());
    }
}

#[test]
fn quadratic_hbar_is_convex_in_theta() {
    let cell = CellProblem::new(Hamiltonian1D::quadratic(), smooth_potential(2.0, -1.0, 0.5), cheap()).unwrap();
    let thetas = hjc_core::numeric::linspace(-3.0, 3.0, 61);
    let curve: Vec<(f64, f64)> = cell.sweep(&thetas).into_iter().map(|p| (p.theta, p.hbar().unwrap())).collect();
    for w in curve.windows(3) {
        assert!(w[0].1 - 2.0 * w[1].1 + w[2].1 >= -1e-9);
    }
    assert!(certify_nonquasiconvex(&curve, 1e-8).is_none());
}

#[test]
fn stored_bundle_reproduces_sweeps() {
    let e = catalog("fig2_bump").unwrap();
    let (p1, p2) = e.points.unwrap();
    let b = synthesize_bundle(&e.hamiltonian, p1, p2).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (json, _) = write_bundle(dir.path(), "b", &b, "fig2_bump", 4096, 512).unwrap();
    let back = read_bundle(&json).unwrap();
    let thetas: Vec<f64> = (-2..=2).map(|k| b.theta0 + 0.005 * k as f64).collect();
    let a = CellProblem::new(b.g.clone(), b.v.clone(), CellConfig::default()).unwrap().sweep(&thetas);
    let c = CellProblem::new(back.g.clone(), back.v.clone(), CellConfig::default()).unwrap().sweep(&thetas);
    for (x, y) in a.iter().zip(&c) {
        assert_eq!(x.hbar().unwrap(), y.hbar().unwrap());
    }
    let sol = CellProblem::new(back.g.clone(), back.v.clone(), CellConfig::default()).unwrap().solve(back.theta0).unwrap();
    assert!(sol.hbar.abs() <= 1e-8);
    assert!(compute_i(&sol, &back.g).i_end.abs() <= 1e-8);
}
