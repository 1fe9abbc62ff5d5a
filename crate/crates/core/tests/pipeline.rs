use dirac_lattice::bloch::{find_dirac_points, BandModel, Dimension};
use dirac_lattice::deformation::{build_deformed_chain, ChainDeformation};
use dirac_lattice::export;
use dirac_lattice::hamiltonian::{assemble_tb, ladder_matrix};
use dirac_lattice::io::{lattice_from_json, lattice_to_json};
use dirac_lattice::spectral::{eigensolve_sym, Branch};
use dirac_lattice::wavefunction::{assemble_spinor, sample_spatial, Level, WellProfile};
use dirac_lattice::{LatticeParams, Vec2};
use std::f64::consts::TAU;

fn slope_ratio(model: &BandModel, k0: Vec2, kappa: f64) -> f64 {
    let dir = Vec2::new(0.6, 0.8);
    let (_, hi) = model.dispersion(k0 + dir * kappa);
    (hi - model.e0) / (model.lambda * model.delta * kappa * TAU)
}

#[test]
fn cone_slope_converges() {
    let chain = BandModel::new(Dimension::One, 0.7, 0.0, 0.0, 0.2, 1.3).unwrap();
    let k0 = find_dirac_points(&chain, 256).unwrap().points[1].k;
    let hex = BandModel::new(Dimension::Two, 0.7, 0.0, 0.0, 0.2, 1.3).unwrap();
    let k1 = find_dirac_points(&hex, 256).unwrap().points[0].k;
    for kappa in [1e-3, 1e-4, 1e-5] {
        // 1D walks along x only.
        let (_, hi) = chain.dispersion(k0 + Vec2::new(kappa, 0.0));
        let r1 = (hi - chain.e0) / (chain.lambda * chain.delta * kappa * TAU);
        assert!((r1 - 1.0).abs() < 10.0 * kappa, "1D ratio {r1} at {kappa}");
        let r2 = slope_ratio(&hex, k1, kappa);
        assert!((r2 - 1.5).abs() < 10.0 * kappa, "2D ratio {r2} at {kappa}");
    }
}

#[test]
fn file_round_trip_preserves_spectrum() {
    let def = ChainDeformation::oscillator(1.0, 0.1, 1.0).unwrap();
    let p = LatticeParams { alpha: 1.1, beta: 0.9, ..Default::default() };
    let g = build_deformed_chain(&def, p).unwrap();
    let back = lattice_from_json(&lattice_to_json(&g).unwrap()).unwrap();
    let a = export::spectrum_csv(&export::spectrum_run(&g, 5e-2).unwrap());
    let b = export::spectrum_csv(&export::spectrum_run(&back, 5e-2).unwrap());
    assert_eq!(a, b);
}

#[test]
fn eigenvectors_reconstruct_hamiltonian() {
    let def = ChainDeformation::oscillator(1.0, 0.2, 1.0).unwrap();
    let g = build_deformed_chain(&def, LatticeParams { alpha: 0.3, ..Default::default() }).unwrap();
    let h = assemble_tb(&g).unwrap();
    let eig = eigensolve_sym(&h).unwrap();
    let n = h.dim();
    let norm = h.matrix.norm();
    for k in 0..n {
        let v = eig.vector(k);
        let r = (&h.matrix * &v - &v * eig.values[k]).norm();
        assert!(r <= 1e-10 * norm, "pair {k}: {r}");
    }
}

#[test]
fn sampled_levels_are_normalized() {
    let def = ChainDeformation::oscillator(1.0, 0.05, 1.0).unwrap().limit_compression(1.0, 0.6);
    let g = build_deformed_chain(&def, LatticeParams::default()).unwrap();
    let a = ladder_matrix(&g).unwrap();
    let profile = WellProfile::new(0.6).unwrap();
    let fine = 200_000;
    let dx = profile.width / fine as f64;
    let xi: f64 = (0..fine).map(|j| profile.value(-0.5 * profile.width + (j as f64 + 0.5) * dx).powi(2)).sum::<f64>() * dx;
    assert!((xi - 1.0).abs() < 1e-10, "{xi}");
    for level in [Level::Singlet, Level::Doublet { n: 2, branch: Branch::Plus }] {
        let state = assemble_spinor(&a, level, 0.0).unwrap();
        let grid = sample_spatial(&state, &profile, &g, 4000).unwrap();
        let norm: f64 = grid.psi.iter().map(|p| p * p).sum::<f64>() * grid.dx;
        assert!((norm - 1.0).abs() < 1e-6);
        assert!((grid.raw_norm - 1.0).abs() < 1e-2, "{level:?}: {}", grid.raw_norm);
    }
}
