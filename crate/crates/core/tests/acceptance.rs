//! Acceptance run: one line per criterion, nonzero exit if any fails.

use dirac_lattice::bloch::{
    band_grid, cone_geometry, find_dirac_points, ring_energies, torus_energies, BandModel, Dimension,
};
use dirac_lattice::deformation::{
    build_deformed_chain, build_deformed_hex, chain_coupling, verify_oscillator_conditions, ChainDeformation,
    HexDeformation,
};
use dirac_lattice::design::{
    coupling_from_distance, distance_from_coupling, physical_layout, validity_check, DEFAULT_DIAMETER_MM,
    DEFAULT_PENETRATION_MM,
};
use dirac_lattice::export;
use dirac_lattice::hamiltonian::{assemble_tb, commutator_residual, ladder_matrix};
use dirac_lattice::io::{lattice_to_json, write_atomic};
use dirac_lattice::lattice::{build_hex_torus, build_periodic_chain, build_periodic_hex, build_ring};
use dirac_lattice::spectral::{eigenvalues_sym, Branch};
use dirac_lattice::wavefunction::{
    assemble_spinor, gaussian_envelope_fit, ground_state_coeffs, sample_spatial, Level, WellProfile,
};
use dirac_lattice::{BondKind, CellWindow, LatticeGraph, LatticeParams, Result, Vec2};
use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, TAU};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

const DELTA: f64 = 1.0;
const CHAIN_OMEGA: f64 = 0.05;
const HEX_OMEGA: f64 = 1.0 / 15.0;
const WELL_WIDTH: f64 = 2.0 / 3.0;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Verdict { pass, detail: detail.into() }
    }
}

fn params(alpha: f64, beta: f64) -> LatticeParams {
    LatticeParams { alpha, beta, ..Default::default() }
}

fn oscillator_chain() -> Result<LatticeGraph> {
    let def = ChainDeformation::oscillator(DELTA, CHAIN_OMEGA, 1.0)?;
    build_deformed_chain(&def, params(1.0, 1.0))
}

/// The shortest reading: 21 dimers joined by `√(Δ² − nωΔ)` for `n = n_max−1 … 0`.
fn short_chain() -> Result<LatticeGraph> {
    let mut g = build_periodic_chain(21, LatticeParams { omega: CHAIN_OMEGA, ..params(1.0, 1.0) })?;
    let mut label = 20;
    for b in g.bonds.iter_mut().filter(|b| b.kind == BondKind::InterDimer) {
        label -= 1;
        b.coupling = chain_coupling(DELTA, CHAIN_OMEGA, label)?;
    }
    Ok(g)
}

fn sci(x: Option<f64>) -> String {
    x.map_or("none".to_string(), |v| format!("{v:.3e}"))
}

fn oscillator_spectrum() -> Result<Verdict> {
    let g = oscillator_chain()?;
    let run = export::spectrum_run(&g, 5e-2 * DELTA)?;
    let doublets = run.report.max_paired_residual(|l| l.n.is_some_and(|n| n <= 14));
    let singlet = run.report.max_paired_residual(|l| l.branch == Branch::Singlet);
    let short = export::spectrum_run(&short_chain()?, 5e-2 * DELTA)?;
    let asked: Vec<_> = short.report.levels.iter().filter(|l| l.level.n.is_none_or(|n| n <= 14)).collect();
    let unpaired = asked.iter().filter(|l| l.paired.is_none()).count();
    let short_worst = asked.iter().filter_map(|l| l.paired.map(|p| p.1)).fold(0.0, f64::max);
    let short_singlet = short
        .report
        .eigenvalues
        .iter()
        .map(|e| (e - 1.0).abs())
        .fold(f64::INFINITY, f64::min);
    println!(
        "      info: 42-site chain leaves {unpaired} of {} levels unpaired (worst paired {short_worst:.3e}), nearest state to E0 at {short_singlet:.3e}",
        asked.len()
    );
    let pass = doublets.is_some_and(|r| r < 5e-2) && singlet.is_some_and(|r| r < 1e-9);
    Ok(Verdict::new(
        pass,
        format!("{} sites, doublets n<=14 max {}, singlet {}", g.n_sites(), sci(doublets), sci(singlet)),
    ))
}

fn commutator_corner() -> Result<Verdict> {
    let g = oscillator_chain()?;
    let a = ladder_matrix(&g)?;
    let r = commutator_residual(&a, CHAIN_OMEGA, DELTA);
    let expected = DELTA * DELTA - 21.0 * CHAIN_OMEGA * DELTA;
    let corner = r.nonzero.first().map(|e| (e.0, e.1, e.2));
    let pass = r.nonzero.len() == 1
        && corner.is_some_and(|(row, col, v)| row == r.cells[0] && col == r.cells[0] && (v - expected).abs() < 1e-12);
    let shown = corner.map_or("none".to_string(), |(_, _, v)| format!("{v:.6}"));
    Ok(Verdict::new(pass, format!("{} nonzero, corner {shown}, expected {expected:.6}", r.nonzero.len())))
}

fn hex_conditions() -> Result<Verdict> {
    let mut worst: f64 = 0.0;
    let mut closure: f64 = 0.0;
    for theta in [0.0, FRAC_PI_4, FRAC_PI_2, 1.0] {
        let window = CellWindow::rect(0..=6, 0..=6)?;
        let def = HexDeformation::new(DELTA, HEX_OMEGA, 1.0, theta, window)?;
        let p = LatticeParams { omega: HEX_OMEGA, theta, ..Default::default() };
        let g = build_deformed_hex(&def, p)?;
        worst = worst.max(verify_oscillator_conditions(&g).max_residual);
        let hex = dirac_lattice::HexVectors::standard();
        for b in &g.bonds {
            let (ia, ib) = g.oriented(b);
            let step = b.kind.direction(&hex).expect("nearest bond") * b.length;
            let gap = g.sites[ib].position - g.sites[ia].position - step;
            closure = closure.max(gap.norm());
        }
    }
    let pass = worst < 1e-12 && closure < 1e-9;
    Ok(Verdict::new(pass, format!("max condition residual {worst:.3e}, max closure {closure:.3e}")))
}

fn hex_clusters() -> Result<Verdict> {
    let window = HexDeformation::default_window(DELTA, HEX_OMEGA, 0.0)?;
    let def = HexDeformation::new(DELTA, HEX_OMEGA, 1.0, 0.0, window)?;
    let g = build_deformed_hex(&def, LatticeParams { omega: HEX_OMEGA, ..params(1.0, 1.0) })?;
    let run = export::spectrum_run(&g, 5e-2 * DELTA)?;
    let missing: Vec<_> = run
        .report
        .levels
        .iter()
        .filter(|l| l.level.n.is_some_and(|n| n <= 5) && l.cluster.is_empty())
        .map(|l| (l.level.n, l.level.branch))
        .collect();
    let unmatched = run.report.assignments.iter().filter(|a| a.level.is_none()).count();
    let pass = g.n_sites() >= 400 && missing.is_empty() && unmatched == run.report.edge_count();
    Ok(Verdict::new(
        pass,
        format!("{} sites, levels without a partner {missing:?}, {unmatched} boundary states", g.n_sites()),
    ))
}

fn max_diff(x: &[f64], y: &[f64]) -> f64 {
    if x.len() != y.len() {
        return f64::INFINITY;
    }
    x.iter().zip(y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max)
}

fn bloch_oracle() -> Result<Verdict> {
    let p = params(1.3, 0.7);
    let ring = eigenvalues_sym(&assemble_tb(&build_ring(24, p)?)?.matrix)?;
    let chain = BandModel::new(Dimension::One, DELTA, 0.0, p.mass(), p.e0(), p.lambda)?;
    let d1 = max_diff(&ring, &ring_energies(&chain, 24));
    let torus = eigenvalues_sym(&assemble_tb(&build_hex_torus(8, 8, p)?)?.matrix)?;
    let hex = BandModel::new(Dimension::Two, DELTA, 0.0, p.mass(), p.e0(), p.lambda)?;
    let d2 = max_diff(&torus, &torus_energies(&hex, 8, 8));
    Ok(Verdict::new(d1 < 1e-10 && d2 < 1e-10, format!("ring {d1:.3e}, torus {d2:.3e}")))
}

fn dirac_points() -> Result<Verdict> {
    let chain = BandModel::new(Dimension::One, DELTA, 0.0, 0.0, 0.0, 1.0)?;
    let k1: Vec<f64> = find_dirac_points(&chain, 256)?.points.iter().map(|p| p.k.x).collect();
    let one_d = k1.len() == 2 && (k1[0] + 0.5).abs() < 1e-9 && (k1[1] - 0.5).abs() < 1e-9;
    let hex = BandModel::new(Dimension::Two, DELTA, 0.0, 0.0, 0.0, 1.0)?;
    let coarse = find_dirac_points(&hex, 256)?;
    let fine = find_dirac_points(&hex, 512)?;
    let small = coarse.points.iter().all(|p| hex.off_diagonal(p.k).norm() < 1e-9);
    let stable = !coarse.points.is_empty()
        && coarse.points.len() == fine.points.len()
        && coarse.points.iter().zip(&fine.points).all(|(a, b)| (a.k - b.k).norm() < 1e-9);
    let massive = BandModel::new(Dimension::Two, DELTA, 0.0, 0.1, 0.0, 1.0)?;
    let gapped = find_dirac_points(&massive, 256)?;
    let gap_ok = gapped.points.is_empty() && gapped.min_gap == 0.2;
    Ok(Verdict::new(
        one_d && small && stable && gap_ok,
        format!(
            "1D {k1:?}, 2D {} points stable={stable}, massive gap {}",
            coarse.points.len(),
            gapped.min_gap
        ),
    ))
}

/// Radius at which `|h(k0 + r·dir)|` reaches `level`, by bisection.
fn contour_radius(model: &BandModel, k0: Vec2, dir: Vec2, level: f64) -> f64 {
    let h = |r: f64| model.off_diagonal(k0 + dir * r).norm();
    let mut hi = 1e-6;
    while h(hi) < level {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if h(mid) < level {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Axis ratio of the ellipse `xᵀQx = 1` fitted through `points`.
fn ellipse_axis_ratio(points: &[Vec2]) -> f64 {
    let mut ata = nalgebra::Matrix3::zeros();
    let mut atb = nalgebra::Vector3::zeros();
    for p in points {
        let row = nalgebra::Vector3::new(p.x * p.x, 2.0 * p.x * p.y, p.y * p.y);
        ata += row * row.transpose();
        atb += row;
    }
    let c = ata.cholesky().expect("well-posed fit").solve(&atb);
    let q = nalgebra::Matrix2::new(c[0], c[1], c[1], c[2]);
    let ev = q.symmetric_eigenvalues();
    (ev.max() / ev.min()).sqrt()
}

fn cone_shape() -> Result<Verdict> {
    let iso = BandModel::new(Dimension::Two, DELTA, 0.0, 0.0, 0.0, 1.0)?;
    let k0 = find_dirac_points(&iso, 256)?.points[0].k;
    let kappa = 1e-4;
    let speeds: Vec<f64> = (0..64)
        .map(|j| {
            let phi = TAU * j as f64 / 64.0;
            let dir = Vec2::new(phi.cos(), phi.sin());
            iso.dispersion(k0 + dir * kappa).1 / kappa
        })
        .collect();
    let (lo, hi) = speeds.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &s| (a.min(s), b.max(s)));
    let spread = (hi - lo) / lo;

    let aniso = BandModel::new(Dimension::Two, DELTA, 0.1 * DELTA, 0.0, 0.0, 1.0)?;
    let k1 = find_dirac_points(&aniso, 256)?.points[0].k;
    let cone = cone_geometry(&aniso, k1)?;
    let level = 1e-4 * DELTA;
    let contour: Vec<Vec2> = (0..128)
        .map(|j| {
            let phi = TAU * j as f64 / 128.0;
            let dir = Vec2::new(phi.cos(), phi.sin());
            dir * contour_radius(&aniso, k1, dir, level)
        })
        .collect();
    let fitted = ellipse_axis_ratio(&contour);
    let rel = (fitted / cone.ellipticity - 1.0).abs();
    Ok(Verdict::new(
        spread < 1e-3 && rel < 1e-2,
        format!("speed spread {spread:.3e}, ellipticity {:.6} vs contour {fitted:.6}", cone.ellipticity),
    ))
}

fn wave_chain() -> Result<LatticeGraph> {
    let def = ChainDeformation::oscillator(DELTA, CHAIN_OMEGA, 1.0)?.limit_compression(1.0, WELL_WIDTH);
    build_deformed_chain(&def, params(1.0, 1.0))
}

fn ground_state() -> Result<Verdict> {
    let a = ladder_matrix(&oscillator_chain()?)?;
    let phi = ground_state_coeffs(&a)?.amplitudes;
    let residual = (&a.matrix * &phi).norm();
    let nonzero: Vec<f64> = phi.iter().copied().filter(|x| *x != 0.0).collect();
    let alternates = nonzero.windows(2).all(|w| w[0] * w[1] < 0.0);
    let g = wave_chain()?;
    let wa = ladder_matrix(&g)?;
    let profile = WellProfile::new(WELL_WIDTH)?;
    let state = assemble_spinor(&wa, Level::Singlet, g.params.mass())?;
    let grid = sample_spatial(&state, &profile, &g, 2000)?;
    let sites: Vec<usize> = (0..g.n_sites()).collect();
    let fit = gaussian_envelope_fit(&grid.site_peaks(&g, &profile, &sites), 1e-3)?;
    Ok(Verdict::new(
        residual < 1e-12 && alternates && fit.r_squared > 0.99,
        format!(
            "|a phi0| {residual:.3e}, alternating {alternates} over {} nonzero, R^2 {:.4}",
            nonzero.len(),
            fit.r_squared
        ),
    ))
}

fn design_round_trip() -> Result<Verdict> {
    let mut inversion: f64 = 0.0;
    for j in 1..=50 {
        let c = DELTA * j as f64 / 50.0;
        let d = distance_from_coupling(c, DELTA, DEFAULT_PENETRATION_MM)?;
        inversion = inversion.max((coupling_from_distance(d, DELTA, DEFAULT_PENETRATION_MM)? - c).abs());
    }
    let g = build_periodic_hex(0..=5, 0..=5, LatticeParams::default())?;
    let layout = physical_layout(&g, 12.0, DEFAULT_PENETRATION_MM, DEFAULT_DIAMETER_MM)?;
    let v = validity_check(&layout, &g);
    let expected = 12.0 * 3f64.sqrt() - 10.0;
    let pass = inversion < 1e-12 && v.passes() && (v.nonbonded_margin - expected).abs() < 1e-9;
    Ok(Verdict::new(
        pass,
        format!("inversion {inversion:.3e}, margin {:.4} mm (expected {expected:.4})", v.nonbonded_margin),
    ))
}

/// Writes every artifact the command line tool produces for the standard runs.
fn write_artifacts(dir: &Path) -> Result<Vec<String>> {
    let mut files = Vec::new();
    let mut put = |name: &str, text: String| -> Result<()> {
        write_atomic(&dir.join(name), text.as_bytes())?;
        files.push(name.to_string());
        Ok(())
    };
    let chain = oscillator_chain()?;
    put("chain.json", lattice_to_json(&chain)?)?;
    let run = export::spectrum_run(&chain, 5e-2)?;
    put("chain_spectrum.csv", export::spectrum_csv(&run))?;
    put("chain_spectrum.json", export::spectrum_json(&run, 14)?)?;
    let ladder = ladder_matrix(&chain)?;
    let comm = commutator_residual(&ladder, CHAIN_OMEGA, DELTA);
    put("chain_verify.json", export::verify_json(&verify_oscillator_conditions(&chain), Some(&comm))?)?;

    let window = HexDeformation::default_window(DELTA, HEX_OMEGA, 0.0)?;
    let def = HexDeformation::new(DELTA, HEX_OMEGA, 1.0, 0.0, window)?;
    let hex = build_deformed_hex(&def, LatticeParams { omega: HEX_OMEGA, ..params(1.0, 1.0) })?;
    put("hex.json", lattice_to_json(&hex)?)?;
    let run = export::spectrum_run(&hex, 5e-2)?;
    put("hex_spectrum.csv", export::spectrum_csv(&run))?;
    put("hex_spectrum.json", export::spectrum_json(&run, 5)?)?;

    let model = BandModel::new(Dimension::Two, DELTA, 0.1, 0.0, 0.0, 1.0)?;
    put("bands.csv", export::bands_csv(&band_grid(&model, 128)?))?;
    let search = find_dirac_points(&model, 256)?;
    put("dirac_points.json", export::dirac_json(&search)?)?;
    put("cone.json", export::cone_json(&cone_geometry(&model, search.points[0].k)?)?)?;

    let g = wave_chain()?;
    let profile = WellProfile::new(WELL_WIDTH)?;
    let state = assemble_spinor(&ladder_matrix(&g)?, Level::Singlet, 0.0)?;
    let grid = sample_spatial(&state, &profile, &g, 2000)?;
    let sites: Vec<usize> = (0..g.n_sites()).collect();
    let meta = export::WavefunctionMeta {
        level: "singlet".into(),
        energy: 1.0,
        well_width: WELL_WIDTH,
        n_sites: g.n_sites(),
        fit: gaussian_envelope_fit(&grid.site_peaks(&g, &profile, &sites), 1e-3).ok(),
        fit_threshold: 1e-3,
    };
    put("wavefunction.csv", export::wavefunction_csv(&grid))?;
    put("wavefunction.json", export::wavefunction_json(&grid, &meta)?)?;

    let patch = build_periodic_hex(0..=5, 0..=5, LatticeParams::default())?;
    let layout = physical_layout(&patch, 12.0, DEFAULT_PENETRATION_MM, DEFAULT_DIAMETER_MM)?;
    put("layout.csv", export::layout_csv(&layout))?;
    put("layout.json", export::design_json(&layout, &validity_check(&layout, &patch))?)?;
    Ok(files)
}

fn determinism() -> Result<Verdict> {
    let first = tempfile::tempdir()?;
    let second = tempfile::tempdir()?;
    let files = write_artifacts(first.path())?;
    write_artifacts(second.path())?;
    let differing: Vec<&String> = files
        .iter()
        .filter(|f| std::fs::read(first.path().join(f)).ok() != std::fs::read(second.path().join(f)).ok())
        .collect();
    Ok(Verdict::new(differing.is_empty(), format!("{} files compared, differing {differing:?}", files.len())))
}

type Check = fn() -> Result<Verdict>;

fn main() -> ExitCode {
    let criteria: [(&str, &str, Check, Option<Duration>); 10] = [
        ("AC1", "chain oscillator spectrum", oscillator_spectrum, Some(Duration::from_secs(1))),
        ("AC2", "ladder commutator corner", commutator_corner, Some(Duration::from_millis(100))),
        ("AC3", "honeycomb oscillator conditions", hex_conditions, Some(Duration::from_secs(1))),
        ("AC4", "honeycomb level clusters", hex_clusters, Some(Duration::from_secs(30))),
        ("AC5", "Bloch closed form", bloch_oracle, Some(Duration::from_secs(5))),
        ("AC6", "degeneracy points", dirac_points, None),
        ("AC7", "cone isotropy and anisotropy", cone_shape, Some(Duration::from_secs(5))),
        ("AC8", "ground state structure", ground_state, Some(Duration::from_secs(2))),
        ("AC9", "design round trip", design_round_trip, Some(Duration::from_millis(100))),
        ("AC10", "byte-identical outputs", determinism, None),
    ];
    let mut failures = 0;
    for (id, name, check, limit) in criteria {
        let start = Instant::now();
        let outcome = check();
        let elapsed = start.elapsed();
        let in_time = limit.is_none_or(|l| elapsed <= l);
        let (pass, detail) = match outcome {
            Ok(v) => (v.pass && in_time, v.detail),
            Err(e) => (false, format!("error: {e}")),
        };
        if !pass {
            failures += 1;
        }
        let budget = limit.map_or(String::new(), |l| format!(" / {:.3}s", l.as_secs_f64()));
        println!(
            "{id:<5} {} {name} [{:.3}s{budget}] {detail}",
            if pass { "PASS" } else { "FAIL" },
            elapsed.as_secs_f64()
        );
    }
    println!("{} of 10 criteria passed", 10 - failures);
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
