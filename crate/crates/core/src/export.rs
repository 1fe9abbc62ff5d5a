//! Renders analysis results as the CSV and JSON files written by the command line tool.

use crate::bloch::{ConeGeometry, DiracSearch, DispersionGrid};
use crate::deformation::{n_max, ConditionReport};
use crate::design::{PhysicalLayout, ValidityReport};
use crate::error::Result;
use crate::hamiltonian::{assemble_tb, CommutatorReport};
use crate::io::{to_json, CsvTable, Field, Float, FORMAT_VERSION};
use crate::lattice::{Cell, LatticeGraph};
use crate::spectral::{analytic_oscillator_spectrum, eigenvalues_sym, match_levels, AnalyticLevel, Branch, SpectrumReport};
use crate::wavefunction::{EnvelopeFit, WavefunctionGrid};
use serde::Serialize;

/// Diagonalized lattice together with the analytic levels it was compared to.
#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumRun {
    pub report: SpectrumReport,
    pub e0: f64,
    pub mass: f64,
    pub omega_delta: f64,
    /// Highest oscillator level; absent for undeformed lattices, which get no analytic levels.
    pub n_max: Option<usize>,
}

impl SpectrumRun {
    /// Levels up to `n ≤ top` plus the singlet; true when all of them have a partner.
    pub fn bulk_matched(&self, top: usize) -> (bool, Option<f64>) {
        let keep = |l: &AnalyticLevel| l.n.is_none_or(|n| n <= top);
        match self.report.max_paired_residual(keep) {
            Some(r) => (r <= self.report.tol, Some(r)),
            None => (false, None),
        }
    }

    /// `7·n_max/10`, the highest level expected to survive the truncation.
    pub fn default_assert_level(&self) -> usize {
        self.n_max.map_or(0, |n| 7 * n / 10)
    }
}

/// Diagonalizes `graph` and matches its spectrum within `tol`.
pub fn spectrum_run(graph: &LatticeGraph, tol: f64) -> Result<SpectrumRun> {
    let h = assemble_tb(graph)?;
    let values = eigenvalues_sym(&h.matrix)?;
    let p = &graph.params;
    let top = if p.omega > 0.0 { Some(n_max(p.delta, p.omega)?) } else { None };
    let omega_delta = p.omega * p.delta;
    let levels = match top {
        Some(top) => analytic_oscillator_spectrum(p.e0(), p.mass(), omega_delta, top)?,
        None => Vec::new(),
    };
    let report = match_levels(&values, &levels, tol)?;
    Ok(SpectrumRun { report, e0: p.e0(), mass: p.mass(), omega_delta, n_max: top })
}

pub fn spectrum_csv(run: &SpectrumRun) -> String {
    let mut t = CsvTable::new(&[
        "index",
        "energy",
        "analytic_n",
        "branch",
        "analytic_energy",
        "residual",
        "classification",
    ]);
    let levels = &run.report.levels;
    for a in &run.report.assignments {
        let level = a.level.map(|k| levels[k].level);
        let class = if levels.is_empty() { "unmatched" } else { a.class.as_str() };
        t.row(&[
            Field::Int(a.index as i64),
            Field::Num(a.energy),
            level.and_then(|l| l.n).map_or(Field::Empty, |n| Field::Int(n as i64)),
            level.map_or(Field::Empty, |l| Field::Text(l.branch.as_str())),
            level.map_or(Field::Empty, |l| Field::Num(l.energy)),
            a.residual.map_or(Field::Empty, Field::Num),
            Field::Text(class),
        ]);
    }
    t.into_string()
}

#[derive(Serialize)]
struct LevelOut {
    n: Option<usize>,
    branch: Branch,
    energy: Float,
    cluster: Vec<usize>,
    paired_index: Option<usize>,
    residual: Option<Float>,
}

#[derive(Serialize)]
struct SpectrumOut {
    format_version: &'static str,
    n_states: usize,
    e0: Float,
    mass: Float,
    omega_delta: Float,
    n_max: Option<usize>,
    tol: Float,
    assert_level: usize,
    bulk_matched: bool,
    max_bulk_residual: Option<Float>,
    edge_count: usize,
    levels: Vec<LevelOut>,
}

pub fn spectrum_json(run: &SpectrumRun, assert_level: usize) -> Result<String> {
    let (ok, worst) = run.bulk_matched(assert_level);
    to_json(&SpectrumOut {
        format_version: FORMAT_VERSION,
        n_states: run.report.eigenvalues.len(),
        e0: Float(run.e0),
        mass: Float(run.mass),
        omega_delta: Float(run.omega_delta),
        n_max: run.n_max,
        tol: Float(run.report.tol),
        assert_level,
        bulk_matched: ok,
        max_bulk_residual: worst.map(Float),
        edge_count: run.report.edge_count(),
        levels: run
            .report
            .levels
            .iter()
            .map(|l| LevelOut {
                n: l.level.n,
                branch: l.level.branch,
                energy: Float(l.level.energy),
                cluster: l.cluster.clone(),
                paired_index: l.paired.map(|p| p.0),
                residual: l.paired.map(|p| Float(p.1)),
            })
            .collect(),
    })
}

pub fn bands_csv(grid: &DispersionGrid) -> String {
    let mut t = CsvTable::new(&["kx", "ky", "e_minus", "e_plus"]);
    for ((k, lo), hi) in grid.samples.iter().zip(&grid.e_minus).zip(&grid.e_plus) {
        t.numeric_row(&[k.x, k.y, *lo, *hi]);
    }
    t.into_string()
}

#[derive(Serialize)]
struct PointOut {
    kx: Float,
    ky: Float,
    residual: Float,
}

#[derive(Serialize)]
struct DiracOut {
    format_version: &'static str,
    points: Vec<PointOut>,
    min_gap: Float,
}

pub fn dirac_json(search: &DiracSearch) -> Result<String> {
    to_json(&DiracOut {
        format_version: FORMAT_VERSION,
        points: search
            .points
            .iter()
            .map(|p| PointOut { kx: Float(p.k.x), ky: Float(p.k.y), residual: Float(p.residual) })
            .collect(),
        min_gap: Float(search.min_gap),
    })
}

#[derive(Serialize)]
struct ConeOut {
    format_version: &'static str,
    k0: [Float; 2],
    u: [Float; 2],
    v: [Float; 2],
    ellipticity: Float,
    slopes: [Float; 2],
}

pub fn cone_json(cone: &ConeGeometry) -> Result<String> {
    let pair = |x: crate::lattice::Vec2| [Float(x.x), Float(x.y)];
    to_json(&ConeOut {
        format_version: FORMAT_VERSION,
        k0: pair(cone.k0),
        u: pair(cone.u),
        v: pair(cone.v),
        ellipticity: Float(cone.ellipticity),
        slopes: [Float(cone.slopes.0), Float(cone.slopes.1)],
    })
}

pub fn wavefunction_csv(grid: &WavefunctionGrid) -> String {
    let mut t = CsvTable::new(&["x", "psi", "psi_sq"]);
    for (x, p) in grid.x.iter().zip(&grid.psi) {
        t.numeric_row(&[*x, *p, p * p]);
    }
    t.into_string()
}

/// Metadata written next to a sampled wavefunction.
#[derive(Clone, Debug, PartialEq)]
pub struct WavefunctionMeta {
    pub level: String,
    pub energy: f64,
    pub well_width: f64,
    pub n_sites: usize,
    pub fit: Option<EnvelopeFit>,
    pub fit_threshold: f64,
}

#[derive(Serialize)]
struct FitOut {
    coeffs: [Float; 3],
    r_squared: Float,
    center: Float,
}

#[derive(Serialize)]
struct WavefunctionOut<'a> {
    format_version: &'static str,
    level: &'a str,
    energy: Float,
    well_width: Float,
    n_sites: usize,
    samples: usize,
    dx: Float,
    raw_norm: Float,
    fit_threshold: Float,
    envelope_fit: Option<FitOut>,
}

pub fn wavefunction_json(grid: &WavefunctionGrid, meta: &WavefunctionMeta) -> Result<String> {
    to_json(&WavefunctionOut {
        format_version: FORMAT_VERSION,
        level: &meta.level,
        energy: Float(meta.energy),
        well_width: Float(meta.well_width),
        n_sites: meta.n_sites,
        samples: grid.x.len(),
        dx: Float(grid.dx),
        raw_norm: Float(grid.raw_norm),
        fit_threshold: Float(meta.fit_threshold),
        envelope_fit: meta.fit.map(|f| FitOut {
            coeffs: f.coeffs.map(Float),
            r_squared: Float(f.r_squared),
            center: Float(f.center),
        }),
    })
}

#[derive(Serialize)]
struct CellOut {
    cell: [i64; 2],
    con1: Option<Float>,
    con2: Option<Float>,
    con3: Option<Float>,
    split_b2: Option<Float>,
    split_b3: Option<Float>,
}

#[derive(Serialize)]
struct CommutatorOut {
    max_abs: Float,
    value: Float,
    position: Option<[[i64; 2]; 2]>,
    predicted: Option<Float>,
    nonzero_count: usize,
}

#[derive(Serialize)]
struct VerifyOut {
    format_version: &'static str,
    max_residual: Float,
    worst_cell: Option<[i64; 2]>,
    conditions: Vec<CellOut>,
    commutator: Option<CommutatorOut>,
}

fn cell(c: Cell) -> [i64; 2] {
    [c.0, c.1]
}

pub fn verify_json(conditions: &ConditionReport, commutator: Option<&CommutatorReport>) -> Result<String> {
    let opt = |x: Option<f64>| x.map(Float);
    to_json(&VerifyOut {
        format_version: FORMAT_VERSION,
        max_residual: Float(conditions.max_residual),
        worst_cell: conditions.worst_cell.map(cell),
        conditions: conditions
            .cells
            .iter()
            .map(|c| CellOut {
                cell: cell(c.cell),
                con1: opt(c.con1),
                con2: opt(c.con2),
                con3: opt(c.con3),
                split_b2: opt(c.split_b2),
                split_b3: opt(c.split_b3),
            })
            .collect(),
        commutator: commutator.map(|r| CommutatorOut {
            max_abs: Float(r.max_abs),
            value: Float(r.value),
            position: r.position.map(|(a, b)| [cell(a), cell(b)]),
            predicted: opt(r.predicted),
            nonzero_count: r.nonzero.len(),
        }),
    })
}

pub fn layout_csv(layout: &PhysicalLayout) -> String {
    let mut t = CsvTable::new(&["id", "x_mm", "y_mm"]);
    for (id, p) in layout.coords.iter().enumerate() {
        t.row(&[Field::Int(id as i64), Field::Num(p.x), Field::Num(p.y)]);
    }
    t.into_string()
}

#[derive(Serialize)]
struct CheckOut {
    pass: bool,
    margin: Float,
}

#[derive(Serialize)]
struct DesignOut {
    format_version: &'static str,
    pitch_mm: Float,
    penetration_mm: Float,
    diameter_mm: Float,
    min_center_distance_mm: Float,
    closest_pair: [usize; 2],
    nearest_neighbors_preserved: CheckOut,
    nearest_violations: Vec<usize>,
    nonbonded_separation: CheckOut,
    min_nonbonded_distance_mm: Float,
    nonbonded_pair: Option<[usize; 2]>,
    threshold_mm: Float,
    min_bonded_distance_mm: Float,
    pass: bool,
}

pub fn design_json(layout: &PhysicalLayout, v: &ValidityReport) -> Result<String> {
    to_json(&DesignOut {
        format_version: FORMAT_VERSION,
        pitch_mm: Float(layout.pitch),
        penetration_mm: Float(layout.penetration),
        diameter_mm: Float(layout.diameter),
        min_center_distance_mm: Float(layout.min_center_distance),
        closest_pair: [layout.closest_pair.0, layout.closest_pair.1],
        nearest_neighbors_preserved: CheckOut { pass: v.nearest_preserved, margin: Float(v.nearest_margin) },
        nearest_violations: v.nearest_violations.clone(),
        nonbonded_separation: CheckOut { pass: v.second_neighbor_ok, margin: Float(v.nonbonded_margin) },
        min_nonbonded_distance_mm: Float(v.min_nonbonded_distance),
        nonbonded_pair: v.nonbonded_pair.map(|(a, b)| [a, b]),
        threshold_mm: Float(v.threshold),
        min_bonded_distance_mm: Float(v.min_bonded_distance),
        pass: v.passes(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bloch::{band_grid, find_dirac_points, BandModel, Dimension};
    use crate::lattice::{build_periodic_chain, LatticeParams};

    #[test]
    fn dimer_spectrum_rows() {
        let p = LatticeParams { alpha: 0.5, beta: 0.5, ..Default::default() };
        let g = build_periodic_chain(1, p).unwrap();
        let run = spectrum_run(&g, 5e-2).unwrap();
        let csv = spectrum_csv(&run);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[1], "0,-0.5,,,,,unmatched");
        assert_eq!(lines[2], "1,1.5,,,,,unmatched");
    }

    #[test]
    fn band_rows_include_zone_edges() {
        let m = BandModel::new(Dimension::One, 1.0, 0.0, 0.0, 0.0, 1.0).unwrap();
        let csv = bands_csv(&band_grid(&m, 512).unwrap());
        assert_eq!(csv.lines().count(), 513);
        assert!(csv.lines().nth(1).unwrap().starts_with("-0.5,0,"));
        assert!(csv.lines().last().unwrap().starts_with("0.5,0,"));
    }

    #[test]
    fn massive_search_json() {
        let m = BandModel::new(Dimension::Two, 1.0, 0.0, 0.1, 0.0, 1.0).unwrap();
        let text = dirac_json(&find_dirac_points(&m, 64).unwrap()).unwrap();
        assert!(text.starts_with("{\n  \"format_version\": \"1\""));
        assert!(text.contains("\"points\": []"));
        assert!(text.contains("\"min_gap\": 0.20000000000000001"));
    }
}
