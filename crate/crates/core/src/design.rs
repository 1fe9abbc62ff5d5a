//! Physical resonator layouts in millimetres and their validity checks.

use crate::deformation::detached_gap;
use crate::error::{Error, Result};
use crate::lattice::{integrate_positions, Geometry, LatticeGraph, Vec2};
use std::collections::HashSet;

/// Evanescent decay length, the inverse of 400 m⁻¹.
pub const DEFAULT_PENETRATION_MM: f64 = 2.5;
pub const DEFAULT_DIAMETER_MM: f64 = 8.0;
pub const DEFAULT_PITCH_MM: f64 = 12.0;
/// Separation above which unbonded resonators are taken as uncoupled.
pub const NEGLIGIBLE_COUPLING_MM: f64 = 10.0;

fn check_penetration(penetration: f64) -> Result<()> {
    if !(penetration > 0.0 && penetration.is_finite()) {
        return Err(Error::invalid(format!("penetration must be positive, got {penetration}")));
    }
    Ok(())
}

/// `Δ·e^{−d/Λ}` for a stretch `d` beyond the nominal pitch.
pub fn coupling_from_distance(d: f64, delta: f64, penetration: f64) -> Result<f64> {
    check_penetration(penetration)?;
    Ok(delta * (-d / penetration).exp())
}

/// `Λ·ln(Δ/c)` for `0 < c ≤ Δ`.
pub fn distance_from_coupling(c: f64, delta: f64, penetration: f64) -> Result<f64> {
    check_penetration(penetration)?;
    if !(c > 0.0 && c <= delta) {
        return Err(Error::Domain(format!("coupling {c} outside (0, {delta}]")));
    }
    Ok(penetration * (delta / c).ln())
}

#[derive(Clone, Debug, PartialEq)]
pub struct PhysicalLayout {
    /// Resonator centres in millimetres, indexed by site id.
    pub coords: Vec<Vec2>,
    pub pitch: f64,
    pub penetration: f64,
    pub diameter: f64,
    pub min_center_distance: f64,
    pub closest_pair: (usize, usize),
}

/// Scales the lattice to `pitch` and stretches each bond by `Λ_phys·ln(Δ/c)`.
///
/// Couplings above Δ give a compression.
pub fn physical_layout(
    graph: &LatticeGraph,
    pitch: f64,
    penetration: f64,
    diameter: f64,
) -> Result<PhysicalLayout> {
    check_penetration(penetration)?;
    if !(diameter > 0.0 && pitch > diameter) {
        return Err(Error::invalid(format!("pitch {pitch} must exceed diameter {diameter} > 0")));
    }
    if graph.n_sites() < 2 {
        return Err(Error::invalid("layout needs at least two resonators"));
    }
    let delta = graph.params.delta;
    let lengths: Vec<f64> = graph
        .bonds
        .iter()
        .map(|b| pitch + penetration * (delta / b.coupling).ln())
        .collect();
    let coords = match graph.geometry {
        Geometry::Chain => chain_coords(graph, &lengths, pitch, penetration),
        Geometry::Honeycomb => {
            integrate_positions(graph, &lengths, pitch / graph.params.lambda, 1e-9 * pitch)?
        }
    };
    let mut overlaps = Vec::new();
    let mut best = (f64::INFINITY, (0, 1));
    for i in 0..coords.len() {
        for j in i + 1..coords.len() {
            let d = (coords[i] - coords[j]).norm();
            if d < best.0 {
                best = (d, (i, j));
            }
            if d < diameter {
                overlaps.push((i, j, d));
            }
        }
    }
    if !overlaps.is_empty() {
        return Err(Error::Overlap { pairs: overlaps });
    }
    Ok(PhysicalLayout {
        coords,
        pitch,
        penetration,
        diameter,
        min_center_distance: best.0,
        closest_pair: best.1,
    })
}

/// Lays a chain out along x: bonded neighbours sit at the bond length, unbonded
/// neighbours at the detached gap.
fn chain_coords(graph: &LatticeGraph, lengths: &[f64], pitch: f64, penetration: f64) -> Vec<Vec2> {
    let mut order: Vec<usize> = (0..graph.n_sites()).collect();
    order.sort_by(|&i, &j| graph.sites[i].position.x.total_cmp(&graph.sites[j].position.x));
    let mut coords = vec![Vec2::zeros(); graph.n_sites()];
    let mut x = 0.0;
    for w in order.windows(2) {
        let (i, j) = (w[0], w[1]);
        let gap = graph
            .bonds
            .iter()
            .position(|b| (b.i == i && b.j == j) || (b.i == j && b.j == i))
            .map_or_else(|| detached_gap(pitch, penetration), |k| lengths[k]);
        x += gap;
        coords[j] = Vec2::new(x, 0.0);
    }
    coords
}

#[derive(Clone, Debug, PartialEq)]
pub struct ValidityReport {
    /// Check (i): every site's graph neighbours are strictly its closest resonators.
    pub nearest_preserved: bool,
    /// Sites failing check (i).
    pub nearest_violations: Vec<usize>,
    /// Smallest `(closest non-neighbour) − (farthest neighbour)` over all sites.
    pub nearest_margin: f64,
    /// Check (ii): every unbonded pair is farther apart than the threshold.
    pub second_neighbor_ok: bool,
    pub min_nonbonded_distance: f64,
    pub nonbonded_pair: Option<(usize, usize)>,
    pub threshold: f64,
    /// `min_nonbonded_distance − threshold`.
    pub nonbonded_margin: f64,
    pub min_bonded_distance: f64,
}

impl ValidityReport {
    pub fn passes(&self) -> bool {
        self.nearest_preserved && self.second_neighbor_ok
    }
}

pub fn validity_check(layout: &PhysicalLayout, graph: &LatticeGraph) -> ValidityReport {
    let n = layout.coords.len();
    let bonded: HashSet<(usize, usize)> = graph
        .bonds
        .iter()
        .filter(|b| b.kind.is_nearest())
        .map(|b| (b.i.min(b.j), b.i.max(b.j)))
        .collect();
    let is_bonded = |i: usize, j: usize| bonded.contains(&(i.min(j), i.max(j)));
    let dist = |i: usize, j: usize| (layout.coords[i] - layout.coords[j]).norm();

    let mut violations = Vec::new();
    let mut nearest_margin = f64::INFINITY;
    for i in 0..n {
        let mut far_nb = f64::NEG_INFINITY;
        let mut near_other = f64::INFINITY;
        for j in (0..n).filter(|&j| j != i) {
            let d = dist(i, j);
            if is_bonded(i, j) {
                far_nb = far_nb.max(d);
            } else {
                near_other = near_other.min(d);
            }
        }
        if far_nb == f64::NEG_INFINITY {
            continue;
        }
        let margin = near_other - far_nb;
        nearest_margin = nearest_margin.min(margin);
        if margin <= 0.0 {
            violations.push(i);
        }
    }

    let mut min_nonbonded = f64::INFINITY;
    let mut nonbonded_pair = None;
    let mut min_bonded = f64::INFINITY;
    for i in 0..n {
        for j in i + 1..n {
            let d = dist(i, j);
            if is_bonded(i, j) {
                min_bonded = min_bonded.min(d);
            } else if d < min_nonbonded {
                min_nonbonded = d;
                nonbonded_pair = Some((i, j));
            }
        }
    }
    ValidityReport {
        nearest_preserved: violations.is_empty(),
        nearest_violations: violations,
        nearest_margin,
        second_neighbor_ok: min_nonbonded > NEGLIGIBLE_COUPLING_MM,
        min_nonbonded_distance: min_nonbonded,
        nonbonded_pair,
        threshold: NEGLIGIBLE_COUPLING_MM,
        nonbonded_margin: min_nonbonded - NEGLIGIBLE_COUPLING_MM,
        min_bonded_distance: min_bonded,
    }
}
