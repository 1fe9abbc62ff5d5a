//! Site-dependent couplings that turn the inter-sublattice block into a ladder operator.

use crate::error::{Error, Result};
use crate::lattice::{
    build_periodic_chain, embed_positions, hex_on_window, Bond, BondKind, Cell, CellWindow,
    Geometry, LatticeGraph, LatticeParams, Sublattice, Vec2,
};
use serde::Serialize;
use std::collections::HashMap;

/// Radicands this far below zero (relative to Δ²) are rounding noise and clamp to zero.
const RADICAND_SLACK: f64 = 1e-12;

fn radicand_root(radicand: f64, delta: f64) -> Option<f64> {
    if radicand >= 0.0 {
        Some(radicand.sqrt())
    } else if radicand > -RADICAND_SLACK * delta * delta {
        Some(0.0)
    } else {
        None
    }
}

/// Inter-dimer coupling `√(Δ² − nωΔ)` for oscillator label `n`.
pub fn chain_coupling(delta: f64, omega: f64, n: i64) -> Result<f64> {
    let radicand = delta * delta - n as f64 * omega * delta;
    radicand_root(radicand, delta).ok_or(Error::Truncation { n, radicand })
}

/// Stretch of the inter-dimer bond with label `n` beyond the nominal spacing.
///
/// Negative labels (couplings above Δ) give a compression. The label `n = Δ/ω`
/// has zero coupling and an infinite displacement.
pub fn chain_displacement(delta: f64, omega: f64, penetration: f64, n: i64) -> Result<f64> {
    if omega == 0.0 {
        return Ok(0.0);
    }
    let top = n_max(delta, omega)?;
    if n > top as i64 {
        return Err(Error::Truncation { n, radicand: delta * delta - n as f64 * omega * delta });
    }
    let c = chain_coupling(delta, omega, n)?;
    Ok(penetration * (delta / c).ln())
}

/// Largest oscillator label `floor(|Δ/ω|)`.
pub fn n_max(delta: f64, omega: f64) -> Result<usize> {
    if omega == 0.0 {
        return Err(Error::Unbounded);
    }
    let ratio = (delta / omega).abs();
    if !ratio.is_finite() {
        return Err(Error::invalid(format!("Δ/ω = {ratio} is not finite")));
    }
    Ok((ratio + 1e-9).floor() as usize)
}

/// Gap left between the sites of a zero-coupling bond: the distance at which
/// `e^{-d/Λ}` drops below double-precision resolution.
pub fn detached_gap(lambda: f64, penetration: f64) -> f64 {
    lambda + penetration * (1.0 / f64::EPSILON).ln()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChainExtent {
    /// Inter-dimer labels run from `n_max` down to `-mirror`.
    Oscillator { n_max: usize, mirror: usize },
    /// Undeformed open chain with this many dimers.
    Cells(usize),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChainDeformation {
    pub delta: f64,
    pub omega: f64,
    pub penetration: f64,
    pub extent: ChainExtent,
}

impl ChainDeformation {
    /// Oscillator chain with the default mirror extent of `5·n_max` compressed bonds.
    pub fn oscillator(delta: f64, omega: f64, penetration: f64) -> Result<Self> {
        check_scales(delta, penetration)?;
        if omega < 0.0 || !omega.is_finite() {
            return Err(Error::invalid(format!("omega must be non-negative, got {omega}")));
        }
        let top = n_max(delta, omega)?;
        Ok(ChainDeformation {
            delta,
            omega,
            penetration,
            extent: ChainExtent::Oscillator { n_max: top, mirror: 5 * top },
        })
    }

    pub fn periodic(delta: f64, penetration: f64, cells: usize) -> Result<Self> {
        check_scales(delta, penetration)?;
        if cells == 0 {
            return Err(Error::invalid("chain needs at least one cell"));
        }
        Ok(ChainDeformation { delta, omega: 0.0, penetration, extent: ChainExtent::Cells(cells) })
    }

    pub fn with_mirror(mut self, mirror: usize) -> Self {
        if let ChainExtent::Oscillator { mirror: m, .. } = &mut self.extent {
            *m = mirror;
        }
        self
    }

    /// Shrinks the mirror extent so no compressed bond is shorter than `min_gap`.
    pub fn limit_compression(self, lambda: f64, min_gap: f64) -> Self {
        let ChainExtent::Oscillator { mirror, .. } = self.extent else { return self };
        let fits = |m: usize| {
            let s = (self.delta * self.delta + m as f64 * self.omega * self.delta).sqrt();
            lambda + self.penetration * (self.delta / s).ln() >= min_gap
        };
        let allowed = (0..=mirror).take_while(|&m| fits(m)).last().unwrap_or(0);
        self.with_mirror(allowed)
    }

    pub fn n_max(&self) -> Option<usize> {
        match self.extent {
            ChainExtent::Oscillator { n_max, .. } => Some(n_max),
            ChainExtent::Cells(_) => None,
        }
    }

    /// Oscillator label of each inter-dimer bond, in chain order.
    pub fn labels(&self) -> Vec<i64> {
        match self.extent {
            ChainExtent::Oscillator { n_max, mirror } => {
                (-(mirror as i64)..=n_max as i64).rev().collect()
            }
            ChainExtent::Cells(n) => vec![0; n.saturating_sub(1)],
        }
    }

    /// Inter-dimer couplings in chain order; they increase away from the first dimer.
    pub fn inter_couplings(&self) -> Result<Vec<f64>> {
        self.labels()
            .into_iter()
            .map(|n| chain_coupling(self.delta, self.omega, n))
            .collect()
    }
}

fn check_scales(delta: f64, penetration: f64) -> Result<()> {
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::invalid(format!("delta must be positive, got {delta}")));
    }
    if !(penetration > 0.0 && penetration.is_finite()) {
        return Err(Error::invalid(format!("penetration must be positive, got {penetration}")));
    }
    Ok(())
}

/// Builds the deformed chain `B0 – A0 – B1 – A1 – … – A(K−1) – B(K)`.
///
/// Intra-dimer bonds `A_m – B_m` carry Δ; inter-dimer bonds `A_m – B_{m+1}` carry the
/// oscillator couplings. A zero coupling leaves its sites unbonded at [`detached_gap`].
pub fn build_deformed_chain(def: &ChainDeformation, params: LatticeParams) -> Result<LatticeGraph> {
    let params = LatticeParams {
        delta: def.delta,
        omega: def.omega,
        penetration: def.penetration,
        ..params
    };
    params.validate()?;
    if let ChainExtent::Cells(n) = def.extent {
        return build_periodic_chain(n, params);
    }
    let couplings = def.inter_couplings()?;
    let k = couplings.len() as i64;
    let a_cells: Vec<Cell> = (0..k).map(|m| (m, 0)).collect();
    let b_cells: Vec<Cell> = (0..=k).map(|m| (m, 0)).collect();
    let mut g = LatticeGraph::with_cells(params, Geometry::Chain, &a_cells, &b_cells);
    let n_a = a_cells.len();
    let lambda = params.lambda;
    let mut x = 0.0;
    g.sites[n_a].position = Vec2::new(x, 0.0);
    for (m, &s) in couplings.iter().enumerate() {
        let (a, b_here, b_next) = (m, n_a + m, n_a + m + 1);
        g.bonds.push(Bond { i: a, j: b_here, kind: BondKind::IntraDimer, coupling: def.delta, length: lambda });
        x += lambda;
        g.sites[a].position = Vec2::new(x, 0.0);
        let gap = if s > 0.0 {
            let length = lambda + def.penetration * (def.delta / s).ln();
            g.bonds.push(Bond { i: a, j: b_next, kind: BondKind::InterDimer, coupling: s, length });
            length
        } else {
            detached_gap(lambda, def.penetration)
        };
        x += gap;
        g.sites[b_next].position = Vec2::new(x, 0.0);
    }
    Ok(g)
}

#[derive(Clone, Debug, PartialEq)]
pub struct HexDeformation {
    pub delta: f64,
    pub omega: f64,
    pub penetration: f64,
    pub theta: f64,
    pub window: CellWindow,
}

impl HexDeformation {
    pub fn new(delta: f64, omega: f64, penetration: f64, theta: f64, window: CellWindow) -> Result<Self> {
        check_scales(delta, penetration)?;
        if omega < 0.0 || !omega.is_finite() || !theta.is_finite() {
            return Err(Error::invalid(format!("bad omega {omega} or theta {theta}")));
        }
        let def = HexDeformation { delta, omega, penetration, theta, window };
        for cell in def.window.iter() {
            def.closed_form(cell, BondKind::B2)?;
            def.closed_form(cell, BondKind::B3)?;
        }
        Ok(def)
    }

    /// Largest square in `(p, q − p)` whose radicands all stay at or above `ωΔ/2`.
    pub fn default_window(delta: f64, omega: f64, theta: f64) -> Result<CellWindow> {
        if omega == 0.0 {
            return Err(Error::Unbounded);
        }
        let (s2, c2) = (theta.sin().powi(2), theta.cos().powi(2));
        let side = ((delta / omega - 0.5) / s2.max(c2)).floor();
        if side < 0.0 {
            return Err(Error::invalid(format!("ω = {omega} leaves no admissible cell")));
        }
        CellWindow::sheared(0..=side as i64, 0..=side as i64)
    }

    fn closed_form(&self, (p, q): Cell, kind: BondKind) -> Result<f64> {
        let od = self.omega * self.delta;
        let d2 = self.delta * self.delta;
        let radicand = match kind {
            BondKind::B1 => return Ok(self.delta),
            BondKind::B2 => d2 - p as f64 * od * self.theta.sin().powi(2),
            BondKind::B3 => d2 - (q - p) as f64 * od * self.theta.cos().powi(2),
            other => return Err(Error::invalid(format!("{other} is not a honeycomb bond kind"))),
        };
        if radicand > 0.0 {
            Ok(radicand.sqrt())
        } else {
            Err(Error::WindowTooLarge { cell: (p, q), kind, radicand })
        }
    }
}

/// Coupling of the `kind` bond leaving the A site of `cell`.
pub fn hex_couplings(def: &HexDeformation, cell: Cell, kind: BondKind) -> Result<f64> {
    if !def.window.contains(cell) {
        return Err(Error::invalid(format!("cell {cell:?} lies outside the window")));
    }
    def.closed_form(cell, kind)
}

/// Deformed honeycomb with embedded positions.
pub fn build_deformed_hex(def: &HexDeformation, params: LatticeParams) -> Result<LatticeGraph> {
    let params = LatticeParams {
        delta: def.delta,
        omega: def.omega,
        penetration: def.penetration,
        theta: def.theta,
        ..params
    };
    let g = hex_on_window(&def.window, params, |cell, kind| def.closed_form(cell, kind))?;
    embed_positions(&g)
}

/// Condition residuals attached to one cell.
///
/// Honeycomb: `con1` is `|b1 − Δ|`, `con2` and `con3` are the opposite-side and
/// ladder conditions, and the split entries are their sin²θ and cos²θ parts.
/// Chain: `con1` is `|intra − Δ|` and `con2` is the recurrence
/// `s(m+1)² − s(m)² − ωΔ`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct CellResidual {
    pub cell: Cell,
    pub con1: Option<f64>,
    pub con2: Option<f64>,
    pub con3: Option<f64>,
    pub split_b2: Option<f64>,
    pub split_b3: Option<f64>,
}

impl CellResidual {
    pub fn max(&self) -> f64 {
        [self.con1, self.con2, self.con3, self.split_b2, self.split_b3]
            .into_iter()
            .flatten()
            .fold(0.0, f64::max)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub cells: Vec<CellResidual>,
    pub max_residual: f64,
    pub worst_cell: Option<Cell>,
}

/// Substitutes the graph's couplings into the oscillator conditions.
pub fn verify_oscillator_conditions(graph: &LatticeGraph) -> ConditionReport {
    let cells = match graph.geometry {
        Geometry::Chain => chain_residuals(graph),
        Geometry::Honeycomb => hex_residuals(graph),
    };
    let (max_residual, worst_cell) = cells
        .iter()
        .map(|c| (c.max(), c.cell))
        .fold((0.0, None), |(best, at), (r, cell)| if r > best { (r, Some(cell)) } else { (best, at) });
    ConditionReport { cells, max_residual, worst_cell }
}

fn bond_table(graph: &LatticeGraph) -> HashMap<(Cell, BondKind), f64> {
    graph
        .bonds
        .iter()
        .filter(|b| b.kind.is_nearest())
        .map(|b| {
            let (a, _) = graph.oriented(b);
            ((graph.sites[a].cell, b.kind), b.coupling)
        })
        .collect()
}

fn chain_residuals(graph: &LatticeGraph) -> Vec<CellResidual> {
    let p = &graph.params;
    let table = bond_table(graph);
    let lookup = graph.site_lookup();
    // Inter coupling leaving A_m; a missing bond between existing sites counts as zero.
    let inter = |m: i64| -> Option<f64> {
        table.get(&((m, 0), BondKind::InterDimer)).copied().or_else(|| {
            let both = lookup.contains_key(&(Sublattice::A, (m, 0)))
                && lookup.contains_key(&(Sublattice::B, (m + 1, 0)));
            both.then_some(0.0)
        })
    };
    graph
        .sites
        .iter()
        .filter(|s| s.sublattice == Sublattice::A)
        .map(|s| {
            let m = s.cell.0;
            let con1 = table.get(&(s.cell, BondKind::IntraDimer)).map(|c| (c - p.delta).abs());
            let con2 = match (inter(m), inter(m + 1)) {
                (Some(lo), Some(hi)) => Some((hi * hi - lo * lo - p.omega * p.delta).abs()),
                _ => None,
            };
            CellResidual { cell: s.cell, con1, con2, con3: None, split_b2: None, split_b3: None }
        })
        .collect()
}

fn hex_residuals(graph: &LatticeGraph) -> Vec<CellResidual> {
    let p = &graph.params;
    let od = p.omega * p.delta;
    let (s2, c2) = (p.theta.sin().powi(2), p.theta.cos().powi(2));
    let table = bond_table(graph);
    let sq = |cell: Cell, kind: BondKind| table.get(&(cell, kind)).map(|c| c * c);
    let b2 = |c: Cell| sq(c, BondKind::B2);
    let b3 = |c: Cell| sq(c, BondKind::B3);
    graph
        .sites
        .iter()
        .filter(|s| s.sublattice == Sublattice::A)
        .map(|s| {
            let (pp, q) = s.cell;
            let con1 = table.get(&(s.cell, BondKind::B1)).map(|c| (c - p.delta).abs());
            let con2 = (|| {
                let lhs = b2((pp, q))? + b3((pp - 1, q))?;
                let rhs = b3((pp, q + 1))? + b2((pp, q + 1))?;
                Some((lhs - rhs).abs())
            })();
            let con3 = (|| {
                let lhs = b2((pp, q))? + b3((pp, q))?;
                let rhs = b3((pp, q + 1))? + b2((pp + 1, q + 1))? + od;
                Some((lhs - rhs).abs())
            })();
            let split_b2 = (|| Some((b2((pp, q))? - b2((pp + 1, q + 1))? - od * s2).abs()))();
            let split_b3 = (|| Some((b3((pp, q))? - b3((pp, q + 1))? - od * c2).abs()))();
            CellResidual { cell: s.cell, con1, con2, con3, split_b2, split_b3 }
        })
        .collect()
}
