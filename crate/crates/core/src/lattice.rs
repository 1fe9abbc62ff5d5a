//! Lattice graphs: sites, bonds, cell windows and geometric embedding.

use crate::error::{Error, Result};
use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::ops::RangeInclusive;

pub type Vec2 = Vector2<f64>;

/// Integer cell label. Chains use `(m, 0)`.
pub type Cell = (i64, i64);

/// Nearest-neighbour vectors `b` and second-neighbour vectors `a` of the honeycomb.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HexVectors {
    pub b: [Vec2; 3],
    pub a: [Vec2; 3],
}

impl HexVectors {
    pub fn standard() -> Self {
        let h = 3f64.sqrt() / 2.0;
        HexVectors {
            b: [Vec2::new(0.0, 1.0), Vec2::new(-h, -0.5), Vec2::new(h, -0.5)],
            a: [Vec2::new(2.0 * h, 0.0), Vec2::new(-h, 1.5), Vec2::new(-h, -1.5)],
        }
    }

    /// Reciprocal basis with `λ g_i · a_j = δ_ij` for the primitive pair `a1, a2`.
    pub fn reciprocal(&self, lambda: f64) -> [Vec2; 2] {
        let rows = Matrix2::new(self.a[0].x, self.a[0].y, self.a[1].x, self.a[1].y);
        let inv = rows.try_inverse().expect("primitive vectors are independent") / lambda;
        [inv.column(0).into(), inv.column(1).into()]
    }

    /// Position of the A site of `cell`.
    pub fn cell_origin(&self, cell: Cell, lambda: f64) -> Vec2 {
        (self.a[0] * cell.0 as f64 + self.a[1] * cell.1 as f64) * lambda
    }
}

impl Default for HexVectors {
    fn default() -> Self {
        Self::standard()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BondKind {
    B1,
    B2,
    B3,
    IntraDimer,
    InterDimer,
    SecondNeighbor,
}

impl BondKind {
    pub fn is_nearest(self) -> bool {
        self != BondKind::SecondNeighbor
    }

    /// Unit vector pointing from the A endpoint to the B endpoint.
    pub fn direction(self, hex: &HexVectors) -> Option<Vec2> {
        match self {
            BondKind::B1 => Some(hex.b[0]),
            BondKind::B2 => Some(hex.b[1]),
            BondKind::B3 => Some(hex.b[2]),
            BondKind::IntraDimer => Some(Vec2::new(-1.0, 0.0)),
            BondKind::InterDimer => Some(Vec2::new(1.0, 0.0)),
            BondKind::SecondNeighbor => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BondKind::B1 => "b1",
            BondKind::B2 => "b2",
            BondKind::B3 => "b3",
            BondKind::IntraDimer => "intra_dimer",
            BondKind::InterDimer => "inter_dimer",
            BondKind::SecondNeighbor => "second_neighbor",
        }
    }
}

impl fmt::Display for BondKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Site {
    pub id: usize,
    pub sublattice: Sublattice,
    pub cell: Cell,
    /// In units of λ.
    pub position: Vec2,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bond {
    pub i: usize,
    pub j: usize,
    pub kind: BondKind,
    pub coupling: f64,
    pub length: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LatticeParams {
    pub delta: f64,
    pub omega: f64,
    pub lambda: f64,
    pub penetration: f64,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
}

impl Default for LatticeParams {
    fn default() -> Self {
        LatticeParams {
            delta: 1.0,
            omega: 0.0,
            lambda: 1.0,
            penetration: 1.0,
            alpha: 0.0,
            beta: 0.0,
            theta: 0.0,
        }
    }
}

impl LatticeParams {
    pub fn mass(&self) -> f64 {
        (self.alpha - self.beta) / 2.0
    }

    pub fn e0(&self) -> f64 {
        (self.alpha + self.beta) / 2.0
    }

    pub fn validate(&self) -> Result<()> {
        let all = [
            ("delta", self.delta),
            ("omega", self.omega),
            ("lambda", self.lambda),
            ("penetration", self.penetration),
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("theta", self.theta),
        ];
        if let Some((name, v)) = all.iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::invalid(format!("{name} = {v} is not finite")));
        }
        if self.delta <= 0.0 {
            return Err(Error::invalid(format!("delta must be positive, got {}", self.delta)));
        }
        if self.omega < 0.0 {
            return Err(Error::invalid(format!("omega must be non-negative, got {}", self.omega)));
        }
        if self.lambda <= 0.0 {
            return Err(Error::invalid(format!("lambda must be positive, got {}", self.lambda)));
        }
        if self.penetration <= 0.0 {
            return Err(Error::invalid(format!(
                "penetration must be positive, got {}",
                self.penetration
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Geometry {
    Chain,
    Honeycomb,
}

impl Geometry {
    /// Nominal (undeformed) position of a site.
    pub fn nominal_position(self, sublattice: Sublattice, cell: Cell, lambda: f64) -> Vec2 {
        match self {
            Geometry::Chain => {
                let x = 2 * cell.0 + i64::from(sublattice == Sublattice::A);
                Vec2::new(x as f64 * lambda, 0.0)
            }
            Geometry::Honeycomb => {
                let hex = HexVectors::standard();
                let origin = hex.cell_origin(cell, lambda);
                match sublattice {
                    Sublattice::A => origin,
                    Sublattice::B => origin + hex.b[0] * lambda,
                }
            }
        }
    }
}

/// A finite set of cells.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CellWindow {
    cells: BTreeSet<Cell>,
}

impl CellWindow {
    pub fn rect(p: RangeInclusive<i64>, q: RangeInclusive<i64>) -> Result<Self> {
        if p.is_empty() || q.is_empty() {
            return Err(Error::invalid(format!("empty cell range {p:?} x {q:?}")));
        }
        let cells = p.flat_map(|pp| q.clone().map(move |qq| (pp, qq))).collect();
        Ok(CellWindow { cells })
    }

    /// Cells with `p = m` and `q = m + n` for `m`, `n` in the given ranges.
    pub fn sheared(m: RangeInclusive<i64>, n: RangeInclusive<i64>) -> Result<Self> {
        if m.is_empty() || n.is_empty() {
            return Err(Error::invalid(format!("empty cell range {m:?} x {n:?}")));
        }
        let cells = m.flat_map(|mm| n.clone().map(move |nn| (mm, mm + nn))).collect();
        Ok(CellWindow { cells })
    }

    pub fn from_cells(cells: impl IntoIterator<Item = Cell>) -> Result<Self> {
        let cells: BTreeSet<Cell> = cells.into_iter().collect();
        if cells.is_empty() {
            return Err(Error::invalid("empty cell window"));
        }
        Ok(CellWindow { cells })
    }

    pub fn contains(&self, cell: Cell) -> bool {
        self.cells.contains(&cell)
    }

    pub fn iter(&self) -> impl Iterator<Item = Cell> + '_ {
        self.cells.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LatticeGraph {
    pub params: LatticeParams,
    pub geometry: Geometry,
    pub sites: Vec<Site>,
    pub bonds: Vec<Bond>,
}

impl LatticeGraph {
    /// Builds sites A-first then B, each sorted by cell, at nominal positions.
    pub(crate) fn with_cells(
        params: LatticeParams,
        geometry: Geometry,
        a_cells: &[Cell],
        b_cells: &[Cell],
    ) -> Self {
        let mut a: Vec<Cell> = a_cells.to_vec();
        let mut b: Vec<Cell> = b_cells.to_vec();
        a.sort_unstable();
        a.dedup();
        b.sort_unstable();
        b.dedup();
        let sites = a
            .iter()
            .map(|&c| (Sublattice::A, c))
            .chain(b.iter().map(|&c| (Sublattice::B, c)))
            .enumerate()
            .map(|(id, (sublattice, cell))| Site {
                id,
                sublattice,
                cell,
                position: geometry.nominal_position(sublattice, cell, params.lambda),
            })
            .collect();
        LatticeGraph { params, geometry, sites, bonds: Vec::new() }
    }

    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_a(&self) -> usize {
        self.sites.iter().filter(|s| s.sublattice == Sublattice::A).count()
    }

    pub fn n_b(&self) -> usize {
        self.n_sites() - self.n_a()
    }

    pub fn site_lookup(&self) -> HashMap<(Sublattice, Cell), usize> {
        self.sites.iter().map(|s| ((s.sublattice, s.cell), s.id)).collect()
    }

    pub fn find_site(&self, sublattice: Sublattice, cell: Cell) -> Option<usize> {
        self.sites.iter().position(|s| s.sublattice == sublattice && s.cell == cell)
    }

    /// Nearest-neighbour adjacency as `(neighbour, bond index)` lists.
    pub fn adjacency(&self) -> Vec<Vec<(usize, usize)>> {
        let mut adj = vec![Vec::new(); self.sites.len()];
        for (k, b) in self.bonds.iter().enumerate().filter(|(_, b)| b.kind.is_nearest()) {
            adj[b.i].push((b.j, k));
            adj[b.j].push((b.i, k));
        }
        adj
    }

    pub fn coordination(&self, site: usize) -> usize {
        self.bonds
            .iter()
            .filter(|b| b.kind.is_nearest() && (b.i == site || b.j == site))
            .count()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.sites.iter().map(|s| s.position).collect()
    }

    /// Endpoints of a bond ordered as (A site, B site).
    pub fn oriented(&self, bond: &Bond) -> (usize, usize) {
        if self.sites[bond.i].sublattice == Sublattice::A {
            (bond.i, bond.j)
        } else {
            (bond.j, bond.i)
        }
    }

    /// Checks id density, site ordering, bipartiteness and coordination limits.
    pub fn validate(&self) -> Result<()> {
        self.params.validate()?;
        for (k, s) in self.sites.iter().enumerate() {
            if s.id != k {
                return Err(Error::Structure(format!("site at index {k} carries id {}", s.id)));
            }
            if !(s.position.x.is_finite() && s.position.y.is_finite()) {
                return Err(Error::Structure(format!("site {k} has a non-finite position")));
            }
        }
        let keys: Vec<(Sublattice, Cell)> = self.sites.iter().map(|s| (s.sublattice, s.cell)).collect();
        if let Some(w) = keys.windows(2).find(|w| w[0] >= w[1]) {
            return Err(Error::Structure(format!(
                "sites must be ordered A before B by cell without repeats; found {:?} before {:?}",
                w[0], w[1]
            )));
        }
        let n = self.sites.len();
        for (k, b) in self.bonds.iter().enumerate() {
            if b.i >= n || b.j >= n {
                return Err(Error::Structure(format!("bond {k} references a missing site")));
            }
            if b.i == b.j {
                return Err(Error::Structure(format!("bond {k} is a self loop on site {}", b.i)));
            }
            if !(b.coupling.is_finite() && b.length.is_finite()) {
                return Err(Error::Structure(format!("bond {k} has non-finite data")));
            }
            if b.kind.is_nearest() {
                if self.sites[b.i].sublattice == self.sites[b.j].sublattice {
                    return Err(Error::Structure(format!(
                        "nearest-neighbour bond {}-{} joins equal sublattices",
                        b.i, b.j
                    )));
                }
                if b.coupling <= 0.0 {
                    return Err(Error::Structure(format!(
                        "bond {}-{} has non-positive coupling {}",
                        b.i, b.j, b.coupling
                    )));
                }
            }
        }
        let limit = match self.geometry {
            Geometry::Chain => 2,
            Geometry::Honeycomb => 3,
        };
        let adj = self.adjacency();
        if let Some((site, nb)) = adj.iter().enumerate().find(|(_, nb)| nb.len() > limit) {
            return Err(Error::Structure(format!(
                "site {site} has coordination {} above {limit}",
                nb.len()
            )));
        }
        Ok(())
    }
}

fn require_cells(n: usize, min: usize, what: &str) -> Result<()> {
    if n < min {
        return Err(Error::invalid(format!("{what} needs at least {min} cell(s), got {n}")));
    }
    Ok(())
}

/// Open chain of `n_cells` dimers with uniform coupling Δ and spacing λ.
pub fn build_periodic_chain(n_cells: usize, params: LatticeParams) -> Result<LatticeGraph> {
    params.validate()?;
    require_cells(n_cells, 1, "chain")?;
    let cells: Vec<Cell> = (0..n_cells as i64).map(|m| (m, 0)).collect();
    let mut g = LatticeGraph::with_cells(params, Geometry::Chain, &cells, &cells);
    let n = n_cells;
    let lambda = params.lambda;
    for m in 0..n {
        g.bonds.push(Bond { i: m, j: n + m, kind: BondKind::IntraDimer, coupling: params.delta, length: lambda });
        if m + 1 < n {
            g.bonds.push(Bond {
                i: m,
                j: n + m + 1,
                kind: BondKind::InterDimer,
                coupling: params.delta,
                length: lambda,
            });
        }
    }
    Ok(g)
}

/// Closed ring of `n_cells` dimers; the wrap bond joins the last A site to the first B site.
pub fn build_ring(n_cells: usize, params: LatticeParams) -> Result<LatticeGraph> {
    require_cells(n_cells, 2, "ring")?;
    let mut g = build_periodic_chain(n_cells, params)?;
    g.bonds.push(Bond {
        i: n_cells - 1,
        j: n_cells,
        kind: BondKind::InterDimer,
        coupling: params.delta,
        length: params.lambda,
    });
    Ok(g)
}

/// Honeycomb on `window` with couplings from `coupling`; lengths follow `λ + Λ·ln(Δ/c)`.
/// Positions are nominal; callers embed when the lengths vary.
pub(crate) fn hex_on_window(
    window: &CellWindow,
    params: LatticeParams,
    mut coupling: impl FnMut(Cell, BondKind) -> Result<f64>,
) -> Result<LatticeGraph> {
    params.validate()?;
    let cells: Vec<Cell> = window.iter().collect();
    let mut g = LatticeGraph::with_cells(params, Geometry::Honeycomb, &cells, &cells);
    let n_a = cells.len();
    let b_index: HashMap<Cell, usize> = cells.iter().enumerate().map(|(k, &c)| (c, n_a + k)).collect();
    for (i, &(p, q)) in cells.iter().enumerate() {
        let targets = [
            (BondKind::B1, (p, q)),
            (BondKind::B2, (p - 1, q - 1)),
            (BondKind::B3, (p, q - 1)),
        ];
        for (kind, target) in targets {
            if let Some(&j) = b_index.get(&target) {
                let c = coupling((p, q), kind)?;
                let length = params.lambda + params.penetration * (params.delta / c).ln();
                g.bonds.push(Bond { i, j, kind, coupling: c, length });
            }
        }
    }
    Ok(g)
}

/// Undeformed honeycomb on a rectangular cell window.
pub fn build_periodic_hex(
    p_range: RangeInclusive<i64>,
    q_range: RangeInclusive<i64>,
    params: LatticeParams,
) -> Result<LatticeGraph> {
    let window = CellWindow::rect(p_range, q_range)?;
    hex_on_window(&window, params, |_, _| Ok(params.delta))
}

/// Honeycomb with periodic boundary conditions on an `n1 × n2` cell torus.
pub fn build_hex_torus(n1: usize, n2: usize, params: LatticeParams) -> Result<LatticeGraph> {
    params.validate()?;
    require_cells(n1.min(n2), 2, "torus")?;
    let (m1, m2) = (n1 as i64, n2 as i64);
    let window = CellWindow::rect(0..=m1 - 1, 0..=m2 - 1)?;
    let cells: Vec<Cell> = window.iter().collect();
    let mut g = LatticeGraph::with_cells(params, Geometry::Honeycomb, &cells, &cells);
    let n_a = cells.len();
    let b_of = |p: i64, q: i64| n_a + (p.rem_euclid(m1) * m2 + q.rem_euclid(m2)) as usize;
    for (i, &(p, q)) in cells.iter().enumerate() {
        for (kind, j) in [
            (BondKind::B1, b_of(p, q)),
            (BondKind::B2, b_of(p - 1, q - 1)),
            (BondKind::B3, b_of(p, q - 1)),
        ] {
            g.bonds.push(Bond { i, j, kind, coupling: params.delta, length: params.lambda });
        }
    }
    Ok(g)
}

/// Recomputes positions by integrating bond vectors from the origin site.
pub fn embed_positions(graph: &LatticeGraph) -> Result<LatticeGraph> {
    let lengths: Vec<f64> = graph.bonds.iter().map(|b| b.length).collect();
    let tol = 1e-9 * graph.params.lambda;
    let positions = integrate_positions(graph, &lengths, 1.0, tol)?;
    let mut out = graph.clone();
    for (s, p) in out.sites.iter_mut().zip(positions) {
        s.position = p;
    }
    Ok(out)
}

/// Integrates `length × fixed direction` along a breadth-first spanning tree.
///
/// The origin is the A site of cell (0, 0) when present, otherwise site 0, and is
/// placed at its nominal position times `scale`. Bonds outside the tree are checked
/// for closure against `tol`.
pub fn integrate_positions(
    graph: &LatticeGraph,
    lengths: &[f64],
    scale: f64,
    tol: f64,
) -> Result<Vec<Vec2>> {
    let n = graph.n_sites();
    if n == 0 {
        return Ok(Vec::new());
    }
    let hex = HexVectors::standard();
    let origin = graph.find_site(Sublattice::A, (0, 0)).unwrap_or(0);
    let o = &graph.sites[origin];
    let mut pos: Vec<Option<Vec2>> = vec![None; n];
    pos[origin] = Some(graph.geometry.nominal_position(o.sublattice, o.cell, graph.params.lambda) * scale);

    let bond_vec = |k: usize| -> Option<Vec2> {
        let b = &graph.bonds[k];
        b.kind.direction(&hex).map(|d| d * lengths[k])
    };
    let adj = graph.adjacency();
    let mut tree = vec![false; graph.bonds.len()];
    let mut queue = VecDeque::from([origin]);
    while let Some(u) = queue.pop_front() {
        let pu = pos[u].expect("queued sites are placed");
        for &(v, k) in &adj[u] {
            if pos[v].is_some() {
                continue;
            }
            let Some(step) = bond_vec(k) else { continue };
            let sign = if graph.sites[u].sublattice == Sublattice::A { 1.0 } else { -1.0 };
            pos[v] = Some(pu + step * sign);
            tree[k] = true;
            queue.push_back(v);
        }
    }
    let stranded: Vec<usize> = (0..n).filter(|&i| pos[i].is_none()).collect();
    if !stranded.is_empty() {
        return Err(Error::Disconnected { origin, stranded });
    }
    let pos: Vec<Vec2> = pos.into_iter().map(|p| p.expect("all placed")).collect();
    for (k, b) in graph.bonds.iter().enumerate() {
        if tree[k] {
            continue;
        }
        let Some(step) = bond_vec(k) else { continue };
        let (a, bsite) = graph.oriented(b);
        let residual = (pos[bsite] - pos[a] - step).norm();
        if residual > tol {
            return Err(Error::Closure { i: b.i, j: b.j, residual, tol });
        }
    }
    Ok(pos)
}
