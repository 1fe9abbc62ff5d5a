//! Dense tight-binding Hamiltonians and the ladder block between sublattices.

use crate::deformation::n_max;
use crate::error::{Error, Result};
use crate::io::fmt_g17;
use crate::lattice::{Cell, LatticeGraph, Sublattice};
use nalgebra::DMatrix;
use std::collections::{HashMap, HashSet};
use std::ops::Range;

/// Largest dimension accepted for dense storage.
pub const MAX_SITES: usize = 4096;

/// Residual entries above this magnitude count as nonzero.
pub const NONZERO_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct HamiltonianMatrix {
    pub matrix: DMatrix<f64>,
    /// Sites `0..n_a` are the A sublattice, the rest are B.
    pub n_a: usize,
    pub e0: f64,
    pub mass: f64,
    pub delta: f64,
    pub omega: f64,
}

impl HamiltonianMatrix {
    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn a_indices(&self) -> Range<usize> {
        0..self.n_a
    }

    pub fn b_indices(&self) -> Range<usize> {
        self.n_a..self.dim()
    }

    /// Row-per-line CSV of the dense matrix.
    pub fn to_csv(&self) -> String {
        matrix_csv(&self.matrix)
    }
}

pub fn matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = String::new();
    for r in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|c| fmt_g17(m[(r, c)])).collect();
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn check_size(n: usize) -> Result<()> {
    if n > MAX_SITES {
        return Err(Error::TooLarge { n, cap: MAX_SITES });
    }
    Ok(())
}

/// On-site energies on the diagonal, bond couplings off it, A sites first.
pub fn assemble_tb(graph: &LatticeGraph) -> Result<HamiltonianMatrix> {
    let n = graph.n_sites();
    check_size(n)?;
    let mut seen = HashSet::with_capacity(graph.bonds.len());
    for b in &graph.bonds {
        let key = (b.i.min(b.j), b.i.max(b.j));
        if !seen.insert(key) {
            return Err(Error::DuplicateBond { i: key.0, j: key.1 });
        }
    }
    graph.validate()?;
    let p = &graph.params;
    let mut h = DMatrix::zeros(n, n);
    for s in &graph.sites {
        h[(s.id, s.id)] = match s.sublattice {
            Sublattice::A => p.alpha,
            Sublattice::B => p.beta,
        };
    }
    for b in &graph.bonds {
        h[(b.i, b.j)] = b.coupling;
        h[(b.j, b.i)] = b.coupling;
    }
    Ok(HamiltonianMatrix {
        matrix: h,
        n_a: graph.n_a(),
        e0: p.e0(),
        mass: p.mass(),
        delta: p.delta,
        omega: p.omega,
    })
}

/// The A→B coupling block: rows are A sites, columns are B sites.
#[derive(Clone, Debug, PartialEq)]
pub struct LadderMatrix {
    pub matrix: DMatrix<f64>,
    pub row_cells: Vec<Cell>,
    pub col_cells: Vec<Cell>,
    pub delta: f64,
    pub omega: f64,
    pub n_max: Option<usize>,
}

impl LadderMatrix {
    pub fn omega_delta(&self) -> f64 {
        self.omega * self.delta
    }

    /// Column sharing each row's cell, if any.
    pub fn partners(&self) -> Vec<Option<usize>> {
        let cols: HashMap<Cell, usize> =
            self.col_cells.iter().enumerate().map(|(k, &c)| (c, k)).collect();
        self.row_cells.iter().map(|c| cols.get(c).copied()).collect()
    }

    /// Reassembles `[[(E0+M)·I, a], [aᵀ, (E0−M)·I]]`.
    pub fn to_hamiltonian(&self, e0: f64, mass: f64) -> DMatrix<f64> {
        let (r, c) = self.matrix.shape();
        let mut h = DMatrix::zeros(r + c, r + c);
        h.view_mut((0, 0), (r, r)).fill_diagonal(e0 + mass);
        h.view_mut((r, r), (c, c)).fill_diagonal(e0 - mass);
        h.view_mut((0, r), (r, c)).copy_from(&self.matrix);
        h.view_mut((r, 0), (c, r)).copy_from(&self.matrix.transpose());
        h
    }
}

pub fn ladder_matrix(graph: &LatticeGraph) -> Result<LadderMatrix> {
    check_size(graph.n_sites())?;
    graph.validate()?;
    let n_a = graph.n_a();
    let n_b = graph.n_b();
    let mut a = DMatrix::zeros(n_a, n_b);
    for b in &graph.bonds {
        if !b.kind.is_nearest() {
            return Err(Error::Structure(format!(
                "bond {}-{} of kind {} breaks the bipartite structure",
                b.i, b.j, b.kind
            )));
        }
        let (ai, bi) = graph.oriented(b);
        a[(ai, bi - n_a)] = b.coupling;
    }
    let cells = |s: Sublattice| -> Vec<Cell> {
        graph.sites.iter().filter(|x| x.sublattice == s).map(|x| x.cell).collect()
    };
    let p = &graph.params;
    Ok(LadderMatrix {
        matrix: a,
        row_cells: cells(Sublattice::A),
        col_cells: cells(Sublattice::B),
        delta: p.delta,
        omega: p.omega,
        n_max: if p.omega > 0.0 { n_max(p.delta, p.omega).ok() } else { None },
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CommutatorReport {
    /// `a·aᵀ − aᵀ·a − ωΔ·I` over the cells that carry both an A and a B site.
    pub residual: DMatrix<f64>,
    pub cells: Vec<Cell>,
    pub max_abs: f64,
    /// Row and column cells of the largest entry.
    pub position: Option<(Cell, Cell)>,
    pub value: f64,
    /// `Δ² − (n_max+1)ωΔ` when a truncation exists.
    pub predicted: Option<f64>,
    pub nonzero: Vec<(Cell, Cell, f64)>,
}

impl CommutatorReport {
    /// Cells whose residual row has any nonzero entry.
    pub fn boundary_cells(&self) -> Vec<Cell> {
        let mut out: Vec<Cell> = self.nonzero.iter().map(|e| e.0).collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

pub fn commutator_residual(a: &LadderMatrix, omega: f64, delta: f64) -> CommutatorReport {
    let aat = &a.matrix * a.matrix.transpose();
    let ata = a.matrix.transpose() * &a.matrix;
    let pairs: Vec<(usize, usize)> = a
        .partners()
        .into_iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| (r, c)))
        .collect();
    let cells: Vec<Cell> = pairs.iter().map(|&(r, _)| a.row_cells[r]).collect();
    let k = pairs.len();
    let od = omega * delta;
    let residual = DMatrix::from_fn(k, k, |x, y| {
        let (rx, cx) = pairs[x];
        let (ry, cy) = pairs[y];
        aat[(rx, ry)] - ata[(cx, cy)] - if x == y { od } else { 0.0 }
    });
    let mut max_abs = 0.0;
    let mut position = None;
    let mut value = 0.0;
    let mut nonzero = Vec::new();
    for x in 0..k {
        for y in 0..k {
            let v = residual[(x, y)];
            if v.abs() > max_abs {
                max_abs = v.abs();
                position = Some((cells[x], cells[y]));
                value = v;
            }
            if v.abs() > NONZERO_TOL {
                nonzero.push((cells[x], cells[y], v));
            }
        }
    }
    let predicted = if omega > 0.0 {
        n_max(delta, omega).ok().map(|top| delta * delta - (top as f64 + 1.0) * od)
    } else {
        None
    };
    CommutatorReport { residual, cells, max_abs, position, value, predicted, nonzero }
}
