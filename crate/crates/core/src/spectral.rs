//! Dense diagonalization and comparison with the analytic oscillator spectrum.

use crate::error::{Error, Result};
use crate::hamiltonian::{HamiltonianMatrix, MAX_SITES};
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::Serialize;
use std::fmt;

/// Ascending eigenvalues with orthonormal eigenvectors in matching columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Eigensystem {
    pub values: Vec<f64>,
    pub vectors: DMatrix<f64>,
}

impl Eigensystem {
    pub fn vector(&self, k: usize) -> DVector<f64> {
        self.vectors.column(k).into_owned()
    }
}

pub fn eigensolve_sym(h: &HamiltonianMatrix) -> Result<Eigensystem> {
    eigensolve_matrix(&h.matrix)
}

fn check_input(m: &DMatrix<f64>) -> Result<()> {
    if !m.is_square() {
        return Err(Error::Structure(format!("matrix of shape {:?} is not square", m.shape())));
    }
    if m.nrows() > MAX_SITES {
        return Err(Error::TooLarge { n: m.nrows(), cap: MAX_SITES });
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("matrix has non-finite entries"));
    }
    Ok(())
}

fn ascending(values: &DVector<f64>) -> Vec<usize> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]).then(i.cmp(&j)));
    order
}

/// Full eigendecomposition of a symmetric matrix.
///
/// Each eigenvector is signed so its first non-negligible component is positive.
pub fn eigensolve_matrix(m: &DMatrix<f64>) -> Result<Eigensystem> {
    check_input(m)?;
    let eig = SymmetricEigen::new(m.clone());
    let order = ascending(&eig.eigenvalues);
    let n = m.nrows();
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        let big = v.amax();
        if let Some(lead) = v.iter().find(|x| x.abs() > 1e-8 * big) {
            if *lead < 0.0 {
                v.neg_mut();
            }
        }
        vectors.set_column(dst, &v);
    }
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    Ok(Eigensystem { values, vectors })
}

/// Ascending eigenvalues only.
pub fn eigenvalues_sym(m: &DMatrix<f64>) -> Result<Vec<f64>> {
    check_input(m)?;
    let values = m.clone().symmetric_eigenvalues();
    Ok(ascending(&values).into_iter().map(|k| values[k]).collect())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Branch {
    Plus,
    Minus,
    Singlet,
}

impl Branch {
    pub fn as_str(self) -> &'static str {
        match self {
            Branch::Plus => "plus",
            Branch::Minus => "minus",
            Branch::Singlet => "singlet",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct AnalyticLevel {
    /// Oscillator quantum number; absent for the singlet.
    pub n: Option<usize>,
    pub branch: Branch,
    pub energy: f64,
}

/// Singlet `E0 − M` followed by the doublets `E0 ∓ √(ωΔ(n+1) + M²)` for `n = 0..=n_max`.
pub fn analytic_oscillator_spectrum(
    e0: f64,
    mass: f64,
    omega_delta: f64,
    n_max: usize,
) -> Result<Vec<AnalyticLevel>> {
    if !(omega_delta >= 0.0) {
        return Err(Error::invalid(format!("ωΔ must be non-negative, got {omega_delta}")));
    }
    let mut levels = vec![AnalyticLevel { n: None, branch: Branch::Singlet, energy: e0 - mass }];
    for n in 0..=n_max {
        let eps = (omega_delta * (n as f64 + 1.0) + mass * mass).sqrt();
        levels.push(AnalyticLevel { n: Some(n), branch: Branch::Minus, energy: e0 - eps });
        levels.push(AnalyticLevel { n: Some(n), branch: Branch::Plus, energy: e0 + eps });
    }
    Ok(levels)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Classification {
    Bulk,
    Edge,
}

impl Classification {
    pub fn as_str(self) -> &'static str {
        match self {
            Classification::Bulk => "bulk",
            Classification::Edge => "edge",
        }
    }
}

/// Nearest analytic level of one computed eigenvalue.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Assignment {
    pub index: usize,
    pub energy: f64,
    /// Index into [`SpectrumReport::levels`] when within tolerance.
    pub level: Option<usize>,
    pub residual: Option<f64>,
    pub class: Classification,
}

#[derive(Clone, Debug, PartialEq)]
pub struct LevelMatch {
    pub level: AnalyticLevel,
    /// Computed indices within tolerance of the level.
    pub cluster: Vec<usize>,
    /// One-to-one partner from the greedy pairing and its residual.
    pub paired: Option<(usize, f64)>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<f64>,
    pub levels: Vec<LevelMatch>,
    pub assignments: Vec<Assignment>,
    pub tol: f64,
}

impl SpectrumReport {
    pub fn edge_count(&self) -> usize {
        self.assignments.iter().filter(|a| a.class == Classification::Edge).count()
    }

    /// Largest paired residual over levels selected by `keep`; `None` if any is unpaired.
    pub fn max_paired_residual(&self, keep: impl Fn(&AnalyticLevel) -> bool) -> Option<f64> {
        self.levels
            .iter()
            .filter(|l| keep(&l.level))
            .map(|l| l.paired.map(|(_, r)| r))
            .try_fold(0.0f64, |acc, r| r.map(|r| acc.max(r)))
    }
}

/// Pairs computed eigenvalues with analytic levels.
///
/// Every computed value is assigned to its nearest level if that lies within `tol`
/// and is otherwise classified as an edge state. Independently, candidate pairs
/// within `tol` are taken greedily in order of increasing residual to give a
/// one-to-one pairing.
pub fn match_levels(computed: &[f64], analytic: &[AnalyticLevel], tol: f64) -> Result<SpectrumReport> {
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    let mut levels: Vec<LevelMatch> = analytic
        .iter()
        .map(|&level| LevelMatch { level, cluster: Vec::new(), paired: None })
        .collect();
    let mut candidates = Vec::new();
    let mut assignments = Vec::with_capacity(computed.len());
    for (index, &energy) in computed.iter().enumerate() {
        let mut nearest: Option<(usize, f64)> = None;
        for (k, l) in analytic.iter().enumerate() {
            let r = (energy - l.energy).abs();
            if r <= tol {
                levels[k].cluster.push(index);
                candidates.push((r, index, k));
            }
            if nearest.is_none_or(|(_, best)| r < best) {
                nearest = Some((k, r));
            }
        }
        let hit = nearest.filter(|&(_, r)| r <= tol);
        assignments.push(Assignment {
            index,
            energy,
            level: hit.map(|h| h.0),
            residual: hit.map(|h| h.1),
            class: if hit.is_some() { Classification::Bulk } else { Classification::Edge },
        });
    }
    candidates.sort_by(|x, y| x.0.total_cmp(&y.0).then(x.1.cmp(&y.1)).then(x.2.cmp(&y.2)));
    let mut used = vec![false; computed.len()];
    for (r, index, k) in candidates {
        if !used[index] && levels[k].paired.is_none() {
            used[index] = true;
            levels[k].paired = Some((index, r));
        }
    }
    Ok(SpectrumReport { eigenvalues: computed.to_vec(), levels, assignments, tol })
}

/// One member of a doublet: amplitudes `upper·φ_n` on A and `lower·φ_{n+1}` on B.
#[derive(Clone, Debug, PartialEq)]
pub struct DoubletState {
    pub branch: Branch,
    pub energy: f64,
    pub upper: f64,
    pub lower: f64,
    pub upper_vector: DVector<f64>,
    pub lower_vector: DVector<f64>,
}

/// Eigenvectors of the block `[[E0+M, g], [g, E0−M]]` with `g = √(ωΔ(n+1))`,
/// ordered minus then plus.
pub fn doublet_eigenvectors(
    e0: f64,
    mass: f64,
    omega_delta: f64,
    n: usize,
    phi_n: &DVector<f64>,
    phi_n1: &DVector<f64>,
) -> Result<[DoubletState; 2]> {
    let g = (omega_delta * (n as f64 + 1.0)).sqrt();
    if !(g > 0.0) {
        return Err(Error::DegenerateBlock);
    }
    let eps = (g * g + mass * mass).sqrt();
    let state = |branch: Branch, e: f64| {
        let (u, l) = (g, e - mass);
        let norm = u.hypot(l);
        let (upper, lower) = (u / norm, l / norm);
        DoubletState {
            branch,
            energy: e0 + e,
            upper,
            lower,
            upper_vector: phi_n * upper,
            lower_vector: phi_n1 * lower,
        }
    };
    Ok([state(Branch::Minus, -eps), state(Branch::Plus, eps)])
}
