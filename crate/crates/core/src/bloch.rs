//! Bloch bands of the periodic lattices, degeneracy points and cone geometry.

use crate::error::{Error, Result};
use crate::lattice::{HexVectors, Vec2};
use crate::spectral::Branch;
use nalgebra::Matrix2;
use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::{PI, TAU};

/// `|h(k0)|` accepted as a degeneracy.
pub const DEGENERACY_TOL: f64 = 1e-9;

pub fn structure_factor_1d(k: f64, lambda: f64) -> Complex64 {
    Complex64::new(1.0, 0.0) + Complex64::cis(TAU * lambda * k)
}

pub fn structure_factor_2d(k: Vec2, hex: &HexVectors, lambda: f64) -> Complex64 {
    hex.b.iter().map(|b| Complex64::cis(TAU * lambda * b.dot(&k))).sum()
}

/// `Σ 2cos(2πλ a_i·k)` over the three second-neighbour vectors.
pub fn second_neighbor_sum(k: Vec2, hex: &HexVectors, lambda: f64) -> f64 {
    hex.a.iter().map(|a| 2.0 * (TAU * lambda * a.dot(&k)).cos()).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Dimension {
    One,
    Two,
}

/// Two-band Bloch model `[[E0+M, h(k)], [h*(k), E0−M]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BandModel {
    pub dim: Dimension,
    pub delta: f64,
    /// Second-neighbour coupling Δ′ (honeycomb only).
    pub delta2: f64,
    pub mass: f64,
    pub e0: f64,
    pub lambda: f64,
    pub hex: HexVectors,
}

impl BandModel {
    pub fn new(dim: Dimension, delta: f64, delta2: f64, mass: f64, e0: f64, lambda: f64) -> Result<Self> {
        for (name, v) in [("delta", delta), ("delta2", delta2), ("mass", mass), ("e0", e0), ("lambda", lambda)] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} = {v} is not finite")));
            }
        }
        if delta <= 0.0 || lambda <= 0.0 {
            return Err(Error::invalid("delta and lambda must be positive"));
        }
        if delta2 < 0.0 {
            return Err(Error::invalid(format!("delta2 must be non-negative, got {delta2}")));
        }
        if dim == Dimension::One && delta2 != 0.0 {
            return Err(Error::invalid("second-neighbour coupling needs the honeycomb"));
        }
        Ok(BandModel { dim, delta, delta2, mass, e0, lambda, hex: HexVectors::standard() })
    }

    /// Off-diagonal element `h(k)`; 1D models read `k.x` only.
    pub fn off_diagonal(&self, k: Vec2) -> Complex64 {
        match self.dim {
            Dimension::One => structure_factor_1d(k.x, self.lambda) * self.delta,
            Dimension::Two => {
                structure_factor_2d(k, &self.hex, self.lambda) * self.delta
                    + self.delta2 * second_neighbor_sum(k, &self.hex, self.lambda)
            }
        }
    }

    /// Derivatives `(∂h/∂kx, ∂h/∂ky)`.
    fn gradient(&self, k: Vec2) -> [Complex64; 2] {
        let s = TAU * self.lambda;
        match self.dim {
            Dimension::One => {
                let d = Complex64::i() * s * Complex64::cis(s * k.x) * self.delta;
                [d, Complex64::new(0.0, 0.0)]
            }
            Dimension::Two => {
                let mut g = [Complex64::new(0.0, 0.0); 2];
                for b in &self.hex.b {
                    let t = Complex64::i() * s * Complex64::cis(s * b.dot(&k)) * self.delta;
                    g[0] += t * b.x;
                    g[1] += t * b.y;
                }
                for a in &self.hex.a {
                    let t = -2.0 * self.delta2 * s * (s * a.dot(&k)).sin();
                    g[0] += t * a.x;
                    g[1] += t * a.y;
                }
                g
            }
        }
    }

    /// `(E₋, E₊) = E0 ∓ √(|h(k)|² + M²)`.
    pub fn dispersion(&self, k: Vec2) -> (f64, f64) {
        let r = self.off_diagonal(k).norm().hypot(self.mass);
        (self.e0 - r, self.e0 + r)
    }

    pub fn reciprocal(&self) -> [Vec2; 2] {
        self.hex.reciprocal(self.lambda)
    }
}

pub fn dispersion(model: &BandModel, k: Vec2) -> (f64, f64) {
    model.dispersion(k)
}

#[derive(Clone, Debug, PartialEq)]
pub struct DispersionGrid {
    pub samples: Vec<Vec2>,
    pub e_minus: Vec<f64>,
    pub e_plus: Vec<f64>,
    pub model: BandModel,
}

/// Samples the bands: 1D on `n` points spanning `[-1/(2λ), 1/(2λ)]` inclusive,
/// 2D on an `n × n` grid over the reciprocal cell.
pub fn band_grid(model: &BandModel, n: usize) -> Result<DispersionGrid> {
    if n < 2 {
        return Err(Error::invalid(format!("grid needs at least 2 points, got {n}")));
    }
    let samples: Vec<Vec2> = match model.dim {
        Dimension::One => {
            let half = 0.5 / model.lambda;
            (0..n)
                .map(|j| Vec2::new(-half + 2.0 * half * j as f64 / (n - 1) as f64, 0.0))
                .collect()
        }
        Dimension::Two => {
            let [g1, g2] = model.reciprocal();
            (0..n * n)
                .map(|idx| {
                    let (j1, j2) = (idx / n, idx % n);
                    g1 * (j1 as f64 / n as f64) + g2 * (j2 as f64 / n as f64)
                })
                .collect()
        }
    };
    let (e_minus, e_plus) = samples.par_iter().map(|&k| model.dispersion(k)).unzip();
    Ok(DispersionGrid { samples, e_minus, e_plus, model: *model })
}

/// Closed-form energies at the wavevectors allowed on an `n`-cell ring, ascending.
pub fn ring_energies(model: &BandModel, n: usize) -> Vec<f64> {
    let ks = (0..n).map(|j| Vec2::new(j as f64 / (n as f64 * model.lambda), 0.0));
    sorted_pairs(model, ks)
}

/// Closed-form energies at the wavevectors allowed on an `n1 × n2` torus, ascending.
pub fn torus_energies(model: &BandModel, n1: usize, n2: usize) -> Vec<f64> {
    let [g1, g2] = model.reciprocal();
    let ks = (0..n1).flat_map(|j1| {
        (0..n2).map(move |j2| g1 * (j1 as f64 / n1 as f64) + g2 * (j2 as f64 / n2 as f64))
    });
    sorted_pairs(model, ks)
}

fn sorted_pairs(model: &BandModel, ks: impl Iterator<Item = Vec2>) -> Vec<f64> {
    let mut e: Vec<f64> = ks.flat_map(|k| {
        let (lo, hi) = model.dispersion(k);
        [lo, hi]
    })
    .collect();
    e.sort_by(f64::total_cmp);
    e
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DiracPoint {
    pub k: Vec2,
    pub residual: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct DiracSearch {
    /// Empty whenever the mass is nonzero.
    pub points: Vec<DiracPoint>,
    /// Smallest `E₊ − E₋` found.
    pub min_gap: f64,
}

/// Locates the zeros of `h(k)` in one Brillouin zone by a coarse scan and Newton polish.
///
/// 1D scans `grid` points over the closed zone `[-1/(2λ), 1/(2λ)]` and keeps both
/// edges. 2D scans a `grid × grid` lattice of the reciprocal cell and reports each
/// zero by its Wigner–Seitz representative.
pub fn find_dirac_points(model: &BandModel, grid: usize) -> Result<DiracSearch> {
    if grid < 4 {
        return Err(Error::invalid(format!("grid needs at least 4 points, got {grid}")));
    }
    let (zeros, grid_min) = match model.dim {
        Dimension::One => zeros_1d(model, grid),
        Dimension::Two => zeros_2d(model, grid),
    };
    let h_min = zeros.iter().map(|p| p.residual).fold(grid_min, f64::min);
    let min_gap = 2.0 * h_min.hypot(model.mass);
    let points = if model.mass == 0.0 { zeros } else { Vec::new() };
    Ok(DiracSearch { points, min_gap })
}

fn newton(model: &BandModel, mut k: Vec2) -> Vec2 {
    for _ in 0..60 {
        let h = model.off_diagonal(k);
        if h.norm() < 1e-15 * model.delta {
            break;
        }
        let [gx, gy] = model.gradient(k);
        let step = match model.dim {
            Dimension::One => {
                let s = h / gx;
                if !s.re.is_finite() {
                    break;
                }
                Vec2::new(s.re, 0.0)
            }
            Dimension::Two => {
                let j = Matrix2::new(gx.re, gy.re, gx.im, gy.im);
                let Some(inv) = j.try_inverse() else { break };
                inv * Vec2::new(h.re, h.im)
            }
        };
        k -= step;
        if step.norm() < 1e-17 / model.lambda {
            break;
        }
    }
    k
}

fn zeros_1d(model: &BandModel, grid: usize) -> (Vec<DiracPoint>, f64) {
    let half = 0.5 / model.lambda;
    let ks: Vec<f64> = (0..grid).map(|j| -half + 2.0 * half * j as f64 / (grid - 1) as f64).collect();
    let vals: Vec<f64> = ks.iter().map(|&k| model.off_diagonal(Vec2::new(k, 0.0)).norm()).collect();
    let grid_min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let mut out: Vec<DiracPoint> = Vec::new();
    for j in 0..grid {
        let left = if j > 0 { vals[j - 1] } else { f64::INFINITY };
        let right = if j + 1 < grid { vals[j + 1] } else { f64::INFINITY };
        if vals[j] > left || vals[j] > right {
            continue;
        }
        let k = newton(model, Vec2::new(ks[j], 0.0));
        let residual = model.off_diagonal(k).norm();
        if residual >= DEGENERACY_TOL || k.x.abs() > half * (1.0 + 1e-12) {
            continue;
        }
        if out.iter().all(|p| (p.k - k).norm() > 1e-6 / model.lambda) {
            out.push(DiracPoint { k, residual });
        }
    }
    out.sort_by(|a, b| a.k.x.total_cmp(&b.k.x));
    (out, grid_min)
}

fn angle(k: Vec2) -> f64 {
    k.y.atan2(k.x).rem_euclid(TAU)
}

/// Representative of `k` closest to the origin modulo the reciprocal lattice;
/// ties on the zone boundary go to the smallest polar angle.
pub fn wigner_seitz(k: Vec2, g: &[Vec2; 2]) -> Vec2 {
    let mut cands: Vec<Vec2> = Vec::with_capacity(25);
    for n1 in -2i32..=2 {
        for n2 in -2i32..=2 {
            cands.push(k - g[0] * n1 as f64 - g[1] * n2 as f64);
        }
    }
    let best = cands.iter().map(|c| c.norm()).fold(f64::INFINITY, f64::min);
    let tol = 1e-9 * g[0].norm();
    cands
        .into_iter()
        .filter(|c| c.norm() <= best + tol)
        .min_by(|a, b| {
            let (ta, tb) = (angle(*a), angle(*b));
            // angles within tolerance of 2π wrap to zero
            let wrap = |t: f64| if TAU - t < 1e-9 { 0.0 } else { t };
            wrap(ta).total_cmp(&wrap(tb))
        })
        .expect("candidate set is non-empty")
}

fn zeros_2d(model: &BandModel, grid: usize) -> (Vec<DiracPoint>, f64) {
    let g = model.reciprocal();
    let at = |j1: usize, j2: usize| g[0] * (j1 as f64 / grid as f64) + g[1] * (j2 as f64 / grid as f64);
    let vals: Vec<f64> = (0..grid * grid)
        .into_par_iter()
        .map(|idx| model.off_diagonal(at(idx / grid, idx % grid)).norm())
        .collect();
    let grid_min = vals.iter().copied().fold(f64::INFINITY, f64::min);
    let val = |j1: isize, j2: isize| {
        let w = |j: isize| j.rem_euclid(grid as isize) as usize;
        vals[w(j1) * grid + w(j2)]
    };
    let mut out: Vec<DiracPoint> = Vec::new();
    for j1 in 0..grid as isize {
        for j2 in 0..grid as isize {
            let v = val(j1, j2);
            let is_min = (-1..=1)
                .flat_map(|d1| (-1..=1).map(move |d2| (d1, d2)))
                .filter(|&d| d != (0, 0))
                .all(|(d1, d2)| v <= val(j1 + d1, j2 + d2));
            if !is_min {
                continue;
            }
            let k = newton(model, at(j1 as usize, j2 as usize));
            let residual = model.off_diagonal(k).norm();
            if !(residual < DEGENERACY_TOL) {
                continue;
            }
            let k = wigner_seitz(k, &g);
            let residual = model.off_diagonal(k).norm();
            let fresh = out.iter().all(|p| {
                let d = wigner_seitz(p.k - k, &g);
                d.norm() > 1e-6 / model.lambda
            });
            if fresh {
                out.push(DiracPoint { k, residual });
            }
        }
    }
    out.sort_by(|a, b| angle(a.k).total_cmp(&angle(b.k)).then(a.k.norm().total_cmp(&b.k.norm())));
    (out, grid_min)
}

/// Linearized dispersion `E(κ) = √((κ·u)² + (κ·v)²)` around a degeneracy point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ConeGeometry {
    pub k0: Vec2,
    pub u: Vec2,
    pub v: Vec2,
    /// Axis ratio of the constant-energy ellipse.
    pub ellipticity: f64,
    /// Smallest and largest directional slopes.
    pub slopes: (f64, f64),
}

impl ConeGeometry {
    pub fn predicted_energy(&self, kappa: Vec2) -> f64 {
        kappa.dot(&self.u).hypot(kappa.dot(&self.v))
    }
}

pub fn cone_geometry(model: &BandModel, k0: Vec2) -> Result<ConeGeometry> {
    if model.dim != Dimension::Two {
        return Err(Error::invalid("cone geometry needs the honeycomb model"));
    }
    let h = model.off_diagonal(k0).norm();
    if !(h <= DEGENERACY_TOL) {
        return Err(Error::NotDegenerate(h));
    }
    let s = TAU * model.lambda;
    let mut u = Vec2::zeros();
    let mut v = Vec2::zeros();
    for b in &model.hex.b {
        let phase = s * b.dot(&k0);
        u += b * (s * model.delta * phase.cos());
        v += b * (s * model.delta * phase.sin());
    }
    for a in &model.hex.a {
        v += a * (2.0 * s * model.delta2 * (s * a.dot(&k0)).sin());
    }
    let q = u * u.transpose() + v * v.transpose();
    let half_trace = 0.5 * q.trace();
    let disc = (half_trace * half_trace - q.determinant()).max(0.0).sqrt();
    let (lo, hi) = ((half_trace - disc).max(0.0), half_trace + disc);
    let ellipticity = if lo > 0.0 { (hi / lo).sqrt() } else { f64::INFINITY };
    Ok(ConeGeometry { k0, u, v, ellipticity, slopes: (lo.sqrt(), hi.sqrt()) })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BlochSpinor {
    pub c: Complex64,
    pub d: Complex64,
    pub energy: f64,
}

/// Normalized eigenvector of the Bloch block for the `Plus` or `Minus` branch.
pub fn bloch_eigenvector(model: &BandModel, k: Vec2, branch: Branch) -> Result<BlochSpinor> {
    let x = model.off_diagonal(k);
    let m = model.mass;
    let scale = model.delta.max(m.abs());
    if x.norm() <= 1e-14 * scale && m == 0.0 {
        return Err(Error::DegeneratePoint);
    }
    let r = x.norm().hypot(m);
    let eps = match branch {
        Branch::Plus => r,
        Branch::Minus => -r,
        Branch::Singlet => return Err(Error::invalid("Bloch bands have no singlet branch")),
    };
    // Use whichever row of the eigen-equation is better conditioned.
    let (c, d) = if (eps - m).abs() >= (eps + m).abs() {
        (x, Complex64::new(eps - m, 0.0))
    } else {
        (Complex64::new(eps + m, 0.0), x.conj())
    };
    let norm = c.norm().hypot(d.norm());
    Ok(BlochSpinor { c: c / norm, d: d / norm, energy: model.e0 + eps })
}

/// Slope `2πλΔ` of the 1D cone, the natural unit for linearization ratios.
pub fn chain_cone_slope(model: &BandModel) -> f64 {
    2.0 * PI * model.lambda * model.delta
}
