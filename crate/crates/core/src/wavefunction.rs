//! Number-basis oscillator states on the deformed chain and their spatial synthesis.
//!
//! Number states live on the B sublattice. A-site amplitudes are identified with
//! the B site of the same cell when a state is moved between sublattices.

use crate::error::{Error, Result};
use crate::hamiltonian::LadderMatrix;
use crate::lattice::{Geometry, LatticeGraph};
use crate::spectral::{doublet_eigenvectors, eigensolve_matrix, Branch};
use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rayon::prelude::*;
use std::f64::consts::PI;

#[derive(Clone, Debug, PartialEq)]
pub struct GroundStateCoefficients {
    /// Unit-norm amplitudes on the B sites, with the last entry positive.
    pub amplitudes: DVector<f64>,
    /// Factor that normalized the raw recurrence (1 for the null-space route).
    pub norm_constant: f64,
}

fn is_chain_ladder(a: &DMatrix<f64>) -> bool {
    let (r, c) = a.shape();
    c == r + 1
        && (0..r).all(|i| {
            a[(i, i)] != 0.0 && (0..c).all(|j| j == i || j == i + 1 || a[(i, j)] == 0.0)
        })
}

/// Backward recurrence `f(K) = 1`, `f(m) = −(s_m / d_m)·f(m+1)` for a chain ladder
/// with diagonal `d` and superdiagonal `s`.
pub fn ground_state_product(a: &LadderMatrix) -> Result<GroundStateCoefficients> {
    let m = &a.matrix;
    if !is_chain_ladder(m) {
        return Err(Error::Structure("product formula needs a K×(K+1) bidiagonal ladder".into()));
    }
    let k = m.nrows();
    let mut f = DVector::zeros(k + 1);
    f[k] = 1.0;
    let mut scale = 1.0;
    for i in (0..k).rev() {
        f[i] = -m[(i, i + 1)] / m[(i, i)] * f[i + 1];
        if f[i].abs() > 1e150 {
            f.rows_mut(i, k + 1 - i).scale_mut(1e-150);
            scale *= 1e-150;
        }
    }
    let norm = f.norm();
    Ok(GroundStateCoefficients { amplitudes: f / norm, norm_constant: scale / norm })
}

/// Null vector of the ladder from the smallest eigenpair of `aᵀa`.
pub fn ground_state_nullspace(a: &LadderMatrix) -> Result<GroundStateCoefficients> {
    let ata = a.matrix.transpose() * &a.matrix;
    let eig = eigensolve_matrix(&ata)?;
    let scale = a.matrix.amax().max(f64::MIN_POSITIVE);
    if eig.values[0] > 1e-10 * scale * scale {
        return Err(Error::NoGroundState(eig.values[0].sqrt()));
    }
    let mut v = eig.vector(0);
    let big = v.amax();
    if let Some(last) = v.iter().rev().find(|x| x.abs() > 1e-8 * big) {
        if *last < 0.0 {
            v.neg_mut();
        }
    }
    Ok(GroundStateCoefficients { amplitudes: v, norm_constant: 1.0 })
}

/// Ground state `a·φ₀ = 0`: the product formula for chain ladders, the null space otherwise.
pub fn ground_state_coeffs(a: &LadderMatrix) -> Result<GroundStateCoefficients> {
    if is_chain_ladder(&a.matrix) {
        ground_state_product(a)
    } else {
        ground_state_nullspace(a)
    }
}

/// Copies a B-space vector onto the A sites of the same cells.
pub fn to_row_space(a: &LadderMatrix, v: &DVector<f64>) -> DVector<f64> {
    let partners = a.partners();
    DVector::from_iterator(partners.len(), partners.iter().map(|p| p.map_or(0.0, |c| v[c])))
}

/// `φ_{n+1} = aᵀ φ_n / √(ωΔ(n+1))`.
pub fn raise(a: &LadderMatrix, phi_n: &DVector<f64>, n: usize) -> Result<DVector<f64>> {
    let Some(top) = a.n_max else {
        return Err(Error::invalid("ladder has no discrete number basis (ω = 0)"));
    };
    if n >= top {
        let radicand = a.delta * a.delta - (n as f64 + 1.0) * a.omega_delta();
        return Err(Error::Truncation { n: n as i64 + 1, radicand });
    }
    if phi_n.len() != a.matrix.ncols() {
        return Err(Error::invalid("state length does not match the ladder columns"));
    }
    let up = a.matrix.transpose() * to_row_space(a, phi_n);
    Ok(up / (a.omega_delta() * (n as f64 + 1.0)).sqrt())
}

/// `φ_0 ..= φ_count` by repeated raising.
pub fn number_states(a: &LadderMatrix, count: usize) -> Result<Vec<DVector<f64>>> {
    let mut states = vec![ground_state_coeffs(a)?.amplitudes];
    for n in 0..count {
        let next = raise(a, &states[n], n)?;
        states.push(next);
    }
    Ok(states)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Level {
    Singlet,
    Doublet { n: usize, branch: Branch },
}

/// Site-basis eigenvector (A sites first) of the requested level.
pub fn assemble_spinor(a: &LadderMatrix, level: Level, mass: f64) -> Result<DVector<f64>> {
    let (rows, cols) = a.matrix.shape();
    let mut out = DVector::zeros(rows + cols);
    match level {
        Level::Singlet => {
            let phi = ground_state_coeffs(a)?.amplitudes;
            out.rows_mut(rows, cols).copy_from(&phi);
        }
        Level::Doublet { n, branch } => {
            if branch == Branch::Singlet {
                return Err(Error::invalid("doublet branch must be plus or minus"));
            }
            let states = number_states(a, n + 1)?;
            let upper = to_row_space(a, &states[n]);
            let pair = doublet_eigenvectors(0.0, mass, a.omega_delta(), n, &upper, &states[n + 1])?;
            let s = if branch == Branch::Plus { &pair[1] } else { &pair[0] };
            out.rows_mut(0, rows).copy_from(&s.upper_vector);
            out.rows_mut(rows, cols).copy_from(&s.lower_vector);
            let norm = out.norm();
            out /= norm;
        }
    }
    Ok(out)
}

/// Ground state of an infinitely deep square well: `√(2/w)·cos(πx/w)` on `|x| < w/2`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct WellProfile {
    pub width: f64,
}

impl WellProfile {
    pub fn new(width: f64) -> Result<Self> {
        if !(width > 0.0 && width.is_finite()) {
            return Err(Error::invalid(format!("well width must be positive, got {width}")));
        }
        Ok(WellProfile { width })
    }

    pub fn value(&self, x: f64) -> f64 {
        if x.abs() < 0.5 * self.width {
            (2.0 / self.width).sqrt() * (PI * x / self.width).cos()
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct WavefunctionGrid {
    pub x: Vec<f64>,
    pub psi: Vec<f64>,
    pub dx: f64,
    /// `Σψ²dx` before renormalization.
    pub raw_norm: f64,
}

impl WavefunctionGrid {
    /// Largest `|ψ|` inside each listed site's well, paired with the site position.
    pub fn site_peaks(&self, graph: &LatticeGraph, profile: &WellProfile, sites: &[usize]) -> Vec<(f64, f64)> {
        sites
            .iter()
            .map(|&s| {
                let c = graph.sites[s].position.x;
                let peak = self
                    .x
                    .iter()
                    .zip(&self.psi)
                    .filter(|(x, _)| (*x - c).abs() < 0.5 * profile.width)
                    .map(|(_, p)| p.abs())
                    .fold(0.0, f64::max);
                (c, peak)
            })
            .collect()
    }
}

/// `ψ(x) = Σ amplitude·ξ(x − x_site)` on a uniform grid spanning the chain with a 2λ margin.
pub fn sample_spatial(
    state: &DVector<f64>,
    profile: &WellProfile,
    graph: &LatticeGraph,
    n_samples: usize,
) -> Result<WavefunctionGrid> {
    if graph.geometry != Geometry::Chain {
        return Err(Error::Structure("spatial sampling is defined on chains".into()));
    }
    if state.len() != graph.n_sites() {
        return Err(Error::invalid("state length does not match the lattice"));
    }
    if n_samples < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let mut order: Vec<usize> = (0..graph.n_sites()).collect();
    order.sort_by(|&i, &j| graph.sites[i].position.x.total_cmp(&graph.sites[j].position.x));
    let xs: Vec<f64> = order.iter().map(|&i| graph.sites[i].position.x).collect();
    if let Some(k) = xs.windows(2).position(|w| w[1] - w[0] < profile.width) {
        return Err(Error::Profile(format!(
            "wells of sites {} and {} overlap: separation {} < width {}",
            order[k],
            order[k + 1],
            xs[k + 1] - xs[k],
            profile.width
        )));
    }
    let margin = 2.0 * graph.params.lambda;
    let (lo, hi) = (xs[0] - margin, xs[xs.len() - 1] + margin);
    let dx = (hi - lo) / (n_samples - 1) as f64;
    let x: Vec<f64> = (0..n_samples).map(|j| lo + dx * j as f64).collect();
    let mut psi: Vec<f64> = x
        .par_iter()
        .map(|&xv| {
            // Non-overlapping wells: only the nearest site can contribute.
            let k = xs.partition_point(|&s| s < xv);
            [k.checked_sub(1), (k < xs.len()).then_some(k)]
                .into_iter()
                .flatten()
                .map(|j| state[order[j]] * profile.value(xv - xs[j]))
                .sum()
        })
        .collect();
    let raw_norm: f64 = psi.iter().map(|p| p * p).sum::<f64>() * dx;
    if !(raw_norm > 0.0) {
        return Err(Error::Profile("state has no weight on the sampling grid".into()));
    }
    let s = raw_norm.sqrt();
    psi.iter_mut().for_each(|p| *p /= s);
    Ok(WavefunctionGrid { x, psi, dx, raw_norm })
}

/// Least-squares parabola through `(x, ln y)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnvelopeFit {
    /// Coefficients of `c0 + c1·x + c2·x²`.
    pub coeffs: [f64; 3],
    pub r_squared: f64,
    pub center: f64,
}

/// Fits `ln|peak|` against position over peaks at least `rel_threshold` of the maximum.
pub fn gaussian_envelope_fit(peaks: &[(f64, f64)], rel_threshold: f64) -> Result<EnvelopeFit> {
    let top = peaks.iter().map(|p| p.1.abs()).fold(0.0, f64::max);
    let pts: Vec<(f64, f64)> = peaks
        .iter()
        .filter(|p| p.1.abs() >= rel_threshold * top && p.1 != 0.0)
        .map(|&(x, y)| (x, y.abs().ln()))
        .collect();
    if pts.len() < 4 {
        return Err(Error::Profile(format!("only {} peaks above threshold", pts.len())));
    }
    let x0 = pts.iter().map(|p| p.0).sum::<f64>() / pts.len() as f64;
    let mut ata = Matrix3::zeros();
    let mut aty = Vector3::zeros();
    for &(x, y) in &pts {
        let t = x - x0;
        let row = Vector3::new(1.0, t, t * t);
        ata += row * row.transpose();
        aty += row * y;
    }
    let c = ata
        .cholesky()
        .ok_or_else(|| Error::Profile("degenerate peak positions".into()))?
        .solve(&aty);
    let mean = pts.iter().map(|p| p.1).sum::<f64>() / pts.len() as f64;
    let (mut ss_res, mut ss_tot) = (0.0, 0.0);
    for &(x, y) in &pts {
        let t = x - x0;
        let model = c[0] + c[1] * t + c[2] * t * t;
        ss_res += (y - model).powi(2);
        ss_tot += (y - mean).powi(2);
    }
    // Expand the shifted polynomial back to absolute positions.
    let coeffs = [c[0] - c[1] * x0 + c[2] * x0 * x0, c[1] - 2.0 * c[2] * x0, c[2]];
    Ok(EnvelopeFit { coeffs, r_squared: 1.0 - ss_res / ss_tot, center: x0 - c[1] / (2.0 * c[2]) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::deformation::{build_deformed_chain, ChainDeformation};
    use crate::hamiltonian::{assemble_tb, ladder_matrix};
    use crate::lattice::{build_periodic_chain, LatticeParams};

    fn twenty_levels(mirror: usize) -> (LatticeGraph, LadderMatrix) {
        let def = ChainDeformation::oscillator(1.0, 0.05, 1.0).unwrap().with_mirror(mirror);
        let p = LatticeParams { alpha: 1.0, beta: 1.0, ..Default::default() };
        let g = build_deformed_chain(&def, p).unwrap();
        let a = ladder_matrix(&g).unwrap();
        (g, a)
    }

    #[test]
    fn product_matches_nullspace() {
        let (_, a) = twenty_levels(100);
        let p = ground_state_product(&a).unwrap();
        let q = ground_state_nullspace(&a).unwrap();
        assert!((&p.amplitudes - &q.amplitudes).amax() < 1e-10);
        assert!((&a.matrix * &p.amplitudes).norm() < 1e-12);
        assert!((p.amplitudes.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn signs_alternate() {
        let (_, a) = twenty_levels(100);
        let f = ground_state_coeffs(&a).unwrap().amplitudes;
        let nz: Vec<(usize, f64)> = f.iter().copied().enumerate().filter(|(_, x)| *x != 0.0).collect();
        for w in nz.windows(2) {
            let parity = (w[1].0 - w[0].0) % 2 == 1;
            assert_eq!(w[0].1 * w[1].1 < 0.0, parity);
        }
    }

    #[test]
    fn periodic_ladder_has_no_number_basis() {
        let g = build_periodic_chain(6, LatticeParams::default()).unwrap();
        let a = ladder_matrix(&g).unwrap();
        assert!(matches!(ground_state_nullspace(&a), Err(Error::NoGroundState(_))));
        let v = DVector::from_element(6, 1.0);
        assert!(matches!(raise(&a, &v, 0), Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn raising_is_orthonormal() {
        let (_, a) = twenty_levels(100);
        let states = number_states(&a, 10).unwrap();
        for (i, si) in states.iter().enumerate() {
            for (j, sj) in states.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((si.dot(sj) - want).abs() < 1e-8, "{i} {j}");
            }
        }
        assert!(matches!(raise(&a, &states[0], 20), Err(Error::Truncation { .. })));
    }

    #[test]
    fn spinors_are_eigenvectors() {
        let (g, a) = twenty_levels(100);
        let h = assemble_tb(&g).unwrap();
        let singlet = assemble_spinor(&a, Level::Singlet, h.mass).unwrap();
        assert!((&h.matrix * &singlet - &singlet * (h.e0 - h.mass)).norm() < 1e-9);
        assert!(singlet.rows(0, a.matrix.nrows()).iter().all(|&x| x == 0.0));
        let d0 = assemble_spinor(&a, Level::Doublet { n: 0, branch: Branch::Plus }, 0.0).unwrap();
        let na = a.matrix.nrows();
        let (up, down) = (d0.rows(0, na).norm_squared(), d0.rows(na, d0.len() - na).norm_squared());
        assert!((up - down).abs() < 1e-10);
        let e = 1.0 + 0.05f64.sqrt();
        assert!((&h.matrix * &d0 - &d0 * e).norm() < 5e-2);
    }

    #[test]
    fn single_site_reproduces_profile() {
        let g = build_periodic_chain(3, LatticeParams::default()).unwrap();
        let prof = WellProfile::new(2.0 / 3.0).unwrap();
        let mut v = DVector::zeros(6);
        v[4] = 1.0;
        let w = sample_spatial(&v, &prof, &g, 4001).unwrap();
        let c = g.sites[4].position.x;
        for (x, p) in w.x.iter().zip(&w.psi) {
            assert!((p * w.raw_norm.sqrt() - prof.value(x - c)).abs() < 1e-14);
        }
        assert!((w.raw_norm - 1.0).abs() < 1e-3);
        let norm: f64 = w.psi.iter().map(|p| p * p).sum::<f64>() * w.dx;
        assert!((norm - 1.0).abs() < 1e-12);
    }

    #[test]
    fn overlapping_wells_rejected() {
        let g = build_periodic_chain(3, LatticeParams::default()).unwrap();
        let prof = WellProfile::new(1.5).unwrap();
        let v = DVector::from_element(6, 1.0);
        assert!(matches!(sample_spatial(&v, &prof, &g, 100), Err(Error::Profile(_))));
    }

    #[test]
    fn exact_parabola_fits_perfectly() {
        let peaks: Vec<(f64, f64)> =
            (0..20).map(|i| (i as f64, (-(i as f64 - 7.5).powi(2) / 9.0).exp())).collect();
        let fit = gaussian_envelope_fit(&peaks, 1e-6).unwrap();
        assert!((fit.r_squared - 1.0).abs() < 1e-12);
        assert!((fit.center - 7.5).abs() < 1e-9);
        assert!((fit.coeffs[2] + 1.0 / 9.0).abs() < 1e-12);
    }
}
