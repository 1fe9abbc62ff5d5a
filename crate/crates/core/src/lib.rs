//! Deformed tight-binding lattices that realize the Dirac oscillator.
//!
//! The crate builds bipartite chains and honeycomb windows whose couplings make the
//! inter-sublattice block a ladder operator, assembles and diagonalizes their
//! Hamiltonians, evaluates Bloch bands of the periodic limit, synthesizes
//! oscillator wavefunctions and converts couplings to resonator layouts.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bloch;
pub mod deformation;
pub mod design;
pub mod error;
pub mod export;
pub mod hamiltonian;
pub mod io;
pub mod lattice;
pub mod spectral;
pub mod wavefunction;

pub use error::{Error, Result};
pub use lattice::{
    Bond, BondKind, Cell, CellWindow, Geometry, HexVectors, LatticeGraph, LatticeParams, Site,
    Sublattice, Vec2,
};
