use crate::lattice::{BondKind, Cell};
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("truncation: coupling radicand Δ² − nωΔ = {radicand} is negative at n = {n}")]
    Truncation { n: i64, radicand: f64 },

    #[error("window too large: {kind} radicand {radicand} at cell ({}, {}) is not positive", cell.0, cell.1)]
    WindowTooLarge { cell: Cell, kind: BondKind, radicand: f64 },

    #[error("unbounded lattice: ω = 0 has no finite truncation, an explicit window is required")]
    Unbounded,

    #[error("embedding: {} site(s) not connected to origin site {origin} (first stranded: {})", stranded.len(), stranded[0])]
    Disconnected { origin: usize, stranded: Vec<usize> },

    #[error("consistency: loop closure residual {residual:e} on bond {i}-{j} exceeds {tol:e}")]
    Closure { i: usize, j: usize, residual: f64, tol: f64 },

    #[error("assembly: duplicate bond between sites {i} and {j}")]
    DuplicateBond { i: usize, j: usize },

    #[error("size: dimension {n} exceeds the dense cap of {cap}")]
    TooLarge { n: usize, cap: usize },

    #[error("structure: {0}")]
    Structure(String),

    #[error("no ground state: ladder matrix has trivial null space (smallest singular value {0:e})")]
    NoGroundState(f64),

    #[error("degenerate block: ωΔ(n+1) vanishes")]
    DegenerateBlock,

    #[error("degenerate point: structure factor and mass both vanish")]
    DegeneratePoint,

    #[error("validation: |h(k0)| = {0:e} is not a degeneracy point")]
    NotDegenerate(f64),

    #[error("domain: {0}")]
    Domain(String),

    #[error("layout: {} overlapping resonator pair(s), first ({}, {}) at {:.6} mm", pairs.len(), pairs[0].0, pairs[0].1, pairs[0].2)]
    Overlap { pairs: Vec<(usize, usize, f64)> },

    #[error("profile: {0}")]
    Profile(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
