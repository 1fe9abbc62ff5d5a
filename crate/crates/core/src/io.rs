//! Number formatting and file output shared by every exporter.

use crate::error::{Error, Result};
use crate::lattice::{Bond, BondKind, Geometry, LatticeGraph, LatticeParams, Site, Sublattice, Vec2};
use serde::{Deserialize, Serialize, Serializer};
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::Path;
use std::str::FromStr;

pub const FORMAT_VERSION: &str = "1";

/// Formats a float with 17 significant digits in the shortest `%g` layout.
///
/// Fixed notation is used for decimal exponents in `[-4, 17)`, scientific
/// otherwise; trailing zeros are stripped in both cases.
pub fn fmt_g17(x: f64) -> String {
    if x.is_nan() {
        return "nan".into();
    }
    if x.is_infinite() {
        return if x > 0.0 { "inf".into() } else { "-inf".into() };
    }
    if x == 0.0 {
        return if x.is_sign_negative() { "-0".into() } else { "0".into() };
    }
    let sci = format!("{x:.16e}");
    let (mantissa, exp) = sci.split_once('e').expect("exponent marker");
    let exp: i32 = exp.parse().expect("integer exponent");
    if (-4..17).contains(&exp) {
        let decimals = (16 - exp).max(0) as usize;
        strip_zeros(&format!("{x:.decimals$}")).to_string()
    } else {
        let sign = if exp < 0 { '-' } else { '+' };
        format!("{}e{sign}{:02}", strip_zeros(mantissa), exp.abs())
    }
}

fn strip_zeros(s: &str) -> &str {
    if s.contains('.') {
        s.trim_end_matches('0').trim_end_matches('.')
    } else {
        s
    }
}

/// A float that serializes to JSON through [`fmt_g17`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Float(pub f64);

impl Serialize for Float {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        if !self.0.is_finite() {
            return Err(serde::ser::Error::custom(format!("non-finite value {}", self.0)));
        }
        serde_json::Number::from_str(&fmt_g17(self.0))
            .map_err(serde::ser::Error::custom)?
            .serialize(serializer)
    }
}

impl From<f64> for Float {
    fn from(x: f64) -> Self {
        Float(x)
    }
}

/// Accumulates CSV rows with a fixed header.
#[derive(Debug, Clone)]
pub struct CsvTable {
    buf: String,
    columns: usize,
}

pub enum Field<'a> {
    Num(f64),
    Int(i64),
    Text(&'a str),
    Empty,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        let mut buf = header.join(",");
        buf.push('\n');
        CsvTable { buf, columns: header.len() }
    }

    pub fn row(&mut self, fields: &[Field<'_>]) {
        debug_assert_eq!(fields.len(), self.columns);
        for (i, f) in fields.iter().enumerate() {
            if i > 0 {
                self.buf.push(',');
            }
            match f {
                Field::Num(x) => self.buf.push_str(&fmt_g17(*x)),
                Field::Int(n) => {
                    let _ = write!(self.buf, "{n}");
                }
                Field::Text(s) => self.buf.push_str(s),
                Field::Empty => {}
            }
        }
        self.buf.push('\n');
    }

    pub fn numeric_row(&mut self, values: &[f64]) {
        let fields: Vec<Field<'_>> = values.iter().map(|&x| Field::Num(x)).collect();
        self.row(&fields);
    }

    pub fn into_string(self) -> String {
        self.buf
    }
}

/// Serializes `value` as pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

/// Writes `contents` to `path` via a temporary file in the same directory and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Serialize)]
struct ParamsOut {
    delta: Float,
    omega: Float,
    lambda: Float,
    penetration: Float,
    alpha: Float,
    beta: Float,
    theta: Float,
}

#[derive(Serialize)]
struct SiteOut {
    id: usize,
    sublattice: Sublattice,
    cell: [i64; 2],
    x: Float,
    y: Float,
}

#[derive(Serialize)]
struct BondOut {
    i: usize,
    j: usize,
    kind: BondKind,
    coupling: Float,
    length: Float,
}

#[derive(Serialize)]
struct LatticeOut {
    format_version: &'static str,
    params: ParamsOut,
    sites: Vec<SiteOut>,
    bonds: Vec<BondOut>,
}

#[derive(Deserialize)]
struct ParamsIn {
    delta: f64,
    omega: f64,
    lambda: f64,
    penetration: f64,
    alpha: f64,
    beta: f64,
    theta: f64,
}

#[derive(Deserialize)]
struct SiteIn {
    id: usize,
    sublattice: Sublattice,
    cell: [i64; 2],
    x: f64,
    y: f64,
}

#[derive(Deserialize)]
struct BondIn {
    i: usize,
    j: usize,
    kind: BondKind,
    coupling: f64,
    length: f64,
}

#[derive(Deserialize)]
struct LatticeIn {
    #[serde(default)]
    format_version: Option<String>,
    params: ParamsIn,
    sites: Vec<SiteIn>,
    bonds: Vec<BondIn>,
}

pub fn lattice_to_json(graph: &LatticeGraph) -> Result<String> {
    let p = &graph.params;
    let out = LatticeOut {
        format_version: FORMAT_VERSION,
        params: ParamsOut {
            delta: Float(p.delta),
            omega: Float(p.omega),
            lambda: Float(p.lambda),
            penetration: Float(p.penetration),
            alpha: Float(p.alpha),
            beta: Float(p.beta),
            theta: Float(p.theta),
        },
        sites: graph
            .sites
            .iter()
            .map(|s| SiteOut {
                id: s.id,
                sublattice: s.sublattice,
                cell: [s.cell.0, s.cell.1],
                x: Float(s.position.x),
                y: Float(s.position.y),
            })
            .collect(),
        bonds: graph
            .bonds
            .iter()
            .map(|b| BondOut {
                i: b.i,
                j: b.j,
                kind: b.kind,
                coupling: Float(b.coupling),
                length: Float(b.length),
            })
            .collect(),
    };
    to_json(&out)
}

/// Parses and validates a lattice file. The geometry follows from the bond kinds.
pub fn lattice_from_json(text: &str) -> Result<LatticeGraph> {
    let raw: LatticeIn = serde_json::from_str(text)?;
    if let Some(v) = &raw.format_version {
        if v != FORMAT_VERSION {
            return Err(Error::invalid(format!("unsupported format_version {v:?}")));
        }
    }
    let p = raw.params;
    let params = LatticeParams {
        delta: p.delta,
        omega: p.omega,
        lambda: p.lambda,
        penetration: p.penetration,
        alpha: p.alpha,
        beta: p.beta,
        theta: p.theta,
    };
    let honeycomb = raw.bonds.iter().any(|b| matches!(b.kind, BondKind::B1 | BondKind::B2 | BondKind::B3));
    let graph = LatticeGraph {
        params,
        geometry: if honeycomb { Geometry::Honeycomb } else { Geometry::Chain },
        sites: raw
            .sites
            .into_iter()
            .map(|s| Site {
                id: s.id,
                sublattice: s.sublattice,
                cell: (s.cell[0], s.cell[1]),
                position: Vec2::new(s.x, s.y),
            })
            .collect(),
        bonds: raw
            .bonds
            .into_iter()
            .map(|b| Bond { i: b.i, j: b.j, kind: b.kind, coupling: b.coupling, length: b.length })
            .collect(),
    };
    graph.validate()?;
    Ok(graph)
}
