use clap::{Args, Parser, Subcommand, ValueEnum};
use dirac_lattice::bloch::{band_grid, cone_geometry, find_dirac_points, BandModel, Dimension};
use dirac_lattice::deformation::{
    build_deformed_chain, build_deformed_hex, verify_oscillator_conditions, ChainDeformation, HexDeformation,
};
use dirac_lattice::design::{
    physical_layout, validity_check, DEFAULT_DIAMETER_MM, DEFAULT_PENETRATION_MM, DEFAULT_PITCH_MM,
};
use dirac_lattice::export::{self, WavefunctionMeta};
use dirac_lattice::hamiltonian::{assemble_tb, commutator_residual, ladder_matrix};
use dirac_lattice::io::{fmt_g17, lattice_from_json, lattice_to_json, write_atomic};
use dirac_lattice::lattice::build_periodic_hex;
use dirac_lattice::spectral::Branch;
use dirac_lattice::wavefunction::{assemble_spinor, gaussian_envelope_fit, sample_spatial, Level, WellProfile};
use dirac_lattice::{CellWindow, Error, LatticeGraph, LatticeParams, Vec2};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "dirac-lattice", version, about = "Deformed tight-binding lattices realizing the Dirac oscillator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a deformed (or, with --omega 0, periodic) dimer chain.
    Chain(ChainArgs),
    /// Build a deformed honeycomb window.
    Hex(HexArgs),
    /// Diagonalize a lattice and match it against the oscillator levels.
    Spectrum(SpectrumArgs),
    /// Sample the Bloch bands of the periodic lattice.
    Bands(BandsArgs),
    /// Locate band degeneracies.
    DiracPoints(DiracArgs),
    /// Linearized cone at a degeneracy point.
    Cone(ConeArgs),
    /// Sample an eigenstate on a continuous grid.
    Wavefunction(WavefunctionArgs),
    /// Check the oscillator conditions and the ladder commutator.
    Verify(VerifyArgs),
    /// Convert a lattice to a resonator layout in millimetres.
    Design(DesignArgs),
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct LatticeFlags {
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1.0)]
    penetration: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha: f64,
    #[arg(long, default_value_t = 1.0)]
    beta: f64,
}

impl LatticeFlags {
    fn params(&self, omega: f64, theta: f64) -> LatticeParams {
        LatticeParams {
            delta: self.delta,
            omega,
            lambda: self.lambda,
            penetration: self.penetration,
            alpha: self.alpha,
            beta: self.beta,
            theta,
        }
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ChainArgs {
    #[command(flatten)]
    lattice: LatticeFlags,
    #[arg(long, default_value_t = 0.05)]
    omega: f64,
    /// Number of dimers of the periodic chain (with --omega 0).
    #[arg(long, default_value_t = 10)]
    cells: usize,
    /// Cells beyond the balanced point, where couplings exceed Δ; defaults to 5·n_max.
    #[arg(long)]
    mirror: Option<usize>,
    #[arg(long, default_value = "lattice.json")]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct HexArgs {
    #[command(flatten)]
    lattice: LatticeFlags,
    #[arg(long, default_value_t = 1.0 / 15.0)]
    omega: f64,
    #[arg(long, default_value_t = 0.0)]
    theta: f64,
    /// Cell ranges `p0:p1[,q0:q1]`; omitted means the largest admissible window.
    #[arg(long)]
    window: Option<String>,
    #[arg(long, default_value = "lattice.json")]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SpectrumArgs {
    #[arg(long)]
    lattice: PathBuf,
    /// Matching tolerance in units of Δ.
    #[arg(long, default_value_t = 5e-2)]
    tol: f64,
    /// Exit with status 2 unless every level up to --assert-n has a partner.
    #[arg(long)]
    assert: bool,
    /// Highest asserted level; defaults to 7·n_max/10.
    #[arg(long)]
    assert_n: Option<usize>,
    /// Also dump the dense Hamiltonian.
    #[arg(long)]
    matrix_csv: Option<PathBuf>,
    #[arg(long, default_value = "spectrum.csv")]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum Dim {
    #[value(name = "1")]
    One,
    #[value(name = "2")]
    Two,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ModelFlags {
    #[arg(long, value_enum, default_value = "2")]
    dim: Dim,
    #[arg(long, default_value_t = 1.0)]
    delta: f64,
    #[arg(long, default_value_t = 0.0)]
    delta2: f64,
    #[arg(long, default_value_t = 0.0)]
    mass: f64,
    #[arg(long, default_value_t = 0.0)]
    e0: f64,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
}

impl ModelFlags {
    fn model(&self) -> Result<BandModel, Error> {
        let dim = match self.dim {
            Dim::One => Dimension::One,
            Dim::Two => Dimension::Two,
        };
        BandModel::new(dim, self.delta, self.delta2, self.mass, self.e0, self.lambda)
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct BandsArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long, default_value_t = 512)]
    grid: usize,
    #[arg(long, default_value = "bands.csv")]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct DiracArgs {
    #[command(flatten)]
    model: ModelFlags,
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long, default_value = "dirac_points.json")]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ConeArgs {
    #[command(flatten)]
    model: ModelFlags,
    /// Degeneracy point `kx,ky`; defaults to the first one found.
    #[arg(long)]
    k0: Option<String>,
    #[arg(long, default_value_t = 256)]
    grid: usize,
    #[arg(long, default_value = "cone.json")]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct WavefunctionArgs {
    /// Chain lattice file; defaults to the Δ=1, ω=1/20 chain trimmed so the wells fit.
    #[arg(long)]
    lattice: Option<PathBuf>,
    /// `singlet`, `plus:N` or `minus:N`.
    #[arg(long, default_value = "singlet")]
    level: String,
    #[arg(long, default_value_t = 2000)]
    samples: usize,
    /// Well width; defaults to 2λ/3.
    #[arg(long)]
    width: Option<f64>,
    /// Peaks below this fraction of the largest are left out of the envelope fit.
    #[arg(long, default_value_t = 1e-3)]
    fit_threshold: f64,
    #[arg(long, default_value = "wavefunction.csv")]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct VerifyArgs {
    #[arg(long)]
    lattice: PathBuf,
    #[arg(long, default_value = "verify.json")]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct DesignArgs {
    /// Lattice file; defaults to a periodic 6×6 honeycomb patch.
    #[arg(long)]
    lattice: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_PITCH_MM)]
    pitch_mm: f64,
    #[arg(long, default_value_t = DEFAULT_PENETRATION_MM)]
    penetration_mm: f64,
    #[arg(long, default_value_t = DEFAULT_DIAMETER_MM)]
    diameter_mm: f64,
    /// Exit with status 2 unless both validity checks pass.
    #[arg(long)]
    assert: bool,
    #[arg(long, default_value = "layout.csv")]
    out: PathBuf,
}

enum Failure {
    Invalid(Error),
    Assertion(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Invalid(e)
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
        Err(Failure::Assertion(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(2)
        }
    }
}

fn run(command: Command) -> Outcome {
    match command {
        Command::Chain(a) => chain(a),
        Command::Hex(a) => hex(a),
        Command::Spectrum(a) => spectrum(a),
        Command::Bands(a) => bands(a),
        Command::DiracPoints(a) => dirac_points(a),
        Command::Cone(a) => cone(a),
        Command::Wavefunction(a) => wavefunction(a),
        Command::Verify(a) => verify(a),
        Command::Design(a) => design(a),
    }
}

fn write(path: &Path, text: &str) -> Result<(), Error> {
    write_atomic(path, text.as_bytes())
}

fn sidecar(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn read_lattice(path: &Path) -> Result<LatticeGraph, Error> {
    lattice_from_json(&std::fs::read_to_string(path)?)
}

fn save_lattice(kind: &str, g: &LatticeGraph, out: &Path) -> Outcome {
    write(out, &lattice_to_json(g)?)?;
    println!("command={kind} sites={} bonds={} out={}", g.n_sites(), g.bonds.len(), out.display());
    Ok(())
}

fn chain(a: ChainArgs) -> Outcome {
    let l = &a.lattice;
    let def = if a.omega == 0.0 {
        ChainDeformation::periodic(l.delta, l.penetration, a.cells)?
    } else {
        let def = ChainDeformation::oscillator(l.delta, a.omega, l.penetration)?;
        match a.mirror {
            Some(m) => def.with_mirror(m),
            None => def,
        }
    };
    let g = build_deformed_chain(&def, l.params(a.omega, 0.0))?;
    save_lattice("chain", &g, &a.out)
}

fn parse_range(s: &str) -> Result<std::ops::RangeInclusive<i64>, Error> {
    let bad = || Error::InvalidParameter(format!("window range {s:?} is not of the form a:b"));
    let (lo, hi) = s.split_once(':').ok_or_else(bad)?;
    Ok(lo.trim().parse().map_err(|_| bad())?..=hi.trim().parse().map_err(|_| bad())?)
}

fn parse_window(s: &str) -> Result<CellWindow, Error> {
    let (p, q) = match s.split_once(',') {
        Some((p, q)) => (parse_range(p)?, parse_range(q)?),
        None => (parse_range(s)?, parse_range(s)?),
    };
    CellWindow::rect(p, q)
}

fn hex(a: HexArgs) -> Outcome {
    let l = &a.lattice;
    let window = match &a.window {
        Some(w) => parse_window(w)?,
        None => HexDeformation::default_window(l.delta, a.omega, a.theta)?,
    };
    let def = HexDeformation::new(l.delta, a.omega, l.penetration, a.theta, window)?;
    let g = build_deformed_hex(&def, l.params(a.omega, a.theta))?;
    save_lattice("hex", &g, &a.out)
}

fn spectrum(a: SpectrumArgs) -> Outcome {
    let g = read_lattice(&a.lattice)?;
    if let Some(path) = &a.matrix_csv {
        write(path, &assemble_tb(&g)?.to_csv())?;
    }
    let run = export::spectrum_run(&g, a.tol * g.params.delta)?;
    let top = a.assert_n.unwrap_or_else(|| run.default_assert_level());
    write(&a.out, &export::spectrum_csv(&run))?;
    write(&sidecar(&a.out), &export::spectrum_json(&run, top)?)?;
    let (ok, worst) = run.bulk_matched(top);
    let worst_text = worst.map_or("none".to_string(), fmt_g17);
    println!(
        "command=spectrum states={} edge={} assert_n={top} max_residual={worst_text} matched={ok} out={}",
        run.report.eigenvalues.len(),
        run.report.edge_count(),
        a.out.display()
    );
    if a.assert && !ok {
        return Err(Failure::Assertion(format!("levels up to n={top} not all matched (max residual {worst_text})")));
    }
    Ok(())
}

fn bands(a: BandsArgs) -> Outcome {
    let grid = band_grid(&a.model.model()?, a.grid)?;
    write(&a.out, &export::bands_csv(&grid))?;
    let gap = grid.e_plus.iter().zip(&grid.e_minus).map(|(p, m)| p - m).fold(f64::INFINITY, f64::min);
    println!("command=bands rows={} min_gap={} out={}", grid.samples.len(), fmt_g17(gap), a.out.display());
    Ok(())
}

fn dirac_points(a: DiracArgs) -> Outcome {
    let search = find_dirac_points(&a.model.model()?, a.grid)?;
    write(&a.out, &export::dirac_json(&search)?)?;
    println!(
        "command=dirac-points points={} min_gap={} out={}",
        search.points.len(),
        fmt_g17(search.min_gap),
        a.out.display()
    );
    Ok(())
}

fn parse_point(s: &str) -> Result<Vec2, Error> {
    let bad = || Error::InvalidParameter(format!("point {s:?} is not of the form kx,ky"));
    let (x, y) = s.split_once(',').ok_or_else(bad)?;
    Ok(Vec2::new(x.trim().parse().map_err(|_| bad())?, y.trim().parse().map_err(|_| bad())?))
}

fn cone(a: ConeArgs) -> Outcome {
    let model = a.model.model()?;
    let k0 = match &a.k0 {
        Some(s) => parse_point(s)?,
        None => find_dirac_points(&model, a.grid)?
            .points
            .first()
            .map(|p| p.k)
            .ok_or(Error::DegeneratePoint)?,
    };
    let c = cone_geometry(&model, k0)?;
    write(&a.out, &export::cone_json(&c)?)?;
    println!(
        "command=cone kx={} ky={} ellipticity={} out={}",
        fmt_g17(k0.x),
        fmt_g17(k0.y),
        fmt_g17(c.ellipticity),
        a.out.display()
    );
    Ok(())
}

fn parse_level(s: &str) -> Result<Level, Error> {
    if s == "singlet" {
        return Ok(Level::Singlet);
    }
    let bad = || Error::InvalidParameter(format!("level {s:?} is not singlet, plus:N or minus:N"));
    let (branch, n) = s.split_once(':').ok_or_else(bad)?;
    let branch = match branch {
        "plus" => Branch::Plus,
        "minus" => Branch::Minus,
        _ => return Err(bad()),
    };
    Ok(Level::Doublet { n: n.parse().map_err(|_| bad())?, branch })
}

fn default_wave_chain(width: f64) -> Result<LatticeGraph, Error> {
    let params = LatticeParams { alpha: 1.0, beta: 1.0, ..Default::default() };
    let def = ChainDeformation::oscillator(1.0, 0.05, params.penetration)?.limit_compression(params.lambda, width);
    build_deformed_chain(&def, params)
}

fn wavefunction(a: WavefunctionArgs) -> Outcome {
    let level = parse_level(&a.level)?;
    let (g, width) = match &a.lattice {
        Some(path) => {
            let g = read_lattice(path)?;
            let width = a.width.unwrap_or(2.0 * g.params.lambda / 3.0);
            (g, width)
        }
        None => {
            let width = a.width.unwrap_or(2.0 / 3.0);
            (default_wave_chain(width)?, width)
        }
    };
    let profile = WellProfile::new(width)?;
    let ladder = ladder_matrix(&g)?;
    let p = g.params;
    let state = assemble_spinor(&ladder, level, p.mass())?;
    let grid = sample_spatial(&state, &profile, &g, a.samples)?;
    let energy = match level {
        Level::Singlet => p.e0() - p.mass(),
        Level::Doublet { n, branch } => {
            let eps = (ladder.omega_delta() * (n as f64 + 1.0) + p.mass().powi(2)).sqrt();
            if branch == Branch::Plus { p.e0() + eps } else { p.e0() - eps }
        }
    };
    let sites: Vec<usize> = (0..g.n_sites()).collect();
    let fit = gaussian_envelope_fit(&grid.site_peaks(&g, &profile, &sites), a.fit_threshold).ok();
    let meta = WavefunctionMeta {
        level: a.level.clone(),
        energy,
        well_width: width,
        n_sites: g.n_sites(),
        fit,
        fit_threshold: a.fit_threshold,
    };
    write(&a.out, &export::wavefunction_csv(&grid))?;
    write(&sidecar(&a.out), &export::wavefunction_json(&grid, &meta)?)?;
    let r2 = fit.map_or("none".to_string(), |f| fmt_g17(f.r_squared));
    println!(
        "command=wavefunction level={} energy={} samples={} r_squared={r2} out={}",
        a.level,
        fmt_g17(energy),
        grid.x.len(),
        a.out.display()
    );
    Ok(())
}

fn verify(a: VerifyArgs) -> Outcome {
    let g = read_lattice(&a.lattice)?;
    let conditions = verify_oscillator_conditions(&g);
    let commutator = ladder_matrix(&g)
        .ok()
        .map(|l| commutator_residual(&l, g.params.omega, g.params.delta));
    write(&a.out, &export::verify_json(&conditions, commutator.as_ref())?)?;
    let comm = commutator.as_ref().map_or("none".to_string(), |c| fmt_g17(c.max_abs));
    println!(
        "command=verify cells={} max_residual={} commutator_max={comm} out={}",
        conditions.cells.len(),
        fmt_g17(conditions.max_residual),
        a.out.display()
    );
    Ok(())
}

fn design(a: DesignArgs) -> Outcome {
    let g = match &a.lattice {
        Some(path) => read_lattice(path)?,
        None => build_periodic_hex(0..=5, 0..=5, LatticeParams::default())?,
    };
    let layout = physical_layout(&g, a.pitch_mm, a.penetration_mm, a.diameter_mm)?;
    let checks = validity_check(&layout, &g);
    write(&a.out, &export::layout_csv(&layout))?;
    write(&sidecar(&a.out), &export::design_json(&layout, &checks)?)?;
    println!(
        "command=design sites={} nearest_ok={} nearest_margin={} nonbonded_ok={} nonbonded_margin={} out={}",
        layout.coords.len(),
        checks.nearest_preserved,
        fmt_g17(checks.nearest_margin),
        checks.second_neighbor_ok,
        fmt_g17(checks.nonbonded_margin),
        a.out.display()
    );
    if a.assert && !checks.passes() {
        return Err(Failure::Assertion("layout fails a validity check".into()));
    }
    Ok(())
}
