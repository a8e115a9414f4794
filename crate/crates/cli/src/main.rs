//! `dcflow`: validate meshes, evaluate curvature, run flows and solve for
//! prescribed curvature from JSON mesh documents.
//!
//! Exit status: 0 on success, 1 when validation fails or a run does not
//! converge, 2 on parse or configuration errors.

mod document;
mod trace;

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use dcflow::flows::{check_target, run_flow_with_sink, FlowKind, FlowSpec, Integrator, NullSink, Termination, TraceSink};
use dcflow::geometry::{curvature, gauss_bonnet_residual, ConformalState, DegeneracyClass, Geometry};
use dcflow::solve::solve_prescribed;
use dcflow::surface::{generate, validate_weights, SurfaceKind, WeightConfig};
use dcflow::Error;
use serde_json::json;
use thiserror::Error;

use document::{Mesh, MeshDocument};
use trace::CsvSink;

#[derive(Debug, Error)]
pub enum CliError {
    /// Exit status 2.
    #[error("{0}")]
    Config(String),
    /// Exit status 1.
    #[error("{0}")]
    Failed(String),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Failed(_) => 1,
        }
    }
}

#[derive(Parser)]
#[command(name = "dcflow", version, about = "Discrete conformal structures, Ricci and Calabi flows")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check that a document describes a closed surface with admissible weights.
    Validate { mesh: PathBuf },
    /// Edge lengths, angles and curvature at the document's factors.
    Curvature {
        mesh: PathBuf,
        /// Use the extended angles so degenerate faces are allowed.
        #[arg(long)]
        extended: bool,
    },
    /// Run a flow from the document's factors (or from f = 0).
    Flow {
        mesh: PathBuf,
        #[arg(long)]
        kind: FlowKind,
        /// `const:x` or a JSON file holding an array of per-vertex values.
        #[arg(long)]
        target: Option<String>,
        #[arg(long, default_value = "euler")]
        integrator: Integrator,
        #[arg(long, default_value_t = 1e-2)]
        dt: f64,
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
        #[arg(long, default_value_t = 100.0)]
        max_time: f64,
        /// CSV trace output.
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        stride: usize,
        /// Shift the initial state along the all-ones vector to this sum
        /// (Euclidean only).
        #[arg(long)]
        normalize_sum: Option<f64>,
    },
    /// Solve for factors with prescribed curvature.
    Solve {
        mesh: PathBuf,
        #[arg(long)]
        target: Option<String>,
        /// Output document with the solution factors.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Write a generated mesh document.
    Gen {
        kind: GenKind,
        /// Grid size for `torus` (default 3 3).
        dims: Vec<usize>,
        #[arg(long, default_value_t = 1)]
        epsilon: u8,
        #[arg(long, default_value_t = 1.0, allow_negative_numbers = true)]
        eta: f64,
        #[arg(long, value_enum, default_value = "euclidean")]
        geometry: GeometryArg,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum GenKind {
    Tetrahedron,
    Octahedron,
    Icosahedron,
    Torus,
    Genus2,
}

#[derive(Clone, Copy, ValueEnum)]
enum GeometryArg {
    Euclidean,
    Hyperbolic,
}

impl From<GeometryArg> for Geometry {
    fn from(g: GeometryArg) -> Self {
        match g {
            GeometryArg::Euclidean => Geometry::Euclidean,
            GeometryArg::Hyperbolic => Geometry::Hyperbolic,
        }
    }
}

/// Prints to stdout; a closed pipe is not an error.
fn print_out(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = writeln!(out, "{text}");
}

fn load(path: &Path) -> Result<Mesh, CliError> {
    MeshDocument::read(path)?.into_mesh()
}

fn require_structure(mesh: &Mesh) -> Result<(), CliError> {
    let report = validate_weights(&mesh.surface, &mesh.weights);
    if report.passed() {
        return Ok(());
    }
    let list: Vec<String> = report.violations.iter().map(|v| v.to_string()).collect();
    Err(CliError::Failed(format!("structure conditions fail: {}", list.join("; "))))
}

fn parse_target(spec: Option<&str>, mesh: &Mesh) -> Result<Option<Vec<f64>>, CliError> {
    let n = mesh.surface.vertex_count();
    let Some(spec) = spec else {
        return Ok(mesh.target.clone());
    };
    let values = if let Some(x) = spec.strip_prefix("const:") {
        let x: f64 = x
            .trim()
            .parse()
            .map_err(|_| CliError::Config(format!("bad constant target `{x}`")))?;
        vec![x; n]
    } else {
        let text = std::fs::read_to_string(spec)
            .map_err(|e| CliError::Config(format!("cannot read target {spec}: {e}")))?;
        let values: Vec<f64> = serde_json::from_str(&text)
            .map_err(|e| CliError::Config(format!("target {spec} is not a JSON number array: {e}")))?;
        values
    };
    if values.len() != n {
        return Err(CliError::Config(format!("target has {} entries, expected {n}", values.len())));
    }
    Ok(Some(values))
}

fn initial_state(mesh: &Mesh) -> ConformalState {
    mesh.state
        .clone()
        .unwrap_or_else(|| ConformalState::base(mesh.geometry, &mesh.weights))
}

fn cmd_validate(path: &Path) -> Result<ExitCode, CliError> {
    let mesh = load(path)?;
    let s = &mesh.surface;
    println!(
        "surface: {} vertices, {} edges, {} faces, euler characteristic {}",
        s.vertex_count(),
        s.edge_count(),
        s.face_count(),
        s.euler_characteristic()
    );
    println!("manifold: ok");
    let report = validate_weights(s, &mesh.weights);
    if report.passed() {
        println!("structure conditions: ok");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("structure conditions: {} violation(s)", report.violations.len());
        for v in &report.violations {
            println!("  {v}");
        }
        Ok(ExitCode::from(1))
    }
}

fn cmd_curvature(path: &Path, extended: bool) -> Result<ExitCode, CliError> {
    let mesh = load(path)?;
    require_structure(&mesh)?;
    let state = mesh
        .state
        .clone()
        .ok_or_else(|| CliError::Config("document carries no factors (u or f)".into()))?;
    let s = &mesh.surface;
    let report = curvature(s, &mesh.weights, &state, extended).map_err(|e| match e {
        Error::DegenerateFace { face } => CliError::Failed(format!(
            "face {face} {:?} is degenerate; rerun with --extended",
            s.faces()[face]
        )),
        other => CliError::Failed(other.to_string()),
    })?;
    let lengths: serde_json::Map<String, serde_json::Value> = s
        .edges()
        .iter()
        .zip(&report.lengths)
        .map(|([i, j], l)| (format!("{i}-{j}"), json!(l)))
        .collect();
    let faces: Vec<_> = (0..s.face_count())
        .map(|f| {
            let vs = s.faces()[f];
            let at = match report.classes[f] {
                DegeneracyClass::Nondegenerate => None,
                DegeneracyClass::DegenerateAt(q) => Some(vs[q]),
            };
            json!({ "face": f, "vertices": vs, "angles": report.angles[f], "degenerate_at": at })
        })
        .collect();
    let out = json!({
        "geometry": document::GeometryTag::from(mesh.geometry),
        "extended": extended,
        "lengths": lengths,
        "faces": faces,
        "curvature": report.curvature,
        "area": report.area,
        "gauss_bonnet_residual": gauss_bonnet_residual(&report, s.euler_characteristic()),
    });
    print_out(&serde_json::to_string_pretty(&out).expect("report serializes"));
    Ok(ExitCode::SUCCESS)
}

#[allow(clippy::too_many_arguments)]
fn cmd_flow(
    path: &Path,
    kind: FlowKind,
    target: Option<&str>,
    integrator: Integrator,
    dt: f64,
    tol: f64,
    max_time: f64,
    trace: Option<&Path>,
    stride: usize,
    normalize_sum: Option<f64>,
) -> Result<ExitCode, CliError> {
    let mesh = load(path)?;
    require_structure(&mesh)?;
    if !(dt > 0.0 && tol > 0.0 && max_time >= 0.0 && stride > 0) {
        return Err(CliError::Config("dt, tol and stride must be positive, max-time nonnegative".into()));
    }
    let mut spec = FlowSpec::new(kind, mesh.geometry)
        .with_integrator(integrator)
        .with_dt(dt)
        .with_tol(tol)
        .with_max_time(max_time)
        .with_stride(stride);
    spec.target = parse_target(target, &mesh)?;
    spec.normalize_sum = normalize_sum;
    let report = check_target(&spec, &mesh.surface);
    if !report.passed() {
        return Err(CliError::Config(format!(
            "inadmissible target: {}",
            report.violations.join("; ")
        )));
    }
    let state = initial_state(&mesh);
    let run = |sink: &mut dyn TraceSink| {
        run_flow_with_sink(&spec, &mesh.surface, &mesh.weights, &state, sink)
            .map_err(|e| CliError::Config(e.to_string()))
    };
    let result = match trace {
        Some(p) => {
            let file = File::create(p)
                .map_err(|e| CliError::Config(format!("cannot create {}: {e}", p.display())))?;
            let mut sink = CsvSink::new(BufWriter::new(file), mesh.surface.vertex_count())
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display())))?;
            let r = run(&mut sink)?;
            sink.finish()
                .map_err(|e| CliError::Config(format!("cannot write {}: {e}", p.display())))?;
            r
        }
        None => run(&mut NullSink)?,
    };
    println!("termination: {}", result.termination);
    println!("final residual: {:e}", result.final_residual);
    println!("time: {}", result.t);
    println!("steps: {}", result.steps);
    if result.initial_shift != 0.0 {
        println!("initial shift: {:e}", result.initial_shift);
    }
    if let Some(e) = &result.error {
        println!("reason: {e}");
    }
    Ok(if result.termination == Termination::Converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_solve(path: &Path, target: Option<&str>, out: Option<&Path>) -> Result<ExitCode, CliError> {
    let mesh = load(path)?;
    require_structure(&mesh)?;
    let spec = FlowSpec {
        target: parse_target(target, &mesh)?,
        ..FlowSpec::new(FlowKind::ExtendedModifiedRicci, mesh.geometry)
    };
    let report = check_target(&spec, &mesh.surface);
    if !report.passed() {
        return Err(CliError::Config(format!(
            "inadmissible target: {}",
            report.violations.join("; ")
        )));
    }
    let kbar = report.target;
    let guess = initial_state(&mesh);
    let sol = match solve_prescribed(&mesh.surface, &mesh.weights, mesh.geometry, &kbar, &guess) {
        Ok(r) => r,
        Err(Error::TargetInadmissible(m)) => return Err(CliError::Config(m)),
        Err(e) => return Err(CliError::Failed(format!("no solution: {e}"))),
    };
    println!("residual: {:e}", sol.residual);
    println!("iterations: {} ({} Newton, {} gradient)", sol.iterations, sol.newton_steps, sol.gradient_steps);
    println!("certificate: {:e}", sol.certificate);
    let doc = MeshDocument::from_parts(
        mesh.geometry,
        &mesh.surface,
        &mesh.weights,
        Some(sol.state.u().to_vec()),
        Some(kbar),
    );
    match out {
        Some(p) => doc.write(p)?,
        None => print_out(&doc.to_json()),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_gen(
    kind: GenKind,
    dims: &[usize],
    epsilon: u8,
    eta: f64,
    geometry: Geometry,
    out: Option<&Path>,
) -> Result<ExitCode, CliError> {
    let surface_kind = match kind {
        GenKind::Tetrahedron => SurfaceKind::Tetrahedron,
        GenKind::Octahedron => SurfaceKind::Octahedron,
        GenKind::Icosahedron => SurfaceKind::Icosahedron,
        GenKind::Genus2 => SurfaceKind::Genus2,
        GenKind::Torus => match dims {
            [] => SurfaceKind::TorusGrid { n: 3, m: 3 },
            [n, m] => SurfaceKind::TorusGrid { n: *n, m: *m },
            _ => return Err(CliError::Config("torus takes two sizes: n m".into())),
        },
    };
    if !matches!(kind, GenKind::Torus) && !dims.is_empty() {
        return Err(CliError::Config("only torus takes sizes".into()));
    }
    let surface = generate(surface_kind).map_err(|e| CliError::Config(e.to_string()))?;
    let weights =
        WeightConfig::uniform(&surface, epsilon, eta).map_err(|e| CliError::Config(e.to_string()))?;
    let doc = MeshDocument::from_parts(geometry, &surface, &weights, None, None);
    match out {
        Some(p) => doc.write(p)?,
        None => print_out(&doc.to_json()),
    }
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode, CliError> {
    match cli.command {
        Command::Validate { mesh } => cmd_validate(&mesh),
        Command::Curvature { mesh, extended } => cmd_curvature(&mesh, extended),
        Command::Flow {
            mesh,
            kind,
            target,
            integrator,
            dt,
            tol,
            max_time,
            trace,
            stride,
            normalize_sum,
        } => cmd_flow(
            &mesh,
            kind,
            target.as_deref(),
            integrator,
            dt,
            tol,
            max_time,
            trace.as_deref(),
            stride,
            normalize_sum,
        ),
        Command::Solve { mesh, target, out } => cmd_solve(&mesh, target.as_deref(), out.as_deref()),
        Command::Gen {
            kind,
            dims,
            epsilon,
            eta,
            geometry,
            out,
        } => cmd_gen(kind, &dims, epsilon, eta, geometry.into(), out.as_deref()),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
