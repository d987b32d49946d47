use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use hct_transfer::field::{read_field, write_field};
use hct_transfer::harness::{self, StudyConfig, StudyReport, VizSource};
use hct_transfer::mesh::{generate_structured, generate_unstructured, read_mesh, write_mesh};
use hct_transfer::metrics::{l2_error, mass_variation};
use hct_transfer::{hct, transfer, DGField, Domain, Method, QuadSpec, TestFunction, TransferConfig, TriMesh};

/// Caps the worker pool size.
const THREADS_ENV: &str = "HCT_THREADS";

#[derive(Parser)]
#[command(name = "hct-transfer", version, about = "Solution transfer between non-matching triangular meshes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a structured or unstructured triangulation of a rectangle.
    GenerateMesh(GenerateMesh),
    /// L2-project a test function onto a mesh.
    Project(Project),
    /// Transfer a field between two meshes.
    Transfer(Transfer),
    /// Mass variation of TRANS1 under the eight quadrature rules.
    StudyQuadrature(Study),
    /// Mass variation per method, degree and grid.
    StudyMass(Study),
    /// L2 error and observed order per method, degree and grid.
    StudyError(Study),
    /// Legacy-VTK export of a field or its smoothed surrogate.
    ExportViz(ExportViz),
}

#[derive(Clone, Copy, ValueEnum)]
enum MeshKind {
    Structured,
    Unstructured,
}

#[derive(Args)]
struct GenerateMesh {
    #[arg(long, value_enum)]
    kind: MeshKind,
    /// x0,x1,y0,y1
    #[arg(long, value_parser = parse_domain)]
    domain: Domain,
    /// Cells per side (structured).
    #[arg(long, required_if_eq("kind", "structured"))]
    n: Option<usize>,
    /// Nominal element diameter (unstructured).
    #[arg(long, required_if_eq("kind", "unstructured"))]
    target_h: Option<f64>,
    #[arg(long, default_value_t = harness::DEFAULT_SEED)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Project {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long, default_value = "u1")]
    function: TestFunction,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value = "15x1")]
    quad: QuadSpec,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct Transfer {
    #[arg(long, default_value = "TRANS2")]
    method: Method,
    #[arg(long, default_value_t = 1)]
    k: usize,
    #[arg(long, default_value = "15x1")]
    quad: QuadSpec,
    #[arg(long)]
    source_mesh: PathBuf,
    #[arg(long)]
    target_mesh: PathBuf,
    /// Projected onto the source mesh when no source field is given.
    #[arg(long, default_value = "u1")]
    function: TestFunction,
    /// Existing field on the source mesh.
    #[arg(long)]
    source_field: Option<PathBuf>,
    #[arg(long)]
    out_field: Option<PathBuf>,
    /// Print mass variation and L2 error; to a file when a path is given.
    #[arg(long, num_args = 0..=1)]
    report: Option<Option<PathBuf>>,
}

#[derive(Args)]
struct Study {
    /// key=value file; flags override its settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    function: Option<String>,
    /// Grid range, e.g. 2-6.
    #[arg(long)]
    grids: Option<String>,
    /// Comma-separated method names.
    #[arg(long)]
    methods: Option<String>,
    /// Comma-separated degrees.
    #[arg(long)]
    degrees: Option<String>,
    /// Comma-separated quadrature specs such as 15x1.
    #[arg(long)]
    quads: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    /// Record wall-clock seconds per transfer (makes output run-dependent).
    #[arg(long)]
    timings: bool,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ExportViz {
    #[arg(long)]
    mesh: PathBuf,
    /// Field file; otherwise the function is projected onto the mesh.
    #[arg(long)]
    field: Option<PathBuf>,
    #[arg(long, default_value = "u1")]
    function: TestFunction,
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Export the C1 surrogate instead of the raw field.
    #[arg(long)]
    smooth: bool,
    #[arg(long)]
    out: PathBuf,
}

fn parse_domain(s: &str) -> Result<Domain, String> {
    let v: Vec<f64> =
        s.split(',').map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t}: {e}"))).collect::<Result<_, _>>()?;
    if v.len() != 4 {
        return Err("expected x0,x1,y0,y1".into());
    }
    Domain::new(v[0], v[1], v[2], v[3]).map_err(|e| e.to_string())
}

fn load_mesh(path: &Path) -> Result<Arc<TriMesh>> {
    Ok(Arc::new(read_mesh(path).with_context(|| format!("reading mesh {}", path.display()))?))
}

fn configure_threads() -> Result<()> {
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v.trim().parse().with_context(|| format!("{THREADS_ENV}={v}"))?;
        if n == 0 {
            bail!("{THREADS_ENV} must be positive");
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global()?;
    }
    Ok(())
}

fn generate(a: GenerateMesh) -> Result<()> {
    let mesh = match a.kind {
        MeshKind::Structured => generate_structured(&a.domain, a.n.context("--n is required")?)?,
        MeshKind::Unstructured => {
            generate_unstructured(&a.domain, a.target_h.context("--target-h is required")?, a.seed)?
        }
    };
    write_mesh(&mesh, &a.out)?;
    eprintln!("{} vertices, {} triangles, h = {:.6}", mesh.num_vertices(), mesh.num_triangles(), mesh.h());
    Ok(())
}

fn project(a: Project) -> Result<()> {
    let mesh = load_mesh(&a.mesh)?;
    let f = a.function;
    let field = hct_transfer::field::project_analytic(mesh, a.k, move |x, y| f.eval(x, y), &a.quad.realize())?;
    write_field(&field, &a.out)?;
    Ok(())
}

fn run_transfer(a: Transfer) -> Result<()> {
    let src = load_mesh(&a.source_mesh)?;
    let tgt = load_mesh(&a.target_mesh)?;
    let u = match &a.source_field {
        Some(p) => read_field(p, src)?,
        None => harness::source_field(a.function, src, a.k)?,
    };
    let cfg = TransferConfig::new(a.method, a.k, a.quad)?;
    let g = transfer(&u, tgt, &cfg)?;
    if let Some(p) = &a.out_field {
        write_field(&g, p)?;
    }
    if let Some(dest) = a.report {
        let text = format!(
            "method={}\nk={}\nquad={}\nmv={:e}\nl2={:e}\n",
            a.method,
            a.k,
            a.quad,
            mass_variation(&u, &g),
            l2_error(&u, &g)?
        );
        match dest {
            Some(p) => fs::write(p, text)?,
            None => print!("{text}"),
        }
    }
    Ok(())
}

fn study_config(a: &Study) -> Result<StudyConfig> {
    let mut cfg = StudyConfig::default();
    if let Some(p) = &a.config {
        cfg.load(p)?;
    }
    let flags = [
        ("function", &a.function),
        ("grids", &a.grids),
        ("methods", &a.methods),
        ("degrees", &a.degrees),
        ("quads", &a.quads),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            cfg.set(k, v)?;
        }
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    cfg.timings |= a.timings;
    if let Some(o) = &a.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn emit(report: &StudyReport, cfg: &StudyConfig) -> Result<()> {
    eprint!("{}", report.mesh_log());
    match &cfg.output {
        Some(p) => report.save(Some(p))?,
        None => io::stdout().write_all(report.csv().as_bytes())?,
    }
    Ok(())
}

fn export(a: ExportViz) -> Result<()> {
    let mesh = load_mesh(&a.mesh)?;
    let field: DGField = match &a.field {
        Some(p) => read_field(p, mesh)?,
        None => harness::source_field(a.function, mesh, a.k)?,
    };
    if a.smooth {
        let s = hct::smooth(&field)?;
        harness::export_viz(&VizSource::Surrogate(&s), &a.out)?;
    } else {
        harness::export_viz(&VizSource::Field(&field), &a.out)?;
    }
    Ok(())
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    configure_threads()?;
    match cli.command {
        Command::GenerateMesh(a) => generate(a),
        Command::Project(a) => project(a),
        Command::Transfer(a) => run_transfer(a),
        Command::StudyQuadrature(a) => {
            let cfg = study_config(&a)?;
            emit(&harness::run_quadrature_study(&cfg)?, &cfg)
        }
        Command::StudyMass(a) => {
            let cfg = study_config(&a)?;
            emit(&harness::run_mass_study(&cfg)?, &cfg)
        }
        Command::StudyError(a) => {
            let cfg = study_config(&a)?;
            emit(&harness::run_error_study(&cfg)?, &cfg)
        }
        Command::ExportViz(a) => export(a),
    }
}
