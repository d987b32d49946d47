//! Study drivers over the structured/unstructured grid sequence and
//! visualization export.
//!
//! Grid `g` (1..=7) pairs a structured source mesh of `n = 2^(g+1)` cells
//! per side with an unstructured target mesh of matching nominal size.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::field::{project_analytic, DGField, TestFunction};
use crate::hct::{self, HctSurrogate};
use crate::mesh::{generate_structured, generate_unstructured, Domain, TriMesh};
use crate::metrics::{convergence_order, format_csv, l2_error, mass_variation, StudyRow};
use crate::quadrature::{BaseRule, QuadSpec};
use crate::transfer::{transfer, Method, TransferConfig};

pub const MIN_GRID: usize = 1;
pub const MAX_GRID: usize = 7;
pub const DEFAULT_SEED: u64 = 1;

/// Reference grid family: `(grid, structured elements, unstructured
/// elements, h)` for the side-10 domain.
pub const REFERENCE_GRIDS: [(usize, usize, usize, f64); 7] = [
    (1, 32, 28, 3.535534),
    (2, 128, 124, 1.767767),
    (3, 512, 512, 0.883883),
    (4, 2048, 2064, 0.441942),
    (5, 8192, 8220, 0.220971),
    (6, 32768, 32964, 0.110485),
    (7, 131072, 130800, 0.055243),
];

/// The eight rules of the quadrature study, in reporting order.
pub const QUADRATURE_STUDY_SPECS: [QuadSpec; 8] = [
    QuadSpec { base: BaseRule::P15, level: 0 },
    QuadSpec { base: BaseRule::P15, level: 1 },
    QuadSpec { base: BaseRule::P3, level: 0 },
    QuadSpec { base: BaseRule::P3, level: 1 },
    QuadSpec { base: BaseRule::P3, level: 2 },
    QuadSpec { base: BaseRule::P3, level: 3 },
    QuadSpec { base: BaseRule::P6, level: 1 },
    QuadSpec { base: BaseRule::P6, level: 2 },
];

/// Cells per side of the structured mesh of grid `g`.
pub fn structured_n(grid: usize) -> usize {
    1 << (grid + 1)
}

/// Largest element diameter of grid `g` over `domain`.
pub fn grid_h(domain: &Domain, grid: usize) -> f64 {
    domain.width() / structured_n(grid) as f64 * std::f64::consts::SQRT_2
}

fn check_grid(grid: usize) -> Result<()> {
    if !(MIN_GRID..=MAX_GRID).contains(&grid) {
        return Err(Error::Config(format!("grid {grid} outside {MIN_GRID}..={MAX_GRID}")));
    }
    Ok(())
}

/// Source and target meshes of one grid row.
#[derive(Debug, Clone)]
pub struct GridPair {
    pub grid: usize,
    pub source: Arc<TriMesh>,
    pub target: Arc<TriMesh>,
}

pub fn grid_pair(domain: &Domain, grid: usize, seed: u64) -> Result<GridPair> {
    check_grid(grid)?;
    let source = generate_structured(domain, structured_n(grid))?;
    let target = generate_unstructured(domain, grid_h(domain, grid), seed)?;
    Ok(GridPair { grid, source: Arc::new(source), target: Arc::new(target) })
}

/// Realized element counts of one grid next to the reference family.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeshCount {
    pub grid: usize,
    pub structured: usize,
    pub unstructured: usize,
    pub reference_structured: usize,
    pub reference_unstructured: usize,
}

impl MeshCount {
    fn of(pair: &GridPair) -> Self {
        let r = REFERENCE_GRIDS[pair.grid - 1];
        MeshCount {
            grid: pair.grid,
            structured: pair.source.num_triangles(),
            unstructured: pair.target.num_triangles(),
            reference_structured: r.1,
            reference_unstructured: r.2,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct StudyReport {
    pub rows: Vec<StudyRow>,
    pub meshes: Vec<MeshCount>,
}

impl StudyReport {
    pub fn csv(&self) -> String {
        format_csv(&self.rows)
    }

    pub fn mesh_log(&self) -> String {
        let mut s = String::from("grid  structured (reference)  unstructured (reference)\n");
        for m in &self.meshes {
            let _ = writeln!(
                s,
                "{:>4}  {:>10} ({:>11})  {:>12} ({:>11})",
                m.grid, m.structured, m.reference_structured, m.unstructured, m.reference_unstructured
            );
        }
        s
    }

    /// Writes the CSV to `cfg.output` when set.
    pub fn save(&self, path: Option<&Path>) -> Result<()> {
        if let Some(p) = path {
            fs::write(p, self.csv())?;
        }
        Ok(())
    }

    /// Rows of one `(method, k, quad)` series in grid order.
    pub fn series(&self, method: Method, k: usize, quad: QuadSpec) -> Vec<&StudyRow> {
        self.rows.iter().filter(|r| r.method == method.name() && r.k == k && r.quad == quad).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyConfig {
    pub function: TestFunction,
    /// Inclusive grid range.
    pub grids: (usize, usize),
    /// `None` selects the standard comparison set per degree.
    pub methods: Option<Vec<Method>>,
    pub degrees: Vec<usize>,
    pub quads: Vec<QuadSpec>,
    pub seed: u64,
    /// Fills the `seconds` column; off by default so CSVs are reproducible.
    pub timings: bool,
    pub output: Option<PathBuf>,
}

impl Default for StudyConfig {
    fn default() -> Self {
        StudyConfig {
            function: TestFunction::U1,
            grids: (MIN_GRID, MAX_GRID),
            methods: None,
            degrees: vec![1, 2],
            quads: vec![QuadSpec::default()],
            seed: DEFAULT_SEED,
            timings: false,
            output: None,
        }
    }
}

fn parse_list<T, F>(value: &str, f: F) -> Result<Vec<T>>
where
    F: Fn(&str) -> Result<T>,
{
    value.split(',').map(str::trim).filter(|s| !s.is_empty()).map(f).collect()
}

fn parse_num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
    v.trim().parse().map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
}

/// Grid range written `a-b`, `a..b` or a single grid.
pub fn parse_grid_range(v: &str) -> Result<(usize, usize)> {
    let v = v.trim();
    let (a, b) = if let Some((a, b)) = v.split_once("..") {
        (a, b.trim_start_matches('='))
    } else if let Some((a, b)) = v.split_once('-') {
        (a, b)
    } else {
        (v, v)
    };
    Ok((parse_num("grids", a)?, parse_num("grids", b)?))
}

impl StudyConfig {
    pub fn grid_list(&self) -> Vec<usize> {
        (self.grids.0..=self.grids.1).collect()
    }

    pub fn methods_for(&self, k: usize) -> Vec<Method> {
        match &self.methods {
            Some(ms) => ms.iter().copied().filter(|m| m.supports(k)).collect(),
            None => Method::study_set(k),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (a, b) = self.grids;
        if a > b {
            return Err(Error::Config(format!("empty grid range {a}..{b}")));
        }
        check_grid(a)?;
        check_grid(b)?;
        if self.degrees.is_empty() || self.quads.is_empty() {
            return Err(Error::Config("degree and quadrature lists must be non-empty".into()));
        }
        for &k in &self.degrees {
            if !(1..=3).contains(&k) {
                return Err(Error::Config(format!("degree {k} outside 1..=3")));
            }
        }
        Ok(())
    }

    /// Applies one `key=value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key.trim() {
            "function" => self.function = value.parse()?,
            "grids" => self.grids = parse_grid_range(value)?,
            "methods" => self.methods = Some(parse_list(value, str::parse)?),
            "degrees" | "k" => self.degrees = parse_list(value, |s| parse_num("degrees", s))?,
            "quads" | "quad" => self.quads = parse_list(value, str::parse)?,
            "seed" => self.seed = parse_num("seed", value)?,
            "timings" => self.timings = parse_num("timings", value)?,
            "output" => self.output = Some(PathBuf::from(value)),
            other => return Err(Error::Config(format!("unknown configuration key '{other}'"))),
        }
        Ok(())
    }

    /// Reads `key=value` lines; blank lines and `#` comments are skipped.
    pub fn parse_text(&mut self, text: &str, origin: &Path) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| Error::Parse {
                path: origin.to_path_buf(),
                line: i + 1,
                msg: "expected key=value".into(),
            })?;
            self.set(k, v).map_err(|e| Error::Parse { path: origin.to_path_buf(), line: i + 1, msg: e.to_string() })?;
        }
        Ok(())
    }

    pub fn load(&mut self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        self.parse_text(&fs::read_to_string(path)?, path)
    }
}

/// L2-projection of one of the named functions, as the source field.
pub fn source_field(function: TestFunction, mesh: Arc<TriMesh>, k: usize) -> Result<DGField> {
    project_analytic(mesh, k, move |x, y| function.eval(x, y), &QuadSpec::default().realize())
}

struct Timed<T> {
    value: T,
    seconds: f64,
}

fn timed<T>(f: impl FnOnce() -> Result<T>) -> Result<Timed<T>> {
    let t = Instant::now();
    let value = f()?;
    Ok(Timed { value, seconds: t.elapsed().as_secs_f64() })
}

fn base_row(pair: &GridPair, domain: &Domain, method: Method, k: usize, quad: QuadSpec) -> StudyRow {
    StudyRow {
        grid: pair.grid,
        h: grid_h(domain, pair.grid),
        elements_src: pair.source.num_triangles(),
        elements_tgt: pair.target.num_triangles(),
        method: method.name().to_string(),
        k,
        quad,
        mv: None,
        l2: None,
        order: None,
        seconds: None,
    }
}

/// Mass variation of TRANS1, k = 1, on `u1` for each of the eight rules.
pub fn run_quadrature_study(cfg: &StudyConfig) -> Result<StudyReport> {
    cfg.validate()?;
    if cfg.function != TestFunction::U1 {
        return Err(Error::Config("the quadrature study is defined for u1".into()));
    }
    let domain = cfg.function.domain();
    let mut report = StudyReport::default();
    for grid in cfg.grid_list() {
        let pair = grid_pair(&domain, grid, cfg.seed)?;
        report.meshes.push(MeshCount::of(&pair));
        let u = source_field(cfg.function, pair.source.clone(), 1)?;
        for quad in QUADRATURE_STUDY_SPECS {
            let tc = TransferConfig::new(Method::Trans1, 1, quad)?;
            let g = timed(|| transfer(&u, pair.target.clone(), &tc))?;
            let mut row = base_row(&pair, &domain, Method::Trans1, 1, quad);
            row.mv = Some(mass_variation(&u, &g.value));
            row.seconds = cfg.timings.then_some(g.seconds);
            report.rows.push(row);
        }
    }
    Ok(report)
}

fn run_method_study(cfg: &StudyConfig, with_error: bool) -> Result<StudyReport> {
    cfg.validate()?;
    let domain = cfg.function.domain();
    let mut report = StudyReport::default();
    for grid in cfg.grid_list() {
        let pair = grid_pair(&domain, grid, cfg.seed)?;
        report.meshes.push(MeshCount::of(&pair));
        for &k in &cfg.degrees {
            let u = source_field(cfg.function, pair.source.clone(), k)?;
            for method in cfg.methods_for(k) {
                for &quad in &cfg.quads {
                    let tc = TransferConfig::new(method, k, quad)?;
                    let g = timed(|| transfer(&u, pair.target.clone(), &tc))?;
                    let mut row = base_row(&pair, &domain, method, k, quad);
                    row.mv = Some(mass_variation(&u, &g.value));
                    if with_error {
                        row.l2 = Some(l2_error(&u, &g.value)?);
                    }
                    row.seconds = cfg.timings.then_some(g.seconds);
                    report.rows.push(row);
                }
            }
        }
    }
    if with_error {
        fill_orders(&mut report.rows);
    }
    Ok(report)
}

/// Order column: rate from the previous grid of the same series.
fn fill_orders(rows: &mut [StudyRow]) {
    let mut keys: Vec<(String, usize, QuadSpec)> = Vec::new();
    for r in rows.iter() {
        let key = (r.method.clone(), r.k, r.quad);
        if !keys.contains(&key) {
            keys.push(key);
        }
    }
    for (m, k, q) in keys {
        let idx: Vec<usize> =
            (0..rows.len()).filter(|&i| rows[i].method == m && rows[i].k == k && rows[i].quad == q).collect();
        let pts: Vec<(f64, f64)> = idx.iter().map(|&i| (rows[i].h, rows[i].l2.unwrap_or(0.0))).collect();
        for (j, o) in convergence_order(&pts).into_iter().enumerate() {
            rows[idx[j + 1]].order = o;
        }
    }
}

/// Mass variation for each `(grid, k, method, quad)`.
pub fn run_mass_study(cfg: &StudyConfig) -> Result<StudyReport> {
    run_method_study(cfg, false)
}

/// L2 error and observed order for each `(grid, k, method, quad)`.
pub fn run_error_study(cfg: &StudyConfig) -> Result<StudyReport> {
    run_method_study(cfg, true)
}

pub enum VizSource<'a> {
    Field(&'a DGField),
    Surrogate(&'a HctSurrogate),
}

/// Triangle soup with each element split at its edge midpoints.
#[derive(Debug, Clone, PartialEq)]
pub struct VizExport {
    pub points: Vec<[f64; 2]>,
    pub cells: Vec<[usize; 3]>,
    pub value: Vec<f64>,
    pub grad_mag: Vec<f64>,
}

/// Barycentric coordinates of the six sample points: vertices then the
/// midpoints opposite each vertex.
const SAMPLE: [[f64; 3]; 6] =
    [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5], [0.5, 0.5, 0.0]];

/// Four subcells over the local sample indices, counterclockwise.
const SUBCELLS: [[usize; 3]; 4] = [[0, 5, 4], [5, 1, 3], [4, 3, 2], [3, 4, 5]];

impl VizExport {
    pub fn build(source: &VizSource<'_>) -> VizExport {
        match source {
            VizSource::Field(f) => Self::discontinuous(f),
            VizSource::Surrogate(s) => Self::continuous(s),
        }
    }

    fn discontinuous(f: &DGField) -> VizExport {
        let mesh = f.mesh();
        let n = mesh.num_triangles();
        let mut out = VizExport {
            points: Vec::with_capacity(6 * n),
            cells: Vec::with_capacity(4 * n),
            value: Vec::with_capacity(6 * n),
            grad_mag: Vec::with_capacity(6 * n),
        };
        for e in 0..n {
            let pts = mesh.triangle_points(e);
            let base = out.points.len();
            for l in SAMPLE {
                out.points.push(crate::geometry::from_barycentric(&pts, l));
                out.value.push(f.value(e, l));
                let g = f.grad(e, l);
                out.grad_mag.push(g[0].hypot(g[1]));
            }
            for c in SUBCELLS {
                out.cells.push(c.map(|i| base + i));
            }
        }
        out
    }

    fn continuous(s: &HctSurrogate) -> VizExport {
        let mesh = s.mesh();
        let nv = mesh.num_vertices();
        let ne = mesh.edges().len();
        let mut out = VizExport {
            points: Vec::with_capacity(nv + ne),
            cells: Vec::with_capacity(4 * mesh.num_triangles()),
            value: vec![0.0; nv + ne],
            grad_mag: vec![0.0; nv + ne],
        };
        out.points.extend_from_slice(mesh.vertices());
        for edge in mesh.edges() {
            let a = mesh.vertices()[edge.vertices[0]];
            let b = mesh.vertices()[edge.vertices[1]];
            out.points.push([0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]);
        }
        let mut seen = vec![false; nv + ne];
        for e in 0..mesh.num_triangles() {
            let tri = mesh.triangles()[e];
            let edges = mesh.triangle_edges(e);
            let ids = [tri[0], tri[1], tri[2], nv + edges[0], nv + edges[1], nv + edges[2]];
            for (j, &id) in ids.iter().enumerate() {
                // lowest incident element supplies the shared sample
                if !seen[id] {
                    seen[id] = true;
                    out.value[id] = s.value(e, SAMPLE[j]);
                    let g = s.grad(e, SAMPLE[j]);
                    out.grad_mag[id] = g[0].hypot(g[1]);
                }
            }
            for c in SUBCELLS {
                out.cells.push(c.map(|i| ids[i]));
            }
        }
        out
    }

    /// Legacy-VTK ASCII unstructured grid.
    pub fn write_vtk<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "# vtk DataFile Version 3.0")?;
        writeln!(w, "hct-transfer field")?;
        writeln!(w, "ASCII")?;
        writeln!(w, "DATASET UNSTRUCTURED_GRID")?;
        writeln!(w, "POINTS {} double", self.points.len())?;
        for p in &self.points {
            writeln!(w, "{:?} {:?} 0", p[0], p[1])?;
        }
        writeln!(w, "CELLS {} {}", self.cells.len(), 4 * self.cells.len())?;
        for c in &self.cells {
            writeln!(w, "3 {} {} {}", c[0], c[1], c[2])?;
        }
        writeln!(w, "CELL_TYPES {}", self.cells.len())?;
        for _ in &self.cells {
            writeln!(w, "5")?;
        }
        writeln!(w, "POINT_DATA {}", self.points.len())?;
        for (name, data) in [("value", &self.value), ("grad_mag", &self.grad_mag)] {
            writeln!(w, "SCALARS {name} double 1")?;
            writeln!(w, "LOOKUP_TABLE default")?;
            for v in data.iter() {
                writeln!(w, "{v:?}")?;
            }
        }
        w.flush()
    }
}

pub fn export_viz(source: &VizSource<'_>, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    VizExport::build(source).write_vtk(BufWriter::new(file))?;
    Ok(())
}

/// Smooths a field and exports its surrogate.
pub fn export_smoothed(field: &DGField, path: impl AsRef<Path>) -> Result<()> {
    let s = hct::smooth(field)?;
    export_viz(&VizSource::Surrogate(&s), path)
}
