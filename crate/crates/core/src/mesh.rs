//! Triangle meshes: construction, adjacency tables, generators and the
//! plain-text `tri-mesh v1` file format.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use spade::{DelaunayTriangulation, Point2, Triangulation};

use crate::error::{Error, Result};
use crate::geometry::{self, Point};

/// Axis-aligned rectangular domain.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Domain {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Domain {
    pub fn new(x0: f64, x1: f64, y0: f64, y1: f64) -> Result<Self> {
        if !(x0.is_finite() && x1.is_finite() && y0.is_finite() && y1.is_finite()) {
            return Err(Error::Config("domain bounds must be finite".into()));
        }
        if x1 <= x0 || y1 <= y0 {
            return Err(Error::Config(format!("empty domain [{x0},{x1}]x[{y0},{y1}]")));
        }
        Ok(Domain { x: [x0, x1], y: [y0, y1] })
    }

    pub fn square(lo: f64, hi: f64) -> Self {
        Domain::new(lo, hi, lo, hi).expect("valid square domain")
    }

    pub fn width(&self) -> f64 {
        self.x[1] - self.x[0]
    }

    pub fn height(&self) -> f64 {
        self.y[1] - self.y[0]
    }

    pub fn area(&self) -> f64 {
        self.width() * self.height()
    }

    pub fn diameter(&self) -> f64 {
        self.width().hypot(self.height())
    }

    pub fn contains(&self, p: Point, eps: f64) -> bool {
        p[0] >= self.x[0] - eps && p[0] <= self.x[1] + eps && p[1] >= self.y[0] - eps && p[1] <= self.y[1] + eps
    }
}

/// A mesh edge. `left` is the lower-index incident triangle, `right` the
/// other one (absent on the boundary). Vertices are stored sorted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub left: usize,
    pub right: Option<usize>,
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.right.is_none()
    }
}

/// Immutable conforming triangulation with counterclockwise triangles.
#[derive(Debug, Clone)]
pub struct TriMesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// `triangle_edges[t][i]` is the edge opposite local vertex `i`,
    /// i.e. the edge joining local vertices `i+1` and `i+2`.
    triangle_edges: Vec<[usize; 3]>,
    vertex_to_triangles: Vec<Vec<usize>>,
    h: f64,
}

impl TriMesh {
    /// Builds the adjacency tables, rejecting out-of-range indices,
    /// non-positive orientation and non-manifold edges.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::Geometry("mesh has no triangles".into()));
        }
        let nv = vertices.len();
        let mut h: f64 = 0.0;
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(&bad) = tri.iter().find(|&&v| v >= nv) {
                return Err(Error::Geometry(format!(
                    "triangle {t} references vertex {bad} but mesh has {nv} vertices"
                )));
            }
            let pts = [vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]];
            let area = geometry::signed_area(pts[0], pts[1], pts[2]);
            if !(area > 0.0) {
                return Err(Error::Geometry(format!("triangle {t} has non-positive signed area {area:e}")));
            }
            h = h.max(geometry::diameter(&pts));
        }

        let mut edges: Vec<Edge> = Vec::with_capacity(triangles.len() * 3 / 2 + nv);
        let mut lookup: HashMap<[usize; 2], usize> = HashMap::with_capacity(edges.capacity());
        let mut triangle_edges = vec![[0usize; 3]; triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for i in 0..3 {
                let a = tri[(i + 1) % 3];
                let b = tri[(i + 2) % 3];
                let key = if a < b { [a, b] } else { [b, a] };
                let e = match lookup.get(&key) {
                    Some(&e) => {
                        let edge = &mut edges[e];
                        if edge.right.is_some() {
                            return Err(Error::Geometry(format!(
                                "edge ({}, {}) is shared by more than two triangles",
                                key[0], key[1]
                            )));
                        }
                        edge.right = Some(t);
                        e
                    }
                    None => {
                        edges.push(Edge { vertices: key, left: t, right: None });
                        lookup.insert(key, edges.len() - 1);
                        edges.len() - 1
                    }
                };
                triangle_edges[t][i] = e;
            }
        }

        let mut vertex_to_triangles = vec![Vec::new(); nv];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_to_triangles[v].push(t);
            }
        }

        Ok(TriMesh { vertices, triangles, edges, triangle_edges, vertex_to_triangles, h })
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn triangle_edges(&self, t: usize) -> [usize; 3] {
        self.triangle_edges[t]
    }

    pub fn vertex_triangles(&self, v: usize) -> &[usize] {
        &self.vertex_to_triangles[v]
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Maximum element diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn triangle_points(&self, t: usize) -> [Point; 3] {
        let tri = self.triangles[t];
        [self.vertices[tri[0]], self.vertices[tri[1]], self.vertices[tri[2]]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let p = self.triangle_points(t);
        geometry::signed_area(p[0], p[1], p[2])
    }

    pub fn total_area(&self) -> f64 {
        crate::sum::pairwise_sum(&(0..self.num_triangles()).map(|t| self.area(t)).collect::<Vec<_>>())
    }

    pub fn num_boundary_edges(&self) -> usize {
        self.edges.iter().filter(|e| e.is_boundary()).count()
    }

    pub fn num_interior_edges(&self) -> usize {
        self.edges.len() - self.num_boundary_edges()
    }

    /// Axis-aligned bounding box `[xmin, xmax, ymin, ymax]`.
    pub fn bounding_box(&self) -> [f64; 4] {
        let mut bb = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
        for p in &self.vertices {
            bb[0] = bb[0].min(p[0]);
            bb[1] = bb[1].max(p[0]);
            bb[2] = bb[2].min(p[1]);
            bb[3] = bb[3].max(p[1]);
        }
        bb
    }
}

/// `n x n` uniform quads, each split along the bottom-left to top-right
/// diagonal.
pub fn generate_structured(domain: &Domain, n: usize) -> Result<TriMesh> {
    if n == 0 {
        return Err(Error::Config("structured mesh needs n >= 1".into()));
    }
    let vertices = lattice(domain, n, n);
    let mut triangles = Vec::with_capacity(2 * n * n);
    let row = n + 1;
    for j in 0..n {
        for i in 0..n {
            let v00 = j * row + i;
            let v10 = v00 + 1;
            let v01 = v00 + row;
            let v11 = v01 + 1;
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Delaunay triangulation of a jittered lattice whose spacing is chosen so
/// that the element count tracks a structured mesh of the same `h`
/// (spacing `target_h / sqrt(2)`). Boundary points stay on the rectangle;
/// interior points move by up to `0.25 * target_h` per coordinate.
pub fn generate_unstructured(domain: &Domain, target_h: f64, seed: u64) -> Result<TriMesh> {
    if !(target_h > 0.0) || !target_h.is_finite() {
        return Err(Error::Config(format!("target_h must be positive, got {target_h}")));
    }
    let spacing = target_h / std::f64::consts::SQRT_2;
    let nx = ((domain.width() / spacing).round() as usize).max(1);
    let ny = ((domain.height() / spacing).round() as usize).max(1);
    let mut points = lattice(domain, nx, ny);
    let amp = 0.25 * target_h;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for j in 1..ny {
        for i in 1..nx {
            let p = &mut points[j * (nx + 1) + i];
            p[0] += rng.gen_range(-amp..=amp);
            p[1] += rng.gen_range(-amp..=amp);
        }
    }
    delaunay(points)
}

/// Delaunay triangulation of an arbitrary point set.
pub fn delaunay(points: Vec<Point>) -> Result<TriMesh> {
    let input: Vec<Point2<f64>> = points.iter().map(|p| Point2::new(p[0], p[1])).collect();
    let dt: DelaunayTriangulation<Point2<f64>> =
        DelaunayTriangulation::bulk_load_stable(input).map_err(|e| Error::Generation(format!("{e:?}")))?;
    if dt.num_vertices() != points.len() {
        return Err(Error::Generation("duplicate input points".into()));
    }
    let mut triangles: Vec<[usize; 3]> = dt
        .inner_faces()
        .map(|f| {
            let v = f.vertices();
            [v[0].fix().index(), v[1].fix().index(), v[2].fix().index()]
        })
        .collect();
    if triangles.is_empty() {
        return Err(Error::Generation("point set is collinear".into()));
    }
    for tri in &mut triangles {
        if geometry::det2(points[tri[0]], points[tri[1]], points[tri[2]]) < 0.0 {
            tri.swap(1, 2);
        }
    }
    // Canonical ordering, independent of the triangulator's internal layout.
    for tri in &mut triangles {
        let m = (0..3).min_by_key(|&i| tri[i]).unwrap();
        tri.rotate_left(m);
    }
    triangles.sort_unstable();
    TriMesh::new(points, triangles)
}

fn lattice(domain: &Domain, nx: usize, ny: usize) -> Vec<Point> {
    let mut v = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = if j == ny { domain.y[1] } else { domain.y[0] + domain.height() * j as f64 / ny as f64 };
        for i in 0..=nx {
            let x = if i == nx { domain.x[1] } else { domain.x[0] + domain.width() * i as f64 / nx as f64 };
            v.push([x, y]);
        }
    }
    v
}

const MESH_HEADER: &str = "tri-mesh v1";

/// Canonical text form of a mesh. Coordinates use the shortest
/// representation that parses back to the same `f64`.
pub fn format_mesh(mesh: &TriMesh) -> String {
    let mut s = String::with_capacity(32 * (mesh.num_vertices() + mesh.num_triangles()));
    s.push_str(MESH_HEADER);
    s.push('\n');
    let _ = writeln!(s, "{}", mesh.num_vertices());
    for p in mesh.vertices() {
        let _ = writeln!(s, "{:?} {:?}", p[0], p[1]);
    }
    let _ = writeln!(s, "{}", mesh.num_triangles());
    for t in mesh.triangles() {
        let _ = writeln!(s, "{} {} {}", t[0], t[1], t[2]);
    }
    s
}

pub fn write_mesh(mesh: &TriMesh, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_mesh(mesh))?;
    Ok(())
}

pub fn read_mesh(path: impl AsRef<Path>) -> Result<TriMesh> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_mesh(&text, path)
}

/// Parses `tri-mesh v1` text. Blank lines and `#` comments are skipped;
/// errors carry the 1-based line number.
pub fn parse_mesh(text: &str, origin: &Path) -> Result<TriMesh> {
    let mut lines = Lines::new(text, origin);
    lines.expect_header(MESH_HEADER)?;
    let nv: usize = lines.scalar("vertex count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let [x, y] = lines.tuple::<f64, 2>("vertex")?;
        vertices.push([x, y]);
    }
    let nt: usize = lines.scalar("triangle count")?;
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let (line, tri) = lines.tuple_at::<usize, 3>("triangle")?;
        if let Some(&bad) = tri.iter().find(|&&v| v >= nv) {
            return Err(lines.error_at(line, format!("vertex index {bad} out of range (mesh has {nv} vertices)")));
        }
        triangles.push(tri);
    }
    lines.expect_end()?;
    TriMesh::new(vertices, triangles)
}

/// Line cursor shared by the mesh and field parsers.
pub(crate) struct Lines<'a> {
    iter: std::iter::Peekable<Box<dyn Iterator<Item = (usize, &'a str)> + 'a>>,
    origin: &'a Path,
    last: usize,
}

impl<'a> Lines<'a> {
    pub(crate) fn new(text: &'a str, origin: &'a Path) -> Self {
        let it: Box<dyn Iterator<Item = (usize, &'a str)>> = Box::new(
            text.lines()
                .enumerate()
                .map(|(i, l)| (i + 1, l.trim()))
                .filter(|(_, l)| !l.is_empty() && !l.starts_with('#')),
        );
        Lines { iter: it.peekable(), origin, last: 0 }
    }

    pub(crate) fn error_at(&self, line: usize, msg: String) -> Error {
        Error::Parse { path: self.origin.to_path_buf(), line, msg }
    }

    fn next_line(&mut self, what: &str) -> Result<(usize, &'a str)> {
        match self.iter.next() {
            Some((n, l)) => {
                self.last = n;
                Ok((n, l))
            }
            None => Err(self.error_at(self.last + 1, format!("unexpected end of file, expected {what}"))),
        }
    }

    pub(crate) fn expect_header(&mut self, header: &str) -> Result<()> {
        let (n, l) = self.next_line("header")?;
        if l != header {
            return Err(self.error_at(n, format!("expected header `{header}`, found `{l}`")));
        }
        Ok(())
    }

    pub(crate) fn scalar<T: std::str::FromStr>(&mut self, what: &str) -> Result<T> {
        let [v] = self.tuple::<T, 1>(what)?;
        Ok(v)
    }

    pub(crate) fn tuple<T: std::str::FromStr, const N: usize>(&mut self, what: &str) -> Result<[T; N]> {
        self.tuple_at(what).map(|(_, v)| v)
    }

    pub(crate) fn tuple_at<T: std::str::FromStr, const N: usize>(&mut self, what: &str) -> Result<(usize, [T; N])> {
        let (n, l) = self.next_line(what)?;
        let toks: Vec<&str> = l.split_whitespace().collect();
        if toks.len() != N {
            return Err(self.error_at(n, format!("expected {N} value(s) for {what}, found {}", toks.len())));
        }
        let mut out = Vec::with_capacity(N);
        for tok in toks {
            match tok.parse::<T>() {
                Ok(v) => out.push(v),
                Err(_) => return Err(self.error_at(n, format!("invalid {what} entry `{tok}`"))),
            }
        }
        let arr: [T; N] = out.try_into().ok().expect("length checked");
        Ok((n, arr))
    }

    pub(crate) fn expect_end(&mut self) -> Result<()> {
        if let Some((n, l)) = self.iter.next() {
            return Err(self.error_at(n, format!("trailing content `{l}`")));
        }
        Ok(())
    }
}
