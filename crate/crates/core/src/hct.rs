//! Synchronization of a discontinuous field into single-valued C1 data and
//! the complete Hsieh-Clough-Tocher (HCT-C) surrogate built from it.
//!
//! Each element `T = {a1, a2, a3}` is split at its barycenter `G` into
//! subtriangles `T_i = {G, a_{i+1}, a_{i+2}}`. On each `T_i` the surrogate
//! is a cubic written in monomials of the parent element's reference
//! coordinates. The 30 coefficients per element are fixed by the 12 degrees
//! of freedom of `Sigma_T` together with C0/C1 matching across the three
//! internal edges `{G, a_i}`, solved by Householder QR.
//!
//! Local indices are 0-based here: `i` in the docs maps to `i - 1`.

use std::sync::Arc;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::DGField;
use crate::geometry::{self, AffineMap, Point};
use crate::locate::{subtriangle, Locator};
use crate::mesh::TriMesh;

/// Residual bound on the local least-squares solve.
pub const RESIDUAL_TOL: f64 = 1e-9;

/// Cubic monomial exponents `(a, b)` for `x^a y^b`.
const CUBIC: [(i32, i32); 10] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

const REF_VERTS: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
const REF_G: Point = [1.0 / 3.0, 1.0 / 3.0];

#[inline]
fn ipow(x: f64, n: i32) -> f64 {
    match n {
        0 => 1.0,
        1 => x,
        2 => x * x,
        _ => x * x * x,
    }
}

fn cubic_value_row(r: Point) -> [f64; 10] {
    CUBIC.map(|(a, b)| ipow(r[0], a) * ipow(r[1], b))
}

fn cubic_deriv_row(r: Point, d: Point) -> [f64; 10] {
    CUBIC.map(|(a, b)| {
        let dx = if a > 0 { a as f64 * ipow(r[0], a - 1) * ipow(r[1], b) } else { 0.0 };
        let dy = if b > 0 { b as f64 * ipow(r[0], a) * ipow(r[1], b - 1) } else { 0.0 };
        d[0] * dx + d[1] * dy
    })
}

#[inline]
fn cubic_eval(c: &[f64; 10], r: Point) -> f64 {
    let (x, y) = (r[0], r[1]);
    c[0] + x * (c[1] + x * (c[3] + x * c[6]) + y * (c[4] + x * c[7]))
        + y * (c[2] + y * (c[5] + y * c[9]) + x * y * c[8])
}

#[inline]
fn cubic_grad(c: &[f64; 10], r: Point) -> Point {
    let (x, y) = (r[0], r[1]);
    [
        c[1] + 2.0 * c[3] * x + c[4] * y + 3.0 * c[6] * x * x + 2.0 * c[7] * x * y + c[8] * y * y,
        c[2] + c[4] * x + 2.0 * c[5] * y + c[7] * x * x + 2.0 * c[8] * x * y + 3.0 * c[9] * y * y,
    ]
}

/// Eccentricity parameters `E_i = (|l_{i+2}|^2 - |l_{i+1}|^2) / |l_i|^2`
/// where `l_i` joins `a_{i+1}` and `a_{i+2}`.
pub fn eccentricities(tri: &[Point; 3]) -> Result<[f64; 3]> {
    let len2: [f64; 3] = std::array::from_fn(|i| geometry::dist2(tri[(i + 1) % 3], tri[(i + 2) % 3]));
    if len2.contains(&0.0) {
        return Err(Error::Geometry("zero-length triangle edge".into()));
    }
    Ok(std::array::from_fn(|i| (len2[(i + 2) % 3] - len2[(i + 1) % 3]) / len2[i]))
}

/// Foot `c_i` of the altitude from `a_i` onto `l_i`, from the
/// eccentricities: `c_i = a_{i+1} + (1 + E_i)/2 (a_{i+2} - a_{i+1})`.
pub fn altitude_feet(tri: &[Point; 3], ecc: &[f64; 3]) -> [Point; 3] {
    std::array::from_fn(|i| {
        let p = tri[(i + 1) % 3];
        let q = tri[(i + 2) % 3];
        let t = 0.5 * (1.0 + ecc[i]);
        [p[0] + t * (q[0] - p[0]), p[1] + t * (q[1] - p[1])]
    })
}

/// Local HCT-C element: maps the 12 entries of `Sigma_T` to the 3 x 10
/// subtriangle coefficients.
#[derive(Debug, Clone)]
pub struct HctElement {
    tri: [Point; 3],
    ecc: [f64; 3],
    feet: [Point; 3],
    /// 30 x 12, column j = coefficients of the j-th dual basis function.
    dof_to_coeffs: DMatrix<f64>,
}

/// Position of a degree of freedom in `Sigma_T`, grouped by local vertex:
/// `4 i + 0` value at `a_i`, `4 i + 1` derivative along `a_i -> a_{i+2}`,
/// `4 i + 2` derivative along `a_i -> a_{i+1}`, `4 i + 3` derivative at
/// `b_i` along `c_i -> a_i`.
pub const fn dof_index(vertex: usize, kind: usize) -> usize {
    4 * vertex + kind
}

impl HctElement {
    pub fn new(tri: [Point; 3]) -> Result<Self> {
        Self::with_index(tri, 0)
    }

    fn with_index(tri: [Point; 3], element: usize) -> Result<Self> {
        let ecc = eccentricities(&tri).map_err(|e| match e {
            Error::Geometry(m) => Error::SingularSystem { element, detail: m },
            other => other,
        })?;
        let map = AffineMap::new(&tri);
        if !(map.det.abs() > 0.0) {
            return Err(Error::SingularSystem { element, detail: "zero-area element".into() });
        }
        let feet = altitude_feet(&tri, &ecc);

        // rows: 18 vertex conditions, 3 midpoint conditions, 21 internal-edge
        // matching conditions
        let nrows = 42;
        let mut a = DMatrix::<f64>::zeros(nrows, 30);
        let mut e = DMatrix::<f64>::zeros(nrows, 12);
        let mut row = 0;
        let put = |a: &mut DMatrix<f64>, row: usize, sub: usize, vals: &[f64; 10], sign: f64| {
            for (j, v) in vals.iter().enumerate() {
                a[(row, 10 * sub + j)] += sign * v;
            }
        };

        for i in 0..3 {
            let ai = REF_VERTS[i];
            let to_next2 = geometry::sub(REF_VERTS[(i + 2) % 3], ai);
            let to_next1 = geometry::sub(REF_VERTS[(i + 1) % 3], ai);
            // a_i lies in T_{i+1} and T_{i+2}
            for sub in [(i + 1) % 3, (i + 2) % 3] {
                put(&mut a, row, sub, &cubic_value_row(ai), 1.0);
                e[(row, dof_index(i, 0))] = 1.0;
                row += 1;
                put(&mut a, row, sub, &cubic_deriv_row(ai, to_next2), 1.0);
                e[(row, dof_index(i, 1))] = 1.0;
                row += 1;
                put(&mut a, row, sub, &cubic_deriv_row(ai, to_next1), 1.0);
                e[(row, dof_index(i, 2))] = 1.0;
                row += 1;
            }
        }
        for i in 0..3 {
            let p = REF_VERTS[(i + 1) % 3];
            let q = REF_VERTS[(i + 2) % 3];
            let bi = [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
            let dir = map.dir_to_reference(geometry::sub(tri[i], feet[i]));
            put(&mut a, row, i, &cubic_deriv_row(bi, dir), 1.0);
            e[(row, dof_index(i, 3))] = 1.0;
            row += 1;
        }
        for (i, &ai) in REF_VERTS.iter().enumerate() {
            // edge {G, a_i} separates T_{i+1} and T_{i+2}
            let (s1, s2) = ((i + 1) % 3, (i + 2) % 3);
            let t = geometry::sub(ai, REF_G);
            let n = [-t[1], t[0]];
            for s in [0.0, 1.0 / 3.0, 2.0 / 3.0, 1.0] {
                let r = [REF_G[0] + s * t[0], REF_G[1] + s * t[1]];
                let v = cubic_value_row(r);
                put(&mut a, row, s1, &v, 1.0);
                put(&mut a, row, s2, &v, -1.0);
                row += 1;
            }
            for s in [0.0, 0.5, 1.0] {
                let r = [REF_G[0] + s * t[0], REF_G[1] + s * t[1]];
                let v = cubic_deriv_row(r, n);
                put(&mut a, row, s1, &v, 1.0);
                put(&mut a, row, s2, &v, -1.0);
                row += 1;
            }
        }
        debug_assert_eq!(row, nrows);

        let qr = a.clone().qr();
        let r = qr.r();
        let diag_max = r.diagonal().abs().max();
        let diag_min = r.diagonal().abs().min();
        if !(diag_min > 1e-12 * diag_max) {
            return Err(Error::SingularSystem {
                element,
                detail: format!("rank deficient (|R| diagonal ratio {:e})", diag_min / diag_max),
            });
        }
        let qte = qr.q().transpose() * &e;
        let x = r
            .solve_upper_triangular(&qte)
            .ok_or_else(|| Error::SingularSystem { element, detail: "triangular solve failed".into() })?;
        let residual = (&a * &x - &e).abs().max();
        if !(residual <= RESIDUAL_TOL) {
            return Err(Error::SingularSystem {
                element,
                detail: format!("inconsistent constraints, residual {residual:e}"),
            });
        }
        Ok(HctElement { tri, ecc, feet, dof_to_coeffs: x })
    }

    pub fn eccentricities(&self) -> [f64; 3] {
        self.ecc
    }

    /// Altitude feet `c_i`.
    pub fn feet(&self) -> [Point; 3] {
        self.feet
    }

    /// `Sigma_T` from pointwise data: values and gradients at the vertices,
    /// gradients at the edge midpoints `b_i`.
    pub fn dofs_from_gradients(&self, values: [f64; 3], vgrad: [Point; 3], mgrad: [Point; 3]) -> [f64; 12] {
        let mut s = [0.0; 12];
        for i in 0..3 {
            let ai = self.tri[i];
            s[dof_index(i, 0)] = values[i];
            s[dof_index(i, 1)] = geometry::dot(vgrad[i], geometry::sub(self.tri[(i + 2) % 3], ai));
            s[dof_index(i, 2)] = geometry::dot(vgrad[i], geometry::sub(self.tri[(i + 1) % 3], ai));
            s[dof_index(i, 3)] = geometry::dot(mgrad[i], geometry::sub(ai, self.feet[i]));
        }
        s
    }

    /// Value of the piecewise cubic `c` at barycentric point `l`.
    pub fn value(&self, c: &[[f64; 10]; 3], l: [f64; 3]) -> f64 {
        cubic_eval(&c[subtriangle(l) as usize - 1], [l[1], l[2]])
    }

    /// Value on a given subtriangle (1..=3), for one-sided limits.
    pub fn value_on(&self, c: &[[f64; 10]; 3], sub: u8, l: [f64; 3]) -> f64 {
        cubic_eval(&c[sub as usize - 1], [l[1], l[2]])
    }

    /// Physical gradient on a given subtriangle (1..=3).
    pub fn gradient_on(&self, c: &[[f64; 10]; 3], sub: u8, l: [f64; 3]) -> Point {
        let g = cubic_grad(&c[sub as usize - 1], [l[1], l[2]]);
        AffineMap::new(&self.tri).grad_to_physical(g)
    }

    /// Subtriangle cubic coefficients for a DOF vector.
    pub fn coefficients(&self, dofs: &[f64; 12]) -> [[f64; 10]; 3] {
        let mut c = [[0.0; 10]; 3];
        for (s, block) in c.iter_mut().enumerate() {
            for (j, v) in block.iter_mut().enumerate() {
                let row = 10 * s + j;
                *v = (0..12).map(|k| self.dof_to_coeffs[(row, k)] * dofs[k]).sum();
            }
        }
        c
    }
}

/// Single-valued vertex and midpoint data produced by averaging.
#[derive(Debug, Clone)]
pub struct SyncData {
    pub vertex_value: Vec<f64>,
    pub vertex_grad: Vec<Point>,
    /// Unit normal per edge, pointing out of the edge's lower-index
    /// triangle.
    pub edge_normal: Vec<Point>,
    /// Averaged normal derivative at each edge midpoint along
    /// `edge_normal`.
    pub edge_dn: Vec<f64>,
}

fn local_index(tri: &[usize; 3], v: usize) -> usize {
    tri.iter().position(|&w| w == v).expect("vertex belongs to triangle")
}

fn vertex_bary(i: usize) -> [f64; 3] {
    let mut l = [0.0; 3];
    l[i] = 1.0;
    l
}

fn midpoint_bary(i: usize) -> [f64; 3] {
    let mut l = [0.5; 3];
    l[i] = 0.0;
    l
}

/// Averages traces and gradients of the discontinuous field over incident
/// elements (vertices) and the normal derivative over the at most two
/// incident elements (edge midpoints).
pub fn synchronize(field: &DGField) -> SyncData {
    let mesh = field.mesh();
    let (vertex_value, vertex_grad): (Vec<f64>, Vec<Point>) = (0..mesh.num_vertices())
        .into_par_iter()
        .map(|v| {
            let tris = mesh.vertex_triangles(v);
            if tris.is_empty() {
                return (0.0, [0.0, 0.0]);
            }
            let mut val = 0.0;
            let mut g = [0.0, 0.0];
            for &t in tris {
                let l = vertex_bary(local_index(&mesh.triangles()[t], v));
                val += field.value(t, l);
                let gt = field.grad(t, l);
                g[0] += gt[0];
                g[1] += gt[1];
            }
            let n = tris.len() as f64;
            (val / n, [g[0] / n, g[1] / n])
        })
        .unzip();

    let (edge_normal, edge_dn): (Vec<Point>, Vec<f64>) = mesh
        .edges()
        .par_iter()
        .map(|edge| {
            let t = edge.left;
            let tri = mesh.triangles()[t];
            let pts = mesh.triangle_points(t);
            // local index of the vertex opposite this edge in `left`
            let opp = (0..3).find(|&i| !edge.vertices.contains(&tri[i])).unwrap();
            let p = pts[(opp + 1) % 3];
            let q = pts[(opp + 2) % 3];
            let tangent = geometry::sub(q, p);
            let len = tangent[0].hypot(tangent[1]);
            // counterclockwise triangle: (ty, -tx) points outward
            let n = [tangent[1] / len, -tangent[0] / len];
            let mut dn = geometry::dot(field.grad(t, midpoint_bary(opp)), n);
            let mut count = 1.0;
            if let Some(r) = edge.right {
                let rt = mesh.triangles()[r];
                let ropp = (0..3).find(|&i| !edge.vertices.contains(&rt[i])).unwrap();
                dn += geometry::dot(field.grad(r, midpoint_bary(ropp)), n);
                count += 1.0;
            }
            (n, dn / count)
        })
        .unzip();

    SyncData { vertex_value, vertex_grad, edge_normal, edge_dn }
}

/// Globally C1 piecewise-cubic surrogate on the field's mesh.
#[derive(Debug, Clone)]
pub struct HctSurrogate {
    mesh: Arc<TriMesh>,
    dofs: Vec<[f64; 12]>,
    ecc: Vec<[f64; 3]>,
    coeffs: Vec<[[f64; 10]; 3]>,
}

/// Builds the HCT-C interpolant of synchronized data on every element.
pub fn build_surrogate(field: &DGField, sync: &SyncData) -> Result<HctSurrogate> {
    build_from_sync(field.mesh().clone(), sync)
}

/// DOFs, eccentricities and subtriangle cubics of one element.
type ElementData = ([f64; 12], [f64; 3], [[f64; 10]; 3]);

pub fn build_from_sync(mesh: Arc<TriMesh>, sync: &SyncData) -> Result<HctSurrogate> {
    if sync.vertex_value.len() != mesh.num_vertices() || sync.edge_dn.len() != mesh.edges().len() {
        return Err(Error::Config("synchronized data does not match the mesh".into()));
    }
    let per_elem: Vec<Result<ElementData>> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|t| {
            let tri = mesh.triangles()[t];
            let pts = mesh.triangle_points(t);
            let el = HctElement::with_index(pts, t)?;
            let edges = mesh.triangle_edges(t);
            let mut dofs = [0.0; 12];
            for i in 0..3 {
                let ai = pts[i];
                let g = sync.vertex_grad[tri[i]];
                dofs[dof_index(i, 0)] = sync.vertex_value[tri[i]];
                dofs[dof_index(i, 1)] = geometry::dot(g, geometry::sub(pts[(i + 2) % 3], ai));
                dofs[dof_index(i, 2)] = geometry::dot(g, geometry::sub(pts[(i + 1) % 3], ai));
                // c_i -> a_i is normal to l_i, so only length and sign
                // relative to the shared edge normal matter.
                let alt = geometry::sub(ai, el.feet[i]);
                let e = edges[i];
                let sign = geometry::dot(alt, sync.edge_normal[e]).signum();
                let alt_len = alt[0].hypot(alt[1]);
                dofs[dof_index(i, 3)] = sign * alt_len * sync.edge_dn[e];
            }
            let coeffs = el.coefficients(&dofs);
            Ok((dofs, el.ecc, coeffs))
        })
        .collect();
    let mut dofs = Vec::with_capacity(per_elem.len());
    let mut ecc = Vec::with_capacity(per_elem.len());
    let mut coeffs = Vec::with_capacity(per_elem.len());
    for r in per_elem {
        let (d, e, c) = r?;
        dofs.push(d);
        ecc.push(e);
        coeffs.push(c);
    }
    Ok(HctSurrogate { mesh, dofs, ecc, coeffs })
}

/// Synchronize and interpolate in one step.
pub fn smooth(field: &DGField) -> Result<HctSurrogate> {
    build_surrogate(field, &synchronize(field))
}

impl HctSurrogate {
    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn dofs(&self, e: usize) -> &[f64; 12] {
        &self.dofs[e]
    }

    pub fn eccentricities(&self, e: usize) -> [f64; 3] {
        self.ecc[e]
    }

    pub fn subtriangle_coeffs(&self, e: usize) -> &[[f64; 10]; 3] {
        &self.coeffs[e]
    }

    fn check(&self, e: usize) -> Result<()> {
        if e >= self.coeffs.len() {
            return Err(Error::ElementOutOfRange { index: e, count: self.coeffs.len() });
        }
        Ok(())
    }

    #[inline]
    pub(crate) fn value(&self, e: usize, l: [f64; 3]) -> f64 {
        let s = subtriangle(l) as usize - 1;
        cubic_eval(&self.coeffs[e][s], [l[1], l[2]])
    }

    #[inline]
    pub(crate) fn value_on(&self, e: usize, sub: u8, l: [f64; 3]) -> f64 {
        cubic_eval(&self.coeffs[e][sub as usize - 1], [l[1], l[2]])
    }

    pub(crate) fn grad(&self, e: usize, l: [f64; 3]) -> Point {
        let s = subtriangle(l) as usize - 1;
        let g = cubic_grad(&self.coeffs[e][s], [l[1], l[2]]);
        AffineMap::new(&self.mesh.triangle_points(e)).grad_to_physical(g)
    }

    /// Value on element `e` at barycentric point `l`.
    pub fn eval(&self, e: usize, l: [f64; 3]) -> Result<f64> {
        self.check(e)?;
        Ok(self.value(e, l))
    }

    /// Physical gradient on element `e` at barycentric point `l`.
    pub fn gradient(&self, e: usize, l: [f64; 3]) -> Result<Point> {
        self.check(e)?;
        Ok(self.grad(e, l))
    }

    /// Value at a physical point.
    pub fn value_at(&self, locator: &Locator, p: Point) -> Result<f64> {
        let r = locator.locate(p)?;
        Ok(self.value_on(r.element, r.subtriangle, r.barycentric))
    }
}

pub fn eval_surrogate(s: &HctSurrogate, element: usize, l: [f64; 3]) -> Result<f64> {
    s.eval(element, l)
}

pub fn grad_surrogate(s: &HctSurrogate, element: usize, l: [f64; 3]) -> Result<Point> {
    s.gradient(element, l)
}
