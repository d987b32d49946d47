//! Point location: a bounding volume hierarchy over triangle boxes, the
//! area-sum containment test, and HCT subtriangle classification.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::geometry::{self, Point};
use crate::mesh::TriMesh;

/// Relative tolerance of the area-sum test.
pub const AREA_TOL: f64 = 1e-12;
/// Fallback search radius relative to the mesh diameter.
pub const FALLBACK_EPS: f64 = 1e-9;

type Aabb = [f64; 4];

#[inline]
fn box_contains(b: &Aabb, p: Point, eps: f64) -> bool {
    p[0] >= b[0] - eps && p[0] <= b[1] + eps && p[1] >= b[2] - eps && p[1] <= b[3] + eps
}

fn union(a: &Aabb, b: &Aabb) -> Aabb {
    [a[0].min(b[0]), a[1].max(b[1]), a[2].min(b[2]), a[3].max(b[3])]
}

#[derive(Debug, Clone, Copy)]
enum NodeKind {
    Leaf(usize),
    Inner(usize, usize),
}

#[derive(Debug, Clone, Copy)]
struct Node {
    bbox: Aabb,
    kind: NodeKind,
}

/// Binary tree of axis-aligned boxes with one triangle per leaf.
#[derive(Debug, Clone)]
pub struct Bvh {
    nodes: Vec<Node>,
    root: usize,
}

impl Bvh {
    pub fn build(mesh: &TriMesh) -> Bvh {
        let n = mesh.num_triangles();
        let boxes: Vec<Aabb> = (0..n)
            .map(|t| {
                let p = mesh.triangle_points(t);
                [
                    p[0][0].min(p[1][0]).min(p[2][0]),
                    p[0][0].max(p[1][0]).max(p[2][0]),
                    p[0][1].min(p[1][1]).min(p[2][1]),
                    p[0][1].max(p[1][1]).max(p[2][1]),
                ]
            })
            .collect();
        let centroids: Vec<Point> = boxes.iter().map(|b| [0.5 * (b[0] + b[1]), 0.5 * (b[2] + b[3])]).collect();
        let mut order: Vec<usize> = (0..n).collect();
        let mut nodes = Vec::with_capacity(2 * n);
        let root = build_rec(&mut order, &boxes, &centroids, &mut nodes);
        Bvh { nodes, root }
    }

    pub fn num_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n.kind, NodeKind::Leaf(_))).count()
    }

    /// Number of nodes on the longest root-to-leaf path, minus one.
    pub fn depth(&self) -> usize {
        fn rec(nodes: &[Node], i: usize) -> usize {
            match nodes[i].kind {
                NodeKind::Leaf(_) => 0,
                NodeKind::Inner(l, r) => 1 + rec(nodes, l).max(rec(nodes, r)),
            }
        }
        rec(&self.nodes, self.root)
    }

    /// Checks that every node box contains its children's boxes and that
    /// each triangle sits in exactly one leaf.
    pub fn validate(&self, num_triangles: usize) -> bool {
        let mut seen = vec![0usize; num_triangles];
        for node in &self.nodes {
            match node.kind {
                NodeKind::Leaf(t) => seen[t] += 1,
                NodeKind::Inner(l, r) => {
                    for c in [l, r] {
                        let cb = self.nodes[c].bbox;
                        if union(&node.bbox, &cb) != node.bbox {
                            return false;
                        }
                    }
                }
            }
        }
        seen.iter().all(|&c| c == 1)
    }

    /// Visits every leaf whose box contains `p` (inflated by `eps`).
    fn visit<F: FnMut(usize)>(&self, p: Point, eps: f64, mut f: F) {
        let mut stack = Vec::with_capacity(64);
        stack.push(self.root);
        while let Some(i) = stack.pop() {
            let node = &self.nodes[i];
            if !box_contains(&node.bbox, p, eps) {
                continue;
            }
            match node.kind {
                NodeKind::Leaf(t) => f(t),
                NodeKind::Inner(l, r) => {
                    stack.push(r);
                    stack.push(l);
                }
            }
        }
    }
}

fn build_rec(order: &mut [usize], boxes: &[Aabb], centroids: &[Point], nodes: &mut Vec<Node>) -> usize {
    if order.len() == 1 {
        nodes.push(Node { bbox: boxes[order[0]], kind: NodeKind::Leaf(order[0]) });
        return nodes.len() - 1;
    }
    let mut cb = [f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY];
    for &t in order.iter() {
        let c = centroids[t];
        cb = union(&cb, &[c[0], c[0], c[1], c[1]]);
    }
    let axis = if cb[1] - cb[0] >= cb[3] - cb[2] { 0 } else { 1 };
    let mid = order.len() / 2;
    order.select_nth_unstable_by(mid, |&a, &b| centroids[a][axis].total_cmp(&centroids[b][axis]).then(a.cmp(&b)));
    let (lo, hi) = order.split_at_mut(mid);
    let l = build_rec(lo, boxes, centroids, nodes);
    let r = build_rec(hi, boxes, centroids, nodes);
    nodes.push(Node { bbox: union(&nodes[l].bbox, &nodes[r].bbox), kind: NodeKind::Inner(l, r) });
    nodes.len() - 1
}

pub fn build_bvh(mesh: &TriMesh) -> Bvh {
    Bvh::build(mesh)
}

/// Area-sum containment test: `p` is inside (boundary inclusive) when the
/// three sub-areas add up to the triangle area.
pub fn point_in_triangle(tri: &[Point; 3], p: Point) -> Result<bool> {
    let total = geometry::det2(tri[0], tri[1], tri[2]).abs();
    if total == 0.0 {
        return Err(Error::Geometry("zero-area triangle in containment test".into()));
    }
    Ok(contains(tri, p, total))
}

#[inline]
fn contains(tri: &[Point; 3], p: Point, total: f64) -> bool {
    let s = geometry::det2(tri[0], tri[1], p).abs()
        + geometry::det2(tri[1], tri[2], p).abs()
        + geometry::det2(tri[2], tri[0], p).abs();
    s <= total * (1.0 + AREA_TOL)
}

/// Index in {1, 2, 3} of the HCT subtriangle `{G, a_{i+1}, a_{i+2}}`
/// containing barycentric point `l`; ties go to the lowest index.
pub fn subtriangle(l: [f64; 3]) -> u8 {
    // Work in reference coordinates where the test is scale-free.
    const A: [Point; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
    const G: Point = [1.0 / 3.0, 1.0 / 3.0];
    let r = [l[1], l[2]];
    for i in 0..3 {
        let tri = [G, A[(i + 1) % 3], A[(i + 2) % 3]];
        if contains(&tri, r, 1.0 / 3.0) {
            return i as u8 + 1;
        }
    }
    // Outside the parent by roundoff: the region of the smallest coordinate.
    let mut best = 0;
    for i in 1..3 {
        if l[i] < l[best] {
            best = i;
        }
    }
    best as u8 + 1
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocateResult {
    pub element: usize,
    pub barycentric: [f64; 3],
    /// HCT subtriangle index in {1, 2, 3}.
    pub subtriangle: u8,
}

/// Mesh plus BVH, answering point queries.
#[derive(Debug, Clone)]
pub struct Locator {
    mesh: Arc<TriMesh>,
    bvh: Bvh,
    /// Twice the triangle areas, cached for the containment test.
    det: Vec<f64>,
    eps: f64,
}

impl Locator {
    pub fn new(mesh: Arc<TriMesh>) -> Self {
        let bvh = Bvh::build(&mesh);
        let det = (0..mesh.num_triangles())
            .map(|t| {
                let p = mesh.triangle_points(t);
                geometry::det2(p[0], p[1], p[2])
            })
            .collect();
        let bb = mesh.bounding_box();
        let eps = FALLBACK_EPS * (bb[1] - bb[0]).hypot(bb[3] - bb[2]);
        Locator { mesh, bvh, det, eps }
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn bvh(&self) -> &Bvh {
        &self.bvh
    }

    fn result(&self, element: usize, p: Point) -> LocateResult {
        let l = geometry::barycentric(&self.mesh.triangle_points(element), p);
        LocateResult { element, barycentric: l, subtriangle: subtriangle(l) }
    }

    /// Every element whose closed triangle contains `p`, ascending.
    pub fn locate_all(&self, p: Point) -> Vec<usize> {
        let mut hits = Vec::new();
        self.bvh.visit(p, 0.0, |t| {
            if contains(&self.mesh.triangle_points(t), p, self.det[t]) {
                hits.push(t);
            }
        });
        hits.sort_unstable();
        hits
    }

    /// Containing element with the lowest index. Falls back to the nearest
    /// element within the epsilon box when the exact test finds nothing.
    pub fn locate(&self, p: Point) -> Result<LocateResult> {
        let mut best: Option<usize> = None;
        self.bvh.visit(p, 0.0, |t| {
            if best.is_none_or(|b| t < b) && contains(&self.mesh.triangle_points(t), p, self.det[t]) {
                best = Some(t);
            }
        });
        if let Some(t) = best {
            return Ok(self.result(t, p));
        }
        self.locate_fallback(p)
    }

    fn locate_fallback(&self, p: Point) -> Result<LocateResult> {
        let mut best: Option<(f64, usize)> = None;
        self.bvh.visit(p, self.eps, |t| {
            let d = distance_to_triangle(&self.mesh.triangle_points(t), p);
            if d <= self.eps && best.is_none_or(|(bd, bt)| d < bd || (d == bd && t < bt)) {
                best = Some((d, t));
            }
        });
        let (_, t) = best.ok_or(Error::Location { x: p[0], y: p[1] })?;
        let mut l = geometry::barycentric(&self.mesh.triangle_points(t), p);
        l.iter_mut().for_each(|v| *v = v.max(0.0));
        let s: f64 = l.iter().sum();
        l.iter_mut().for_each(|v| *v /= s);
        Ok(LocateResult { element: t, barycentric: l, subtriangle: subtriangle(l) })
    }
}

pub fn locate(locator: &Locator, p: Point) -> Result<LocateResult> {
    locator.locate(p)
}

fn distance_to_segment(a: Point, b: Point, p: Point) -> f64 {
    let ab = geometry::sub(b, a);
    let t = (geometry::dot(geometry::sub(p, a), ab) / geometry::dot(ab, ab)).clamp(0.0, 1.0);
    geometry::dist(p, [a[0] + t * ab[0], a[1] + t * ab[1]])
}

fn distance_to_triangle(t: &[Point; 3], p: Point) -> f64 {
    let l = geometry::barycentric(t, p);
    if l.iter().all(|&v| v >= 0.0) {
        return 0.0;
    }
    distance_to_segment(t[0], t[1], p).min(distance_to_segment(t[1], t[2], p)).min(distance_to_segment(t[2], t[0], p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{generate_structured, generate_unstructured, Domain};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn brute_force(mesh: &TriMesh, p: Point) -> Option<usize> {
        (0..mesh.num_triangles()).find(|&t| point_in_triangle(&mesh.triangle_points(t), p).unwrap())
    }

    #[test]
    fn two_triangle_tree() {
        let mesh = generate_structured(&Domain::square(0.0, 1.0), 1).unwrap();
        let bvh = build_bvh(&mesh);
        assert_eq!(bvh.num_leaves(), 2);
        assert_eq!(bvh.depth(), 1);
        assert!(bvh.validate(2));
    }

    #[test]
    fn depth_bound_grid5() {
        let mesh = generate_structured(&Domain::square(5.0, 15.0), 64).unwrap();
        assert_eq!(mesh.num_triangles(), 8192);
        let bvh = build_bvh(&mesh);
        assert!(bvh.depth() <= 2 * 13);
        assert!(bvh.validate(8192));
    }

    #[test]
    fn containment_cases() {
        let t = [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]];
        assert!(point_in_triangle(&t, [2.0 / 3.0, 2.0 / 3.0]).unwrap());
        assert!(point_in_triangle(&t, [1.0, 0.0]).unwrap());
        assert!(point_in_triangle(&t, [1.0, 1.0]).unwrap());
        assert!(!point_in_triangle(&t, [1.5, 1.5]).unwrap());
        assert!(!point_in_triangle(&t, [-0.1, 0.5]).unwrap());
        let flat = [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]];
        assert!(point_in_triangle(&flat, [0.5, 0.5]).is_err());
    }

    #[test]
    fn centroids_locate_to_themselves() {
        let mesh = Arc::new(generate_unstructured(&Domain::square(5.0, 15.0), 0.5, 4).unwrap());
        let loc = Locator::new(mesh.clone());
        for t in 0..mesh.num_triangles() {
            let p = mesh.triangle_points(t);
            let c = [(p[0][0] + p[1][0] + p[2][0]) / 3.0, (p[0][1] + p[1][1] + p[2][1]) / 3.0];
            let r = loc.locate(c).unwrap();
            assert_eq!(r.element, t);
        }
    }

    #[test]
    fn shared_vertex_goes_to_lowest_index() {
        let mesh = Arc::new(generate_structured(&Domain::square(0.0, 4.0), 4).unwrap());
        let loc = Locator::new(mesh.clone());
        // interior vertex (1, 1) is shared by 6 triangles
        let v = 5 + 1;
        assert_eq!(mesh.vertices()[v], [1.0, 1.0]);
        assert_eq!(mesh.vertex_triangles(v).len(), 6);
        let lowest = *mesh.vertex_triangles(v).iter().min().unwrap();
        let r = loc.locate([1.0, 1.0]).unwrap();
        assert_eq!(r.element, lowest);
        assert_eq!(loc.locate_all([1.0, 1.0]).len(), 6);
    }

    #[test]
    fn barycenter_subtriangle_tie() {
        assert_eq!(subtriangle([1.0 / 3.0; 3]), 1);
        assert_eq!(subtriangle([0.1, 0.45, 0.45]), 1);
        assert_eq!(subtriangle([0.45, 0.1, 0.45]), 2);
        assert_eq!(subtriangle([0.45, 0.45, 0.1]), 3);
    }

    #[test]
    fn agrees_with_brute_force() {
        let d = Domain::square(5.0, 15.0);
        let mesh = Arc::new(generate_unstructured(&d, 0.7, 11).unwrap());
        let loc = Locator::new(mesh.clone());
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..2000 {
            let p = [rng.gen_range(5.0..15.0), rng.gen_range(5.0..15.0)];
            let r = loc.locate(p).unwrap();
            let b = brute_force(&mesh, p).unwrap();
            assert!(r.element == b || point_in_triangle(&mesh.triangle_points(r.element), p).unwrap());
            let t = mesh.triangle_points(r.element);
            let q = geometry::from_barycentric(&t, r.barycentric);
            assert!(geometry::dist(p, q) <= 1e-10 * mesh.h());
            assert!(r.barycentric.iter().all(|&l| l >= -1e-12));
        }
    }

    #[test]
    fn fallback_and_failure() {
        let mesh = Arc::new(generate_structured(&Domain::square(0.0, 1.0), 2).unwrap());
        let loc = Locator::new(mesh);
        // just outside the domain within the epsilon box
        let r = loc.locate([1.0 + 1e-11, 0.3]).unwrap();
        assert!(r.barycentric.iter().all(|&l| l >= 0.0));
        assert!(matches!(loc.locate([1.1, 0.3]), Err(Error::Location { .. })));
    }
}
