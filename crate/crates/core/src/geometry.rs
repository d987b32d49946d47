//! Small planar geometry kernel shared by the mesh, locator and HCT code.

pub type Point = [f64; 2];

/// Twice the signed area of `(a, b, c)`, positive when counterclockwise.
#[inline]
pub fn det2(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

#[inline]
pub fn signed_area(a: Point, b: Point, c: Point) -> f64 {
    0.5 * det2(a, b, c)
}

#[inline]
pub fn dist(a: Point, b: Point) -> f64 {
    (b[0] - a[0]).hypot(b[1] - a[1])
}

#[inline]
pub fn dist2(a: Point, b: Point) -> f64 {
    let dx = b[0] - a[0];
    let dy = b[1] - a[1];
    dx * dx + dy * dy
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

#[inline]
pub fn dot(a: Point, b: Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Physical point for barycentric coordinates `l` on triangle `t`.
#[inline]
pub fn from_barycentric(t: &[Point; 3], l: [f64; 3]) -> Point {
    [l[0] * t[0][0] + l[1] * t[1][0] + l[2] * t[2][0], l[0] * t[0][1] + l[1] * t[1][1] + l[2] * t[2][1]]
}

/// Barycentric coordinates of `p` from the three signed sub-areas.
/// The caller guarantees a nondegenerate triangle.
#[inline]
pub fn barycentric(t: &[Point; 3], p: Point) -> [f64; 3] {
    let total = det2(t[0], t[1], t[2]);
    let l1 = det2(p, t[1], t[2]) / total;
    let l2 = det2(t[0], p, t[2]) / total;
    [l1, l2, 1.0 - l1 - l2]
}

/// Longest edge length.
pub fn diameter(t: &[Point; 3]) -> f64 {
    dist(t[0], t[1]).max(dist(t[1], t[2])).max(dist(t[2], t[0]))
}

/// Affine map from the reference triangle {(0,0),(1,0),(0,1)} onto a
/// physical triangle: `x = a1 + J (xi, eta)`.
#[derive(Debug, Clone, Copy)]
pub struct AffineMap {
    pub origin: Point,
    /// Column-major Jacobian `[[dx/dxi, dy/dxi], [dx/deta, dy/deta]]`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    /// Rows of J^{-T}: physical gradient = inv_t * reference gradient.
    pub inv_t: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn new(t: &[Point; 3]) -> Self {
        let c0 = sub(t[1], t[0]);
        let c1 = sub(t[2], t[0]);
        let det = c0[0] * c1[1] - c1[0] * c0[1];
        // J = [[c0x, c1x], [c0y, c1y]], J^{-1} = 1/det [[c1y, -c1x], [-c0y, c0x]]
        let inv_t = [[c1[1] / det, -c0[1] / det], [-c1[0] / det, c0[0] / det]];
        AffineMap { origin: t[0], jac: [c0, c1], det, inv_t }
    }

    #[inline]
    pub fn to_physical(&self, r: Point) -> Point {
        [
            self.origin[0] + self.jac[0][0] * r[0] + self.jac[1][0] * r[1],
            self.origin[1] + self.jac[0][1] * r[0] + self.jac[1][1] * r[1],
        ]
    }

    #[inline]
    pub fn to_reference(&self, p: Point) -> Point {
        let d = sub(p, self.origin);
        // J^{-1} = transpose of inv_t
        [self.inv_t[0][0] * d[0] + self.inv_t[1][0] * d[1], self.inv_t[0][1] * d[0] + self.inv_t[1][1] * d[1]]
    }

    /// Maps a reference-space gradient to the physical gradient.
    #[inline]
    pub fn grad_to_physical(&self, g: Point) -> Point {
        [self.inv_t[0][0] * g[0] + self.inv_t[0][1] * g[1], self.inv_t[1][0] * g[0] + self.inv_t[1][1] * g[1]]
    }

    /// Maps a physical direction vector into reference space (J^{-1} d).
    #[inline]
    pub fn dir_to_reference(&self, d: Point) -> Point {
        [self.inv_t[0][0] * d[0] + self.inv_t[1][0] * d[1], self.inv_t[0][1] * d[0] + self.inv_t[1][1] * d[1]]
    }

    /// Ratio A_T / A_R of physical to reference area.
    #[inline]
    pub fn area_ratio(&self) -> f64 {
        self.det.abs()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn affine_round_trip() {
        let t = [[5.0, 5.0], [7.5, 5.2], [5.9, 8.1]];
        let m = AffineMap::new(&t);
        let p = [6.1, 6.3];
        let r = m.to_reference(p);
        let q = m.to_physical(r);
        assert!(dist(p, q) < 1e-13);
        let l = barycentric(&t, p);
        assert!((l[1] - r[0]).abs() < 1e-13 && (l[2] - r[1]).abs() < 1e-13);
    }

    #[test]
    fn gradient_mapping_of_plane() {
        // f = 3x - y; in reference coords f = 3 x(r) - y(r)
        let t = [[0.3, -0.2], [1.1, 0.4], [-0.5, 0.9]];
        let m = AffineMap::new(&t);
        let gref = [3.0 * m.jac[0][0] - m.jac[0][1], 3.0 * m.jac[1][0] - m.jac[1][1]];
        let g = m.grad_to_physical(gref);
        assert!((g[0] - 3.0).abs() < 1e-13 && (g[1] + 1.0).abs() < 1e-13);
    }
}
