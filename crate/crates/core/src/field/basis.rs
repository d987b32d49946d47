//! Orthonormal modal basis and nodal layouts on the reference triangle.
//!
//! Basis functions are collapsed-coordinate (Dubiner) products, expanded
//! into monomials `x^a y^b` of the reference coordinates so that values,
//! gradients and exact integrals are all cheap and exact.

use std::sync::OnceLock;

use nalgebra::DMatrix;

/// Maximum supported field degree.
pub const MAX_DEGREE: usize = 3;

const PD: usize = 8;

/// Dense bivariate polynomial in reference coordinates, total degree < 8.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Poly2 {
    c: [[f64; PD]; PD],
}

impl Poly2 {
    pub fn zero() -> Self {
        Poly2 { c: [[0.0; PD]; PD] }
    }

    pub fn constant(v: f64) -> Self {
        let mut p = Self::zero();
        p.c[0][0] = v;
        p
    }

    /// `cx * x + cy * y + c0`
    pub fn linear(cx: f64, cy: f64, c0: f64) -> Self {
        let mut p = Self::constant(c0);
        p.c[1][0] = cx;
        p.c[0][1] = cy;
        p
    }

    pub fn coeff(&self, a: usize, b: usize) -> f64 {
        self.c[a][b]
    }

    pub fn degree(&self) -> usize {
        let mut d = 0;
        for a in 0..PD {
            for b in 0..PD - a {
                if self.c[a][b] != 0.0 {
                    d = d.max(a + b);
                }
            }
        }
        d
    }

    pub fn add(&self, o: &Poly2) -> Poly2 {
        let mut r = *self;
        for a in 0..PD {
            for b in 0..PD {
                r.c[a][b] += o.c[a][b];
            }
        }
        r
    }

    pub fn scale(&self, s: f64) -> Poly2 {
        let mut r = *self;
        r.c.iter_mut().flatten().for_each(|v| *v *= s);
        r
    }

    pub fn mul(&self, o: &Poly2) -> Poly2 {
        debug_assert!(self.degree() + o.degree() < PD);
        let mut r = Poly2::zero();
        for a in 0..PD {
            for b in 0..PD - a {
                let u = self.c[a][b];
                if u == 0.0 {
                    continue;
                }
                for c in 0..PD - a - b {
                    for d in 0..PD - a - b - c {
                        r.c[a + c][b + d] += u * o.c[c][d];
                    }
                }
            }
        }
        r
    }

    pub fn pow(&self, n: usize) -> Poly2 {
        (0..n).fold(Poly2::constant(1.0), |acc, _| acc.mul(self))
    }

    pub fn dx(&self) -> Poly2 {
        let mut r = Poly2::zero();
        for a in 1..PD {
            for b in 0..PD - a {
                r.c[a - 1][b] = a as f64 * self.c[a][b];
            }
        }
        r
    }

    pub fn dy(&self) -> Poly2 {
        let mut r = Poly2::zero();
        for a in 0..PD {
            for b in 1..PD - a {
                r.c[a][b - 1] = b as f64 * self.c[a][b];
            }
        }
        r
    }

    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let mut s = 0.0;
        let mut xa = 1.0;
        for a in 0..PD {
            let mut yb = 1.0;
            for b in 0..PD - a {
                s += self.c[a][b] * xa * yb;
                yb *= y;
            }
            xa *= x;
        }
        s
    }

    /// Exact integral over the reference triangle, using
    /// `int x^a y^b = a! b! / (a + b + 2)!`.
    pub fn integrate_reference(&self) -> f64 {
        let mut s = 0.0;
        for a in 0..PD {
            for b in 0..PD - a {
                if self.c[a][b] != 0.0 {
                    s += self.c[a][b] * monomial_integral(a, b);
                }
            }
        }
        s
    }

    fn terms(&self) -> Vec<(usize, usize, f64)> {
        let mut t = Vec::new();
        for a in 0..PD {
            for b in 0..PD - a {
                if self.c[a][b] != 0.0 {
                    t.push((a, b, self.c[a][b]));
                }
            }
        }
        t
    }
}

pub fn monomial_integral(a: usize, b: usize) -> f64 {
    let fact = |n: usize| (1..=n).map(|k| k as f64).product::<f64>();
    fact(a) * fact(b) / fact(a + b + 2)
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Number of basis functions for degree `k`.
pub const fn num_basis(k: usize) -> usize {
    (k + 1) * (k + 2) / 2
}

/// Sparse monomial form for fast evaluation.
#[derive(Debug, Clone)]
struct Compiled {
    terms: Vec<(usize, usize, f64)>,
}

impl Compiled {
    #[inline]
    fn eval(&self, xp: &[f64; 4], yp: &[f64; 4]) -> f64 {
        self.terms.iter().map(|&(a, b, c)| c * xp[a] * yp[b]).sum()
    }
}

/// Orthonormal basis of P_k on the reference triangle: the reference mass
/// matrix is the identity.
#[derive(Debug, Clone)]
pub struct ModalBasis {
    degree: usize,
    polys: Vec<Poly2>,
    val: Vec<Compiled>,
    dx: Vec<Compiled>,
    dy: Vec<Compiled>,
}

impl ModalBasis {
    fn build(k: usize) -> Self {
        let x = Poly2::linear(1.0, 0.0, 0.0);
        let y = Poly2::linear(0.0, 1.0, 0.0);
        let mut polys = Vec::with_capacity(num_basis(k));
        for d in 0..=k {
            for q in 0..=d {
                let p = d - q;
                // (1-y)^p P_p((2x-1+y)/(1-y)) = sum_j C(p,j)^2 (x+y-1)^j x^(p-j)
                let xy1 = Poly2::linear(1.0, 1.0, -1.0);
                let mut left = Poly2::zero();
                for j in 0..=p {
                    let c = binomial(p, j).powi(2);
                    left = left.add(&xy1.pow(j).mul(&x.pow(p - j)).scale(c));
                }
                // P_q^{(2p+1,0)}(2y-1) = sum_s C(q+2p+1, q-s) C(q, s) (y-1)^s y^(q-s)
                let alpha = 2 * p + 1;
                let y1 = Poly2::linear(0.0, 1.0, -1.0);
                let mut right = Poly2::zero();
                for s in 0..=q {
                    let c = binomial(q + alpha, q - s) * binomial(q, s);
                    right = right.add(&y1.pow(s).mul(&y.pow(q - s)).scale(c));
                }
                let raw = left.mul(&right);
                let norm = raw.mul(&raw).integrate_reference().sqrt();
                polys.push(raw.scale(1.0 / norm));
            }
        }
        let compile = |p: &Poly2| Compiled { terms: p.terms() };
        ModalBasis {
            degree: k,
            val: polys.iter().map(compile).collect(),
            dx: polys.iter().map(|p| compile(&p.dx())).collect(),
            dy: polys.iter().map(|p| compile(&p.dy())).collect(),
            polys,
        }
    }

    /// Shared basis instance for degree `k` (0..=3).
    pub fn get(k: usize) -> &'static ModalBasis {
        static CACHE: [OnceLock<ModalBasis>; MAX_DEGREE + 1] =
            [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
        assert!(k <= MAX_DEGREE, "basis degree {k} unsupported");
        CACHE[k].get_or_init(|| ModalBasis::build(k))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn len(&self) -> usize {
        self.polys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.polys.is_empty()
    }

    pub fn poly(&self, j: usize) -> &Poly2 {
        &self.polys[j]
    }

    #[inline]
    fn powers(r: [f64; 2]) -> ([f64; 4], [f64; 4]) {
        let (x, y) = (r[0], r[1]);
        ([1.0, x, x * x, x * x * x], [1.0, y, y * y, y * y * y])
    }

    /// Values of all basis functions at reference point `r`.
    pub fn eval_all(&self, r: [f64; 2], out: &mut [f64]) {
        let (xp, yp) = Self::powers(r);
        for (o, p) in out.iter_mut().zip(&self.val) {
            *o = p.eval(&xp, &yp);
        }
    }

    /// `sum_j coeffs[j] psi_j(r)`.
    pub fn combine(&self, coeffs: &[f64], r: [f64; 2]) -> f64 {
        let (xp, yp) = Self::powers(r);
        coeffs.iter().zip(&self.val).map(|(c, p)| c * p.eval(&xp, &yp)).sum()
    }

    /// Reference-coordinate gradient of `sum_j coeffs[j] psi_j` at `r`.
    pub fn combine_grad(&self, coeffs: &[f64], r: [f64; 2]) -> [f64; 2] {
        let (xp, yp) = Self::powers(r);
        let mut g = [0.0; 2];
        for (j, c) in coeffs.iter().enumerate() {
            g[0] += c * self.dx[j].eval(&xp, &yp);
            g[1] += c * self.dy[j].eval(&xp, &yp);
        }
        g
    }

    /// Exact reference mass matrix.
    pub fn mass_matrix(&self) -> DMatrix<f64> {
        let n = self.len();
        DMatrix::from_fn(n, n, |i, j| self.polys[i].mul(&self.polys[j]).integrate_reference())
    }
}

/// Nodal points per element: vertices, then edge nodes for edges
/// (a2,a3), (a3,a1), (a1,a2), then the centroid for k = 3.
#[derive(Debug, Clone)]
pub struct NodalLayout {
    degree: usize,
    nodes: Vec<[f64; 3]>,
    /// Inverse Vandermonde: modal = inv_vandermonde * nodal.
    inv_vandermonde: DMatrix<f64>,
    vandermonde: DMatrix<f64>,
}

impl NodalLayout {
    fn build(k: usize) -> Self {
        assert!((1..=MAX_DEGREE).contains(&k));
        let mut nodes = vec![[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        let edge_fracs: &[f64] = match k {
            1 => &[],
            2 => &[0.5],
            _ => &[1.0 / 3.0, 2.0 / 3.0],
        };
        for i in 0..3 {
            let (a, b) = ((i + 1) % 3, (i + 2) % 3);
            for &t in edge_fracs {
                let mut l = [0.0; 3];
                l[a] = 1.0 - t;
                l[b] = t;
                nodes.push(l);
            }
        }
        if k == 3 {
            nodes.push([1.0 / 3.0; 3]);
        }
        let basis = ModalBasis::get(k);
        let n = nodes.len();
        let mut row = vec![0.0; n];
        let mut v = DMatrix::zeros(n, n);
        for (i, l) in nodes.iter().enumerate() {
            basis.eval_all([l[1], l[2]], &mut row);
            for j in 0..n {
                v[(i, j)] = row[j];
            }
        }
        let inv = v.clone().try_inverse().expect("nodal Vandermonde is invertible");
        NodalLayout { degree: k, nodes, inv_vandermonde: inv, vandermonde: v }
    }

    pub fn get(k: usize) -> &'static NodalLayout {
        static CACHE: [OnceLock<NodalLayout>; MAX_DEGREE + 1] =
            [OnceLock::new(), OnceLock::new(), OnceLock::new(), OnceLock::new()];
        assert!((1..=MAX_DEGREE).contains(&k), "nodal layout degree {k} unsupported");
        CACHE[k].get_or_init(|| NodalLayout::build(k))
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn nodes(&self) -> &[[f64; 3]] {
        &self.nodes
    }

    pub fn to_modal(&self, nodal: &[f64]) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n).map(|i| (0..n).map(|j| self.inv_vandermonde[(i, j)] * nodal[j]).sum()).collect()
    }

    pub fn to_nodal(&self, modal: &[f64]) -> Vec<f64> {
        let n = self.nodes.len();
        (0..n).map(|i| (0..n).map(|j| self.vandermonde[(i, j)] * modal[j]).sum()).collect()
    }
}
