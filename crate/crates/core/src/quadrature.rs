//! Symmetric quadrature on the reference triangle {(0,0),(1,0),(0,1)},
//! uniform and manual h-refinement into composite rules, and tensor
//! Gauss-Legendre rules on rectangles.
//!
//! Points are barycentric triples `(l1, l2, l3)`; the reference point is
//! `(x, y) = (l2, l3)`. Weights sum to the reference area 1/2.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::mesh::Domain;

/// Largest supported uniform refinement level.
pub const MAX_LEVEL: u32 = 4;

/// Symmetric base rules.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BaseRule {
    /// 3 points, degree 2.
    P3,
    /// 6 points, degree 4.
    P6,
    /// 15 points, degree 7.
    P15,
}

// Orbit data: (orbit, weight). S21 orbits are given by `a` (point
// (a, a, 1-2a)), S111 orbits by `(a, b)` (point (a, b, 1-a-b)).
// Coordinates were obtained by solving the symmetric moment equations to
// 40 digits and are checked against exact monomial integrals in tests.
const S21_P3: [(f64, f64); 1] = [(1.0 / 6.0, 1.0 / 6.0)];

const S21_P6: [(f64, f64); 2] = [
    (0.445_948_490_915_964_886_318_329_253_883, 0.111_690_794_839_005_732_847_503_504_217),
    (0.091_576_213_509_770_743_459_571_463_402, 0.054_975_871_827_660_933_819_163_162_450),
];

const S21_P15: [(f64, f64); 1] =
    [(0.064_930_513_159_164_863_078_379_776_030, 0.026_538_900_895_116_205_835_977_487_500)];

const S111_P15: [(f64, f64, f64); 2] = [
    (
        0.284_575_584_249_170_335_197_416_057_350,
        0.517_039_939_069_322_945_622_707_344_017,
        0.035_426_541_846_066_783_659_206_291_623,
    ),
    (
        0.043_863_471_792_372_471_511_798_695_971,
        0.313_559_184_384_931_507_955_851_902_199,
        0.034_637_341_039_708_446_756_138_297_960,
    ),
];

impl BaseRule {
    pub fn from_points(n: usize) -> Result<Self> {
        match n {
            3 => Ok(BaseRule::P3),
            6 => Ok(BaseRule::P6),
            15 => Ok(BaseRule::P15),
            _ => Err(Error::Config(format!("unknown base rule with {n} points (accepted: 3, 6, 15)"))),
        }
    }

    pub fn num_points(self) -> usize {
        match self {
            BaseRule::P3 => 3,
            BaseRule::P6 => 6,
            BaseRule::P15 => 15,
        }
    }

    /// Polynomial degree integrated exactly.
    pub fn degree(self) -> u32 {
        match self {
            BaseRule::P3 => 2,
            BaseRule::P6 => 4,
            BaseRule::P15 => 7,
        }
    }

    /// Barycentric points and weights of the unrefined rule.
    pub fn table(self) -> (Vec<[f64; 3]>, Vec<f64>) {
        let mut pts = Vec::with_capacity(self.num_points());
        let mut wts = Vec::with_capacity(self.num_points());
        let s21: &[(f64, f64)] = match self {
            BaseRule::P3 => &S21_P3,
            BaseRule::P6 => &S21_P6,
            BaseRule::P15 => &S21_P15,
        };
        for &(a, w) in s21 {
            let b = 1.0 - 2.0 * a;
            for p in [[b, a, a], [a, b, a], [a, a, b]] {
                pts.push(p);
                wts.push(w);
            }
        }
        if self == BaseRule::P15 {
            for &(a, b, w) in &S111_P15 {
                let c = 1.0 - a - b;
                for p in [[a, b, c], [a, c, b], [b, a, c], [b, c, a], [c, a, b], [c, b, a]] {
                    pts.push(p);
                    wts.push(w);
                }
            }
        }
        (pts, wts)
    }
}

/// A base rule plus a uniform h-refinement level, written `15x1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct QuadSpec {
    pub base: BaseRule,
    pub level: u32,
}

impl QuadSpec {
    pub fn new(base: BaseRule, level: u32) -> Result<Self> {
        if level > MAX_LEVEL {
            return Err(Error::Config(format!("refinement level {level} exceeds the cap of {MAX_LEVEL}")));
        }
        Ok(QuadSpec { base, level })
    }

    pub fn num_points(&self) -> usize {
        self.base.num_points() * 4usize.pow(self.level)
    }

    pub fn realize(&self) -> CompositeRule {
        let mut tree = Subdivision::Leaf(self.base);
        for _ in 0..self.level {
            tree = Subdivision::Split(Box::new([tree.clone(), tree.clone(), tree.clone(), tree]));
        }
        tree.realize()
    }
}

impl Default for QuadSpec {
    /// 15-point rule with one refinement.
    fn default() -> Self {
        QuadSpec { base: BaseRule::P15, level: 1 }
    }
}

impl fmt::Display for QuadSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}x{}", self.base.num_points(), self.level)
    }
}

impl FromStr for QuadSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("invalid quadrature spec `{s}` (expected e.g. 15x1)"));
        let (b, l) = s.trim().split_once(['x', 'X']).ok_or_else(bad)?;
        let n: usize = b.parse().map_err(|_| bad())?;
        let level: u32 = l.parse().map_err(|_| bad())?;
        QuadSpec::new(BaseRule::from_points(n)?, level)
    }
}

/// Manual (possibly non-uniform) refinement of the reference triangle:
/// each node either applies a base rule or splits into four midpoint
/// subtriangles, ordered corner 1, corner 2, corner 3, center.
#[derive(Debug, Clone, PartialEq)]
pub enum Subdivision {
    Leaf(BaseRule),
    Split(Box<[Subdivision; 4]>),
}

impl Subdivision {
    pub fn realize(&self) -> CompositeRule {
        let mut rule = CompositeRule { points: Vec::new(), weights: Vec::new(), degree: u32::MAX };
        let reference = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
        self.fill(&reference, 1.0, &mut rule);
        rule
    }

    fn fill(&self, corners: &[[f64; 3]; 3], scale: f64, out: &mut CompositeRule) {
        match self {
            Subdivision::Leaf(base) => {
                let (pts, wts) = base.table();
                for (p, w) in pts.iter().zip(wts) {
                    let mut q = [0.0; 3];
                    for (c, &l) in corners.iter().zip(p) {
                        for k in 0..3 {
                            q[k] += l * c[k];
                        }
                    }
                    out.points.push(q);
                    out.weights.push(w * scale);
                }
                out.degree = out.degree.min(base.degree());
            }
            Subdivision::Split(children) => {
                let mid = |a: &[f64; 3], b: &[f64; 3]| [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1]), 0.5 * (a[2] + b[2])];
                let [a, b, c] = corners;
                let (ab, bc, ca) = (mid(a, b), mid(b, c), mid(c, a));
                let subs = [[*a, ab, ca], [ab, *b, bc], [ca, bc, *c], [bc, ca, ab]];
                for (child, sub) in children.iter().zip(subs.iter()) {
                    child.fill(sub, scale * 0.25, out);
                }
            }
        }
    }
}

/// Points and weights on the reference triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeRule {
    pub points: Vec<[f64; 3]>,
    pub weights: Vec<f64>,
    /// Minimum exact degree over the leaves.
    pub degree: u32,
}

impl CompositeRule {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Integral over the reference triangle of `f` evaluated at barycentric
    /// points.
    pub fn integrate<F: FnMut([f64; 3]) -> f64>(&self, mut f: F) -> f64 {
        self.points.iter().zip(&self.weights).map(|(&p, &w)| w * f(p)).sum()
    }
}

pub fn integrate_reference<F: FnMut([f64; 3]) -> f64>(rule: &CompositeRule, f: F) -> f64 {
    rule.integrate(f)
}

/// Gauss-Legendre rule on [-1, 1].
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(n: usize) -> Result<Self> {
        if !(1..=64).contains(&n) {
            return Err(Error::Config(format!("Gauss-Legendre order {n} outside 1..=64")));
        }
        let mut nodes = vec![0.0; n];
        let mut weights = vec![0.0; n];
        for i in 0..n.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_n.
            let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
            let mut dp = 0.0;
            for _ in 0..100 {
                let (p, d) = legendre(n, x);
                dp = d;
                let dx = p / d;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, d) = legendre(n, x);
            dp = if d != 0.0 { d } else { dp };
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[n - 1 - i] = x;
            weights[i] = w;
            weights[n - 1 - i] = w;
        }
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        Ok(GaussLegendre { nodes, weights })
    }

    /// Nodes and weights mapped onto `[a, b]`.
    pub fn on_interval(&self, a: f64, b: f64) -> (Vec<f64>, Vec<f64>) {
        let half = 0.5 * (b - a);
        let mid = 0.5 * (a + b);
        (self.nodes.iter().map(|x| mid + half * x).collect(), self.weights.iter().map(|w| half * w).collect())
    }
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// `n x n` tensor Gauss rule over a rectangle: `(point, weight)` pairs in
/// row-major order (y outer).
pub fn tensor_gauss(domain: &Domain, n: usize) -> Result<Vec<([f64; 2], f64)>> {
    let g = GaussLegendre::new(n)?;
    let (xs, wx) = g.on_interval(domain.x[0], domain.x[1]);
    let (ys, wy) = g.on_interval(domain.y[0], domain.y[1]);
    let mut out = Vec::with_capacity(n * n);
    for (y, wy) in ys.iter().zip(&wy) {
        for (x, wx) in xs.iter().zip(&wx) {
            out.push(([*x, *y], wx * wy));
        }
    }
    Ok(out)
}
