//! Moving a discontinuous field from a source mesh to a target mesh.
//!
//! Projection methods evaluate an integrand at the target element's
//! composite quadrature points, located in the source mesh, and solve the
//! local system `M f = B`. Interpolation methods sample the source at the
//! target element's nodal points.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;

pub use crate::field::ProjectionSystem;

use crate::error::{Error, Result};
use crate::field::{num_basis, DGField, NodalLayout, Projector};
use crate::geometry::{self, AffineMap};
use crate::hct::{self, HctSurrogate};
use crate::locate::Locator;
use crate::mesh::TriMesh;
use crate::quadrature::{CompositeRule, QuadSpec};
use crate::sum::pairwise_sum;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Raw source, L2-projection.
    Trans1,
    /// HCT surrogate of the source, L2-projection.
    Trans2,
    /// Raw source, L2-projection, then clamp to local source bounds.
    Trans3,
    /// Sampling at the target's P1 nodes.
    Linear,
    /// Sampling at the target's P2 nodes.
    Quadratic,
}

impl Method {
    pub const ALL: [Method; 5] = [Method::Trans1, Method::Trans2, Method::Trans3, Method::Linear, Method::Quadratic];

    pub fn name(self) -> &'static str {
        match self {
            Method::Trans1 => "TRANS1",
            Method::Trans2 => "TRANS2",
            Method::Trans3 => "TRANS3",
            Method::Linear => "LINEAR",
            Method::Quadratic => "QUADRATIC",
        }
    }

    /// Methods compared at degree `k` in the studies.
    pub fn study_set(k: usize) -> Vec<Method> {
        match k {
            1 => vec![Method::Trans1, Method::Trans2, Method::Trans3, Method::Linear],
            2 => vec![Method::Trans1, Method::Trans2, Method::Linear, Method::Quadratic],
            _ => vec![Method::Trans1, Method::Trans2],
        }
    }

    pub fn supports(self, k: usize) -> bool {
        match self {
            Method::Trans1 | Method::Trans2 => (1..=3).contains(&k),
            Method::Trans3 => k == 1,
            Method::Linear => k == 1 || k == 2,
            Method::Quadratic => k == 2,
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| Error::Config(format!("unknown transfer method '{s}'")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TransferConfig {
    pub method: Method,
    pub degree: usize,
    pub quad: QuadSpec,
    /// True exactly for TRANS3.
    pub limiter_enabled: bool,
}

impl TransferConfig {
    pub fn new(method: Method, degree: usize, quad: QuadSpec) -> Result<Self> {
        if !method.supports(degree) {
            return Err(Error::Config(format!("{method} is not available for degree {degree}")));
        }
        Ok(TransferConfig { method, degree, quad, limiter_enabled: method == Method::Trans3 })
    }
}

fn wrap(element: usize) -> impl Fn(Error) -> Error {
    move |e| Error::Transfer { element, source: Box::new(e) }
}

/// Runs `f` on every target element in parallel. Results are gathered in
/// element order and the lowest failing element is reported.
fn per_element<F>(mesh: &TriMesh, f: F) -> Result<Vec<f64>>
where
    F: Fn(usize) -> Result<Vec<f64>> + Sync,
{
    let out: Vec<Result<Vec<f64>>> = (0..mesh.num_triangles()).into_par_iter().map(|e| f(e).map_err(wrap(e))).collect();
    let mut coeffs = Vec::new();
    for r in out {
        coeffs.extend(r?);
    }
    Ok(coeffs)
}

enum Integrand<'a> {
    Raw(&'a DGField),
    Smooth(&'a HctSurrogate),
}

fn project_onto(
    integrand: Integrand<'_>,
    locator: &Locator,
    target: &Arc<TriMesh>,
    degree: usize,
    rule: CompositeRule,
) -> Result<Vec<f64>> {
    let proj = Projector::new(rule, degree)?;
    per_element(target, |e| {
        let map = AffineMap::new(&target.triangle_points(e));
        let mut vals = Vec::with_capacity(proj.rule().len());
        for l in &proj.rule().points {
            let p = map.to_physical([l[1], l[2]]);
            let hit = locator.locate(p)?;
            vals.push(match integrand {
                Integrand::Raw(f) => f.value(hit.element, hit.barycentric),
                Integrand::Smooth(s) => s.value_on(hit.element, hit.subtriangle, hit.barycentric),
            });
        }
        Ok(proj.project(&vals))
    })
}

fn interpolate(
    source: &DGField,
    locator: &Locator,
    target: &Arc<TriMesh>,
    node_degree: usize,
    degree: usize,
) -> Result<Vec<f64>> {
    let layout = NodalLayout::get(node_degree);
    let nb = num_basis(degree);
    per_element(target, |e| {
        let pts = target.triangle_points(e);
        let mut nodal = Vec::with_capacity(layout.nodes().len());
        for &l in layout.nodes() {
            let hit = locator.locate(geometry::from_barycentric(&pts, l))?;
            nodal.push(source.value(hit.element, hit.barycentric));
        }
        // lower-degree modal coefficients embed by zero padding
        let mut c = layout.to_modal(&nodal);
        c.resize(nb, 0.0);
        Ok(c)
    })
}

/// Transfers `source` onto `target_mesh` with the configured method.
pub fn transfer(source: &DGField, target_mesh: Arc<TriMesh>, cfg: &TransferConfig) -> Result<DGField> {
    if source.degree() != cfg.degree {
        return Err(Error::Config(format!(
            "source degree {} differs from configured degree {}",
            source.degree(),
            cfg.degree
        )));
    }
    if !cfg.method.supports(cfg.degree) {
        return Err(Error::Config(format!("{} is not available for degree {}", cfg.method, cfg.degree)));
    }
    let locator = Locator::new(source.mesh().clone());
    let k = cfg.degree;
    let coeffs = match cfg.method {
        Method::Trans1 | Method::Trans3 => {
            project_onto(Integrand::Raw(source), &locator, &target_mesh, k, cfg.quad.realize())?
        }
        Method::Trans2 => {
            let s = hct::smooth(source)?;
            project_onto(Integrand::Smooth(&s), &locator, &target_mesh, k, cfg.quad.realize())?
        }
        Method::Linear => interpolate(source, &locator, &target_mesh, 1, k)?,
        Method::Quadratic => interpolate(source, &locator, &target_mesh, 2, k)?,
    };
    let out = DGField::new(target_mesh, k, coeffs)?;
    if cfg.limiter_enabled {
        limit_with(&out, source, &locator)
    } else {
        Ok(out)
    }
}

/// Clamps each nodal value of a degree-1 target field to the range of the
/// source nodal values over the source elements containing that node.
pub fn limit(target: &DGField, source: &DGField) -> Result<DGField> {
    limit_with(target, source, &Locator::new(source.mesh().clone()))
}

fn limit_with(target: &DGField, source: &DGField, locator: &Locator) -> Result<DGField> {
    if target.degree() != 1 || source.degree() != 1 {
        return Err(Error::Config("the limiter is defined for degree 1 only".into()));
    }
    let tmesh = target.mesh();
    let src_nodal: Vec<[f64; 3]> = (0..source.mesh().num_triangles())
        .into_par_iter()
        .map(|e| {
            let n = source.nodal_values(e);
            [n[0], n[1], n[2]]
        })
        .collect();
    let bounds: Vec<Result<(f64, f64)>> = tmesh
        .vertices()
        .par_iter()
        .map(|&p| {
            let mut hits = locator.locate_all(p);
            if hits.is_empty() {
                hits.push(locator.locate(p)?.element);
            }
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for t in hits {
                for v in src_nodal[t] {
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
            Ok((lo, hi))
        })
        .collect();
    let bounds = bounds.into_iter().collect::<Result<Vec<_>>>()?;
    let layout = NodalLayout::get(1);
    let coeffs = per_element(tmesh, |e| {
        let original = target.element_coeffs(e);
        let tri = tmesh.triangles()[e];
        let nodal = layout.to_nodal(original);
        let b = tri.map(|v| bounds[v]);
        if (0..3).all(|i| nodal[i] >= b[i].0 && nodal[i] <= b[i].1) {
            return Ok(original.to_vec());
        }
        let mut want: Vec<f64> = (0..3).map(|i| nodal[i].clamp(b[i].0, b[i].1)).collect();
        let mut c = layout.to_modal(&want);
        // the modal round trip can land an ulp outside; pull such nodes in
        for _ in 0..8 {
            let got = layout.to_nodal(&c);
            let mut clean = true;
            for i in 0..3 {
                if got[i] > b[i].1 {
                    want[i] -= got[i] - b[i].1;
                    clean = false;
                } else if got[i] < b[i].0 {
                    want[i] += b[i].0 - got[i];
                    clean = false;
                }
            }
            if clean {
                break;
            }
            c = layout.to_modal(&want);
        }
        Ok(c)
    })?;
    DGField::new(tmesh.clone(), 1, coeffs)
}

/// Integral of the field over its mesh with the given reference rule.
pub fn mass(field: &DGField, rule: &CompositeRule) -> f64 {
    let mesh = field.mesh();
    let per: Vec<f64> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|e| {
            let ratio = AffineMap::new(&mesh.triangle_points(e)).area_ratio();
            let vals: Vec<f64> = rule.points.iter().zip(&rule.weights).map(|(l, w)| w * field.value(e, *l)).collect();
            ratio * pairwise_sum(&vals)
        })
        .collect();
    pairwise_sum(&per)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::project_analytic;
    use crate::mesh::{generate_structured, generate_unstructured, Domain};
    use crate::quadrature::{tensor_gauss, BaseRule};

    fn meshes() -> (Arc<TriMesh>, Arc<TriMesh>) {
        let d = Domain::square(5.0, 15.0);
        (
            Arc::new(generate_structured(&d, 8).unwrap()),
            Arc::new(generate_unstructured(&d, 10.0 / 8.0 * 2f64.sqrt(), 11).unwrap()),
        )
    }

    fn l2_diff(a: &DGField, f: impl Fn(f64, f64) -> f64) -> f64 {
        let loc = Locator::new(a.mesh().clone());
        let bb = a.mesh().bounding_box();
        let d = Domain::new(bb[0], bb[1], bb[2], bb[3]).unwrap();
        let s: f64 = tensor_gauss(&d, 40)
            .unwrap()
            .into_iter()
            .map(|(p, w)| {
                let r = loc.locate(p).unwrap();
                let e = a.value(r.element, r.barycentric) - f(p[0], p[1]);
                w * e * e
            })
            .sum();
        s.sqrt()
    }

    #[test]
    fn method_names_round_trip() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
        }
        assert_eq!("trans2".parse::<Method>().unwrap(), Method::Trans2);
        assert!("TRANS4".parse::<Method>().is_err());
    }

    #[test]
    fn config_validation() {
        let q = QuadSpec::default();
        assert!(TransferConfig::new(Method::Trans3, 1, q).unwrap().limiter_enabled);
        assert!(!TransferConfig::new(Method::Trans2, 1, q).unwrap().limiter_enabled);
        assert!(TransferConfig::new(Method::Trans3, 2, q).is_err());
        assert!(TransferConfig::new(Method::Quadratic, 1, q).is_err());
        assert!(TransferConfig::new(Method::Linear, 3, q).is_err());
        assert_eq!(Method::study_set(1).len(), 4);
        assert_eq!(Method::study_set(2)[3], Method::Quadratic);
    }

    #[test]
    fn constant_transfer_every_method() {
        let (src, tgt) = meshes();
        let rule = QuadSpec::new(BaseRule::P15, 0).unwrap().realize();
        for k in 1..=2 {
            let f = DGField::constant(src.clone(), k, 2.5).unwrap();
            for m in Method::study_set(k) {
                let cfg = TransferConfig::new(m, k, QuadSpec::default()).unwrap();
                let g = transfer(&f, tgt.clone(), &cfg).unwrap();
                for e in 0..tgt.num_triangles() {
                    for v in g.nodal_values(e) {
                        assert!((v - 2.5).abs() < 1e-13, "{m} k={k}: {v}");
                    }
                }
                assert!((mass(&f, &rule) - mass(&g, &rule)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn polynomial_exactness() {
        let (src, tgt) = meshes();
        let rule = QuadSpec::default().realize();
        let polys: [fn(f64, f64) -> f64; 3] = [
            |x, y| 0.3 * x - 0.2 * y + 1.0,
            |x, y| 0.01 * x * x - 0.02 * x * y + 0.3 * y - 1.0,
            |x, y| 1e-3 * x * x * x - 2e-3 * x * y * y + 0.01 * y * y + 0.5,
        ];
        for k in 1..=3 {
            let f = project_analytic(src.clone(), k, polys[k - 1], &rule).unwrap();
            let mut methods = vec![Method::Trans1, Method::Trans2];
            if k == 2 {
                methods.push(Method::Quadratic);
            }
            if k == 1 {
                methods.extend([Method::Trans3, Method::Linear]);
            }
            for m in methods {
                let cfg = TransferConfig::new(m, k, QuadSpec::default()).unwrap();
                let g = transfer(&f, tgt.clone(), &cfg).unwrap();
                let err = l2_diff(&g, polys[k - 1]);
                assert!(err < 1e-11, "{m} k={k}: {err:e}");
            }
        }
    }

    #[test]
    fn self_transfer_is_identity() {
        let (src, _) = meshes();
        let rule = QuadSpec::default().realize();
        let f = project_analytic(src.clone(), 1, |x, y| 2.0 * x - y, &rule).unwrap();
        let cfg = TransferConfig::new(Method::Trans1, 1, QuadSpec::default()).unwrap();
        let g = transfer(&f, src.clone(), &cfg).unwrap();
        for (a, b) in f.coeffs().iter().zip(g.coeffs()) {
            assert!((a - b).abs() < 1e-13 * a.abs().max(1.0));
        }
    }

    #[test]
    fn transfer_is_deterministic() {
        let (src, tgt) = meshes();
        let rule = QuadSpec::default().realize();
        let f = project_analytic(src, 2, |x, y| (x * 0.7).sin() * (y * 0.3).cos(), &rule).unwrap();
        let cfg = TransferConfig::new(Method::Trans2, 2, QuadSpec::default()).unwrap();
        let a = transfer(&f, tgt.clone(), &cfg).unwrap();
        let b = transfer(&f, tgt, &cfg).unwrap();
        assert!(a.coeffs().iter().zip(b.coeffs()).all(|(x, y)| x.to_bits() == y.to_bits()));
    }

    #[test]
    fn limiter_clamps_to_local_bounds() {
        let d = Domain::square(0.0, 1.0);
        let src = Arc::new(generate_structured(&d, 1).unwrap());
        // triangle 0 has nodal values (0, 1, 2), triangle 1 has (0, 2, 0.5)
        let f = DGField::from_nodal(src.clone(), 1, &[0.0, 1.0, 2.0, 0.0, 2.0, 0.5]).unwrap();
        let tgt = src.clone();
        let over = DGField::from_nodal(tgt.clone(), 1, &[-1.0, 0.5, 3.0, 0.0, 2.0, 0.5]).unwrap();
        let g = limit(&over, &f).unwrap();
        let n0 = g.nodal_values(0);
        // vertex 0 is shared: bounds [0, 2]; vertex 1 only in triangle 0: [0, 2]
        assert!((n0[0] - 0.0).abs() < 1e-14);
        assert!((n0[1] - 0.5).abs() < 1e-14);
        assert!((n0[2] - 2.0).abs() < 1e-14);
        // untouched element keeps its coefficients bit for bit
        assert_eq!(g.element_coeffs(1), over.element_coeffs(1));
    }

    #[test]
    fn limiter_leaves_constant_unchanged() {
        let (src, tgt) = meshes();
        let f = DGField::constant(src, 1, -0.75).unwrap();
        let g = DGField::constant(tgt, 1, -0.75).unwrap();
        let h = limit(&g, &f).unwrap();
        assert_eq!(h.coeffs(), g.coeffs());
    }

    #[test]
    fn trans3_respects_global_source_bounds() {
        let d = Domain::square(-1.0, 1.0);
        let src = Arc::new(generate_structured(&d, 16).unwrap());
        let tgt = Arc::new(generate_unstructured(&d, 2.0 / 16.0 * 2f64.sqrt(), 3).unwrap());
        let rule = QuadSpec::default().realize();
        let f = project_analytic(src.clone(), 1, |x, y| (20.0 * (y + 0.3 * (-2.0 * x).sin())).tanh(), &rule).unwrap();
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for e in 0..src.num_triangles() {
            for v in f.nodal_values(e) {
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        let cfg = TransferConfig::new(Method::Trans3, 1, QuadSpec::default()).unwrap();
        let g = transfer(&f, tgt.clone(), &cfg).unwrap();
        for e in 0..tgt.num_triangles() {
            for v in g.nodal_values(e) {
                assert!(v >= lo && v <= hi, "{v} outside [{lo}, {hi}]");
            }
        }
    }

    #[test]
    fn mass_examples() {
        let rule = QuadSpec::new(BaseRule::P15, 0).unwrap().realize();
        let big = Arc::new(generate_structured(&Domain::square(5.0, 15.0), 4).unwrap());
        assert!((mass(&DGField::constant(big, 1, 1.0).unwrap(), &rule) - 100.0).abs() < 1e-12);
        let unit = Arc::new(generate_structured(&Domain::square(0.0, 1.0), 1).unwrap());
        let f = project_analytic(unit, 1, |x, _| x, &rule).unwrap();
        assert!((mass(&f, &rule) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn projection_system_is_scaled_identity() {
        let (src, _) = meshes();
        let proj = Projector::new(QuadSpec::default().realize(), 2).unwrap();
        let ratio = AffineMap::new(&src.triangle_points(3)).area_ratio();
        let sys = proj.system(ratio, &vec![1.0; proj.rule().len()]);
        let n = sys.mass.nrows();
        for i in 0..n {
            for j in 0..n {
                let want = if i == j { ratio } else { 0.0 };
                assert!((sys.mass[(i, j)] - want).abs() < 1e-12 * ratio.max(1.0));
            }
        }
    }
}
