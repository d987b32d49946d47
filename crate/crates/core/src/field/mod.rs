//! Discontinuous piecewise-polynomial fields and element-local
//! L2-projection.

pub mod basis;
pub mod functions;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

pub use basis::{num_basis, ModalBasis, NodalLayout, Poly2, MAX_DEGREE};
pub use functions::{test_function, TestFunction};

use crate::error::{Error, Result};
use crate::geometry::AffineMap;
use crate::mesh::{Lines, TriMesh};
use crate::quadrature::CompositeRule;

/// Degree-k modal coefficients per element of a mesh. Discontinuous across
/// element edges.
#[derive(Debug, Clone)]
pub struct DGField {
    mesh: Arc<TriMesh>,
    degree: usize,
    coeffs: Vec<f64>,
}

fn check_degree(k: usize) -> Result<()> {
    if !(1..=MAX_DEGREE).contains(&k) {
        return Err(Error::Config(format!("field degree {k} outside 1..={MAX_DEGREE}")));
    }
    Ok(())
}

impl DGField {
    pub fn new(mesh: Arc<TriMesh>, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        check_degree(degree)?;
        let want = mesh.num_triangles() * num_basis(degree);
        if coeffs.len() != want {
            return Err(Error::Config(format!(
                "expected {want} coefficients for degree {degree}, got {}",
                coeffs.len()
            )));
        }
        Ok(DGField { mesh, degree, coeffs })
    }

    pub fn constant(mesh: Arc<TriMesh>, degree: usize, value: f64) -> Result<Self> {
        check_degree(degree)?;
        let nb = num_basis(degree);
        // psi_0 = sqrt(2) on the reference triangle
        let c0 = value / ModalBasis::get(degree).poly(0).coeff(0, 0);
        let mut coeffs = vec![0.0; mesh.num_triangles() * nb];
        coeffs.chunks_mut(nb).for_each(|c| c[0] = c0);
        DGField::new(mesh, degree, coeffs)
    }

    /// Builds a field from per-element nodal values laid out per
    /// [`NodalLayout`].
    pub fn from_nodal(mesh: Arc<TriMesh>, degree: usize, nodal: &[f64]) -> Result<Self> {
        check_degree(degree)?;
        let nb = num_basis(degree);
        if nodal.len() != mesh.num_triangles() * nb {
            return Err(Error::Config("nodal value count does not match mesh".into()));
        }
        let layout = NodalLayout::get(degree);
        let coeffs = nodal.chunks(nb).flat_map(|n| layout.to_modal(n)).collect();
        DGField::new(mesh, degree, coeffs)
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.mesh
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn element_coeffs(&self, e: usize) -> &[f64] {
        let nb = num_basis(self.degree);
        &self.coeffs[e * nb..(e + 1) * nb]
    }

    fn check_element(&self, e: usize) -> Result<()> {
        if e >= self.mesh.num_triangles() {
            return Err(Error::ElementOutOfRange { index: e, count: self.mesh.num_triangles() });
        }
        Ok(())
    }

    /// Value on element `e` at barycentric point `l`.
    pub fn evaluate(&self, e: usize, l: [f64; 3]) -> Result<f64> {
        self.check_element(e)?;
        Ok(self.value(e, l))
    }

    /// Physical gradient on element `e` at barycentric point `l`.
    pub fn gradient(&self, e: usize, l: [f64; 3]) -> Result<[f64; 2]> {
        self.check_element(e)?;
        Ok(self.grad(e, l))
    }

    #[inline]
    pub(crate) fn value(&self, e: usize, l: [f64; 3]) -> f64 {
        ModalBasis::get(self.degree).combine(self.element_coeffs(e), [l[1], l[2]])
    }

    #[inline]
    pub(crate) fn grad(&self, e: usize, l: [f64; 3]) -> [f64; 2] {
        let g = ModalBasis::get(self.degree).combine_grad(self.element_coeffs(e), [l[1], l[2]]);
        AffineMap::new(&self.mesh.triangle_points(e)).grad_to_physical(g)
    }

    /// Values at the element's nodal points.
    pub fn nodal_values(&self, e: usize) -> Vec<f64> {
        NodalLayout::get(self.degree).to_nodal(self.element_coeffs(e))
    }
}

/// The local system `M f = B` of one target element.
#[derive(Debug, Clone)]
pub struct ProjectionSystem {
    pub mass: DMatrix<f64>,
    pub forcing: DVector<f64>,
    pub coeffs: DVector<f64>,
    /// A_T / A_R.
    pub area_ratio: f64,
}

/// Element-local L2-projection onto the modal basis with a fixed composite
/// rule. The mass matrix is assembled with the same rule as the forcing
/// vector; on the reference element it is shared by every element up to
/// the area ratio.
#[derive(Debug, Clone)]
pub struct Projector {
    rule: CompositeRule,
    degree: usize,
    /// `psi[q * nb + j]` = psi_j at rule point q.
    psi: Vec<f64>,
    mass_ref: DMatrix<f64>,
    mass_ref_inv: DMatrix<f64>,
}

impl Projector {
    pub fn new(rule: CompositeRule, degree: usize) -> Result<Self> {
        check_degree(degree)?;
        if (rule.degree as usize) < 2 * degree {
            return Err(Error::Config(format!(
                "quadrature of degree {} cannot resolve the degree-{degree} mass matrix (needs {})",
                rule.degree,
                2 * degree
            )));
        }
        let basis = ModalBasis::get(degree);
        let nb = basis.len();
        let mut psi = vec![0.0; rule.len() * nb];
        for (q, p) in rule.points.iter().enumerate() {
            basis.eval_all([p[1], p[2]], &mut psi[q * nb..(q + 1) * nb]);
        }
        let mut mass_ref = DMatrix::zeros(nb, nb);
        for (q, w) in rule.weights.iter().enumerate() {
            let row = &psi[q * nb..(q + 1) * nb];
            for i in 0..nb {
                for j in 0..nb {
                    mass_ref[(i, j)] += w * row[i] * row[j];
                }
            }
        }
        let chol = mass_ref.clone().cholesky().ok_or_else(|| Error::SingularSystem {
            element: 0,
            detail: "reference mass matrix is not positive definite".into(),
        })?;
        let mass_ref_inv = chol.inverse();
        Ok(Projector { rule, degree, psi, mass_ref, mass_ref_inv })
    }

    pub fn rule(&self) -> &CompositeRule {
        &self.rule
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Reference-element mass matrix assembled by quadrature.
    pub fn reference_mass(&self) -> &DMatrix<f64> {
        &self.mass_ref
    }

    /// Modal coefficients from integrand values at the rule points.
    ///
    /// The area ratio cancels between M and B, so it is not needed here.
    pub fn project(&self, values: &[f64]) -> Vec<f64> {
        let nb = num_basis(self.degree);
        let mut rhs = vec![0.0; nb];
        for (q, (v, w)) in values.iter().zip(&self.rule.weights).enumerate() {
            let wv = w * v;
            for (r, p) in rhs.iter_mut().zip(&self.psi[q * nb..(q + 1) * nb]) {
                *r += wv * p;
            }
        }
        (0..nb).map(|i| (0..nb).map(|j| self.mass_ref_inv[(i, j)] * rhs[j]).sum()).collect()
    }

    /// Full physical-element system, for inspection.
    pub fn system(&self, area_ratio: f64, values: &[f64]) -> ProjectionSystem {
        let nb = num_basis(self.degree);
        let mass = &self.mass_ref * area_ratio;
        let mut forcing = DVector::zeros(nb);
        for (q, (v, w)) in values.iter().zip(&self.rule.weights).enumerate() {
            for j in 0..nb {
                forcing[j] += area_ratio * w * v * self.psi[q * nb + j];
            }
        }
        let coeffs = mass.clone().cholesky().expect("scaled SPD matrix").solve(&forcing);
        ProjectionSystem { mass, forcing, coeffs, area_ratio }
    }
}

/// Element-wise L2-projection of an analytic function.
pub fn project_analytic<F>(mesh: Arc<TriMesh>, degree: usize, f: F, rule: &CompositeRule) -> Result<DGField>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    let proj = Projector::new(rule.clone(), degree)?;
    let coeffs: Vec<Vec<f64>> = (0..mesh.num_triangles())
        .into_par_iter()
        .map(|e| {
            let map = AffineMap::new(&mesh.triangle_points(e));
            let vals: Vec<f64> = rule
                .points
                .iter()
                .map(|l| {
                    let p = map.to_physical([l[1], l[2]]);
                    f(p[0], p[1])
                })
                .collect();
            proj.project(&vals)
        })
        .collect();
    DGField::new(mesh, degree, coeffs.concat())
}

const FIELD_HEADER: &str = "dg-field v1";

pub fn format_field(field: &DGField) -> String {
    let nb = num_basis(field.degree);
    let mut s = String::with_capacity(24 * field.coeffs.len() + 64);
    s.push_str(FIELD_HEADER);
    s.push('\n');
    let _ = writeln!(s, "{}", field.degree);
    let _ = writeln!(s, "{}", field.mesh.num_triangles());
    for c in field.coeffs.chunks(nb) {
        let line: Vec<String> = c.iter().map(|v| format!("{v:?}")).collect();
        s.push_str(&line.join(" "));
        s.push('\n');
    }
    s
}

pub fn write_field(field: &DGField, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, format_field(field))?;
    Ok(())
}

pub fn parse_field(text: &str, mesh: Arc<TriMesh>, origin: &Path) -> Result<DGField> {
    let mut lines = Lines::new(text, origin);
    lines.expect_header(FIELD_HEADER)?;
    let (dline, [degree]) = lines.tuple_at::<usize, 1>("degree")?;
    if !(1..=MAX_DEGREE).contains(&degree) {
        return Err(lines.error_at(dline, format!("unsupported degree {degree}")));
    }
    let (nline, [n]) = lines.tuple_at::<usize, 1>("element count")?;
    if n != mesh.num_triangles() {
        return Err(lines.error_at(nline, format!("field has {n} elements but mesh has {}", mesh.num_triangles())));
    }
    let mut coeffs = Vec::with_capacity(n * num_basis(degree));
    for _ in 0..n {
        match degree {
            1 => coeffs.extend(lines.tuple::<f64, 3>("coefficients")?),
            2 => coeffs.extend(lines.tuple::<f64, 6>("coefficients")?),
            _ => coeffs.extend(lines.tuple::<f64, 10>("coefficients")?),
        }
    }
    lines.expect_end()?;
    DGField::new(mesh, degree, coeffs)
}

pub fn read_field(path: impl AsRef<Path>, mesh: Arc<TriMesh>) -> Result<DGField> {
    let path = path.as_ref();
    let text = fs::read_to_string(path)?;
    parse_field(&text, mesh, path)
}
