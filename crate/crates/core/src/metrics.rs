//! Conservation and accuracy measurements between a source field `u` and
//! its transfer `g`.

use std::fmt::Write as _;
use std::io;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::field::DGField;
use crate::locate::Locator;
use crate::mesh::Domain;
use crate::quadrature::{tensor_gauss, BaseRule, QuadSpec};
use crate::sum::pairwise_sum;
use crate::transfer::mass;

/// Points per direction of the tensor Gauss rule used for the L2 error.
pub const GAUSS_POINTS: usize = 40;

pub const CSV_HEADER: &str = "grid,h,elements_src,elements_tgt,method,k,quad,mv,l2,order,seconds";

/// One line of a study CSV. Columns that a study does not measure stay
/// empty.
#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    pub grid: usize,
    pub h: f64,
    pub elements_src: usize,
    pub elements_tgt: usize,
    pub method: String,
    pub k: usize,
    pub quad: QuadSpec,
    pub mv: Option<f64>,
    pub l2: Option<f64>,
    pub order: Option<f64>,
    pub seconds: Option<f64>,
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:e}")).unwrap_or_default()
}

impl StudyRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{:e},{},{},{},{},{},{},{},{},{}",
            self.grid,
            self.h,
            self.elements_src,
            self.elements_tgt,
            self.method,
            self.k,
            self.quad,
            opt(self.mv),
            opt(self.l2),
            opt(self.order),
            self.seconds.map(|s| format!("{s:.3}")).unwrap_or_default(),
        )
    }
}

pub fn format_csv(rows: &[StudyRow]) -> String {
    let mut s = String::with_capacity(64 * (rows.len() + 1));
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in rows {
        let _ = writeln!(s, "{}", r.to_csv());
    }
    s
}

pub fn write_csv<W: io::Write>(rows: &[StudyRow], mut w: W) -> io::Result<()> {
    w.write_all(format_csv(rows).as_bytes())
}

/// `|mass(u) - mass(g)|` with the 15-point rule on each element.
pub fn mass_variation(source: &DGField, target: &DGField) -> f64 {
    let rule = QuadSpec { base: BaseRule::P15, level: 0 }.realize();
    (mass(source, &rule) - mass(target, &rule)).abs()
}

fn common_domain(a: &DGField, b: &DGField) -> Result<Domain> {
    let ba = a.mesh().bounding_box();
    let bb = b.mesh().bounding_box();
    let tol = 1e-9 * (ba[1] - ba[0]).hypot(ba[3] - ba[2]);
    if (0..4).any(|i| (ba[i] - bb[i]).abs() > tol) {
        return Err(Error::Config("fields live on different domains".into()));
    }
    Domain::new(ba[0], ba[1], ba[2], ba[3])
}

/// `sqrt(integral (u - g)^2)` over the common rectangle with a 40 x 40
/// tensor Gauss rule, each point located in both meshes.
pub fn l2_error(source: &DGField, target: &DGField) -> Result<f64> {
    let domain = common_domain(source, target)?;
    let la = Locator::new(source.mesh().clone());
    let lb = Locator::new(target.mesh().clone());
    let pts = tensor_gauss(&domain, GAUSS_POINTS)?;
    let terms: Vec<f64> = pts
        .par_iter()
        .map(|&(p, w)| {
            let ra = la.locate(p)?;
            let rb = lb.locate(p)?;
            let d = source.value(ra.element, ra.barycentric) - target.value(rb.element, rb.barycentric);
            Ok(w * d * d)
        })
        .collect::<Result<_>>()?;
    Ok(pairwise_sum(&terms).max(0.0).sqrt())
}

/// Order between consecutive `(h, error)` pairs:
/// `log(E1/E2) / log(h1/h2)`. `None` where an error is zero or the mesh
/// sizes coincide.
pub fn convergence_order(rows: &[(f64, f64)]) -> Vec<Option<f64>> {
    rows.windows(2)
        .map(|w| {
            let ((h1, e1), (h2, e2)) = (w[0], w[1]);
            if e1 <= 0.0 || e2 <= 0.0 || h1 == h2 {
                None
            } else {
                Some((e1 / e2).ln() / (h1 / h2).ln())
            }
        })
        .collect()
}

/// Least-squares slope of `log E` against `log h`.
pub fn fitted_order(rows: &[(f64, f64)]) -> Option<f64> {
    if rows.len() < 2 || rows.iter().any(|&(h, e)| h <= 0.0 || e <= 0.0) {
        return None;
    }
    let n = rows.len() as f64;
    let xs: Vec<f64> = rows.iter().map(|r| r.0.ln()).collect();
    let ys: Vec<f64> = rows.iter().map(|r| r.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    Some(sxy / sxx)
}
