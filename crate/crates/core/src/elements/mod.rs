//! Reference elements on the triangle with vertices `(0,0)`, `(1,0)`, `(0,1)`.
//!
//! Every element is built the Ciarlet way: a spanning set of polynomials
//! (expanded in monomials) plus a list of degree-of-freedom functionals; the
//! nodal basis is obtained by inverting the generalised Vandermonde matrix.
//!
//! Local facet `i` is the edge opposite vertex `i`, traversed from vertex
//! `(i+1) % 3` to vertex `(i+2) % 3`.

mod hdiv;
mod lagrange;
pub mod piola;
pub mod polynomial;

use std::fmt;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use polynomial::{eval_monomials, monomial_count};

pub use piola::CellGeometry;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Family {
    /// Raviart-Thomas, H(div)-conforming.
    RT,
    /// Brezzi-Douglas-Marini, H(div)-conforming.
    BDM,
    /// Discontinuous Lagrange.
    DG,
    /// Continuous Lagrange.
    CG,
}

impl Family {
    pub fn is_vector(self) -> bool {
        matches!(self, Family::RT | Family::BDM)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::RT => "RT",
            Family::BDM => "BDM",
            Family::DG => "DG",
            Family::CG => "CG",
        };
        f.write_str(s)
    }
}

impl std::str::FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "RT" => Ok(Family::RT),
            "BDM" => Ok(Family::BDM),
            "DG" => Ok(Family::DG),
            "CG" => Ok(Family::CG),
            other => Err(Error::Config(format!("unknown element family '{other}'"))),
        }
    }
}

/// A linear functional `v ↦ Σ_q w_q · v(x_q)` on the reference cell.
#[derive(Debug, Clone)]
pub struct Functional {
    pub points: Vec<[f64; 2]>,
    /// One weight per point and value component.
    pub weights: Vec<[f64; 2]>,
}

impl Functional {
    pub fn apply(&self, f: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
        self.points
            .iter()
            .zip(&self.weights)
            .map(|(&p, w)| {
                let v = f(p);
                w[0] * v[0] + w[1] * v[1]
            })
            .sum()
    }
}

/// Shape function values and reference gradients at a set of points.
///
/// Layout: `values[(p * nshape + i) * vsize + c]`,
/// `grads[((p * nshape + i) * vsize + c) * 2 + d]`.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub npts: usize,
    pub nshape: usize,
    pub vsize: usize,
    pub values: Vec<f64>,
    pub grads: Vec<f64>,
}

impl Tabulation {
    #[inline]
    pub fn value(&self, p: usize, i: usize, c: usize) -> f64 {
        self.values[(p * self.nshape + i) * self.vsize + c]
    }

    #[inline]
    pub fn grad(&self, p: usize, i: usize, c: usize, d: usize) -> f64 {
        self.grads[((p * self.nshape + i) * self.vsize + c) * 2 + d]
    }

    /// Reference divergence of vector shape function `i` at point `p`.
    #[inline]
    pub fn div(&self, p: usize, i: usize) -> f64 {
        self.grad(p, i, 0, 0) + self.grad(p, i, 1, 1)
    }
}

#[derive(Debug, Clone)]
pub struct ReferenceElement {
    family: Family,
    order: usize,
    poly_degree: usize,
    vsize: usize,
    ndofs: usize,
    /// `coeffs[(i * vsize + c) * nmono + m]`
    coeffs: Vec<f64>,
    functionals: Vec<Functional>,
    vertex_dofs: [Vec<usize>; 3],
    facet_dofs: [Vec<usize>; 3],
    interior_dofs: Vec<usize>,
}

impl ReferenceElement {
    pub fn new(family: Family, order: usize) -> Result<Self> {
        let unsupported = || Error::UnsupportedElement {
            family: family.to_string(),
            order,
        };
        match family {
            Family::RT if order <= 2 => Ok(hdiv::raviart_thomas(order)),
            Family::BDM if (1..=2).contains(&order) => Ok(hdiv::bdm(order)),
            Family::DG if order <= 3 => Ok(lagrange::lagrange(Family::DG, order)),
            Family::CG if (1..=3).contains(&order) => Ok(lagrange::lagrange(Family::CG, order)),
            _ => Err(unsupported()),
        }
    }

    /// Builds the nodal basis dual to `functionals` from a spanning set given
    /// as monomial coefficient vectors `span[j][c * nmono + m]`.
    pub(crate) fn from_span(
        family: Family,
        order: usize,
        poly_degree: usize,
        vsize: usize,
        span: Vec<Vec<f64>>,
        functionals: Vec<Functional>,
        vertex_dofs: [Vec<usize>; 3],
        facet_dofs: [Vec<usize>; 3],
        interior_dofs: Vec<usize>,
    ) -> Self {
        let n = span.len();
        assert_eq!(n, functionals.len(), "{family}{order}: span/dual size");
        let nmono = monomial_count(poly_degree);
        let eval_span = |j: usize, p: [f64; 2]| -> [f64; 2] {
            let mut vals = vec![0.0; nmono];
            let mut dx = vec![0.0; nmono];
            let mut dy = vec![0.0; nmono];
            eval_monomials(poly_degree, p, &mut vals, &mut dx, &mut dy);
            let mut out = [0.0; 2];
            for c in 0..vsize {
                out[c] = (0..nmono).map(|m| span[j][c * nmono + m] * vals[m]).sum();
            }
            out
        };
        // dual[i][j] = functional_i(span_j)
        let dual = DMatrix::from_fn(n, n, |i, j| functionals[i].apply(|p| eval_span(j, p)));
        let inv = dual
            .transpose()
            .try_inverse()
            .unwrap_or_else(|| panic!("{family}{order}: functionals not unisolvent"));
        let mut coeffs = vec![0.0; n * vsize * nmono];
        for k in 0..n {
            for j in 0..n {
                let ckj = inv[(k, j)];
                if ckj == 0.0 {
                    continue;
                }
                for c in 0..vsize {
                    for m in 0..nmono {
                        coeffs[(k * vsize + c) * nmono + m] += ckj * span[j][c * nmono + m];
                    }
                }
            }
        }
        ReferenceElement {
            family,
            order,
            poly_degree,
            vsize,
            ndofs: n,
            coeffs,
            functionals,
            vertex_dofs,
            facet_dofs,
            interior_dofs,
        }
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Highest monomial degree appearing in the shape functions.
    pub fn poly_degree(&self) -> usize {
        self.poly_degree
    }

    pub fn value_size(&self) -> usize {
        self.vsize
    }

    pub fn dim(&self) -> usize {
        self.ndofs
    }

    pub fn functionals(&self) -> &[Functional] {
        &self.functionals
    }

    pub fn vertex_dofs(&self, v: usize) -> &[usize] {
        &self.vertex_dofs[v]
    }

    pub fn facet_dofs(&self, f: usize) -> &[usize] {
        &self.facet_dofs[f]
    }

    pub fn interior_dofs(&self) -> &[usize] {
        &self.interior_dofs
    }

    pub fn tabulate(&self, points: &[[f64; 2]]) -> Tabulation {
        let nmono = monomial_count(self.poly_degree);
        let n = self.ndofs;
        let vs = self.vsize;
        let mut values = vec![0.0; points.len() * n * vs];
        let mut grads = vec![0.0; points.len() * n * vs * 2];
        let mut mv = vec![0.0; nmono];
        let mut mdx = vec![0.0; nmono];
        let mut mdy = vec![0.0; nmono];
        for (p, &pt) in points.iter().enumerate() {
            eval_monomials(self.poly_degree, pt, &mut mv, &mut mdx, &mut mdy);
            for i in 0..n {
                for c in 0..vs {
                    let co = &self.coeffs[(i * vs + c) * nmono..(i * vs + c + 1) * nmono];
                    let (mut v, mut gx, mut gy) = (0.0, 0.0, 0.0);
                    for m in 0..nmono {
                        v += co[m] * mv[m];
                        gx += co[m] * mdx[m];
                        gy += co[m] * mdy[m];
                    }
                    let idx = (p * n + i) * vs + c;
                    values[idx] = v;
                    grads[idx * 2] = gx;
                    grads[idx * 2 + 1] = gy;
                }
            }
        }
        Tabulation {
            npts: points.len(),
            nshape: n,
            vsize: vs,
            values,
            grads,
        }
    }
}

/// Reference cell vertices.
pub const REFERENCE_VERTICES: [[f64; 2]; 3] = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];

/// Point on reference edge `i` at parameter `t` (local direction).
pub fn reference_edge_point(i: usize, t: f64) -> [f64; 2] {
    let a = REFERENCE_VERTICES[(i + 1) % 3];
    let b = REFERENCE_VERTICES[(i + 2) % 3];
    [a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])]
}

/// Outward unit normal and length of reference edge `i`.
pub fn reference_edge_normal(i: usize) -> ([f64; 2], f64) {
    let a = REFERENCE_VERTICES[(i + 1) % 3];
    let b = REFERENCE_VERTICES[(i + 2) % 3];
    let d = [b[0] - a[0], b[1] - a[1]];
    let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
    ([d[1] / len, -d[0] / len], len)
}
