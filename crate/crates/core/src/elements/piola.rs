//! Affine cell maps and the push-forward of reference quantities.
//!
//! Vector (H(div)) fields use the contravariant Piola map
//! `v = J v̂ / det J`, so that `div v = div v̂ / det J` and normal fluxes
//! through facets are preserved. Scalars are mapped by composition, with
//! gradients `J^{-T} ∇̂`.

use crate::error::{Error, Result};
use crate::mesh::Point;

#[derive(Debug, Clone, Copy)]
pub struct CellGeometry {
    pub origin: Point,
    /// Column-major Jacobian: `jac[c][r]` is entry `(r, c)`.
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    /// `inv[r][c]` is entry `(r, c)` of `J^{-1}`.
    pub inv: [[f64; 2]; 2],
}

impl CellGeometry {
    pub fn new(cell: usize, coords: [Point; 3]) -> Result<Self> {
        let e1 = [coords[1][0] - coords[0][0], coords[1][1] - coords[0][1]];
        let e2 = [coords[2][0] - coords[0][0], coords[2][1] - coords[0][1]];
        let det = e1[0] * e2[1] - e2[0] * e1[1];
        if det <= 0.0 {
            return Err(Error::DegenerateCell { cell, det });
        }
        let inv = [[e2[1] / det, -e2[0] / det], [-e1[1] / det, e1[0] / det]];
        Ok(CellGeometry {
            origin: coords[0],
            jac: [e1, e2],
            det,
            inv,
        })
    }

    /// Entry `(r, c)` of `J`.
    #[inline]
    pub fn j(&self, r: usize, c: usize) -> f64 {
        self.jac[c][r]
    }

    pub fn map(&self, xi: [f64; 2]) -> Point {
        [
            self.origin[0] + self.jac[0][0] * xi[0] + self.jac[1][0] * xi[1],
            self.origin[1] + self.jac[0][1] * xi[0] + self.jac[1][1] * xi[1],
        ]
    }

    pub fn pull_back_point(&self, x: Point) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        [
            self.inv[0][0] * d[0] + self.inv[0][1] * d[1],
            self.inv[1][0] * d[0] + self.inv[1][1] * d[1],
        ]
    }

    pub fn area(&self) -> f64 {
        0.5 * self.det
    }

    /// Contravariant Piola push-forward of a reference vector.
    #[inline]
    pub fn piola(&self, v: [f64; 2]) -> [f64; 2] {
        [
            (self.j(0, 0) * v[0] + self.j(0, 1) * v[1]) / self.det,
            (self.j(1, 0) * v[0] + self.j(1, 1) * v[1]) / self.det,
        ]
    }

    /// Inverse Piola map: `v̂ = det J · J^{-1} v`.
    #[inline]
    pub fn piola_inverse(&self, v: [f64; 2]) -> [f64; 2] {
        [
            self.det * (self.inv[0][0] * v[0] + self.inv[0][1] * v[1]),
            self.det * (self.inv[1][0] * v[0] + self.inv[1][1] * v[1]),
        ]
    }

    /// Physical gradient of a Piola-mapped field from the reference gradient
    /// `g[c][d] = ∂v̂_c/∂ξ_d`: `∇v = J ∇̂v̂ J^{-1} / det J`.
    #[inline]
    pub fn piola_grad(&self, g: [[f64; 2]; 2]) -> [[f64; 2]; 2] {
        let mut jg = [[0.0; 2]; 2];
        for r in 0..2 {
            for d in 0..2 {
                jg[r][d] = self.j(r, 0) * g[0][d] + self.j(r, 1) * g[1][d];
            }
        }
        let mut out = [[0.0; 2]; 2];
        for r in 0..2 {
            for c in 0..2 {
                out[r][c] = (jg[r][0] * self.inv[0][c] + jg[r][1] * self.inv[1][c]) / self.det;
            }
        }
        out
    }

    #[inline]
    pub fn piola_div(&self, div_ref: f64) -> f64 {
        div_ref / self.det
    }

    /// Physical gradient of a scalar: `J^{-T} ∇̂`.
    #[inline]
    pub fn scalar_grad(&self, g: [f64; 2]) -> [f64; 2] {
        [
            self.inv[0][0] * g[0] + self.inv[1][0] * g[1],
            self.inv[0][1] * g[0] + self.inv[1][1] * g[1],
        ]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elements::{reference_edge_point, Family, ReferenceElement};
    use crate::quadrature::edge_rule;

    #[test]
    fn identity_geometry_leaves_values() {
        let g = CellGeometry::new(0, [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(g.piola([0.3, -0.7]), [0.3, -0.7]);
        assert_eq!(g.piola_div(2.5), 2.5);
        assert_eq!(g.scalar_grad([1.0, 2.0]), [1.0, 2.0]);
    }

    #[test]
    fn uniform_scaling_divides_divergence_by_four() {
        let g = CellGeometry::new(0, [[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]]).unwrap();
        assert_eq!(g.det, 4.0);
        assert!((g.piola_div(1.0) - 0.25).abs() < 1e-15);
        // divergence computed from the mapped gradient agrees
        let gr = g.piola_grad([[1.0, 0.0], [0.0, 0.0]]);
        assert!((gr[0][0] + gr[1][1] - 0.25).abs() < 1e-15);
    }

    #[test]
    fn degenerate_cell_rejected() {
        let err = CellGeometry::new(3, [[0.0, 0.0], [1.0, 1.0], [2.0, 2.0]]).unwrap_err();
        assert!(matches!(err, Error::DegenerateCell { cell: 3, .. }));
        assert!(CellGeometry::new(0, [[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).is_err());
    }

    /// A mapped RT0 shape carries unit flux through its own physical edge.
    #[test]
    fn piola_preserves_rt0_flux() {
        let el = ReferenceElement::new(Family::RT, 0).unwrap();
        let rule = edge_rule(4).unwrap();
        let cells = [
            [[0.3, -0.2], [2.0, 0.4], [0.7, 1.9]],
            [[1.0, 1.0], [1.5, 1.0], [1.0, 3.0]],
        ];
        for coords in cells {
            let g = CellGeometry::new(0, coords).unwrap();
            for e in 0..3 {
                let a = coords[(e + 1) % 3];
                let b = coords[(e + 2) % 3];
                let d = [b[0] - a[0], b[1] - a[1]];
                let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
                let n = [d[1] / len, -d[0] / len];
                let pts: Vec<_> = rule.points.iter().map(|&t| reference_edge_point(e, t)).collect();
                let tab = el.tabulate(&pts);
                for shape in 0..3 {
                    let flux: f64 = (0..pts.len())
                        .map(|q| {
                            let v = g.piola([tab.value(q, shape, 0), tab.value(q, shape, 1)]);
                            rule.weights[q] * len * (v[0] * n[0] + v[1] * n[1])
                        })
                        .sum();
                    let expect = if shape == e { 1.0 } else { 0.0 };
                    assert!((flux - expect).abs() < 1e-12);
                }
            }
        }
    }
}
