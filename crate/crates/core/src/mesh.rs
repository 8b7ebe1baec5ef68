//! Structured simplicial triangulations of the square `[0, 2π]²`.
//!
//! Each of the `N × N` squares is split along its lower-left to upper-right
//! diagonal. With `periodic = true` opposite sides are identified and the
//! mesh becomes a triangulated torus.
//!
//! Cells store their own (unwrapped) vertex coordinates, so geometry is always
//! local to a cell even when the cell touches the periodic seam. Facets carry
//! an orientation: the unit normal `n_f` points out of the "plus" cell, which
//! is the lower-indexed adjacent cell on interior facets and the only adjacent
//! cell on boundary facets (where `n_f` is the outward normal of the domain).

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Side length of the computational domain.
pub const DOMAIN_LENGTH: f64 = 2.0 * PI;

/// One side of a facet: adjacent cell and the local index of the facet in it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FacetSide {
    pub cell: usize,
    pub local: usize,
}

#[derive(Debug, Clone)]
pub struct Facet {
    /// Endpoint vertex ids (after periodic identification). The facet
    /// parameter `t ∈ [0, 1]` runs from the first to the second endpoint.
    pub vertices: [usize; 2],
    /// Endpoint coordinates as seen from the plus cell.
    pub coords: [Point; 2],
    pub plus: FacetSide,
    pub minus: Option<FacetSide>,
    /// Unit normal pointing out of the plus cell.
    pub normal: Point,
    pub length: f64,
}

impl Facet {
    pub fn is_interior(&self) -> bool {
        self.minus.is_some()
    }

    pub fn midpoint(&self) -> Point {
        [
            0.5 * (self.coords[0][0] + self.coords[1][0]),
            0.5 * (self.coords[0][1] + self.coords[1][1]),
        ]
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    n: usize,
    periodic: bool,
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    cell_coords: Vec<[Point; 3]>,
    /// Local facet `i` of a cell is opposite its local vertex `i`.
    cell_facets: Vec<[usize; 3]>,
    facets: Vec<Facet>,
    h: f64,
}

/// Local vertices spanning local facet `i`, in local edge direction.
pub fn local_edge_vertices(i: usize) -> (usize, usize) {
    ((i + 1) % 3, (i + 2) % 3)
}

impl Mesh {
    /// Builds the `N × N` diagonal-split grid on `[0, 2π]²`.
    pub fn structured(n: usize, periodic: bool) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidResolution(n));
        }
        let step = DOMAIN_LENGTH / n as f64;
        let nv_side = if periodic { n } else { n + 1 };
        let vid = |i: usize, j: usize| -> usize {
            if periodic {
                (j % n) * n + (i % n)
            } else {
                j * (n + 1) + i
            }
        };
        let mut vertices = Vec::with_capacity(nv_side * nv_side);
        for j in 0..nv_side {
            for i in 0..nv_side {
                vertices.push([i as f64 * step, j as f64 * step]);
            }
        }

        // Structured facet ids: horizontal H(i, j), vertical V(i, j) and
        // diagonal D(i, j) edges anchored at grid point (i, j).
        let nh_rows = if periodic { n } else { n + 1 };
        let nv_cols = if periodic { n } else { n + 1 };
        let n_h = n * nh_rows;
        let n_v = nv_cols * n;
        let h_id = |i: usize, j: usize| -> usize {
            let j = if periodic { j % n } else { j };
            j * n + i
        };
        let v_id = |i: usize, j: usize| -> usize {
            let i = if periodic { i % n } else { i };
            n_h + j * nv_cols + i
        };
        let d_id = |i: usize, j: usize| -> usize { n_h + n_v + j * n + i };
        let n_facets = n_h + n_v + n * n;

        let mut cells = Vec::with_capacity(2 * n * n);
        let mut cell_coords = Vec::with_capacity(2 * n * n);
        let mut cell_facets = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let p = |a: usize, b: usize| [a as f64 * step, b as f64 * step];
                // lower triangle
                cells.push([vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)]);
                cell_coords.push([p(i, j), p(i + 1, j), p(i + 1, j + 1)]);
                cell_facets.push([v_id(i + 1, j), d_id(i, j), h_id(i, j)]);
                // upper triangle
                cells.push([vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)]);
                cell_coords.push([p(i, j), p(i + 1, j + 1), p(i, j + 1)]);
                cell_facets.push([h_id(i, j + 1), v_id(i, j), d_id(i, j)]);
            }
        }

        let mut sides: Vec<Vec<FacetSide>> = vec![Vec::with_capacity(2); n_facets];
        for (c, lf) in cell_facets.iter().enumerate() {
            for (l, &f) in lf.iter().enumerate() {
                sides[f].push(FacetSide { cell: c, local: l });
            }
        }

        let mut facets = Vec::with_capacity(n_facets);
        for s in sides.iter_mut() {
            s.sort_by_key(|side| side.cell);
            let plus = s[0];
            let minus = s.get(1).copied();
            debug_assert!(s.len() <= 2);
            let (a, b) = local_edge_vertices(plus.local);
            let cc = cell_coords[plus.cell];
            let coords = [cc[a], cc[b]];
            let d = [coords[1][0] - coords[0][0], coords[1][1] - coords[0][1]];
            let length = (d[0] * d[0] + d[1] * d[1]).sqrt();
            // Cells are counter-clockwise, so the outward normal of a local
            // edge traversed in local direction is the clockwise rotation.
            let normal = [d[1] / length, -d[0] / length];
            let verts = cells[plus.cell];
            facets.push(Facet {
                vertices: [verts[a], verts[b]],
                coords,
                plus,
                minus,
                normal,
                length,
            });
        }

        Ok(Mesh {
            n,
            periodic,
            vertices,
            cells,
            cell_coords,
            cell_facets,
            facets,
            h: step * 2f64.sqrt(),
        })
    }

    pub fn resolution(&self) -> usize {
        self.n
    }

    pub fn is_periodic(&self) -> bool {
        self.periodic
    }

    /// Maximum cell diameter.
    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_facets(&self) -> usize {
        self.facets.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn cell_vertices(&self, cell: usize) -> [usize; 3] {
        self.cells[cell]
    }

    /// Vertex coordinates of a cell in its own (unwrapped) frame.
    pub fn cell_coords(&self, cell: usize) -> [Point; 3] {
        self.cell_coords[cell]
    }

    pub fn cell_facets(&self, cell: usize) -> [usize; 3] {
        self.cell_facets[cell]
    }

    pub fn facets(&self) -> &[Facet] {
        &self.facets
    }

    pub fn facet(&self, f: usize) -> &Facet {
        &self.facets[f]
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.num_vertices() as i64 - self.num_facets() as i64 + self.num_cells() as i64
    }

    pub fn signed_area(&self, cell: usize) -> f64 {
        let [a, b, c] = self.cell_coords[cell];
        0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
    }

    pub fn diameter(&self, cell: usize) -> f64 {
        let c = self.cell_coords[cell];
        let mut d: f64 = 0.0;
        for i in 0..3 {
            let j = (i + 1) % 3;
            d = d.max(((c[i][0] - c[j][0]).powi(2) + (c[i][1] - c[j][1]).powi(2)).sqrt());
        }
        d
    }

    /// `(plus side, minus side)` of a facet.
    pub fn facet_adjacency(&self, f: usize) -> (FacetSide, Option<FacetSide>) {
        let facet = &self.facets[f];
        (facet.plus, facet.minus)
    }

    /// Outward unit normal of local facet `local` of `cell`.
    pub fn outward_normal(&self, cell: usize, local: usize) -> Point {
        let (a, b) = local_edge_vertices(local);
        let cc = self.cell_coords[cell];
        let d = [cc[b][0] - cc[a][0], cc[b][1] - cc[a][1]];
        let len = (d[0] * d[0] + d[1] * d[1]).sqrt();
        [d[1] / len, -d[0] / len]
    }

    /// True when the local edge direction of `side` agrees with the facet's
    /// global parameter direction.
    pub fn local_edge_aligned(&self, f: usize, side: FacetSide) -> bool {
        let facet = &self.facets[f];
        let (a, b) = local_edge_vertices(side.local);
        let cc = self.cell_coords[side.cell];
        let d = [cc[b][0] - cc[a][0], cc[b][1] - cc[a][1]];
        let g = [
            facet.coords[1][0] - facet.coords[0][0],
            facet.coords[1][1] - facet.coords[0][1],
        ];
        d[0] * g[0] + d[1] * g[1] > 0.0
    }

    /// Translation taking the minus cell's frame onto the plus cell's frame
    /// along facet `f` (zero away from the periodic seam).
    pub fn minus_offset(&self, f: usize) -> Point {
        let facet = &self.facets[f];
        let Some(minus) = facet.minus else {
            return [0.0, 0.0];
        };
        let (a, b) = local_edge_vertices(minus.local);
        let cc = self.cell_coords[minus.cell];
        let mid_minus = [0.5 * (cc[a][0] + cc[b][0]), 0.5 * (cc[a][1] + cc[b][1])];
        let mid_plus = facet.midpoint();
        [mid_plus[0] - mid_minus[0], mid_plus[1] - mid_minus[1]]
    }

    /// Cells sharing a facet with `cell`, with the shared facet id.
    pub fn neighbours(&self, cell: usize) -> Vec<(usize, usize)> {
        let mut out = Vec::with_capacity(3);
        for &f in &self.cell_facets[cell] {
            let facet = &self.facets[f];
            if let Some(m) = facet.minus {
                let other = if facet.plus.cell == cell {
                    m.cell
                } else {
                    facet.plus.cell
                };
                out.push((other, f));
            }
        }
        out
    }

    /// Plain-text dump: vertex, cell and facet tables.
    pub fn dump(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(
            s,
            "# mesh n={} periodic={} h={:.17e}",
            self.n, self.periodic, self.h
        );
        let _ = writeln!(s, "vertices {}", self.vertices.len());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        let _ = writeln!(s, "cells {}", self.cells.len());
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
        let _ = writeln!(s, "facets {}", self.facets.len());
        for f in &self.facets {
            let minus = f.minus.map_or(-1, |m| m.cell as i64);
            let _ = writeln!(
                s,
                "{} {} {} {} {:.17e} {:.17e}",
                f.vertices[0], f.vertices[1], f.plus.cell, minus, f.normal[0], f.normal[1]
            );
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_small_resolution() {
        assert_eq!(
            Mesh::structured(1, false).unwrap_err(),
            Error::InvalidResolution(1)
        );
    }

    #[test]
    fn counts_nonperiodic_n2() {
        let m = Mesh::structured(2, false).unwrap();
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.num_vertices(), 9);
        assert_eq!(m.num_facets(), 16);
        assert_eq!(m.euler_characteristic(), 1);
    }

    #[test]
    fn counts_periodic_n2() {
        let m = Mesh::structured(2, true).unwrap();
        assert_eq!(m.num_cells(), 8);
        assert_eq!(m.num_vertices(), 4);
        assert_eq!(m.num_facets(), 12);
        assert_eq!(m.euler_characteristic(), 0);
        for f in 0..m.num_facets() {
            assert!(m.facet_adjacency(f).1.is_some());
        }
    }

    #[test]
    fn diameter_matches_table_rows() {
        for (n, h) in [(12, 0.740), (24, 0.370), (36, 0.247), (48, 0.185)] {
            let m = Mesh::structured(n, false).unwrap();
            assert!((m.h() - h).abs() < 5e-4, "n={n} h={}", m.h());
            let dmax = (0..m.num_cells()).map(|c| m.diameter(c)).fold(0.0, f64::max);
            assert!((dmax - m.h()).abs() < 1e-13);
        }
    }

    #[test]
    fn boundary_facets_have_outward_normals() {
        let m = Mesh::structured(3, false).unwrap();
        let centre = [PI, PI];
        for f in m.facets() {
            if f.is_interior() {
                continue;
            }
            let mid = f.midpoint();
            let out = [mid[0] - centre[0], mid[1] - centre[1]];
            assert!(out[0] * f.normal[0] + out[1] * f.normal[1] > 0.0);
            // boundary facets lie on the square's sides
            let on_side = [mid[0], mid[1]]
                .iter()
                .any(|&x| x.abs() < 1e-12 || (x - DOMAIN_LENGTH).abs() < 1e-12);
            assert!(on_side);
        }
    }

    #[test]
    fn interior_neighbours_share_two_vertices() {
        for periodic in [false, true] {
            let m = Mesh::structured(3, periodic).unwrap();
            for f in 0..m.num_facets() {
                let (p, q) = m.facet_adjacency(f);
                if let Some(q) = q {
                    let a = m.cell_vertices(p.cell);
                    let b = m.cell_vertices(q.cell);
                    let shared = a.iter().filter(|v| b.contains(v)).count();
                    assert_eq!(shared, 2);
                    assert!(p.cell < q.cell);
                }
            }
        }
    }
}
