//! Global finite element spaces: dof numbering, facet orientation signs,
//! interpolation and projection.
//!
//! Vector (H(div)) dofs on a facet are the normal moments
//! `∫_f v·n_f L_k(t) ds` in the facet's global orientation. A cell sees the
//! same functional through its own outward normal and local edge direction,
//! so its local dof equals the global one up to the sign
//! `(±1 for plus/minus side) · ((−1)^k if the edge is traversed backwards)`.

use std::sync::Arc;

use crate::elements::{reference_edge_point, CellGeometry, Family, ReferenceElement, Tabulation};
use crate::error::{Error, Result};
use crate::mesh::{local_edge_vertices, Mesh, Point};
use crate::quadrature::{edge_rule, triangle_rule, EdgeRule};
use crate::solver::sparse::{lu_solve, SparseMatrix, TripletBuilder};

#[derive(Debug, Clone)]
pub struct FunctionSpace {
    mesh: Arc<Mesh>,
    element: ReferenceElement,
    /// `cell_dofs[cell * ndofs + i]`
    cell_dofs: Vec<usize>,
    cell_signs: Vec<f64>,
    dim: usize,
    boundary_dofs: Vec<usize>,
    geometry: Vec<CellGeometry>,
}

pub fn build_space(mesh: &Arc<Mesh>, family: Family, order: usize) -> Result<Arc<FunctionSpace>> {
    FunctionSpace::new(mesh.clone(), family, order).map(Arc::new)
}

impl FunctionSpace {
    pub fn new(mesh: Arc<Mesh>, family: Family, order: usize) -> Result<Self> {
        let element = ReferenceElement::new(family, order)?;
        let geometry = (0..mesh.num_cells())
            .map(|c| CellGeometry::new(c, mesh.cell_coords(c)))
            .collect::<Result<Vec<_>>>()?;
        let nd = element.dim();
        let nc = mesh.num_cells();
        let mut cell_dofs = vec![0usize; nc * nd];
        let mut cell_signs = vec![1.0; nc * nd];
        let mut boundary = Vec::new();
        let dim;
        match family {
            Family::DG => {
                for (k, d) in cell_dofs.iter_mut().enumerate() {
                    *d = k;
                }
                dim = nc * nd;
            }
            Family::RT | Family::BDM => {
                let per_facet = element.facet_dofs(0).len();
                let nint = element.interior_dofs().len();
                let nf = mesh.num_facets();
                for cell in 0..nc {
                    let facets = mesh.cell_facets(cell);
                    for (local, &f) in facets.iter().enumerate() {
                        let facet = mesh.facet(f);
                        let side = if facet.plus.cell == cell && facet.plus.local == local {
                            facet.plus
                        } else {
                            facet.minus.expect("cell adjacent to facet")
                        };
                        let outward = if side == facet.plus { 1.0 } else { -1.0 };
                        let aligned = mesh.local_edge_aligned(f, side);
                        for (k, &ld) in element.facet_dofs(local).iter().enumerate() {
                            let flip = if aligned || k % 2 == 0 { 1.0 } else { -1.0 };
                            cell_dofs[cell * nd + ld] = f * per_facet + k;
                            cell_signs[cell * nd + ld] = outward * flip;
                        }
                    }
                    for (m, &ld) in element.interior_dofs().iter().enumerate() {
                        cell_dofs[cell * nd + ld] = nf * per_facet + cell * nint + m;
                    }
                }
                for (f, facet) in mesh.facets().iter().enumerate() {
                    if !facet.is_interior() {
                        boundary.extend((0..per_facet).map(|k| f * per_facet + k));
                    }
                }
                dim = nf * per_facet + nc * nint;
            }
            Family::CG => {
                let nv = mesh.num_vertices();
                let nf = mesh.num_facets();
                let per_edge = element.facet_dofs(0).len();
                let nint = element.interior_dofs().len();
                for cell in 0..nc {
                    let verts = mesh.cell_vertices(cell);
                    for (lv, &v) in verts.iter().enumerate() {
                        for &ld in element.vertex_dofs(lv) {
                            cell_dofs[cell * nd + ld] = v;
                        }
                    }
                    for (local, &f) in mesh.cell_facets(cell).iter().enumerate() {
                        let facet = mesh.facet(f);
                        let side = if facet.plus.cell == cell && facet.plus.local == local {
                            facet.plus
                        } else {
                            facet.minus.expect("cell adjacent to facet")
                        };
                        let aligned = mesh.local_edge_aligned(f, side);
                        for (m, &ld) in element.facet_dofs(local).iter().enumerate() {
                            let j = if aligned { m } else { per_edge - 1 - m };
                            cell_dofs[cell * nd + ld] = nv + f * per_edge + j;
                        }
                    }
                    for (m, &ld) in element.interior_dofs().iter().enumerate() {
                        cell_dofs[cell * nd + ld] = nv + nf * per_edge + cell * nint + m;
                    }
                }
                for (f, facet) in mesh.facets().iter().enumerate() {
                    if !facet.is_interior() {
                        boundary.extend_from_slice(&facet.vertices);
                        boundary.extend((0..per_edge).map(|j| nv + f * per_edge + j));
                    }
                }
                boundary.sort_unstable();
                boundary.dedup();
                dim = nv + nf * per_edge + nc * nint;
            }
        }
        Ok(FunctionSpace {
            mesh,
            element,
            cell_dofs,
            cell_signs,
            dim,
            boundary_dofs: boundary,
            geometry,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }

    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }

    pub fn family(&self) -> Family {
        self.element.family()
    }

    pub fn order(&self) -> usize {
        self.element.order()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dofs_per_cell(&self) -> usize {
        self.element.dim()
    }

    pub fn cell_dofs(&self, cell: usize) -> &[usize] {
        let nd = self.element.dim();
        &self.cell_dofs[cell * nd..(cell + 1) * nd]
    }

    pub fn cell_signs(&self, cell: usize) -> &[f64] {
        let nd = self.element.dim();
        &self.cell_signs[cell * nd..(cell + 1) * nd]
    }

    /// Dofs fixed by a homogeneous boundary condition: normal moments on
    /// boundary facets (vector spaces) or nodal values on the boundary (CG).
    pub fn boundary_dofs(&self) -> &[usize] {
        &self.boundary_dofs
    }

    pub fn geometry(&self, cell: usize) -> &CellGeometry {
        &self.geometry[cell]
    }

    pub fn is_vector(&self) -> bool {
        self.element.family().is_vector()
    }

    /// Quadrature degree used for all forms on this space: exact for
    /// products of three shape functions and their first derivatives.
    pub fn assembly_degree(&self) -> usize {
        (3 * self.order() + 2).max(3 * self.element.poly_degree())
    }

    /// Copy of this space with the orientation sign of one local dof
    /// flipped. Only useful as a negative control for conformity checks.
    pub fn with_flipped_sign(&self, cell: usize, local: usize) -> FunctionSpace {
        let mut out = self.clone();
        out.cell_signs[cell * self.element.dim() + local] *= -1.0;
        out
    }

    /// Physical, signed basis values on a cell from a reference tabulation.
    pub fn cell_basis(&self, cell: usize, tab: &Tabulation) -> CellBasis {
        let g = &self.geometry[cell];
        let signs = self.cell_signs(cell);
        let n = tab.nshape;
        let mut values = vec![[0.0; 2]; tab.npts * n];
        let mut grads = vec![[[0.0; 2]; 2]; tab.npts * n];
        let vector = self.is_vector();
        for p in 0..tab.npts {
            for i in 0..n {
                let idx = p * n + i;
                if vector {
                    let s = signs[i];
                    let v = g.piola([tab.value(p, i, 0), tab.value(p, i, 1)]);
                    let gr = g.piola_grad([
                        [tab.grad(p, i, 0, 0), tab.grad(p, i, 0, 1)],
                        [tab.grad(p, i, 1, 0), tab.grad(p, i, 1, 1)],
                    ]);
                    values[idx] = [s * v[0], s * v[1]];
                    grads[idx] = [[s * gr[0][0], s * gr[0][1]], [s * gr[1][0], s * gr[1][1]]];
                } else {
                    values[idx] = [tab.value(p, i, 0), 0.0];
                    grads[idx][0] = g.scalar_grad([tab.grad(p, i, 0, 0), tab.grad(p, i, 0, 1)]);
                }
            }
        }
        CellBasis {
            npts: tab.npts,
            nshape: n,
            values,
            grads,
        }
    }
}

/// Shape functions pushed forward to a physical cell, orientation signs
/// included. Scalar values live in component 0; `grad[c][d] = ∂_d v_c`.
#[derive(Debug, Clone)]
pub struct CellBasis {
    pub npts: usize,
    pub nshape: usize,
    values: Vec<[f64; 2]>,
    grads: Vec<[[f64; 2]; 2]>,
}

impl CellBasis {
    #[inline]
    pub fn value(&self, p: usize, i: usize) -> [f64; 2] {
        self.values[p * self.nshape + i]
    }

    #[inline]
    pub fn grad(&self, p: usize, i: usize) -> [[f64; 2]; 2] {
        self.grads[p * self.nshape + i]
    }

    #[inline]
    pub fn div(&self, p: usize, i: usize) -> f64 {
        let g = self.grads[p * self.nshape + i];
        g[0][0] + g[1][1]
    }

    /// Field value and gradient at point `p` from local coefficients.
    pub fn combine(&self, p: usize, coeffs: &[f64]) -> ([f64; 2], [[f64; 2]; 2]) {
        let mut v = [0.0; 2];
        let mut g = [[0.0; 2]; 2];
        for (i, &c) in coeffs.iter().enumerate() {
            let vi = self.values[p * self.nshape + i];
            let gi = self.grads[p * self.nshape + i];
            v[0] += c * vi[0];
            v[1] += c * vi[1];
            for a in 0..2 {
                for b in 0..2 {
                    g[a][b] += c * gi[a][b];
                }
            }
        }
        (v, g)
    }
}

/// Reference tabulations at edge quadrature points, per local edge and
/// traversal direction: `get(e, aligned)` evaluates at
/// `reference_edge_point(e, t)` when aligned, else at `1 − t`.
#[derive(Debug, Clone)]
pub struct EdgeTabulations {
    pub rule: EdgeRule,
    tabs: Vec<Tabulation>,
}

impl EdgeTabulations {
    pub fn new(element: &ReferenceElement, degree: usize) -> Result<Self> {
        let rule = edge_rule(degree)?;
        let mut tabs = Vec::with_capacity(6);
        for e in 0..3 {
            for aligned in [false, true] {
                let pts: Vec<_> = rule
                    .points
                    .iter()
                    .map(|&t| reference_edge_point(e, if aligned { t } else { 1.0 - t }))
                    .collect();
                tabs.push(element.tabulate(&pts));
            }
        }
        Ok(EdgeTabulations { rule, tabs })
    }

    pub fn get(&self, local_edge: usize, aligned: bool) -> &Tabulation {
        &self.tabs[2 * local_edge + aligned as usize]
    }
}

#[derive(Debug, Clone)]
pub struct Field {
    space: Arc<FunctionSpace>,
    coeffs: Vec<f64>,
}

impl Field {
    pub fn new(space: Arc<FunctionSpace>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                got: coeffs.len(),
            });
        }
        Ok(Field { space, coeffs })
    }

    pub fn zeros(space: &Arc<FunctionSpace>) -> Self {
        Field {
            space: space.clone(),
            coeffs: vec![0.0; space.dim()],
        }
    }

    pub fn space(&self) -> &Arc<FunctionSpace> {
        &self.space
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn local_coeffs(&self, cell: usize) -> Vec<f64> {
        self.space.cell_dofs(cell).iter().map(|&d| self.coeffs[d]).collect()
    }

    /// `a·self + b·other`.
    pub fn lin_comb(&self, a: f64, other: &Field, b: f64) -> Field {
        assert!(Arc::ptr_eq(&self.space, &other.space) || self.space.dim() == other.space.dim());
        Field {
            space: self.space.clone(),
            coeffs: self
                .coeffs
                .iter()
                .zip(&other.coeffs)
                .map(|(x, y)| a * x + b * y)
                .collect(),
        }
    }

    pub fn scaled(&self, a: f64) -> Field {
        Field {
            space: self.space.clone(),
            coeffs: self.coeffs.iter().map(|x| a * x).collect(),
        }
    }

    /// Values and gradients at the reference points of a tabulation.
    pub fn eval_cell(&self, cell: usize, tab: &Tabulation) -> Vec<([f64; 2], [[f64; 2]; 2])> {
        let basis = self.space.cell_basis(cell, tab);
        let lc = self.local_coeffs(cell);
        (0..tab.npts).map(|p| basis.combine(p, &lc)).collect()
    }

    /// Largest normal-component jump over interior facets, sampled at edge
    /// quadrature points. Zero (up to rounding) for any H(div)-conforming
    /// coefficient vector.
    pub fn max_normal_jump(&self) -> Result<f64> {
        let space = &self.space;
        let mesh = space.mesh();
        let et = EdgeTabulations::new(space.element(), space.assembly_degree())?;
        let mut worst: f64 = 0.0;
        for (f, facet) in mesh.facets().iter().enumerate() {
            let Some(minus) = facet.minus else { continue };
            let n = facet.normal;
            let plus = facet.plus;
            let vp = self.eval_cell(plus.cell, et.get(plus.local, mesh.local_edge_aligned(f, plus)));
            let vm = self.eval_cell(minus.cell, et.get(minus.local, mesh.local_edge_aligned(f, minus)));
            for (a, b) in vp.iter().zip(&vm) {
                let jump = (a.0[0] - b.0[0]) * n[0] + (a.0[1] - b.0[1]) * n[1];
                worst = worst.max(jump.abs());
            }
        }
        Ok(worst)
    }

    /// `(Σ_K ‖div u‖²_K)^{1/2}` with the elementwise strong divergence.
    pub fn div_norm(&self) -> Result<f64> {
        let space = &self.space;
        let rule = triangle_rule(2 * space.element().poly_degree())?;
        let tab = space.element().tabulate(&rule.points);
        let mut sum = 0.0;
        for cell in 0..space.mesh().num_cells() {
            let g = space.geometry(cell);
            for (p, (v, gr)) in self.eval_cell(cell, &tab).into_iter().enumerate() {
                let _ = v;
                let d = gr[0][0] + gr[1][1];
                sum += rule.weights[p] * g.det * d * d;
            }
        }
        Ok(sum.sqrt())
    }
}

/// Interpolation through the element functionals, with the field given in
/// physical coordinates of each cell's own frame.
pub fn interpolate(space: &Arc<FunctionSpace>, f: impl Fn(Point) -> [f64; 2]) -> Field {
    interpolate_cellwise(space, |cell, xi| {
        let g = space.geometry(cell);
        xi.iter().map(|&p| f(g.map(p))).collect()
    })
}

/// Scalar convenience wrapper around [`interpolate`].
pub fn interpolate_scalar(space: &Arc<FunctionSpace>, f: impl Fn(Point) -> f64) -> Field {
    interpolate(space, |x| [f(x), 0.0])
}

/// Interpolation of a cellwise-defined field. `eval(cell, ref_points)` must
/// return the physical value at each reference point. A dof shared between
/// cells takes its value from the lowest-numbered cell.
pub fn interpolate_cellwise(
    space: &Arc<FunctionSpace>,
    mut eval: impl FnMut(usize, &[[f64; 2]]) -> Vec<[f64; 2]>,
) -> Field {
    let mut coeffs = vec![0.0; space.dim()];
    let mut set = vec![false; space.dim()];
    let vector = space.is_vector();
    for cell in 0..space.mesh().num_cells() {
        let g = space.geometry(cell);
        let dofs = space.cell_dofs(cell);
        let signs = space.cell_signs(cell);
        for (i, func) in space.element().functionals().iter().enumerate() {
            let vals = eval(cell, &func.points);
            let local: f64 = func
                .weights
                .iter()
                .zip(&vals)
                .map(|(w, v)| {
                    let r = if vector { g.piola_inverse(*v) } else { [v[0], 0.0] };
                    w[0] * r[0] + w[1] * r[1]
                })
                .sum();
            if !std::mem::replace(&mut set[dofs[i]], true) {
                coeffs[dofs[i]] = signs[i] * local;
            }
        }
    }
    Field {
        space: space.clone(),
        coeffs,
    }
}

/// Global mass matrix `(φ_j, φ_i)`.
pub fn mass_matrix(space: &FunctionSpace) -> Result<SparseMatrix> {
    let rule = triangle_rule(2 * space.element().poly_degree())?;
    let tab = space.element().tabulate(&rule.points);
    let nd = space.dofs_per_cell();
    let nc = space.mesh().num_cells();
    let mut tb = TripletBuilder::with_capacity(space.dim(), space.dim(), nc * nd * nd);
    let mut local = vec![0.0; nd * nd];
    for cell in 0..nc {
        let basis = space.cell_basis(cell, &tab);
        let det = space.geometry(cell).det;
        local.iter_mut().for_each(|v| *v = 0.0);
        for (p, &w) in rule.weights.iter().enumerate() {
            let wd = w * det;
            for i in 0..nd {
                let vi = basis.value(p, i);
                for j in 0..nd {
                    let vj = basis.value(p, j);
                    local[i * nd + j] += wd * (vi[0] * vj[0] + vi[1] * vj[1]);
                }
            }
        }
        let dofs = space.cell_dofs(cell);
        for i in 0..nd {
            for j in 0..nd {
                tb.push(dofs[i], dofs[j], local[i * nd + j]);
            }
        }
    }
    Ok(tb.build())
}

/// Load vector `(f, φ_i)` for an analytic field.
pub fn load_vector(space: &FunctionSpace, degree: usize, f: impl Fn(Point) -> [f64; 2]) -> Result<Vec<f64>> {
    let rule = triangle_rule(degree.min(crate::quadrature::MAX_DEGREE))?;
    let tab = space.element().tabulate(&rule.points);
    let mut b = vec![0.0; space.dim()];
    for cell in 0..space.mesh().num_cells() {
        let basis = space.cell_basis(cell, &tab);
        let g = space.geometry(cell);
        let dofs = space.cell_dofs(cell);
        for (p, (xi, w)) in rule.iter().enumerate() {
            let fx = f(g.map(*xi));
            let wd = w * g.det;
            for (i, &d) in dofs.iter().enumerate() {
                let v = basis.value(p, i);
                b[d] += wd * (fx[0] * v[0] + fx[1] * v[1]);
            }
        }
    }
    Ok(b)
}

/// Plain L² projection of an analytic field (scalar fields use component 0).
pub fn l2_project(space: &Arc<FunctionSpace>, f: impl Fn(Point) -> [f64; 2]) -> Result<Field> {
    let m = mass_matrix(space)?;
    let b = load_vector(space, space.assembly_degree() + 3, f)?;
    let x = lu_solve(&m, &b)?;
    Field::new(space.clone(), x)
}

/// `u = grad^⊥ ψ = (∂₂ψ, −∂₁ψ)` for a continuous stream function, realised
/// exactly in the target H(div) space by interpolation.
pub fn div_free_from_stream(stream: &Field, target: &Arc<FunctionSpace>) -> Result<Field> {
    let ss = stream.space();
    if ss.family() != Family::CG {
        return Err(Error::SpaceMismatch(format!(
            "stream function must be continuous, got {}",
            ss.family()
        )));
    }
    if !target.is_vector() {
        return Err(Error::SpaceMismatch(format!(
            "target space must be RT or BDM, got {}",
            target.family()
        )));
    }
    if !Arc::ptr_eq(ss.mesh(), target.mesh()) {
        return Err(Error::SpaceMismatch("stream and target live on different meshes".into()));
    }
    // Divergence-free RT_s fields are piecewise P_s, as are BDM_s fields.
    if ss.order() > target.order() + 1 {
        return Err(Error::SpaceMismatch(format!(
            "CG{} stream does not fit {}{}",
            ss.order(),
            target.family(),
            target.order()
        )));
    }
    let mesh = ss.mesh();
    if !mesh.is_periodic() {
        let vals: Vec<f64> = ss.boundary_dofs().iter().map(|&d| stream.coeffs()[d]).collect();
        let lo = vals.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let scale = stream.coeffs().iter().fold(1.0f64, |m, v| m.max(v.abs()));
        if hi - lo > 1e-12 * scale {
            return Err(Error::StreamNotConstantOnBoundary(hi - lo));
        }
    }
    let tabs: Vec<Tabulation> = target
        .element()
        .functionals()
        .iter()
        .map(|func| ss.element().tabulate(&func.points))
        .collect();
    let mut k = 0usize;
    let nfunc = tabs.len();
    let out = interpolate_cellwise(target, |cell, _pts| {
        let tab = &tabs[k % nfunc];
        k += 1;
        stream
            .eval_cell(cell, tab)
            .into_iter()
            .map(|(_, g)| [g[0][1], -g[0][0]])
            .collect()
    });
    Ok(out)
}

/// Local edge endpoints of a cell in its own frame.
pub fn cell_edge_coords(mesh: &Mesh, cell: usize, local: usize) -> [Point; 2] {
    let (a, b) = local_edge_vertices(local);
    let cc = mesh.cell_coords(cell);
    [cc[a], cc[b]]
}
