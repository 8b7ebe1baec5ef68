//! Advection operators on a DG scalar space as algebraic objects: the hat
//! map back to vector fields, commutators, the Euler-Poincaré identity and
//! the discrete Kelvin circulation residual.
//!
//! Operators act as `X = M⁻¹A` where `A[b, a] = (X a, b)`. Pairings of the
//! form `(w, X a)_Ω` are evaluated as `wᵀ A a` without any mass solve.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::elements::Family;
use crate::error::{Error, Result};
use crate::forms::{
    facet_bases, momentum_trilinear_rotational, scalar_advection_matrix_with, FluxMode, Penalty,
};
use crate::mesh::Mesh;
use crate::quadrature::triangle_rule;
use crate::solver::sparse::{dot, LuFactorization, SparseMatrix};
use crate::spaces::{
    build_space, div_free_from_stream, interpolate_cellwise, interpolate_scalar, mass_matrix, EdgeTabulations,
    Field, FunctionSpace,
};

/// A DG scalar space together with its factorised mass matrix.
#[derive(Debug, Clone)]
pub struct ScalarSpace {
    pub space: Arc<FunctionSpace>,
    pub mass: SparseMatrix,
    mass_lu: Arc<LuFactorization>,
}

impl ScalarSpace {
    pub fn new(space: Arc<FunctionSpace>) -> Result<Self> {
        if space.family() != Family::DG {
            return Err(Error::SpaceMismatch(format!(
                "operator space must be DG, got {}",
                space.family()
            )));
        }
        let mass = mass_matrix(&space)?;
        let mass_lu = Arc::new(LuFactorization::new(&mass)?);
        Ok(ScalarSpace { space, mass, mass_lu })
    }

    pub fn build(mesh: &Arc<Mesh>, order: usize) -> Result<Self> {
        Self::new(build_space(mesh, Family::DG, order)?)
    }

    pub fn dim(&self) -> usize {
        self.space.dim()
    }

    pub fn solve_mass(&self, b: &[f64]) -> Result<Vec<f64>> {
        self.mass_lu.solve(b)
    }

    /// `(a, b)_Ω`.
    pub fn inner(&self, a: &[f64], b: &[f64]) -> f64 {
        dot(a, &self.mass.mul_vec(b))
    }

    /// Exact DG representation of each component of a vector field whose
    /// components lie in the scalar space.
    pub fn components(&self, u: &Field) -> [Vec<f64>; 2] {
        let vs = u.space();
        let mut out: [Vec<f64>; 2] = Default::default();
        for (c, slot) in out.iter_mut().enumerate() {
            let f = interpolate_cellwise(&self.space, |cell, pts| {
                let tab = vs.element().tabulate(pts);
                u.eval_cell(cell, &tab).into_iter().map(|(v, _)| [v[c], 0.0]).collect()
            });
            *slot = f.into_coeffs();
        }
        out
    }

    pub fn constant(&self, value: f64) -> Vec<f64> {
        interpolate_scalar(&self.space, |_| value).into_coeffs()
    }
}

/// How the upwind coefficient of an operator is chosen.
#[derive(Debug, Clone)]
pub enum OperatorFlux {
    Centred,
    /// `c_f = sign(β·n)/2`.
    Upwind,
    /// `c_f = factor · sign(g·n)/2` for a generating field `g`.
    Generated { generator: Field, factor: f64 },
}

impl From<FluxMode> for OperatorFlux {
    fn from(m: FluxMode) -> Self {
        match m {
            FluxMode::Centred => OperatorFlux::Centred,
            FluxMode::Upwind => OperatorFlux::Upwind,
        }
    }
}

/// The discrete Lie derivative `X_β` on a DG space.
#[derive(Debug, Clone)]
pub struct AdvectionOperator {
    beta: Field,
    scalars: ScalarSpace,
    flux: OperatorFlux,
    matrix: SparseMatrix,
}

impl AdvectionOperator {
    pub fn new(beta: &Field, scalars: &ScalarSpace, flux: OperatorFlux) -> Result<Self> {
        let penalty = match &flux {
            OperatorFlux::Centred => Penalty::None,
            OperatorFlux::Upwind => Penalty::Upwind,
            OperatorFlux::Generated { generator, factor } => Penalty::Generated {
                generator,
                factor: *factor,
            },
        };
        let matrix = scalar_advection_matrix_with(beta, &scalars.space, penalty)?;
        Ok(AdvectionOperator {
            beta: beta.clone(),
            scalars: scalars.clone(),
            flux,
            matrix,
        })
    }

    pub fn centred(beta: &Field, scalars: &ScalarSpace) -> Result<Self> {
        Self::new(beta, scalars, OperatorFlux::Centred)
    }

    pub fn beta(&self) -> &Field {
        &self.beta
    }

    pub fn scalars(&self) -> &ScalarSpace {
        &self.scalars
    }

    pub fn flux(&self) -> &OperatorFlux {
        &self.flux
    }

    /// `A` with `A[b, a] = (X a, b)`.
    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    /// `X a = M⁻¹ A a`.
    pub fn apply(&self, a: &[f64]) -> Result<Vec<f64>> {
        self.scalars.solve_mass(&self.matrix.mul_vec(a))
    }

    /// `(w, X a)_Ω`.
    pub fn pair(&self, w: &[f64], a: &[f64]) -> f64 {
        dot(w, &self.matrix.mul_vec(a))
    }

    /// `(X x_i, b)` for the coordinate function `x_i`. Coordinates are taken
    /// in each cell's own frame and, on facets, in the frame of the cell the
    /// test function lives in, so the coordinate has no jumps even across
    /// the periodic seam of a torus.
    pub fn coordinate_load(&self, i: usize) -> Result<Vec<f64>> {
        let space = &self.scalars.space;
        let bspace = self.beta.space();
        let mesh = space.mesh();
        let degree = bspace.element().poly_degree() + 2 * space.element().poly_degree() + 1;
        let rule = triangle_rule(degree)?;
        let ts = space.element().tabulate(&rule.points);
        let tb = bspace.element().tabulate(&rule.points);
        let mut load = vec![0.0; space.dim()];
        for cell in 0..mesh.num_cells() {
            let g = space.geometry(cell);
            let basis = space.cell_basis(cell, &ts);
            let bv = self.beta.eval_cell(cell, &tb);
            let dofs = space.cell_dofs(cell);
            for (p, (xi, w)) in rule.iter().enumerate() {
                let x = g.map(*xi)[i];
                let b = bv[p].0;
                for (k, &d) in dofs.iter().enumerate() {
                    let gb = basis.grad(p, k)[0];
                    load[d] -= w * g.det * x * (b[0] * gb[0] + b[1] * gb[1]);
                }
            }
        }
        let et_s = EdgeTabulations::new(space.element(), degree)?;
        let et_b = EdgeTabulations::new(bspace.element(), degree)?;
        for (f, facet) in mesh.facets().iter().enumerate() {
            let Some(minus) = facet.minus else { continue };
            let n = facet.normal;
            let (bp, bm) = crate::forms::facet_values(&self.beta, &et_b, f);
            let bm = bm.unwrap();
            let (sp, sm) = facet_bases(space, &et_s, f);
            let sm = sm.unwrap();
            let off = mesh.minus_offset(f);
            for (q, (t, w)) in et_s.rule.iter().enumerate() {
                let wl = w * facet.length;
                let xp = facet.coords[0][i] + t * (facet.coords[1][i] - facet.coords[0][i]);
                let xm = xp - off[i];
                let bn = 0.5 * (bp[q][0] * n[0] + bp[q][1] * n[1] + bm[q][0] * n[0] + bm[q][1] * n[1]);
                for (k, &d) in space.cell_dofs(facet.plus.cell).iter().enumerate() {
                    load[d] += wl * bn * xp * sp.value(q, k)[0];
                }
                for (k, &d) in space.cell_dofs(minus.cell).iter().enumerate() {
                    load[d] -= wl * bn * xm * sm.value(q, k)[0];
                }
            }
        }
        Ok(load)
    }

    /// `X x_i` as DG coefficients.
    pub fn apply_to_coordinate(&self, i: usize) -> Result<Vec<f64>> {
        self.scalars.solve_mass(&self.coordinate_load(i)?)
    }
}

/// `Â = Σ_i (A x_i) e_i`, returned componentwise as DG coefficients.
pub fn hat(op: &AdvectionOperator) -> Result<[Vec<f64>; 2]> {
    if op.scalars.space.order() == 0 {
        return Err(Error::HatNeedsLinearScalars);
    }
    Ok([op.apply_to_coordinate(0)?, op.apply_to_coordinate(1)?])
}

/// `[A, B] = AB − BA` as a composed linear map.
#[derive(Debug, Clone)]
pub struct Commutator<'a> {
    a: &'a AdvectionOperator,
    b: &'a AdvectionOperator,
}

pub fn commutator<'a>(a: &'a AdvectionOperator, b: &'a AdvectionOperator) -> Result<Commutator<'a>> {
    if !Arc::ptr_eq(&a.scalars.space, &b.scalars.space) {
        return Err(Error::SpaceMismatch("commutator of operators on different scalar spaces".into()));
    }
    Ok(Commutator { a, b })
}

impl Commutator<'_> {
    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>> {
        let ab = self.a.apply(&self.b.apply(x)?)?;
        let ba = self.b.apply(&self.a.apply(x)?)?;
        Ok(ab.iter().zip(&ba).map(|(p, q)| p - q).collect())
    }

    /// `hat([A, B])_i = A(B x_i) − B(A x_i)` with `B x_i` from the
    /// seam-consistent coordinate action.
    pub fn hat(&self) -> Result<[Vec<f64>; 2]> {
        if self.a.scalars.space.order() == 0 {
            return Err(Error::HatNeedsLinearScalars);
        }
        let ha = hat(self.a)?;
        let hb = hat(self.b)?;
        let mut out: [Vec<f64>; 2] = Default::default();
        for i in 0..2 {
            let p = self.a.apply(&hb[i])?;
            let q = self.b.apply(&ha[i])?;
            out[i] = p.iter().zip(&q).map(|(x, y)| x - y).collect();
        }
        Ok(out)
    }

    /// `(w, hat([A, B]))_Ω = Σ_i w_iᵀ (A_A hb_i − A_B ha_i)` for a vector field
    /// given componentwise; only the mass solves for the hats are needed.
    pub fn pair_hat(&self, w: &[Vec<f64>; 2]) -> Result<f64> {
        let ha = hat(self.a)?;
        let hb = hat(self.b)?;
        Ok((0..2).map(|i| self.a.pair(&w[i], &hb[i]) - self.b.pair(&w[i], &ha[i])).sum())
    }
}

/// Lowest DG order (at least 1) that holds both components of every field
/// in the velocity space: `s` for BDM_s and `s + 1` for RT_s.
pub fn operator_scalar_order(velocity: &FunctionSpace) -> usize {
    velocity.element().poly_degree().max(1)
}

fn l2_norm(u: &Field) -> Result<f64> {
    let m = mass_matrix(u.space())?;
    Ok(dot(u.coeffs(), &m.mul_vec(u.coeffs())).max(0.0).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdentityResidual {
    pub absolute: f64,
    /// `absolute / (‖u‖² ‖v‖)`, or the absolute value when the scale vanishes.
    pub relative: f64,
}

/// `|T_rot(u; u, v) + (u, hat([X_u, X_v]))_Ω|`. In upwind mode the
/// operators carry the coefficient `−sign(u·n)/2` generated by `u`.
pub fn ep_identity_residual(u: &Field, v: &Field, scalars: &ScalarSpace, mode: FluxMode) -> Result<IdentityResidual> {
    let t = momentum_trilinear_rotational(u, u, v, mode)?;
    let flux = constraint_flux(u, mode);
    let xu = AdvectionOperator::new(u, scalars, flux.clone())?;
    let xv = AdvectionOperator::new(v, scalars, flux)?;
    let uc = scalars.components(u);
    let pairing = commutator(&xu, &xv)?.pair_hat(&uc)?;
    let absolute = (t + pairing).abs();
    let scale = l2_norm(u)?.powi(2) * l2_norm(v)?;
    Ok(IdentityResidual {
        absolute,
        relative: if scale > 0.0 { absolute / scale } else { absolute },
    })
}

/// Facet coefficient of the constrained operators generated by `u`.
fn constraint_flux(u: &Field, mode: FluxMode) -> OperatorFlux {
    match mode {
        FluxMode::Centred => OperatorFlux::Centred,
        FluxMode::Upwind => OperatorFlux::Generated {
            generator: u.clone(),
            factor: -1.0,
        },
    }
}

/// A divergence-free lowest-order Raviart-Thomas field carried by a closed
/// loop of cells, with unit flux from each cell into the next.
#[derive(Debug, Clone)]
pub struct DiscreteCurrent {
    pub field: Field,
    pub cells: Vec<usize>,
    pub facets: Vec<usize>,
}

#[derive(Debug, Clone)]
pub enum LoopSpec {
    /// The horizontal strip of squares `j`, wrapping around the torus.
    Row(usize),
    /// The vertical strip of squares `i`, wrapping around the torus.
    Column(usize),
    Cells(Vec<usize>),
}

pub fn build_discrete_current(mesh: &Arc<Mesh>, spec: &LoopSpec) -> Result<DiscreteCurrent> {
    let n = mesh.resolution();
    let cells: Vec<usize> = match spec {
        LoopSpec::Row(j) => {
            if *j >= n {
                return Err(Error::InvalidLoop(format!("row {j} outside 0..{n}")));
            }
            (0..n).flat_map(|i| [2 * (j * n + i) + 1, 2 * (j * n + i)]).collect()
        }
        LoopSpec::Column(i) => {
            if *i >= n {
                return Err(Error::InvalidLoop(format!("column {i} outside 0..{n}")));
            }
            (0..n).flat_map(|j| [2 * (j * n + i), 2 * (j * n + i) + 1]).collect()
        }
        LoopSpec::Cells(c) => c.clone(),
    };
    if cells.len() < 3 {
        return Err(Error::InvalidLoop(format!("need at least 3 cells, got {}", cells.len())));
    }
    let mut seen = vec![false; mesh.num_cells()];
    for &c in &cells {
        if c >= mesh.num_cells() || std::mem::replace(&mut seen[c], true) {
            return Err(Error::InvalidLoop(format!("cell {c} repeated or out of range")));
        }
    }
    let rt0 = build_space(mesh, Family::RT, 0)?;
    let mut coeffs = vec![0.0; rt0.dim()];
    let mut facets = Vec::with_capacity(cells.len());
    for k in 0..cells.len() {
        let (a, b) = (cells[k], cells[(k + 1) % cells.len()]);
        let shared = mesh
            .neighbours(a)
            .into_iter()
            .find(|&(other, _)| other == b)
            .map(|(_, f)| f)
            .ok_or_else(|| {
                if k + 1 == cells.len() {
                    Error::InvalidLoop(format!("chain does not close: cell {a} is not adjacent to {b}"))
                } else {
                    Error::InvalidLoop(format!("cells {a} and {b} share no facet"))
                }
            })?;
        if facets.contains(&shared) {
            return Err(Error::InvalidLoop(format!("facet {shared} crossed twice")));
        }
        let facet = mesh.facet(shared);
        coeffs[shared] = if facet.plus.cell == a { 1.0 } else { -1.0 };
        facets.push(shared);
    }
    Ok(DiscreteCurrent {
        field: Field::new(rt0, coeffs)?,
        cells,
        facets,
    })
}

impl DiscreteCurrent {
    /// The current as an element of a higher-order H(div) space.
    pub fn embed(&self, target: &Arc<FunctionSpace>) -> Result<Field> {
        if !target.is_vector() {
            return Err(Error::SpaceMismatch("currents embed only into RT/BDM spaces".into()));
        }
        if !Arc::ptr_eq(target.mesh(), self.field.space().mesh()) {
            return Err(Error::SpaceMismatch("current and target live on different meshes".into()));
        }
        let src = self.field.space().clone();
        Ok(interpolate_cellwise(target, |cell, pts| {
            let tab = src.element().tabulate(pts);
            self.field.eval_cell(cell, &tab).into_iter().map(|(v, _)| v).collect()
        }))
    }
}

/// `|(u̇, c)_Ω − (u, hat([X_u, X_c]))_Ω|` for one midpoint step from `u_prev`
/// to `u_next`; operators are generated at the midpoint state. In upwind
/// mode both operators carry the coefficient `−sign(u·n)/2` generated by
/// the midpoint velocity.
pub fn kelvin_residual(
    u_prev: &Field,
    u_next: &Field,
    dt: f64,
    current: &Field,
    scalars: &ScalarSpace,
    mode: FluxMode,
) -> Result<f64> {
    if current.space().dim() != u_prev.space().dim() {
        return Err(Error::SpaceMismatch("current must live in the velocity space".into()));
    }
    let d = current.div_norm()?;
    if d > 1e-10 {
        return Err(Error::NotDivergenceFree(d));
    }
    let u = u_prev.lin_comb(0.5, u_next, 0.5);
    let m = mass_matrix(u.space())?;
    let udot: Vec<f64> = u_next.coeffs().iter().zip(u_prev.coeffs()).map(|(a, b)| (a - b) / dt).collect();
    let lhs = dot(&udot, &m.mul_vec(current.coeffs()));
    let flux = constraint_flux(&u, mode);
    let xu = AdvectionOperator::new(&u, scalars, flux.clone())?;
    let xc = AdvectionOperator::new(current, scalars, flux)?;
    let rhs = commutator(&xu, &xc)?.pair_hat(&scalars.components(&u))?;
    Ok((lhs - rhs).abs())
}

/// Random continuous stream function with uniform(−1, 1) nodal values;
/// on a mesh with boundary the boundary values are set to zero.
pub fn random_stream(space: &Arc<FunctionSpace>, rng: &mut ChaCha8Rng) -> Result<Field> {
    if space.family() != Family::CG {
        return Err(Error::SpaceMismatch("stream functions must be CG".into()));
    }
    let mut coeffs: Vec<f64> = (0..space.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    for &d in space.boundary_dofs() {
        coeffs[d] = 0.0;
    }
    Field::new(space.clone(), coeffs)
}

/// Seeded generator of divergence-free fields `grad^⊥ ψ` with random `ψ`.
#[derive(Debug)]
pub struct StreamSampler {
    stream_space: Arc<FunctionSpace>,
    target: Arc<FunctionSpace>,
    rng: ChaCha8Rng,
}

impl StreamSampler {
    pub fn new(target: &Arc<FunctionSpace>, seed: u64) -> Result<Self> {
        let stream_space = build_space(target.mesh(), Family::CG, target.order() + 1)?;
        Ok(StreamSampler {
            stream_space,
            target: target.clone(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        })
    }

    pub fn sample(&mut self) -> Result<Field> {
        let psi = random_stream(&self.stream_space, &mut self.rng)?;
        div_free_from_stream(&psi, &self.target)
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
