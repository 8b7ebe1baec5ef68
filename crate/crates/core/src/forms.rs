//! Weak forms: the scalar discrete Lie derivative, the momentum advection
//! trilinear forms (flux form and rotational form), and the residual and
//! Jacobian of one implicit-midpoint step of the mixed Euler system.
//!
//! Conventions on an interior facet `f` with normal `n` pointing out of the
//! plus cell: `[a] = a⁺ − a⁻`, `{a} = (a⁺ + a⁻)/2`. In 2D the cross product
//! of two vectors is the scalar `x × y = x₁y₂ − x₂y₁`.

use std::sync::Arc;

use crate::elements::Family;
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::quadrature::triangle_rule;
use crate::solver::sparse::{SparseMatrix, TripletBuilder};
use crate::spaces::{load_vector, mass_matrix, CellBasis, EdgeTabulations, Field, FunctionSpace};

/// Pointwise threshold below which the upwind indicator is set to zero.
pub const UPWIND_EPS: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FluxMode {
    Centred,
    Upwind,
}

impl std::fmt::Display for FluxMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            FluxMode::Centred => "centred",
            FluxMode::Upwind => "upwind",
        })
    }
}

impl std::str::FromStr for FluxMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "centred" | "centered" => Ok(FluxMode::Centred),
            "upwind" => Ok(FluxMode::Upwind),
            other => Err(Error::Config(format!("unknown flux mode '{other}'"))),
        }
    }
}

/// `c_f = sign(β·n)/2`, zero when `|β·n| < UPWIND_EPS`.
#[inline]
pub fn upwind_indicator(beta_n: f64) -> f64 {
    if beta_n.abs() < UPWIND_EPS {
        0.0
    } else {
        0.5 * beta_n.signum()
    }
}

#[inline]
fn cross(x: [f64; 2], y: [f64; 2]) -> f64 {
    x[0] * y[1] - x[1] * y[0]
}

#[inline]
fn dot(x: [f64; 2], y: [f64; 2]) -> f64 {
    x[0] * y[0] + x[1] * y[1]
}

/// `(g · u)_c = Σ_d ∂_d v_c u_d`, i.e. `(u·∇)v` from the gradient of `v`.
#[inline]
fn directional(g: [[f64; 2]; 2], u: [f64; 2]) -> [f64; 2] {
    [g[0][0] * u[0] + g[0][1] * u[1], g[1][0] * u[0] + g[1][1] * u[1]]
}

/// Facet jump-penalty coefficient.
#[derive(Debug, Clone, Copy)]
pub enum Penalty<'a> {
    /// `c_f = 0`.
    None,
    /// `c_f = sign(β·n)/2` from the advecting field itself.
    Upwind,
    /// `c_f = factor · sign(g·n)/2` from a separate generating field.
    Generated { generator: &'a Field, factor: f64 },
}

impl From<FluxMode> for Penalty<'_> {
    fn from(m: FluxMode) -> Self {
        match m {
            FluxMode::Centred => Penalty::None,
            FluxMode::Upwind => Penalty::Upwind,
        }
    }
}

/// Physical bases of both sides of facet `f` at the edge quadrature points.
pub(crate) fn facet_bases(
    space: &FunctionSpace,
    et: &EdgeTabulations,
    f: usize,
) -> (CellBasis, Option<CellBasis>) {
    let mesh = space.mesh();
    let facet = mesh.facet(f);
    let p = facet.plus;
    let plus = space.cell_basis(p.cell, et.get(p.local, mesh.local_edge_aligned(f, p)));
    let minus = facet
        .minus
        .map(|m| space.cell_basis(m.cell, et.get(m.local, mesh.local_edge_aligned(f, m))));
    (plus, minus)
}

/// Values of a field on both sides of facet `f`; the minus side is `None`
/// on the boundary.
pub(crate) fn facet_values(field: &Field, et: &EdgeTabulations, f: usize) -> (Vec<[f64; 2]>, Option<Vec<[f64; 2]>>) {
    let space = field.space();
    let mesh = space.mesh();
    let facet = mesh.facet(f);
    let (bp, bm) = facet_bases(space, et, f);
    let lp = field.local_coeffs(facet.plus.cell);
    let plus = (0..bp.npts).map(|q| bp.combine(q, &lp).0).collect();
    let minus = bm.map(|b| {
        let lm = field.local_coeffs(facet.minus.unwrap().cell);
        (0..b.npts).map(|q| b.combine(q, &lm).0).collect()
    });
    (plus, minus)
}

fn require_div_free(beta: &Field) -> Result<()> {
    let d = beta.div_norm()?;
    let scale = crate::solver::sparse::norm2(beta.coeffs()).max(1.0);
    if d > 1e-10 * scale {
        return Err(Error::NotDivergenceFree(d));
    }
    Ok(())
}

fn require_vector(space: &FunctionSpace, what: &str) -> Result<()> {
    if space.is_vector() {
        Ok(())
    } else {
        Err(Error::SpaceMismatch(format!("{what} must be an RT or BDM field")))
    }
}

/// Matrix `A` with `A[b, a] = (X_β a, b)` on a DG space:
///
/// `−Σ_K (a, β·∇b)_K + Σ_{F°} ∫ (β·n){a}[b] + ∫ c_f (β·n)[a][b]`.
pub fn scalar_advection_matrix(beta: &Field, space: &Arc<FunctionSpace>, mode: FluxMode) -> Result<SparseMatrix> {
    scalar_advection_matrix_with(beta, space, mode.into())
}

pub fn scalar_advection_matrix_with(
    beta: &Field,
    space: &Arc<FunctionSpace>,
    penalty: Penalty<'_>,
) -> Result<SparseMatrix> {
    require_vector(beta.space(), "advecting field")?;
    if space.family() != Family::DG {
        return Err(Error::SpaceMismatch(format!(
            "scalar advection needs a DG space, got {}",
            space.family()
        )));
    }
    if !Arc::ptr_eq(beta.space().mesh(), space.mesh()) {
        return Err(Error::SpaceMismatch("advecting field lives on another mesh".into()));
    }
    require_div_free(beta)?;
    if let Penalty::Generated { generator, .. } = penalty {
        require_vector(generator.space(), "penalty generator")?;
    }

    let bspace = beta.space();
    let mesh = space.mesh();
    let degree = (bspace.element().poly_degree() + 2 * space.element().poly_degree()).max(bspace.assembly_degree());
    let rule = triangle_rule(degree)?;
    let tab_s = space.element().tabulate(&rule.points);
    let tab_b = bspace.element().tabulate(&rule.points);
    let nd = space.dofs_per_cell();
    let mut tb = TripletBuilder::with_capacity(space.dim(), space.dim(), mesh.num_cells() * nd * nd * 3);

    for cell in 0..mesh.num_cells() {
        let sb = space.cell_basis(cell, &tab_s);
        let bv = beta.eval_cell(cell, &tab_b);
        let det = space.geometry(cell).det;
        let dofs = space.cell_dofs(cell);
        for (p, &w) in rule.weights.iter().enumerate() {
            let wd = w * det;
            let b = bv[p].0;
            for i in 0..nd {
                let gb = sb.grad(p, i)[0];
                let bgrad = dot(b, gb);
                for j in 0..nd {
                    let a = sb.value(p, j)[0];
                    tb.push(dofs[i], dofs[j], -wd * a * bgrad);
                }
            }
        }
    }

    let et_s = EdgeTabulations::new(space.element(), degree)?;
    let et_b = EdgeTabulations::new(bspace.element(), degree)?;
    let et_g = match penalty {
        Penalty::Generated { generator, .. } => Some(EdgeTabulations::new(generator.space().element(), degree)?),
        _ => None,
    };
    for (f, facet) in mesh.facets().iter().enumerate() {
        let Some(minus) = facet.minus else { continue };
        let n = facet.normal;
        let (bp, bm) = facet_values(beta, &et_b, f);
        let bm = bm.unwrap();
        let gen = match penalty {
            Penalty::Generated { generator, factor } => {
                let (gp, gm) = facet_values(generator, et_g.as_ref().unwrap(), f);
                Some((gp, gm.unwrap(), factor))
            }
            _ => None,
        };
        let (sp, sm) = facet_bases(space, &et_s, f);
        let sm = sm.unwrap();
        let dp = space.cell_dofs(facet.plus.cell);
        let dm = space.cell_dofs(minus.cell);
        for (q, w) in et_s.rule.weights.iter().enumerate() {
            let wl = w * facet.length;
            let bn = 0.5 * (dot(bp[q], n) + dot(bm[q], n));
            let c = match (&penalty, &gen) {
                (Penalty::None, _) => 0.0,
                (Penalty::Upwind, _) => upwind_indicator(bn),
                (Penalty::Generated { .. }, Some((gp, gm, factor))) => {
                    factor * upwind_indicator(0.5 * (dot(gp[q], n) + dot(gm[q], n)))
                }
                _ => unreachable!(),
            };
            // test side sigma_b, trial side sigma_a
            for (db, basis_b, sig_b) in [(dp, &sp, 1.0), (dm, &sm, -1.0)] {
                for i in 0..nd {
                    let jb = sig_b * basis_b.value(q, i)[0];
                    if jb == 0.0 {
                        continue;
                    }
                    for (da, basis_a, sig_a) in [(dp, &sp, 1.0), (dm, &sm, -1.0)] {
                        for j in 0..nd {
                            let a = basis_a.value(q, j)[0];
                            let val = wl * bn * (0.5 * a + c * sig_a * a) * jb;
                            tb.push(db[i], da[j], val);
                        }
                    }
                }
            }
        }
    }
    Ok(tb.build())
}

/// Which of the two equivalent momentum advection forms to evaluate.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrilinearForm {
    /// `−Σ_K (a, (u·∇)v)_K + Σ_{F°} (u·n {a}, [v])_f`.
    Flux,
    /// `Σ_K (a, grad^⊥(u × v) − u div v)_K + Σ_{F°} (n × {a}, [u × v])_f`.
    Rotational,
}

#[derive(Clone, Copy)]
struct Pt {
    v: [f64; 2],
    g: [[f64; 2]; 2],
}

fn volume_integrand(form: TrilinearForm, u: Pt, a: Pt, v: Pt) -> f64 {
    match form {
        TrilinearForm::Flux => -dot(a.v, directional(v.g, u.v)),
        TrilinearForm::Rotational => {
            let mut gw = [0.0; 2];
            for (d, g) in gw.iter_mut().enumerate() {
                *g = u.g[0][d] * v.v[1] + u.v[0] * v.g[1][d] - u.g[1][d] * v.v[0] - u.v[1] * v.g[0][d];
            }
            let divv = v.g[0][0] + v.g[1][1];
            a.v[0] * (gw[1] - u.v[0] * divv) + a.v[1] * (-gw[0] - u.v[1] * divv)
        }
    }
}

/// Facet integrand; `c` is the upwind coefficient.
#[allow(clippy::too_many_arguments)]
fn facet_integrand(
    form: TrilinearForm,
    n: [f64; 2],
    c: f64,
    up: [f64; 2],
    um: [f64; 2],
    ap: [f64; 2],
    am: [f64; 2],
    vp: [f64; 2],
    vm: [f64; 2],
) -> f64 {
    let ja = [ap[0] - am[0], ap[1] - am[1]];
    let jcross = cross(up, vp) - cross(um, vm);
    let upwind = c * cross(n, ja) * jcross;
    let centred = match form {
        TrilinearForm::Flux => {
            let un = 0.5 * (dot(up, n) + dot(um, n));
            let jv = [vp[0] - vm[0], vp[1] - vm[1]];
            un * 0.5 * dot([ap[0] + am[0], ap[1] + am[1]], jv)
        }
        TrilinearForm::Rotational => cross(n, [0.5 * (ap[0] + am[0]), 0.5 * (ap[1] + am[1])]) * jcross,
    };
    centred + upwind
}

/// Evaluates `T(u; a, v)` in the chosen form. The upwind coefficient is
/// `c_f = sign(u·n)/2` from the first argument.
pub fn momentum_trilinear(form: TrilinearForm, u: &Field, a: &Field, v: &Field, mode: FluxMode) -> Result<f64> {
    let space = u.space();
    require_vector(space, "velocity")?;
    if a.space().dim() != space.dim() || v.space().dim() != space.dim() {
        return Err(Error::SpaceMismatch("trilinear form arguments must share a space".into()));
    }
    let mesh = space.mesh();
    let degree = space.assembly_degree();
    let rule = triangle_rule(degree)?;
    let tab = space.element().tabulate(&rule.points);
    let mut total = 0.0;
    for cell in 0..mesh.num_cells() {
        let basis = space.cell_basis(cell, &tab);
        let (lu, la, lv) = (u.local_coeffs(cell), a.local_coeffs(cell), v.local_coeffs(cell));
        let det = space.geometry(cell).det;
        for (p, &w) in rule.weights.iter().enumerate() {
            let pu = basis.combine(p, &lu);
            let pa = basis.combine(p, &la);
            let pv = basis.combine(p, &lv);
            total += w
                * det
                * volume_integrand(
                    form,
                    Pt { v: pu.0, g: pu.1 },
                    Pt { v: pa.0, g: pa.1 },
                    Pt { v: pv.0, g: pv.1 },
                );
        }
    }
    let et = EdgeTabulations::new(space.element(), degree)?;
    for (f, facet) in mesh.facets().iter().enumerate() {
        if !facet.is_interior() {
            continue;
        }
        let n = facet.normal;
        let (up, um) = facet_values(u, &et, f);
        let (ap, am) = facet_values(a, &et, f);
        let (vp, vm) = facet_values(v, &et, f);
        let (um, am, vm) = (um.unwrap(), am.unwrap(), vm.unwrap());
        for (q, w) in et.rule.weights.iter().enumerate() {
            let c = match mode {
                FluxMode::Centred => 0.0,
                FluxMode::Upwind => upwind_indicator(0.5 * (dot(up[q], n) + dot(um[q], n))),
            };
            total += w * facet.length * facet_integrand(form, n, c, up[q], um[q], ap[q], am[q], vp[q], vm[q]);
        }
    }
    Ok(total)
}

pub fn momentum_trilinear_gss(u: &Field, a: &Field, v: &Field, mode: FluxMode) -> Result<f64> {
    momentum_trilinear(TrilinearForm::Flux, u, a, v, mode)
}

pub fn momentum_trilinear_rotational(u: &Field, a: &Field, v: &Field, mode: FluxMode) -> Result<f64> {
    momentum_trilinear(TrilinearForm::Rotational, u, a, v, mode)
}

/// Pressure space paired with a velocity space: DG P_s for RT_s and
/// DG P_{s−1} for BDM_s.
pub fn pressure_order(velocity: &FunctionSpace) -> Result<usize> {
    match (velocity.family(), velocity.order()) {
        (Family::RT, s) => Ok(s),
        (Family::BDM, s) if s >= 1 => Ok(s - 1),
        (fam, s) => Err(Error::SpaceMismatch(format!("no pressure pairing for {fam}{s}"))),
    }
}

/// Velocity/pressure pair plus the scalar pressure-gauge multiplier.
#[derive(Debug, Clone)]
pub struct MixedSpaces {
    pub velocity: Arc<FunctionSpace>,
    pub pressure: Arc<FunctionSpace>,
}

impl MixedSpaces {
    pub fn new(velocity: Arc<FunctionSpace>) -> Result<Self> {
        let k = pressure_order(&velocity)?;
        let pressure = Arc::new(FunctionSpace::new(velocity.mesh().clone(), Family::DG, k)?);
        Ok(MixedSpaces { velocity, pressure })
    }

    pub fn with_pressure(velocity: Arc<FunctionSpace>, pressure: Arc<FunctionSpace>) -> Result<Self> {
        let k = pressure_order(&velocity)?;
        if pressure.family() != Family::DG || pressure.order() != k {
            return Err(Error::SpaceMismatch(format!(
                "{}{} velocity needs DG{} pressure, got {}{}",
                velocity.family(),
                velocity.order(),
                k,
                pressure.family(),
                pressure.order()
            )));
        }
        if !Arc::ptr_eq(velocity.mesh(), pressure.mesh()) {
            return Err(Error::SpaceMismatch("velocity and pressure on different meshes".into()));
        }
        Ok(MixedSpaces { velocity, pressure })
    }

    pub fn nu(&self) -> usize {
        self.velocity.dim()
    }

    pub fn np(&self) -> usize {
        self.pressure.dim()
    }

    /// Total unknowns: velocity, pressure, multiplier.
    pub fn dim(&self) -> usize {
        self.nu() + self.np() + 1
    }
}

/// `B[q, k] = (div φ_k, q)`.
pub fn divergence_matrix(spaces: &MixedSpaces) -> Result<SparseMatrix> {
    let (vs, ps) = (&spaces.velocity, &spaces.pressure);
    let rule = triangle_rule(vs.element().poly_degree() + ps.element().poly_degree())?;
    let tv = vs.element().tabulate(&rule.points);
    let tp = ps.element().tabulate(&rule.points);
    let (nv, np) = (vs.dofs_per_cell(), ps.dofs_per_cell());
    let mut tb = TripletBuilder::with_capacity(ps.dim(), vs.dim(), vs.mesh().num_cells() * nv * np);
    for cell in 0..vs.mesh().num_cells() {
        let bv = vs.cell_basis(cell, &tv);
        let bp = ps.cell_basis(cell, &tp);
        let det = vs.geometry(cell).det;
        let (dv, dp) = (vs.cell_dofs(cell), ps.cell_dofs(cell));
        for i in 0..np {
            for k in 0..nv {
                let s: f64 = (0..rule.len())
                    .map(|p| rule.weights[p] * bv.div(p, k) * bp.value(p, i)[0])
                    .sum();
                tb.push(dp[i], dv[k], s * det);
            }
        }
    }
    Ok(tb.build())
}

/// `(1, q)` for every pressure basis function.
pub fn mean_vector(space: &FunctionSpace) -> Result<Vec<f64>> {
    load_vector(space, space.element().poly_degree(), |_| [1.0, 0.0])
}

#[derive(Debug, Clone)]
pub struct AssembledResidual {
    pub residual: Vec<f64>,
    pub jacobian: Option<SparseMatrix>,
}

pub type Forcing = dyn Fn(Point, f64) -> [f64; 2] + Send + Sync;

/// Reusable assembler for the residual of one implicit-midpoint step,
///
/// `R_u = (x − uⁿ, φ)/Δt + T(u*; u*, φ) − (p, div φ) − (f(t*), φ)`,
/// `R_p = (div x, q) + λ δ_{q,0}`, `R_λ = p_0`,
///
/// with `u* = (uⁿ + x)/2`. Rows of boundary normal dofs are replaced by
/// `x_j = 0` (slip condition).
pub struct StepAssembler {
    spaces: MixedSpaces,
    mode: FluxMode,
    dt: f64,
    mass: SparseMatrix,
    div: SparseMatrix,
    div_t: SparseMatrix,
    mean: Vec<f64>,
    is_boundary: Vec<bool>,
    forcing: Option<Arc<Forcing>>,
    rule_w: Vec<f64>,
    cell_bases: Vec<CellBasis>,
    facet_bases: Vec<Option<(CellBasis, CellBasis)>>,
    edge_w: Vec<f64>,
}

impl std::fmt::Debug for StepAssembler {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("StepAssembler")
            .field("mode", &self.mode)
            .field("dt", &self.dt)
            .field("nu", &self.spaces.nu())
            .field("np", &self.spaces.np())
            .finish()
    }
}

impl StepAssembler {
    pub fn new(spaces: MixedSpaces, mode: FluxMode, dt: f64, forcing: Option<Arc<Forcing>>) -> Result<Self> {
        let vs = spaces.velocity.clone();
        let mass = mass_matrix(&vs)?;
        let div = divergence_matrix(&spaces)?;
        let div_t = div.transpose();
        let mean = mean_vector(&spaces.pressure)?;
        let mut is_boundary = vec![false; vs.dim()];
        for &d in vs.boundary_dofs() {
            is_boundary[d] = true;
        }
        let degree = vs.assembly_degree();
        let rule = triangle_rule(degree)?;
        let cell_tab = vs.element().tabulate(&rule.points);
        let edges = EdgeTabulations::new(vs.element(), degree)?;
        let mesh = vs.mesh();
        let cell_bases = (0..mesh.num_cells()).map(|c| vs.cell_basis(c, &cell_tab)).collect();
        let facet_bases = (0..mesh.num_facets())
            .map(|f| match facet_bases(&vs, &edges, f) {
                (bp, Some(bm)) => Some((bp, bm)),
                _ => None,
            })
            .collect();
        Ok(StepAssembler {
            spaces,
            mode,
            dt,
            mass,
            div,
            div_t,
            mean,
            is_boundary,
            forcing,
            rule_w: rule.weights,
            cell_bases,
            facet_bases,
            edge_w: edges.rule.weights.clone(),
        })
    }

    pub fn spaces(&self) -> &MixedSpaces {
        &self.spaces
    }

    pub fn mode(&self) -> FluxMode {
        self.mode
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn mass(&self) -> &SparseMatrix {
        &self.mass
    }

    pub fn divergence(&self) -> &SparseMatrix {
        &self.div
    }

    /// Shifts pressure coefficients by a constant so that `(p, 1) = 0`.
    pub fn zero_mean_pressure(&self, p: &[f64]) -> Vec<f64> {
        let area: f64 = self.mean.iter().sum();
        let shift = crate::solver::sparse::dot(&self.mean, p) / area;
        p.iter().map(|v| v - shift).collect()
    }

    pub fn set_dt(&mut self, dt: f64) {
        self.dt = dt;
    }

    /// Nonlinear term `N_j = T(u; u, φ_j)` and optionally its Jacobian
    /// `∂N_j/∂u_k` with the upwind indicator frozen at `u`.
    pub fn advection(&self, u: &[f64], with_jacobian: bool) -> (Vec<f64>, Option<SparseMatrix>) {
        let vs = &self.spaces.velocity;
        let mesh = vs.mesh();
        let nd = vs.dofs_per_cell();
        let mut out = vec![0.0; vs.dim()];
        let mut tb = with_jacobian.then(|| {
            TripletBuilder::with_capacity(vs.dim(), vs.dim(), nd * nd * (mesh.num_cells() + 4 * mesh.num_facets()))
        });
        let mut local = vec![0.0; nd * nd];
        for cell in 0..mesh.num_cells() {
            let basis = &self.cell_bases[cell];
            let dofs = vs.cell_dofs(cell);
            let lu: Vec<f64> = dofs.iter().map(|&d| u[d]).collect();
            let det = vs.geometry(cell).det;
            local.iter_mut().for_each(|x| *x = 0.0);
            for (p, &w) in self.rule_w.iter().enumerate() {
                let wd = w * det;
                let (uv, _) = basis.combine(p, &lu);
                for j in 0..nd {
                    let gj = basis.grad(p, j);
                    let adv = directional(gj, uv);
                    out[dofs[j]] -= wd * dot(uv, adv);
                    if tb.is_some() {
                        for k in 0..nd {
                            let pk = basis.value(p, k);
                            let t1 = dot(uv, directional(gj, pk));
                            let t2 = dot(pk, adv);
                            local[j * nd + k] -= wd * (t1 + t2);
                        }
                    }
                }
            }
            if let Some(tb) = tb.as_mut() {
                for j in 0..nd {
                    for k in 0..nd {
                        tb.push(dofs[j], dofs[k], local[j * nd + k]);
                    }
                }
            }
        }

        let upwind = self.mode == FluxMode::Upwind;
        let nq = self.edge_w.len();
        let mut floc = vec![0.0; 4 * nd * nd];
        for (f, facet) in mesh.facets().iter().enumerate() {
            let (Some(minus), Some((bp, bm))) = (facet.minus, &self.facet_bases[f]) else { continue };
            let n = facet.normal;
            let sides = [
                (vs.cell_dofs(facet.plus.cell), bp, 1.0),
                (vs.cell_dofs(minus.cell), bm, -1.0),
            ];
            let lp: Vec<f64> = sides[0].0.iter().map(|&d| u[d]).collect();
            let lm: Vec<f64> = sides[1].0.iter().map(|&d| u[d]).collect();
            floc.iter_mut().for_each(|x| *x = 0.0);
            for q in 0..nq {
                let wl = self.edge_w[q] * facet.length;
                let up = bp.combine(q, &lp).0;
                let um = bm.combine(q, &lm).0;
                let ubar = [0.5 * (up[0] + um[0]), 0.5 * (up[1] + um[1])];
                let un = dot(ubar, n);
                let c = if upwind { upwind_indicator(un) } else { 0.0 };
                let ju = [up[0] - um[0], up[1] - um[1]];
                let nxju = cross(n, ju);
                let uside = [up, um];
                for (sj, (dj, bj, sigj)) in sides.iter().enumerate() {
                    for j in 0..nd {
                        let phij = bj.value(q, j);
                        let jump_j = [sigj * phij[0], sigj * phij[1]];
                        let jc_u = sigj * cross(uside[sj], phij);
                        out[dj[j]] += wl * (un * dot(ubar, jump_j) + c * nxju * jc_u);
                        if tb.is_none() {
                            continue;
                        }
                        for (sk, (_, bk, sigk)) in sides.iter().enumerate() {
                            for k in 0..nd {
                                let phik = bk.value(q, k);
                                let avg_k = [0.5 * phik[0], 0.5 * phik[1]];
                                // T(φ_k; u, φ_j)
                                let mut t1 = dot(avg_k, n) * dot(ubar, jump_j);
                                if sk == sj {
                                    t1 += c * nxju * sigj * cross(phik, phij);
                                }
                                // T(u; φ_k, φ_j)
                                let t2 = un * dot(avg_k, jump_j) + c * sigk * cross(n, phik) * jc_u;
                                floc[((sj * nd + j) * 2 + sk) * nd + k] += wl * (t1 + t2);
                            }
                        }
                    }
                }
            }
            if let Some(tb) = tb.as_mut() {
                for (sj, (dj, _, _)) in sides.iter().enumerate() {
                    for j in 0..nd {
                        for (sk, (dk, _, _)) in sides.iter().enumerate() {
                            for k in 0..nd {
                                tb.push(dj[j], dk[k], floc[((sj * nd + j) * 2 + sk) * nd + k]);
                            }
                        }
                    }
                }
            }
        }
        (out, tb.map(|t| t.build()))
    }

    /// Forcing load `(f(t), φ)`.
    pub fn forcing_load(&self, t: f64) -> Result<Vec<f64>> {
        let vs = &self.spaces.velocity;
        match &self.forcing {
            None => Ok(vec![0.0; vs.dim()]),
            Some(f) => load_vector(vs, vs.assembly_degree() + 3, |x| f(x, t)),
        }
    }

    /// Residual (and Jacobian) at the state `[x, p, λ]` for a step from
    /// `u_n` with the forcing evaluated at `t_mid`.
    pub fn residual(&self, u_n: &[f64], state: &[f64], forcing_load: &[f64], with_jacobian: bool) -> Result<AssembledResidual> {
        let (nu, np) = (self.spaces.nu(), self.spaces.np());
        if state.len() != nu + np + 1 {
            return Err(Error::DimensionMismatch {
                expected: nu + np + 1,
                got: state.len(),
            });
        }
        if u_n.len() != nu {
            return Err(Error::DimensionMismatch { expected: nu, got: u_n.len() });
        }
        let x = &state[..nu];
        let p = &state[nu..nu + np];
        let lambda = state[nu + np];
        let mid: Vec<f64> = x.iter().zip(u_n).map(|(a, b)| 0.5 * (a + b)).collect();
        let diff: Vec<f64> = x.iter().zip(u_n).map(|(a, b)| a - b).collect();
        let mdiff = self.mass.mul_vec(&diff);
        let (adv, jac_adv) = self.advection(&mid, with_jacobian);
        let btp = self.div_t.mul_vec(p);
        let mut r = vec![0.0; nu + np + 1];
        for j in 0..nu {
            r[j] = if self.is_boundary[j] {
                x[j]
            } else {
                mdiff[j] / self.dt + adv[j] - btp[j] - forcing_load[j]
            };
        }
        let bx = self.div.mul_vec(x);
        r[nu..nu + np].copy_from_slice(&bx);
        r[nu] += lambda;
        r[nu + np] = p[0];

        let jacobian = jac_adv.map(|ja| {
            let mut tb = TripletBuilder::with_capacity(nu + np + 1, nu + np + 1, ja.nnz() + self.mass.nnz() + 2 * self.div.nnz() + 2 * np);
            for j in 0..nu {
                if self.is_boundary[j] {
                    tb.push(j, j, 1.0);
                    continue;
                }
                for (k, v) in self.mass.row(j) {
                    tb.push(j, k, v / self.dt);
                }
                for (k, v) in ja.row(j) {
                    tb.push(j, k, 0.5 * v);
                }
                for (i, v) in self.div_t.row(j) {
                    tb.push(j, nu + i, -v);
                }
            }
            for i in 0..np {
                for (k, v) in self.div.row(i) {
                    tb.push(nu + i, k, v);
                }
            }
            tb.push(nu, nu + np, 1.0);
            tb.push(nu + np, nu, 1.0);
            tb.build()
        });
        Ok(AssembledResidual { residual: r, jacobian })
    }
}

/// One-shot residual assembly for a step from `u_n` to the guess `u_guess`
/// (pressure and multiplier taken as zero).
pub fn assemble_step_residual(
    u_n: &Field,
    u_guess: &Field,
    dt: f64,
    mode: FluxMode,
    forcing: Option<Arc<Forcing>>,
    t_mid: f64,
    with_jacobian: bool,
) -> Result<AssembledResidual> {
    let spaces = MixedSpaces::new(u_n.space().clone())?;
    let asm = StepAssembler::new(spaces, mode, dt, forcing)?;
    let mut state = u_guess.coeffs().to_vec();
    state.resize(asm.spaces().dim(), 0.0);
    let load = asm.forcing_load(t_mid)?;
    asm.residual(u_n.coeffs(), &state, &load, with_jacobian)
}
