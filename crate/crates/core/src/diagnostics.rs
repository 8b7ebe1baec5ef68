//! Energy, enstrophy, vorticity and error functionals.

use crate::elements::{Family, REFERENCE_VERTICES};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::quadrature::{triangle_rule, MAX_DEGREE};
use crate::spaces::{build_space, interpolate_cellwise, Field};

/// `K = ∫_Ω |u|²` (no factor ½).
pub fn kinetic_energy(u: &Field) -> Result<f64> {
    let space = u.space();
    let rule = triangle_rule(2 * space.element().poly_degree())?;
    let tab = space.element().tabulate(&rule.points);
    let mut k = 0.0;
    for cell in 0..space.mesh().num_cells() {
        let det = space.geometry(cell).det;
        for (p, (v, _)) in u.eval_cell(cell, &tab).into_iter().enumerate() {
            k += rule.weights[p] * det * (v[0] * v[0] + v[1] * v[1]);
        }
    }
    Ok(k)
}

#[inline]
fn rot(g: [[f64; 2]; 2]) -> f64 {
    g[1][0] - g[0][1]
}

/// `Z = Σ_K ∫_K (rot u)²` with the elementwise strong curl.
pub fn enstrophy(u: &Field) -> Result<f64> {
    let space = u.space();
    let rule = triangle_rule(2 * space.element().poly_degree())?;
    let tab = space.element().tabulate(&rule.points);
    let mut z = 0.0;
    for cell in 0..space.mesh().num_cells() {
        let det = space.geometry(cell).det;
        for (p, (_, g)) in u.eval_cell(cell, &tab).into_iter().enumerate() {
            let w = rot(g);
            z += rule.weights[p] * det * w * w;
        }
    }
    Ok(z)
}

#[derive(Debug, Clone)]
pub struct Vorticity {
    /// Elementwise projection of `rot u` into DG of the velocity order.
    pub field: Field,
    /// Largest `|rot u|` over quadrature points and cell vertices.
    pub max_abs: f64,
}

pub fn vorticity_field(u: &Field) -> Result<Vorticity> {
    let vs = u.space();
    if !vs.is_vector() {
        return Err(Error::SpaceMismatch("vorticity needs an RT or BDM field".into()));
    }
    let dg = build_space(vs.mesh(), Family::DG, vs.order())?;
    // rot u is piecewise P_s for both families, so nodal interpolation is the
    // elementwise L² projection.
    let field = interpolate_cellwise(&dg, |cell, pts| {
        let tab = vs.element().tabulate(pts);
        u.eval_cell(cell, &tab).into_iter().map(|(_, g)| [rot(g), 0.0]).collect()
    });
    let rule = triangle_rule(2 * vs.element().poly_degree())?;
    let mut pts = rule.points.clone();
    pts.extend_from_slice(&REFERENCE_VERTICES);
    let tab = vs.element().tabulate(&pts);
    let mut max_abs: f64 = 0.0;
    for cell in 0..vs.mesh().num_cells() {
        for (_, g) in u.eval_cell(cell, &tab) {
            max_abs = max_abs.max(rot(g).abs());
        }
    }
    Ok(Vorticity { field, max_abs })
}

/// `‖u − f(·, t)‖_{L²}` with quadrature three degrees above the assembly
/// degree (capped at the highest available rule).
pub fn l2_error_against(u: &Field, f: impl Fn(Point, f64) -> [f64; 2], t: f64) -> Result<f64> {
    let space = u.space();
    let rule = triangle_rule((space.assembly_degree() + 3).min(MAX_DEGREE))?;
    let tab = space.element().tabulate(&rule.points);
    let mut e = 0.0;
    for cell in 0..space.mesh().num_cells() {
        let g = space.geometry(cell);
        for (p, (v, _)) in u.eval_cell(cell, &tab).into_iter().enumerate() {
            let x = g.map(rule.points[p]);
            let ex = f(x, t);
            let d = [v[0] - ex[0], v[1] - ex[1]];
            e += rule.weights[p] * g.det * (d[0] * d[0] + d[1] * d[1]);
        }
    }
    Ok(e.sqrt())
}

/// `log(e_i / e_{i+1}) / log(h_i / h_{i+1})` for consecutive pairs.
pub fn convergence_orders(errors: &[f64], hs: &[f64]) -> Result<Vec<f64>> {
    if errors.len() != hs.len() {
        return Err(Error::DimensionMismatch {
            expected: hs.len(),
            got: errors.len(),
        });
    }
    Ok(errors
        .windows(2)
        .zip(hs.windows(2))
        .map(|(e, h)| (e[0] / e[1]).ln() / (h[0] / h[1]).ln())
        .collect())
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TimeSeries {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub enstrophy: Vec<f64>,
    pub div_norm: Vec<f64>,
    pub newton_iters: Vec<usize>,
}

impl TimeSeries {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn push(&mut self, t: f64, energy: f64, enstrophy: f64, div_norm: f64, newton_iters: usize) -> Result<()> {
        if let Some(&last) = self.times.last() {
            if t <= last {
                return Err(Error::Config(format!("time series must increase: {t} after {last}")));
            }
        }
        self.times.push(t);
        self.energy.push(energy);
        self.enstrophy.push(enstrophy);
        self.div_norm.push(div_norm);
        self.newton_iters.push(newton_iters);
        Ok(())
    }

    /// Records the standard channels of a velocity field.
    pub fn record(&mut self, t: f64, u: &Field, newton_iters: usize) -> Result<()> {
        let (k, z, d) = (kinetic_energy(u)?, enstrophy(u)?, u.div_norm()?);
        self.push(t, k, z, d, newton_iters)
    }

    /// `max_n |K(tⁿ) − K(t⁰)| / K(t⁰)`.
    pub fn max_relative_energy_drift(&self) -> f64 {
        match self.energy.first() {
            Some(&k0) if k0 != 0.0 => self.energy.iter().map(|k| (k - k0).abs() / k0.abs()).fold(0.0, f64::max),
            _ => 0.0,
        }
    }
}
