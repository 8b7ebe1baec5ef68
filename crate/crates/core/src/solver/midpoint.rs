//! Implicit midpoint time stepping and the divergence-constrained projection.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::forms::{MixedSpaces, StepAssembler};
use crate::mesh::Point;
use crate::solver::newton::{newton_solve_cached, JacobianCache, NewtonReport, SolverConfig};
use crate::solver::sparse::{lu_solve, TripletBuilder};
use crate::spaces::{load_vector, mass_matrix, Field, FunctionSpace};

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub u: Field,
    /// Zero-mean pressure coefficients followed by the gauge multiplier.
    pub pressure: Vec<f64>,
    pub report: NewtonReport,
}

/// One implicit midpoint step from `(t_n, u_n)`, Newton started from `u_n`
/// and the given pressure guess. A factorization left in `cache` by the
/// previous step is reused when `cfg.reuse_jacobian` is set.
pub fn midpoint_step(
    asm: &StepAssembler,
    u_n: &Field,
    t_n: f64,
    pressure_guess: Option<&[f64]>,
    cfg: &SolverConfig,
    cache: &mut JacobianCache,
) -> Result<StepOutcome> {
    let spaces = asm.spaces();
    let (nu, np) = (spaces.nu(), spaces.np());
    if u_n.coeffs().len() != nu {
        return Err(Error::DimensionMismatch { expected: nu, got: u_n.coeffs().len() });
    }
    let mut x0 = u_n.coeffs().to_vec();
    match pressure_guess {
        Some(p) if p.len() == np + 1 => x0.extend_from_slice(p),
        _ => x0.resize(nu + np + 1, 0.0),
    }
    let load = asm.forcing_load(t_n + 0.5 * asm.dt())?;
    let (x, report) = newton_solve_cached(
        |state, jac| {
            let r = asm.residual(u_n.coeffs(), state, &load, jac)?;
            Ok((r.residual, r.jacobian))
        },
        x0,
        cfg,
        cache,
    )?;
    let u = Field::new(u_n.space().clone(), x[..nu].to_vec())?;
    let mut pressure = asm.zero_mean_pressure(&x[nu..nu + np]);
    pressure.push(x[nu + np]);
    Ok(StepOutcome {
        u,
        pressure,
        report,
    })
}

/// Runs `T/Δt` steps, calling `observer(step, t, u, report)` after each step
/// (and once for the initial state with an empty report). Returns the final
/// state.
pub fn midpoint_run<O>(asm: &StepAssembler, u0: &Field, cfg: &SolverConfig, mut observer: O) -> Result<Field>
where
    O: FnMut(usize, f64, &Field, &NewtonReport) -> Result<()>,
{
    let steps = cfg.num_steps()?;
    if (asm.dt() - cfg.dt).abs() > 1e-15 * cfg.dt {
        return Err(Error::Config(format!(
            "assembler time step {} differs from configuration {}",
            asm.dt(),
            cfg.dt
        )));
    }
    observer(0, 0.0, u0, &NewtonReport::default())?;
    let mut u = u0.clone();
    let mut p: Option<Vec<f64>> = None;
    let mut cache = JacobianCache::new();
    for step in 1..=steps {
        let t_n = (step - 1) as f64 * cfg.dt;
        let out = midpoint_step(asm, &u, t_n, p.as_deref(), cfg, &mut cache).map_err(|e| Error::StepFailed {
            step,
            source: Box::new(e),
        })?;
        u = out.u;
        p = Some(out.pressure);
        observer(step, step as f64 * cfg.dt, &u, &out.report)?;
    }
    Ok(u)
}

/// Trajectory `u(t_0), …, u(t_M)`.
pub fn midpoint_advance(asm: &StepAssembler, u0: &Field, cfg: &SolverConfig) -> Result<Vec<Field>> {
    let mut traj = Vec::new();
    midpoint_run(asm, u0, cfg, |_, _, u, _| {
        traj.push(u.clone());
        Ok(())
    })?;
    Ok(traj)
}

/// L² projection onto the discretely divergence-free, boundary-tangent
/// subspace: minimise `‖u − f‖` subject to `(div u, q) = 0` for all `q`.
/// Returns the velocity and the Lagrange multiplier (pressure-like) field.
pub fn constrained_projection(spaces: &MixedSpaces, f: impl Fn(Point) -> [f64; 2]) -> Result<(Field, Field)> {
    let vs = &spaces.velocity;
    let b = load_vector(vs, vs.assembly_degree() + 3, f)?;
    constrained_solve(spaces, &b)
}

/// Same as [`constrained_projection`] for a field already in the velocity
/// space.
pub fn constrained_projection_of(spaces: &MixedSpaces, u: &Field) -> Result<(Field, Field)> {
    let m = mass_matrix(&spaces.velocity)?;
    constrained_solve(spaces, &m.mul_vec(u.coeffs()))
}

fn constrained_solve(spaces: &MixedSpaces, load: &[f64]) -> Result<(Field, Field)> {
    let vs: &Arc<FunctionSpace> = &spaces.velocity;
    let (nu, np) = (spaces.nu(), spaces.np());
    let n = nu + np + 1;
    let m = mass_matrix(vs)?;
    let div = crate::forms::divergence_matrix(spaces)?;
    let mean = crate::forms::mean_vector(&spaces.pressure)?;
    let mut boundary = vec![false; nu];
    for &d in vs.boundary_dofs() {
        boundary[d] = true;
    }
    let mut tb = TripletBuilder::with_capacity(n, n, m.nnz() + 2 * div.nnz() + 2 * np);
    let mut rhs = vec![0.0; n];
    for j in 0..nu {
        if boundary[j] {
            tb.push(j, j, 1.0);
            continue;
        }
        rhs[j] = load[j];
        for (k, v) in m.row(j) {
            tb.push(j, k, v);
        }
    }
    for i in 0..np {
        for (k, v) in div.row(i) {
            tb.push(nu + i, k, v);
            if !boundary[k] {
                tb.push(k, nu + i, -v);
            }
        }
    }
    tb.push(nu, nu + np, 1.0);
    tb.push(nu + np, nu, 1.0);
    let x = lu_solve(&tb.build(), &rhs)?;
    let u = Field::new(vs.clone(), x[..nu].to_vec())?;
    let area: f64 = mean.iter().sum();
    let shift = crate::solver::sparse::dot(&mean, &x[nu..nu + np]) / area;
    let p = Field::new(spaces.pressure.clone(), x[nu..nu + np].iter().map(|v| v - shift).collect())?;
    Ok((u, p))
}
