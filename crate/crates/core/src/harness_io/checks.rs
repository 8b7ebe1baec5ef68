use std::fmt;
use std::sync::Arc;

use rand::Rng;

use crate::algebra::{
    build_discrete_current, ep_identity_residual, hat, kelvin_residual, operator_scalar_order, AdvectionOperator,
    LoopSpec, OperatorFlux, ScalarSpace, StreamSampler,
};
use crate::elements::Family;
use crate::error::Result;
use crate::forms::{momentum_trilinear, FluxMode, MixedSpaces, StepAssembler, TrilinearForm};
use crate::harness_io::config::{Experiment, SimulationConfig};
use crate::harness_io::experiments::shear_layer_velocity;
use crate::mesh::Mesh;
use crate::solver::sparse::{dot, SparseMatrix};
use crate::solver::{constrained_projection, midpoint_run, SolverConfig};
use crate::spaces::{build_space, mass_matrix, Field, FunctionSpace};

/// Worst value of one invariant over all trials; passes when
/// `worst ≤ tolerance`.
#[derive(Debug, Clone, PartialEq)]
pub struct CheckOutcome {
    pub name: String,
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckOutcome {
    fn new(name: String, worst: f64, tolerance: f64) -> Self {
        CheckOutcome {
            passed: worst <= tolerance,
            name,
            worst,
            tolerance,
        }
    }
}

impl fmt::Display for CheckOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "[{}] {}: worst {:.3e} (tolerance {:.1e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.worst,
            self.tolerance
        )
    }
}

#[derive(Debug, Clone, Default)]
pub struct OperatorReport {
    pub outcomes: Vec<CheckOutcome>,
}

impl OperatorReport {
    pub fn all_passed(&self) -> bool {
        self.outcomes.iter().all(|o| o.passed)
    }
}

impl fmt::Display for OperatorReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for o in &self.outcomes {
            writeln!(f, "{o}")?;
        }
        Ok(())
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

fn l2(m: &SparseMatrix, u: &Field) -> f64 {
    dot(u.coeffs(), &m.mul_vec(u.coeffs())).max(0.0).sqrt()
}

#[derive(Default)]
struct Worst(Vec<(String, f64, f64)>);

impl Worst {
    fn update(&mut self, name: &str, value: f64, tol: f64) {
        match self.0.iter_mut().find(|(n, _, _)| n == name) {
            Some(entry) => entry.1 = entry.1.max(value),
            None => self.0.push((name.to_string(), value, tol)),
        }
    }
}

/// Seeded invariant suite on one velocity space. Sampled fields are checked
/// for normal continuity and divergence; operator checks cover antisymmetry
/// and constant annihilation of centred operators, upwind dissipativity,
/// the hat identity, the Euler-Poincaré identity, agreement of the two
/// trilinear forms and `T(u; u, u) = 0`.
pub fn operator_suite(space: &Arc<FunctionSpace>, trials: usize, seed: u64) -> Result<Vec<CheckOutcome>> {
    let mesh = space.mesh();
    let scalars = ScalarSpace::build(mesh, operator_scalar_order(space))?;
    let mass = mass_matrix(space)?;
    let mut sampler = StreamSampler::new(space, seed)?;
    let ones = scalars.constant(1.0);
    let mut w = Worst::default();
    for _ in 0..trials {
        let u = sampler.sample()?;
        let v = sampler.sample()?;
        let a: Vec<f64> = (0..scalars.dim()).map(|_| sampler.rng().random_range(-1.0..1.0)).collect();
        let umax = max_abs(u.coeffs()).max(f64::MIN_POSITIVE);
        w.update("normal continuity", u.max_normal_jump()? / umax, 1e-12);
        let div = u.div_norm()?.max(v.div_norm()?) / umax;
        w.update("discrete divergence", div, 1e-10);
        if div > 1e-10 {
            continue;
        }

        let centred = AdvectionOperator::centred(&u, &scalars)?;
        let am = centred.matrix();
        let scale = am.max_abs().max(f64::MIN_POSITIVE);
        w.update("centred antisymmetry", am.add_scaled(1.0, &am.transpose()).max_abs() / scale, 1e-11);
        w.update("constants annihilated", max_abs(&am.mul_vec(&ones)) / scale, 1e-12);

        let upwind = AdvectionOperator::new(&u, &scalars, OperatorFlux::Upwind)?;
        w.update("upwind dissipativity", (-upwind.pair(&a, &a)).max(0.0), 1e-12);

        let h = hat(&centred)?;
        let comps = scalars.components(&u);
        let hat_err = (0..2)
            .flat_map(|i| h[i].iter().zip(&comps[i]).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max);
        let beta_max = comps.iter().map(|c| max_abs(c)).fold(f64::MIN_POSITIVE, f64::max);
        w.update("hat identity", hat_err / beta_max, 1e-11);

        let (nu, nv) = (l2(&mass, &u), l2(&mass, &v));
        let cube = (nu * nu * nv).max(f64::MIN_POSITIVE);
        for mode in [FluxMode::Centred, FluxMode::Upwind] {
            let ep = ep_identity_residual(&u, &v, &scalars, mode)?.relative;
            w.update(&format!("euler-poincare identity ({mode})"), ep, 1e-9);
            let g = momentum_trilinear(TrilinearForm::Flux, &u, &u, &v, mode)?;
            let r = momentum_trilinear(TrilinearForm::Rotational, &u, &u, &v, mode)?;
            w.update(&format!("trilinear forms agree ({mode})"), (g - r).abs() / cube, 1e-10);
            let t = momentum_trilinear(TrilinearForm::Flux, &u, &u, &u, mode)?;
            w.update(&format!("T(u;u,u) = 0 ({mode})"), t.abs() / (nu * nu * nu).max(f64::MIN_POSITIVE), 1e-11);
        }
    }
    let tag = format!(
        "{}{} N={}{}",
        space.family(),
        space.order(),
        mesh.resolution(),
        if mesh.is_periodic() { " torus" } else { " walled" }
    );
    Ok(w.0.into_iter().map(|(n, v, t)| CheckOutcome::new(format!("{tag}: {n}"), v, t)).collect())
}

/// Largest Kelvin residual over all steps of a shear-layer run for each of
/// the given currents on the periodic `n × n` mesh.
pub fn kelvin_check(
    n: usize,
    family: Family,
    order: usize,
    mode: FluxMode,
    solver: &SolverConfig,
    rho: f64,
    delta: f64,
    loops: &[LoopSpec],
) -> Result<Vec<f64>> {
    let mesh = Arc::new(Mesh::structured(n, true)?);
    let vs = build_space(&mesh, family, order)?;
    let scalars = ScalarSpace::build(&mesh, operator_scalar_order(&vs))?;
    let currents: Vec<Field> = loops
        .iter()
        .map(|l| build_discrete_current(&mesh, l)?.embed(&vs))
        .collect::<Result<_>>()?;
    let spaces = MixedSpaces::new(vs)?;
    let (u0, _) = constrained_projection(&spaces, |x| shear_layer_velocity(x, rho, delta))?;
    let asm = StepAssembler::new(spaces, mode, solver.dt, None)?;
    let mut worst = vec![0.0f64; currents.len()];
    let mut prev = u0.clone();
    midpoint_run(&asm, &u0, solver, |k, _, u, _| {
        if k > 0 {
            for (c, wst) in currents.iter().zip(worst.iter_mut()) {
                *wst = wst.max(kelvin_residual(&prev, u, solver.dt, c, &scalars, mode)?);
            }
        }
        prev = u.clone();
        Ok(())
    })?;
    Ok(worst)
}

/// Three loops winding around the torus: two rows and one column.
pub fn torus_loops(n: usize) -> Vec<LoopSpec> {
    vec![LoopSpec::Row(0), LoopSpec::Row(n / 2), LoopSpec::Column(n / 3)]
}

/// Invariant suite on periodic and walled meshes of every configured
/// resolution, then the Kelvin residual on the largest torus in both flux
/// modes.
pub fn run_operator_check(cfg: &SimulationConfig) -> Result<OperatorReport> {
    cfg.validate()?;
    if cfg.experiment != Experiment::OperatorCheck {
        return Err(crate::error::Error::Config(format!(
            "configuration is for {}, not operator_check",
            cfg.experiment
        )));
    }
    let mut outcomes = Vec::new();
    for &n in &cfg.resolutions {
        for periodic in [true, false] {
            let mesh = Arc::new(Mesh::structured(n, periodic)?);
            let space = build_space(&mesh, cfg.family, cfg.order)?;
            outcomes.extend(operator_suite(&space, cfg.trials, cfg.seed)?);
        }
    }
    let n = *cfg.resolutions.iter().max().unwrap();
    let solver = cfg.solver();
    for mode in [FluxMode::Centred, FluxMode::Upwind] {
        let worst = kelvin_check(n, cfg.family, cfg.order, mode, &solver, cfg.rho, cfg.delta, &torus_loops(n))?;
        for (k, w) in worst.into_iter().enumerate() {
            outcomes.push(CheckOutcome::new(
                format!("{}{} N={n} torus: kelvin residual ({mode}, current {k})", cfg.family, cfg.order),
                w,
                1e-8,
            ));
        }
    }
    Ok(OperatorReport { outcomes })
}
