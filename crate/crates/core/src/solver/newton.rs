//! Newton iteration with direct sparse solves and optional Jacobian reuse.

use crate::error::{Error, Result};
use crate::solver::sparse::{norm2, LuCache, LuFactorization, SparseMatrix};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Absolute tolerance on the residual 2-norm.
    pub newton_abs_tol: f64,
    pub newton_max_iters: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Keep a factorized Jacobian across updates and time steps while it
    /// still contracts the residual.
    pub reuse_jacobian: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            newton_abs_tol: 1e-11,
            newton_max_iters: 30,
            dt: 1e-2,
            t_end: 1.0,
            reuse_jacobian: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.newton_abs_tol > 0.0) {
            return Err(Error::Config(format!("newton tolerance must be positive, got {}", self.newton_abs_tol)));
        }
        if self.newton_max_iters == 0 {
            return Err(Error::Config("newton_max_iters must be at least 1".into()));
        }
        if !(self.dt > 0.0) || !(self.t_end > 0.0) {
            return Err(Error::Config(format!("need dt > 0 and T > 0, got dt={} T={}", self.dt, self.t_end)));
        }
        Ok(())
    }

    /// Number of steps `T/Δt`, rejecting step sizes that do not divide `T`.
    pub fn num_steps(&self) -> Result<usize> {
        self.validate()?;
        let m = self.t_end / self.dt;
        let r = m.round();
        if (m - r).abs() > 1e-9 * m.max(1.0) || r < 1.0 {
            return Err(Error::Config(format!(
                "time step {} does not divide final time {}",
                self.dt, self.t_end
            )));
        }
        Ok(r as usize)
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NewtonReport {
    /// Number of Newton updates applied.
    pub iterations: usize,
    /// Number of Jacobian factorizations computed.
    pub factorizations: usize,
    /// Residual norm before each update and at the final iterate.
    pub history: Vec<f64>,
}

impl NewtonReport {
    pub fn final_residual(&self) -> f64 {
        self.history.last().copied().unwrap_or(0.0)
    }
}

/// Residual reduction per update below which a stored Jacobian keeps being
/// reused.
pub const REUSE_CONTRACTION: f64 = 0.3;

/// A factorized Jacobian carried across Newton solves. With reuse enabled
/// the factorization is refreshed only when an update contracts the
/// residual by less than [`REUSE_CONTRACTION`].
#[derive(Debug, Default)]
pub struct JacobianCache {
    lu: Option<LuFactorization>,
    symbolic: LuCache,
}

impl JacobianCache {
    pub fn new() -> Self {
        JacobianCache::default()
    }

    pub fn clear(&mut self) {
        self.lu = None;
    }

    pub fn is_empty(&self) -> bool {
        self.lu.is_none()
    }
}

/// Solves `F(x) = 0` with a fresh Jacobian at every update. The callback
/// returns the residual and, when asked, the Jacobian at `x`.
pub fn newton_solve<F>(f: F, x0: Vec<f64>, cfg: &SolverConfig) -> Result<(Vec<f64>, NewtonReport)>
where
    F: FnMut(&[f64], bool) -> Result<(Vec<f64>, Option<SparseMatrix>)>,
{
    let cfg = SolverConfig { reuse_jacobian: false, ..*cfg };
    newton_solve_cached(f, x0, &cfg, &mut JacobianCache::new())
}

/// Newton iteration that takes its starting factorization from `cache` and
/// leaves the last one there when `cfg.reuse_jacobian` is set.
pub fn newton_solve_cached<F>(
    mut f: F,
    x0: Vec<f64>,
    cfg: &SolverConfig,
    cache: &mut JacobianCache,
) -> Result<(Vec<f64>, NewtonReport)>
where
    F: FnMut(&[f64], bool) -> Result<(Vec<f64>, Option<SparseMatrix>)>,
{
    let n = x0.len();
    if !cfg.reuse_jacobian || cache.lu.as_ref().is_some_and(|lu| lu.dim() != n) {
        cache.clear();
    }
    let mut x = x0;
    let mut report = NewtonReport::default();
    let mut fresh = false;
    let (mut r, _) = f(&x, false)?;
    let mut rn = norm2(&r);
    report.history.push(rn);
    loop {
        if !rn.is_finite() {
            return Err(Error::NewtonDiverged {
                iterations: report.iterations,
                history: report.history,
            });
        }
        if rn <= cfg.newton_abs_tol {
            return Ok((x, report));
        }
        if report.iterations >= cfg.newton_max_iters {
            return Err(Error::NewtonDiverged {
                iterations: report.iterations,
                history: report.history,
            });
        }
        if cache.lu.is_none() {
            let (_, jac) = f(&x, true)?;
            let jac = jac.ok_or_else(|| Error::Config("residual callback returned no jacobian".into()))?;
            cache.lu = Some(cache.symbolic.factorize(&jac)?);
            report.factorizations += 1;
            fresh = true;
        }
        let dx = cache.lu.as_ref().unwrap().solve(&r)?;
        let trial: Vec<f64> = x.iter().zip(&dx).map(|(xi, di)| xi - di).collect();
        let (r_trial, _) = f(&trial, false)?;
        let rn_trial = norm2(&r_trial);
        if !fresh && !(rn_trial < rn) {
            // stale Jacobian made no progress: refactorize at x and retry
            cache.clear();
            continue;
        }
        report.iterations += 1;
        if !cfg.reuse_jacobian || rn_trial > REUSE_CONTRACTION * rn {
            cache.clear();
        }
        fresh = false;
        x = trial;
        r = r_trial;
        rn = rn_trial;
        report.history.push(rn);
    }
}
