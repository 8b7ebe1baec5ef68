//! C ABI over the `eulerfem` solver.
//!
//! Every fallible call returns an [`EulerfemStatus`]; the message of the most
//! recent failure on the calling thread is available through
//! [`eulerfem_last_error`]. Objects are opaque handles released with their
//! matching `*_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use eulerfem::diagnostics::{enstrophy, kinetic_energy};
use eulerfem::elements::Family;
use eulerfem::forms::{FluxMode, Forcing, MixedSpaces, StepAssembler};
use eulerfem::harness_io::{
    run_operator_check, shear_layer_velocity, taylor_green_velocity, CheckOutcome, ConfigFile, Experiment,
    SimulationConfig,
};
use eulerfem::mesh::Mesh;
use eulerfem::solver::{constrained_projection, midpoint_step, JacobianCache, SolverConfig};
use eulerfem::spaces::{build_space, Field};
use eulerfem::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EulerfemStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Config = 3,
    Solver = 4,
    Io = 5,
    BufferTooSmall = 6,
    Panic = 7,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EulerfemFamily {
    Rt = 0,
    Bdm = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EulerfemMode {
    Centred = 0,
    Upwind = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EulerfemExperiment {
    TaylorGreen = 0,
    ShearLayer = 1,
}

/// Settings for a time-stepping simulation.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerfemParams {
    pub experiment: EulerfemExperiment,
    pub family: EulerfemFamily,
    pub order: u32,
    pub mode: EulerfemMode,
    /// Squares per side of the structured mesh.
    pub n: u32,
    pub dt: f64,
    /// Taylor-Green decay time scale; infinity disables the forcing.
    pub sigma: f64,
    pub rho: f64,
    pub delta: f64,
}

/// Opaque time-stepping state.
pub struct EulerfemSimulation {
    asm: StepAssembler,
    u: Field,
    pressure: Option<Vec<f64>>,
    cache: JacobianCache,
    solver: SolverConfig,
    steps: u64,
}

/// Opaque result of an operator invariant check.
pub struct EulerfemReport {
    names: Vec<CString>,
    outcomes: Vec<CheckOutcome>,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: impl Into<String>) {
    let text = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(text).unwrap_or_default());
}

fn status_of(e: &Error) -> EulerfemStatus {
    match e {
        Error::Config(_) => EulerfemStatus::Config,
        Error::Io(_) => EulerfemStatus::Io,
        Error::NewtonDiverged { .. } | Error::StepFailed { .. } | Error::SingularMatrix { .. } => EulerfemStatus::Solver,
        _ => EulerfemStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), (EulerfemStatus, String)>) -> EulerfemStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => EulerfemStatus::Ok,
        Ok(Err((status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            EulerfemStatus::Panic
        }
    }
}

fn fail(e: Error) -> (EulerfemStatus, String) {
    (status_of(&e), e.to_string())
}

fn null(what: &str) -> (EulerfemStatus, String) {
    (EulerfemStatus::NullPointer, format!("{what} is null"))
}

unsafe fn out_ref<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, (EulerfemStatus, String)> {
    p.as_mut().ok_or_else(|| null(what))
}

unsafe fn sim_ref<'a>(p: *const EulerfemSimulation) -> Result<&'a EulerfemSimulation, (EulerfemStatus, String)> {
    p.as_ref().ok_or_else(|| null("simulation"))
}

impl From<EulerfemFamily> for Family {
    fn from(f: EulerfemFamily) -> Self {
        match f {
            EulerfemFamily::Rt => Family::RT,
            EulerfemFamily::Bdm => Family::BDM,
        }
    }
}

impl From<EulerfemMode> for FluxMode {
    fn from(m: EulerfemMode) -> Self {
        match m {
            EulerfemMode::Centred => FluxMode::Centred,
            EulerfemMode::Upwind => FluxMode::Upwind,
        }
    }
}

/// Default settings of an experiment (shear layer: BDM1 upwind, N=48,
/// dt=0.04; Taylor-Green: RT1 upwind, N=12, dt=0.01, sigma=100).
#[no_mangle]
pub extern "C" fn eulerfem_params_default(experiment: EulerfemExperiment) -> EulerfemParams {
    let (exp, family) = match experiment {
        EulerfemExperiment::TaylorGreen => (Experiment::TaylorGreen, EulerfemFamily::Rt),
        EulerfemExperiment::ShearLayer => (Experiment::ShearLayer, EulerfemFamily::Bdm),
    };
    let d = SimulationConfig::defaults(exp);
    EulerfemParams {
        experiment,
        family,
        order: d.order as u32,
        mode: match d.mode {
            FluxMode::Centred => EulerfemMode::Centred,
            FluxMode::Upwind => EulerfemMode::Upwind,
        },
        n: d.resolutions[0] as u32,
        dt: d.dt,
        sigma: d.sigma,
        rho: d.rho,
        delta: d.delta,
    }
}

fn build_simulation(p: &EulerfemParams) -> Result<EulerfemSimulation, Error> {
    let experiment = match p.experiment {
        EulerfemExperiment::TaylorGreen => Experiment::TaylorGreen,
        EulerfemExperiment::ShearLayer => Experiment::ShearLayer,
    };
    let cfg = SimulationConfig {
        family: p.family.into(),
        order: p.order as usize,
        mode: p.mode.into(),
        resolutions: vec![p.n as usize],
        dt: p.dt,
        t_end: p.dt,
        sigma: p.sigma,
        rho: p.rho,
        delta: p.delta,
        ..SimulationConfig::defaults(experiment)
    };
    cfg.validate()?;
    let periodic = experiment == Experiment::ShearLayer;
    let mesh = Arc::new(Mesh::structured(cfg.resolutions[0], periodic)?);
    let spaces = MixedSpaces::new(build_space(&mesh, cfg.family, cfg.order)?)?;
    let (sigma, rho, delta) = (cfg.sigma, cfg.rho, cfg.delta);
    let (u, forcing) = match experiment {
        Experiment::ShearLayer => (constrained_projection(&spaces, |x| shear_layer_velocity(x, rho, delta))?.0, None),
        _ => {
            let forcing: Option<Arc<Forcing>> = sigma.is_finite().then(|| {
                let f: Arc<Forcing> = Arc::new(move |x, t| {
                    let u = taylor_green_velocity(x, t, sigma);
                    [-2.0 / sigma * u[0], -2.0 / sigma * u[1]]
                });
                f
            });
            (constrained_projection(&spaces, |x| taylor_green_velocity(x, 0.0, sigma))?.0, forcing)
        }
    };
    let asm = StepAssembler::new(spaces, cfg.mode, cfg.dt, forcing)?;
    Ok(EulerfemSimulation {
        asm,
        u,
        pressure: None,
        cache: JacobianCache::new(),
        solver: cfg.solver(),
        steps: 0,
    })
}

/// Creates a simulation at t = 0 with the projected initial velocity.
///
/// # Safety
/// `params` must point to an `EulerfemParams` whose enum fields hold
/// declared values, and `out` to writable
/// storage for one handle pointer.
#[no_mangle]
pub unsafe extern "C" fn eulerfem_simulation_new(
    params: *const EulerfemParams,
    out: *mut *mut EulerfemSimulation,
) -> EulerfemStatus {
    guard(|| {
        let p = params.as_ref().ok_or_else(|| null("params"))?;
        let out = out_ref(out, "out")?;
        let sim = build_simulation(p).map_err(fail)?;
        *out = Box::into_raw(Box::new(sim));
        Ok(())
    })
}

/// Releases a simulation; null is ignored.
///
/// # Safety
/// `sim` must be null or a handle from [`eulerfem_simulation_new`] that has
/// not been freed.
#[no_mangle]
pub unsafe extern "C" fn eulerfem_simulation_free(sim: *mut EulerfemSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}

/// Advances by `steps` implicit midpoint steps. On failure the state is
/// left at the last completed step.
///
/// # Safety
/// `sim` must be a live handle not used concurrently from another thread.
#[no_mangle]
pub unsafe extern "C" fn eulerfem_simulation_step(sim: *mut EulerfemSimulation, steps: u32) -> EulerfemStatus {
    guard(|| {
        let s = out_ref(sim, "simulation")?;
        for _ in 0..steps {
            let t = s.steps as f64 * s.asm.dt();
            let out = midpoint_step(&s.asm, &s.u, t, s.pressure.as_deref(), &s.solver, &mut s.cache).map_err(fail)?;
            s.u = out.u;
            s.pressure = Some(out.pressure);
            s.steps += 1;
        }
        Ok(())
    })
}

/// Current time `steps · dt`.
///
/// # Safety
/// `sim` must be a live handle and `t` writable.
#[no_mangle]
pub unsafe extern "C" fn eulerfem_simulation_time(sim: *const EulerfemSimulation, t: *mut f64) -> EulerfemStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        *out_ref(t, "t")? = s.steps as f64 * s.asm.dt();
        Ok(())
    })
}

/// Kinetic energy `∫|u|²`, enstrophy `Σ_K ∫(rot u)²` and the elementwise
/// divergence norm of the current velocity. Any output pointer may be null.
///
/// # Safety
/// `sim` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn eulerfem_simulation_diagnostics(
    sim: *const EulerfemSimulation,
    energy: *mut f64,
    enstrophy_out: *mut f64,
    div_norm: *mut f64,
) -> EulerfemStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        if let Some(e) = energy.as_mut() {
            *e = kinetic_energy(&s.u).map_err(fail)?;
        }
        if let Some(z) = enstrophy_out.as_mut() {
            *z = enstrophy(&s.u).map_err(fail)?;
        }
        if let Some(d) = div_norm.as_mut() {
            *d = s.u.div_norm().map_err(fail)?;
        }
        Ok(())
    })
}

/// Copies the velocity coefficients into `buf`. `len` is written with the
/// number of coefficients; when `buf` is null or `capacity` is too small
/// nothing is copied (status `BufferTooSmall` for a short non-null buffer).
///
/// # Safety
/// `sim` must be a live handle, `len` writable, and `buf` null or valid for
/// `capacity` writes.
#[no_mangle]
pub unsafe extern "C" fn eulerfem_simulation_velocity(
    sim: *const EulerfemSimulation,
    buf: *mut f64,
    capacity: usize,
    len: *mut usize,
) -> EulerfemStatus {
    guard(|| {
        let s = sim_ref(sim)?;
        let coeffs = s.u.coeffs();
        *out_ref(len, "len")? = coeffs.len();
        if buf.is_null() {
            return Ok(());
        }
        if capacity < coeffs.len() {
            return Err((
                EulerfemStatus::BufferTooSmall,
                format!("buffer holds {capacity} values, need {}", coeffs.len()),
            ));
        }
        std::slice::from_raw_parts_mut(buf, coeffs.len()).copy_from_slice(coeffs);
        Ok(())
    })
}

/// Runs the operator invariant suite and Kelvin check described by a flat
/// TOML configuration (`experiment = "operator_check"` keys; empty text
/// selects the defaults).
///
/// # Safety
/// `config` must be a NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn eulerfem_operator_check(config: *const c_char, out: *mut *mut EulerfemReport) -> EulerfemStatus {
    guard(|| {
        if config.is_null() {
            return Err(null("config"));
        }
        let out = out_ref(out, "out")?;
        let text = CStr::from_ptr(config)
            .to_str()
            .map_err(|_| (EulerfemStatus::InvalidArgument, "config is not UTF-8".to_string()))?;
        let file = ConfigFile::parse(text).map_err(fail)?;
        let cfg = SimulationConfig::from_file(&file, Experiment::OperatorCheck).map_err(fail)?;
        let report = run_operator_check(&cfg).map_err(fail)?;
        let names = report
            .outcomes
            .iter()
            .map(|o| CString::new(o.name.replace('\0', " ")).unwrap_or_default())
            .collect();
        *out = Box::into_raw(Box::new(EulerfemReport {
            names,
            outcomes: report.outcomes,
        }));
        Ok(())
    })
}

/// Number of checks in a report (0 for null).
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eulerfem_report_len(report: *const EulerfemReport) -> usize {
    report.as_ref().map_or(0, |r| r.outcomes.len())
}

/// Whether every check passed (false for null).
///
/// # Safety
/// `report` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn eulerfem_report_all_passed(report: *const EulerfemReport) -> bool {
    report.as_ref().is_some_and(|r| r.outcomes.iter().all(|o| o.passed))
}

/// Name, worst value, tolerance and verdict of check `index`. The name
/// stays valid until the report is freed. Outputs may be null.
///
/// # Safety
/// `report` must be a live handle; non-null outputs must be writable.
#[no_mangle]
pub unsafe extern "C" fn eulerfem_report_get(
    report: *const EulerfemReport,
    index: usize,
    name: *mut *const c_char,
    worst: *mut f64,
    tolerance: *mut f64,
    passed: *mut bool,
) -> EulerfemStatus {
    guard(|| {
        let r = report.as_ref().ok_or_else(|| null("report"))?;
        let o = r.outcomes.get(index).ok_or_else(|| {
            (
                EulerfemStatus::InvalidArgument,
                format!("index {index} out of range 0..{}", r.outcomes.len()),
            )
        })?;
        if let Some(n) = name.as_mut() {
            *n = r.names[index].as_ptr();
        }
        if let Some(w) = worst.as_mut() {
            *w = o.worst;
        }
        if let Some(t) = tolerance.as_mut() {
            *t = o.tolerance;
        }
        if let Some(p) = passed.as_mut() {
            *p = o.passed;
        }
        Ok(())
    })
}

/// Releases a report; null is ignored.
///
/// # Safety
/// `report` must be null or a handle from [`eulerfem_operator_check`] that
/// has not been freed.
#[no_mangle]
pub unsafe extern "C" fn eulerfem_report_free(report: *mut EulerfemReport) {
    if !report.is_null() {
        drop(Box::from_raw(report));
    }
}

/// Message of the last failed call on this thread (empty if none). Valid
/// until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn eulerfem_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Static description of a status code.
#[no_mangle]
pub extern "C" fn eulerfem_status_str(status: EulerfemStatus) -> *const c_char {
    let s: &'static CStr = match status {
        EulerfemStatus::Ok => c"ok",
        EulerfemStatus::NullPointer => c"null pointer argument",
        EulerfemStatus::InvalidArgument => c"invalid argument",
        EulerfemStatus::Config => c"configuration error",
        EulerfemStatus::Solver => c"solver failure",
        EulerfemStatus::Io => c"i/o error",
        EulerfemStatus::BufferTooSmall => c"buffer too small",
        EulerfemStatus::Panic => c"internal panic",
    };
    s.as_ptr()
}
