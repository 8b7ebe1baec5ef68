use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::diagnostics::{convergence_orders, l2_error_against, vorticity_field, TimeSeries};
use crate::error::{Error, Result};
use crate::forms::{Forcing, MixedSpaces, StepAssembler};
use crate::harness_io::config::{Experiment, SimulationConfig};
use crate::harness_io::csv_io::write_csv;
use crate::harness_io::vtk::write_vtk;
use crate::mesh::{Mesh, Point};
use crate::solver::{constrained_projection, midpoint_run};
use crate::spaces::{build_space, Field};

/// `u = (sin x₁ cos x₂, −cos x₁ sin x₂) e^{−2t/σ}`.
pub fn taylor_green_velocity(x: Point, t: f64, sigma: f64) -> [f64; 2] {
    let e = (-2.0 * t / sigma).exp();
    [x[0].sin() * x[1].cos() * e, -x[0].cos() * x[1].sin() * e]
}

/// Two tanh shear layers of width `rho` at `x₂ = π/2` and `x₂ = 3π/2`
/// with a transverse perturbation of amplitude `delta`.
pub fn shear_layer_velocity(x: Point, rho: f64, delta: f64) -> [f64; 2] {
    let u1 = if x[1] <= PI {
        ((x[1] - 0.5 * PI) / rho).tanh()
    } else {
        ((1.5 * PI - x[1]) / rho).tanh()
    };
    [u1, delta * x[0].sin()]
}

fn require(cfg: &SimulationConfig, e: Experiment) -> Result<()> {
    cfg.validate()?;
    if cfg.experiment != e {
        return Err(Error::Config(format!("configuration is for {}, not {e}", cfg.experiment)));
    }
    Ok(())
}

fn prepare_out(cfg: &SimulationConfig) -> Result<Option<&Path>> {
    match &cfg.out {
        Some(dir) => {
            std::fs::create_dir_all(dir)?;
            Ok(Some(dir.as_path()))
        }
        None => Ok(None),
    }
}

#[derive(Debug, Clone)]
pub struct TaylorGreenRow {
    pub n: usize,
    pub h: f64,
    pub dofs: usize,
    /// `‖u(T) − u_h(T)‖_{L²}`.
    pub error: f64,
    pub series: TimeSeries,
    pub csv: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct TaylorGreenReport {
    pub label: String,
    pub rows: Vec<TaylorGreenRow>,
    /// Observed orders between consecutive rows.
    pub orders: Vec<f64>,
}

impl TaylorGreenReport {
    pub fn errors(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.error).collect()
    }
}

impl fmt::Display for TaylorGreenReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{}", self.label)?;
        writeln!(f, "{:>4} {:>10} {:>8} {:>12} {:>7}", "N", "h", "dofs", "error", "order")?;
        for (i, r) in self.rows.iter().enumerate() {
            let order = match i {
                0 => "-".to_string(),
                _ => format!("{:.2}", self.orders[i - 1]),
            };
            writeln!(f, "{:>4} {:>10.3e} {:>8} {:>12.3e} {:>7}", r.n, r.h, r.dofs, r.error, order)?;
        }
        Ok(())
    }
}

/// Mesh sweep for the forced Taylor-Green vortex on the slip-walled square.
pub fn run_taylor_green(cfg: &SimulationConfig) -> Result<TaylorGreenReport> {
    require(cfg, Experiment::TaylorGreen)?;
    let out = prepare_out(cfg)?;
    let sigma = cfg.sigma;
    let forcing: Option<Arc<Forcing>> = sigma.is_finite().then(|| {
        let f: Arc<Forcing> = Arc::new(move |x, t| {
            let u = taylor_green_velocity(x, t, sigma);
            [-2.0 / sigma * u[0], -2.0 / sigma * u[1]]
        });
        f
    });
    let solver = cfg.solver();
    let label = format!("taylor_green {}{} {}", cfg.family, cfg.order, cfg.mode);
    let mut rows = Vec::with_capacity(cfg.resolutions.len());
    for &n in &cfg.resolutions {
        let mesh = Arc::new(Mesh::structured(n, false)?);
        let vs = build_space(&mesh, cfg.family, cfg.order)?;
        let spaces = MixedSpaces::new(vs.clone())?;
        let (u0, _) = constrained_projection(&spaces, |x| taylor_green_velocity(x, 0.0, sigma))?;
        let asm = StepAssembler::new(spaces, cfg.mode, cfg.dt, forcing.clone())?;
        let mut series = TimeSeries::default();
        let u = midpoint_run(&asm, &u0, &solver, |_, t, u, rep| series.record(t, u, rep.iterations))?;
        let error = l2_error_against(&u, |x, t| taylor_green_velocity(x, t, sigma), cfg.t_end)?;
        let csv = match out {
            Some(dir) => {
                let p = dir.join(format!("taylor_green_{}{}_{}_n{n}.csv", cfg.family, cfg.order, cfg.mode));
                write_csv(&series, &p)?;
                Some(p)
            }
            None => None,
        };
        rows.push(TaylorGreenRow {
            n,
            h: mesh.h(),
            dofs: vs.dim(),
            error,
            series,
            csv,
        });
    }
    let errors: Vec<f64> = rows.iter().map(|r| r.error).collect();
    let hs: Vec<f64> = rows.iter().map(|r| r.h).collect();
    let orders = convergence_orders(&errors, &hs)?;
    let report = TaylorGreenReport { label, rows, orders };
    if let Some(dir) = out {
        let mut w = csv::Writer::from_path(dir.join(format!(
            "taylor_green_{}{}_{}_errors.csv",
            cfg.family, cfg.order, cfg.mode
        )))
        .map_err(|e| Error::Io(e.to_string()))?;
        w.write_record(["n", "h", "error", "order"]).map_err(|e| Error::Io(e.to_string()))?;
        for (i, r) in report.rows.iter().enumerate() {
            let order = if i == 0 { String::new() } else { format!("{:.16e}", report.orders[i - 1]) };
            w.write_record([r.n.to_string(), format!("{:.16e}", r.h), format!("{:.16e}", r.error), order])
                .map_err(|e| Error::Io(e.to_string()))?;
        }
        w.flush()?;
    }
    Ok(report)
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub t: f64,
    pub max_vorticity: f64,
    pub vtk: Option<PathBuf>,
}

#[derive(Debug, Clone)]
pub struct ShearLayerReport {
    pub label: String,
    pub n: usize,
    pub series: TimeSeries,
    pub snapshots: Vec<Snapshot>,
    pub final_velocity: Field,
    pub csv: Option<PathBuf>,
}

impl ShearLayerReport {
    pub fn max_relative_energy_drift(&self) -> f64 {
        self.series.max_relative_energy_drift()
    }

    /// `Z(T) > Z(0)`.
    pub fn enstrophy_grows(&self) -> bool {
        match (self.series.enstrophy.first(), self.series.enstrophy.last()) {
            (Some(a), Some(b)) => b > a,
            _ => false,
        }
    }

    /// `Z(T) < Z(0)` and no increase between samples at or after `t0`.
    pub fn enstrophy_decays_after(&self, t0: f64) -> bool {
        let z = &self.series.enstrophy;
        let decays = match (z.first(), z.last()) {
            (Some(a), Some(b)) => b < a,
            _ => false,
        };
        let start = self.series.times.iter().position(|&t| t >= t0 - 1e-12).unwrap_or(z.len());
        decays && z[start..].windows(2).all(|w| w[1] <= w[0])
    }
}

impl fmt::Display for ShearLayerReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} N={}", self.label, self.n)?;
        let s = &self.series;
        if let (Some(z0), Some(z1)) = (s.enstrophy.first(), s.enstrophy.last()) {
            writeln!(f, "  max relative energy drift {:.3e}", self.max_relative_energy_drift())?;
            writeln!(f, "  enstrophy {z0:.6e} -> {z1:.6e}")?;
        }
        for snap in &self.snapshots {
            writeln!(f, "  t = {:.3}: max |rot u| = {:.4}", snap.t, snap.max_vorticity)?;
        }
        Ok(())
    }
}

/// Double shear layer on the periodic square, one run per resolution.
pub fn run_shear_layer(cfg: &SimulationConfig) -> Result<Vec<ShearLayerReport>> {
    require(cfg, Experiment::ShearLayer)?;
    let out = prepare_out(cfg)?;
    let solver = cfg.solver();
    let steps = solver.num_steps()?;
    let is_snapshot = |k: usize| match cfg.snapshot_stride {
        Some(stride) => k.is_multiple_of(stride) || k == steps,
        None => k == 0 || k == steps / 2 || k == steps,
    };
    let label = format!("shear_layer {}{} {}", cfg.family, cfg.order, cfg.mode);
    let tag = format!("{}{}_{}", cfg.family, cfg.order, cfg.mode);
    let mut reports = Vec::with_capacity(cfg.resolutions.len());
    for &n in &cfg.resolutions {
        let mesh = Arc::new(Mesh::structured(n, true)?);
        let vs = build_space(&mesh, cfg.family, cfg.order)?;
        let spaces = MixedSpaces::new(vs)?;
        let (u0, _) = constrained_projection(&spaces, |x| shear_layer_velocity(x, cfg.rho, cfg.delta))?;
        let asm = StepAssembler::new(spaces, cfg.mode, cfg.dt, None)?;
        let mut series = TimeSeries::default();
        let mut snapshots = Vec::new();
        let u = midpoint_run(&asm, &u0, &solver, |k, t, u, rep| {
            series.record(t, u, rep.iterations)?;
            if is_snapshot(k) {
                let w = vorticity_field(u)?;
                let vtk = match out {
                    Some(dir) => {
                        let p = dir.join(format!("shear_layer_{tag}_n{n}_{k:05}.vtk"));
                        write_vtk(&p, &format!("shear layer t={t}"), &[("vorticity", &w.field), ("velocity", u)])?;
                        Some(p)
                    }
                    None => None,
                };
                snapshots.push(Snapshot {
                    step: k,
                    t,
                    max_vorticity: w.max_abs,
                    vtk,
                });
            }
            Ok(())
        })?;
        let csv = match out {
            Some(dir) => {
                let p = dir.join(format!("shear_layer_{tag}_n{n}.csv"));
                write_csv(&series, &p)?;
                Some(p)
            }
            None => None,
        };
        reports.push(ShearLayerReport {
            label: label.clone(),
            n,
            series,
            snapshots,
            final_velocity: u,
            csv,
        });
    }
    Ok(reports)
}
