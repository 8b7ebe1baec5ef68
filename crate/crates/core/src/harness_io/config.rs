use std::f64::consts::PI;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::elements::Family;
use crate::error::{Error, Result};
use crate::forms::{pressure_order, FluxMode};
use crate::mesh::Mesh;
use crate::solver::SolverConfig;
use crate::spaces::build_space;

fn as_config(e: Error) -> Error {
    match e {
        Error::Config(m) => Error::Config(m),
        other => Error::Config(other.to_string()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    TaylorGreen,
    ShearLayer,
    OperatorCheck,
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Experiment::TaylorGreen => "taylor_green",
            Experiment::ShearLayer => "shear_layer",
            Experiment::OperatorCheck => "operator_check",
        })
    }
}

impl FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "taylor_green" => Ok(Experiment::TaylorGreen),
            "shear_layer" => Ok(Experiment::ShearLayer),
            "operator_check" => Ok(Experiment::OperatorCheck),
            other => Err(Error::Config(format!("unknown experiment {other:?}"))),
        }
    }
}

/// Optional settings read from a flat TOML file (`key = value` per line).
/// Unset keys keep the experiment defaults.
#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub experiment: Option<Experiment>,
    pub family: Option<String>,
    pub order: Option<usize>,
    pub mode: Option<String>,
    pub n: Option<usize>,
    pub resolutions: Option<Vec<usize>>,
    pub dt: Option<f64>,
    pub t_end: Option<f64>,
    pub sigma: Option<f64>,
    pub rho: Option<f64>,
    pub delta: Option<f64>,
    pub out: Option<PathBuf>,
    pub snapshot_stride: Option<usize>,
    pub seed: Option<u64>,
    pub trials: Option<usize>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Overwrites every field set in `other`.
    pub fn merge(&mut self, other: ConfigFile) {
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(experiment, family, order, mode, n, resolutions, dt, t_end, sigma, rho, delta, out, snapshot_stride, seed, trials);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub experiment: Experiment,
    pub family: Family,
    pub order: usize,
    pub mode: FluxMode,
    /// Squares per side of each mesh in the run.
    pub resolutions: Vec<usize>,
    pub dt: f64,
    pub t_end: f64,
    /// Taylor-Green decay time scale; `inf` gives the steady unforced vortex.
    pub sigma: f64,
    pub rho: f64,
    pub delta: f64,
    pub out: Option<PathBuf>,
    /// Steps between VTK snapshots; `None` writes the initial, middle and
    /// final states.
    pub snapshot_stride: Option<usize>,
    pub seed: u64,
    pub trials: usize,
}

impl SimulationConfig {
    pub fn defaults(experiment: Experiment) -> Self {
        let base = SimulationConfig {
            experiment,
            family: Family::RT,
            order: 1,
            mode: FluxMode::Upwind,
            resolutions: vec![12, 24, 36, 48],
            dt: 1e-2,
            t_end: 1.0,
            sigma: 100.0,
            rho: PI / 15.0,
            delta: 0.05,
            out: None,
            snapshot_stride: None,
            seed: 42,
            trials: 50,
        };
        match experiment {
            Experiment::TaylorGreen => base,
            Experiment::ShearLayer => SimulationConfig {
                family: Family::BDM,
                resolutions: vec![48],
                dt: 0.04,
                t_end: 8.0,
                ..base
            },
            Experiment::OperatorCheck => SimulationConfig {
                family: Family::BDM,
                resolutions: vec![4, 6],
                dt: 0.04,
                t_end: 0.4,
                ..base
            },
        }
    }

    /// Defaults of the file's experiment (or `fallback`) overridden by the
    /// file's values, then validated.
    pub fn from_file(file: &ConfigFile, fallback: Experiment) -> Result<Self> {
        let mut cfg = Self::defaults(file.experiment.unwrap_or(fallback));
        if let Some(f) = &file.family {
            cfg.family = f.parse().map_err(as_config)?;
        }
        if let Some(m) = &file.mode {
            cfg.mode = m.parse().map_err(as_config)?;
        }
        if let Some(r) = &file.resolutions {
            cfg.resolutions = r.clone();
        }
        if let Some(n) = file.n {
            cfg.resolutions = vec![n];
        }
        macro_rules! copy {
            ($($f:ident),*) => { $( if let Some(v) = file.$f { cfg.$f = v; } )* };
        }
        copy!(order, dt, t_end, sigma, rho, delta, seed, trials);
        if file.out.is_some() {
            cfg.out = file.out.clone();
        }
        if file.snapshot_stride.is_some() {
            cfg.snapshot_stride = file.snapshot_stride;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn solver(&self) -> SolverConfig {
        SolverConfig {
            dt: self.dt,
            t_end: self.t_end,
            ..SolverConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !matches!(self.family, Family::RT | Family::BDM) {
            return Err(Error::Config(format!("velocity family must be RT or BDM, got {}", self.family)));
        }
        if self.resolutions.is_empty() {
            return Err(Error::Config("no mesh resolutions given".into()));
        }
        let probe = std::sync::Arc::new(Mesh::structured(2, true)?);
        let vs = build_space(&probe, self.family, self.order).map_err(as_config)?;
        pressure_order(&vs).map_err(as_config)?;
        for &n in &self.resolutions {
            if n < 2 {
                return Err(Error::Config(format!("mesh resolution {n} below 2")));
            }
        }
        self.solver().num_steps().map_err(as_config)?;
        if !(self.sigma > 0.0) {
            return Err(Error::Config(format!("sigma must be positive, got {}", self.sigma)));
        }
        if !(self.rho > 0.0) || !self.delta.is_finite() {
            return Err(Error::Config(format!("invalid shear parameters rho={} delta={}", self.rho, self.delta)));
        }
        if self.snapshot_stride == Some(0) {
            return Err(Error::Config("snapshot_stride must be positive".into()));
        }
        if self.experiment == Experiment::OperatorCheck && (self.trials == 0 || self.order == 0) {
            return Err(Error::Config("operator check needs order ≥ 1 and at least one trial".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        for e in [Experiment::TaylorGreen, Experiment::ShearLayer, Experiment::OperatorCheck] {
            SimulationConfig::defaults(e).validate().unwrap();
        }
    }

    #[test]
    fn file_values_override_defaults() {
        let file = ConfigFile::parse("experiment = \"shear_layer\"\nmode = \"centred\"\nn = 16\ndt = 0.08\n").unwrap();
        let cfg = SimulationConfig::from_file(&file, Experiment::TaylorGreen).unwrap();
        assert_eq!(cfg.experiment, Experiment::ShearLayer);
        assert_eq!(cfg.mode, FluxMode::Centred);
        assert_eq!(cfg.resolutions, vec![16]);
        assert_eq!(cfg.family, Family::BDM);
        assert_eq!(cfg.dt, 0.08);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ConfigFile::parse("colour = 3").is_err());
        let bad = [
            "family = \"DG\"",
            "order = 7",
            "dt = -1.0",
            "dt = 0.03",
            "n = 1",
            "sigma = 0.0",
            "mode = \"sideways\"",
        ];
        for text in bad {
            let file = ConfigFile::parse(text).unwrap();
            assert!(SimulationConfig::from_file(&file, Experiment::TaylorGreen).is_err(), "{text}");
        }
    }

    #[test]
    fn infinite_sigma_accepted() {
        let file = ConfigFile::parse("sigma = inf").unwrap();
        let cfg = SimulationConfig::from_file(&file, Experiment::TaylorGreen).unwrap();
        assert!(cfg.sigma.is_infinite());
    }
}
