use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use eulerfem::harness_io::{
    run_operator_check, run_shear_layer, run_taylor_green, ConfigFile, Experiment, SimulationConfig,
};
use eulerfem::Error;

#[derive(Parser)]
#[command(name = "eulerfem", version, about = "Structure-preserving finite elements for 2D incompressible Euler")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Forced Taylor-Green vortex mesh sweep with error table.
    TaylorGreen(Overrides),
    /// Periodic double shear layer with energy/enstrophy history and VTK snapshots.
    ShearLayer(Overrides),
    /// Seeded operator invariant suite and Kelvin residuals.
    OperatorCheck(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// Flat TOML file with `key = value` settings.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    family: Option<String>,
    #[arg(long)]
    order: Option<usize>,
    #[arg(long)]
    mode: Option<String>,
    /// Single mesh resolution (squares per side), replacing the sweep.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    t_end: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    snapshot_stride: Option<usize>,
}

impl Overrides {
    fn resolve(self, experiment: Experiment) -> Result<SimulationConfig, Error> {
        let mut file = match &self.config {
            Some(p) => ConfigFile::load(p)?,
            None => ConfigFile::default(),
        };
        if let Some(e) = file.experiment {
            if e != experiment {
                return Err(Error::Config(format!("config file is for {e}, command is {experiment}")));
            }
        }
        file.merge(ConfigFile {
            experiment: Some(experiment),
            family: self.family,
            order: self.order,
            mode: self.mode,
            n: self.n,
            dt: self.dt,
            t_end: self.t_end,
            sigma: self.sigma,
            out: self.out,
            seed: self.seed,
            trials: self.trials,
            snapshot_stride: self.snapshot_stride,
            ..ConfigFile::default()
        });
        let mut cfg = SimulationConfig::from_file(&file, experiment)?;
        if cfg.out.is_none() && experiment != Experiment::OperatorCheck {
            cfg.out = Some(PathBuf::from("out"));
        }
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool, Error> {
    match cli.command {
        Command::TaylorGreen(o) => {
            let cfg = o.resolve(Experiment::TaylorGreen)?;
            let report = run_taylor_green(&cfg)?;
            print!("{report}");
            Ok(true)
        }
        Command::ShearLayer(o) => {
            let cfg = o.resolve(Experiment::ShearLayer)?;
            for report in run_shear_layer(&cfg)? {
                print!("{report}");
            }
            Ok(true)
        }
        Command::OperatorCheck(o) => {
            let cfg = o.resolve(Experiment::OperatorCheck)?;
            let report = run_operator_check(&cfg)?;
            print!("{report}");
            Ok(report.all_passed())
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e @ Error::Config(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
