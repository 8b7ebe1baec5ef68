//! Experiment drivers, configuration and file output.

mod checks;
mod config;
mod csv_io;
mod experiments;
mod vtk;

pub use checks::{kelvin_check, operator_suite, run_operator_check, torus_loops, CheckOutcome, OperatorReport};
pub use config::{ConfigFile, Experiment, SimulationConfig};
pub use csv_io::{read_csv, write_csv, CSV_HEADER};
pub use experiments::{
    run_shear_layer, run_taylor_green, shear_layer_velocity, taylor_green_velocity, ShearLayerReport,
    Snapshot, TaylorGreenReport, TaylorGreenRow,
};
pub use vtk::{write_vtk, write_vtk_to};
