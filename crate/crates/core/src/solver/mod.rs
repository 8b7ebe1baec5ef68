//! Linear algebra, Newton iteration and time stepping.

pub mod midpoint;
pub mod newton;
pub mod sparse;

pub use midpoint::{constrained_projection, constrained_projection_of, midpoint_advance, midpoint_run, midpoint_step, StepOutcome};
pub use newton::{newton_solve, newton_solve_cached, JacobianCache, NewtonReport, SolverConfig, REUSE_CONTRACTION};
pub use sparse::{lu_solve, LuCache, LuFactorization, SparseMatrix, TripletBuilder};
