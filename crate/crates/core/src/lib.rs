//! Structure-preserving H(div) finite elements for the incompressible Euler
//! equations in two dimensions.

#![allow(clippy::needless_range_loop, clippy::too_many_arguments, clippy::neg_cmp_op_on_partial_ord)]

pub mod algebra;
pub mod diagnostics;
pub mod elements;
pub mod error;
pub mod forms;
pub mod harness_io;
pub mod mesh;
pub mod quadrature;
pub mod solver;
pub mod spaces;

pub use error::{Error, Result};
