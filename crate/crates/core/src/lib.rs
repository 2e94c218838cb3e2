//! Finite-grid toolkit for extended-real functions on metric spaces:
//! eps-argmin sets, convergence checks for function sequences, and a
//! constructive solver that perturbs a whole sequence of functions so that
//! every member has a certified strong minimum.

pub mod convergence;
pub mod error;
pub mod functions;
pub mod gallery;
pub mod io;
pub mod metric;
pub mod perturbation;
pub mod solver;

pub use convergence::{Condition, ConvergenceReport, FnSequence};
pub use error::{Error, Result};
pub use functions::ExtFn;
pub use metric::{build_grid_1d, MetricSpace, PointSet};
pub use perturbation::{ConeSpace, Perturbation, PerturbationSpace};
pub use solver::{LocalizeOptions, SimulOptions, TieBreak};
