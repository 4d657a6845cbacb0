//! Command-line front end for the multigrid spline smoother: data
//! generation, fitting, prediction, spectral analysis and benchmarks.

pub mod bench;
pub mod config;
pub mod data;
pub mod error;
pub mod model;
pub mod pipeline;

pub use config::{DataSource, Domain, Precond, RunConfig, SolverSettings};
pub use error::{CliError, Result};
