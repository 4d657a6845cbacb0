//! Matrix-free smoothing with tensor-product B-splines.
//!
//! The penalized least squares system `(Φ'Φ + λΛ) α = Φ'y` is never assembled.
//! Every product with the design matrix is evaluated from per-axis basis
//! activations (a Khatri-Rao structure), every product with the roughness
//! penalty from per-axis Gram matrices (a Kronecker structure), and the
//! system is solved with conjugate gradients preconditioned by a geometric
//! multigrid V-cycle built from the dyadic B-spline subdivision rule.
//!
//! Coefficients of a tensor-product spline are linearized with the first
//! axis varying slowest, see [`tensorops::LINEARIZATION`].

pub mod analysis;
pub mod bspline;
pub mod error;
pub mod multigrid;
pub mod operator;
pub mod solver;
pub mod tensorops;

pub use error::{Error, Result};
pub use multigrid::{CoarseSolverKind, Hierarchy, HierarchyConfig, JacobiSmoother, Smoother};
pub use operator::{LevelOperator, ScatteredDataset};
pub use solver::{cg_solve, mgcg_solve, PreconditionerKind, SolveReport, SolverConfig};

/// Execution mode for the data-point loops.
///
/// `Parallel` splits points into fixed-size chunks and reduces the partial
/// sums in chunk order, so it is reproducible for a given chunk size but
/// differs from `Sequential` by rounding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Execution {
    #[default]
    Sequential,
    Parallel,
}
