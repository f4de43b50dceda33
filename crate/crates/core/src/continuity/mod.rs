//! The ε-family of twisted Monge–Ampère equations
//! `(εω + ρ + i∂∂̄u_ε)ⁿ = e^{u_ε} ωⁿ`, its sweeps and diagnostics.

mod diagnostics;
mod solver;
mod sweep;
mod twist;

pub use diagnostics::{determinant_mass, mass, trace_diagnostics, trace_direct, TraceDiagnostics};
pub(crate) use solver::weighted_laplacian_with;
pub use solver::{ma_residual, ma_residual_from_potential, solve_limit, solve_ma, sup_bound, Potential, Solution, SolverOptions};
pub use sweep::{
    classify_sweep, epsilon_sweep, geometric_schedule, polynomial_fit, sweep_entry, validate_schedule, Classification,
    ClassificationReport, SweepEntry, SweepRecord, SWEEP_CSV_COLUMNS,
};
pub use twist::{cohomological_mass, TwistField, TwistMode};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::grid::GridError;

#[derive(Debug, Error)]
pub enum ContinuityError {
    #[error("epsilon must be positive and finite, got {0}")]
    NonPositiveEpsilon(f64),
    #[error("newton stalled at eps = {epsilon:e} after {iterations} iterations (residual {residual:e})")]
    Stagnation { epsilon: f64, iterations: usize, residual: f64 },
    #[error("omega_eps lost positivity at eps = {epsilon:e}, node {node} (eigenvalue {eigenvalue:e})")]
    PositivityLost { epsilon: f64, node: usize, eigenvalue: f64 },
    #[error("twist form is not positive definite at node {node} (eigenvalue {eigenvalue:e})")]
    TwistNotPositive { node: usize, eigenvalue: f64 },
    #[error("invalid epsilon schedule: {0}")]
    InvalidSchedule(String),
    #[error("need at least {needed} sweep entries, got {actual}")]
    TooFewEntries { needed: usize, actual: usize },
    #[error("fields live on different lattices")]
    LatticeMismatch,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Grid(#[from] GridError),
}
