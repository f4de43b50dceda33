//! Sub/supersolution machinery for `Δ_{ω_ε} φ = M e^φ − 1` and the
//! integral checks built on `T_ε`.

mod comparison;
mod poisson;
mod report;

pub use comparison::{
    check_comparison, check_diff_inequality, guenancia_check, manufactured_triple, ComparisonReport, DiffInequality,
    GuenanciaReport, ManufacturedTriple,
};
pub use poisson::{
    mbar, mbar_limit, normalize_sup, solve_weighted_poisson, supersolution, weighted_laplacian, MbarLimit, Supersolution,
    WeightedPoisson,
};
pub use report::{kw_report, KwReport, KwSummary};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum KwError {
    #[error("omega_eps is singular at node {0}")]
    Singular(usize),
    #[error("inapplicable: {0}")]
    Inapplicable(String),
    #[error("need at least {needed} sweep entries, got {actual}")]
    TooFewEntries { needed: usize, actual: usize },
    #[error("weighted Poisson solve stopped after {iterations} iterations at residual {residual:e}")]
    NotConverged { iterations: usize, residual: f64 },
    #[error("fields live on different lattices")]
    LatticeMismatch,
}
