//! Periodic lattices, scalar fields, spectral Wirtinger calculus and quadrature.

mod dump;
mod field;
mod lattice;
mod spectral;

pub use dump::{read_complex, read_header, read_real, write_complex, write_real, DumpHeader, FieldKind};
pub use field::{extrema, integrate, sup_norm, sup_norm_complex, ComplexField, Extrema, RealField};
pub use lattice::Lattice;
pub use spectral::{
    ddbar_complex, ddbar_matrix, flat_laplacian, gradient_norm, project_resolved, real_derivative, solve_flat_poisson, solve_shifted,
    tail_energy_fraction, wirtinger_derivative, wirtinger_real, PoissonSolution, Spectrum, POISSON_MEAN_TOLERANCE,
};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GridError {
    #[error("complex dimension {0} is not supported (expected 1 or 2)")]
    UnsupportedDimension(usize),
    #[error("expected {expected} real axes, got {periods} periods and {resolution} resolutions")]
    AxisCount { expected: usize, periods: usize, resolution: usize },
    #[error("period {period} on axis {axis} must be positive and finite")]
    InvalidPeriod { axis: usize, period: f64 },
    #[error("resolution {resolution} on axis {axis} is not a power of two >= 8")]
    InvalidResolution { axis: usize, resolution: usize },
    #[error("complex axis {axis} out of range for dim_c = {dim_c}")]
    AxisOutOfRange { axis: usize, dim_c: usize },
    #[error("field has {actual} values, lattice has {expected} nodes")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("dump: {0}")]
    Dump(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
