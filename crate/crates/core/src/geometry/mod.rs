//! Kähler metrics on the model tori, Chern curvature, and the holomorphic
//! sectional curvature extremizer.

mod curvature;
mod kappa;
mod metric;

pub use curvature::{chern_curvature, curvature_quartic, hsc, ricci_contraction, ricci_form, CurvatureField};
pub use kappa::{
    bloch_vector, fibonacci_sphere, kappa_field, lipschitz_estimate, m_factor, node_extremum, refine_maximum,
    smooth_minorant, CurvatureReport, CurvatureSummary, ExtremizerOptions, Minorant, NodeExtremum, SphereQuadratic,
};
pub use metric::{MetricField, Provenance, POSITIVITY_TOLERANCE};

use thiserror::Error;

use crate::grid::GridError;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("metric is not positive definite at node {node} (eigenvalue {eigenvalue:e})")]
    NotPositive { node: usize, eigenvalue: f64 },
    #[error("expected dimension {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("background metric is not Hermitian positive definite")]
    BackgroundNotPositive,
    #[error("conformal metrics require dim_c = 1, got {0}")]
    RequiresDimensionOne(usize),
    #[error("product factors must both have dim_c = 1, got {0} and {1}")]
    FactorDimensions(usize, usize),
    #[error("direction vector is zero")]
    ZeroVector,
    #[error("minorant base node {node} has M = {value:e}, which is not positive")]
    NonPositiveBase { node: usize, value: f64 },
    #[error("minorant radius {radius} and level {level} must satisfy radius > 0 and 0 < level <= 1")]
    InvalidMinorant { radius: f64, level: f64 },
    #[error(transparent)]
    Grid(#[from] GridError),
}
