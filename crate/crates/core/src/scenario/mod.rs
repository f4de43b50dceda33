//! Declarative scenarios: config loading, the run pipeline, verification and reports.

mod config;
mod report;
mod run;
mod verify;

pub use config::{
    load_scenario, parse_scenario, ExtremizerConfig, Factor, FieldSpec, LatticeSpec, ModelSpec, Scenario, ScenarioConfig,
    ScheduleSpec, SolverConfig, SyntheticM, Term, TwistSpec, Wave,
};
pub use report::{parse_sweep_csv, plot_csv, report, KwConstants, MassRow, Recomputation, ReportSummary, SweepRow, PLOT_CSV, PLOT_CSV_COLUMNS, SUMMARY_FILE};
pub use run::{
    entry_stem, kappa_nonnegative, run, run_curvature, run_solve, sha256_hex, ClassificationFile, CurvatureFile, LimitFile,
    Manifest, MinorantInfo, RunOutput, SolveFile, CLASSIFICATION_FILE, CONFIG_FILE, CURVATURE_FILE, FIELDS_DIR, KW_FILE,
    LIMIT_FILE, MANIFEST, SWEEP_CSV,
};
pub use verify::{verify, Status, VerifyEntry, VerifyReport, INVARIANTS, VERIFY_FILE};

use std::path::PathBuf;

use thiserror::Error;

use crate::continuity::ContinuityError;
use crate::geometry::GeometryError;
use crate::grid::GridError;
use crate::kw::KwError;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("config: {0}")]
    Config(String),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("no manifest in {}", .0.display())]
    MissingManifest(PathBuf),
    #[error("artifact: {0}")]
    Artifact(String),
    #[error("solver: {0}")]
    Solver(String),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Continuity(#[from] ContinuityError),
    #[error(transparent)]
    Kw(#[from] KwError),
    #[error(transparent)]
    Grid(#[from] GridError),
}

impl ScenarioError {
    /// Whether the error comes from the numerics rather than the inputs.
    pub fn is_solver_failure(&self) -> bool {
        matches!(self, ScenarioError::Solver(_) | ScenarioError::Continuity(_) | ScenarioError::Kw(_))
    }
}
