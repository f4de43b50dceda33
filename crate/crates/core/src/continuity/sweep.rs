use std::fmt::Write as _;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{mass, solve_ma, trace_diagnostics, ContinuityError, Solution, SolverOptions, TraceDiagnostics, TwistField};
use crate::geometry::MetricField;
use crate::grid::{extrema, RealField};
use crate::kw::mbar;

pub const SWEEP_CSV_COLUMNS: [&str; 10] = [
    "epsilon",
    "sup_u",
    "inf_u",
    "residual_sup",
    "newton_iterations",
    "mass",
    "cohomological_mass",
    "min_trace_margin",
    "lambda_min_global",
    "mbar_eps",
];

/// `1, ½, …, 2^{1−count}`.
pub fn geometric_schedule(count: usize) -> Vec<f64> {
    (0..count).map(|k| 0.5f64.powi(k as i32)).collect()
}

pub fn validate_schedule(schedule: &[f64]) -> Result<(), ContinuityError> {
    if schedule.is_empty() {
        return Err(ContinuityError::InvalidSchedule("empty schedule".into()));
    }
    if let Some(bad) = schedule.iter().find(|e| !(**e > 0.0) || !e.is_finite()) {
        return Err(ContinuityError::InvalidSchedule(format!("non-positive epsilon {bad}")));
    }
    if let Some(w) = schedule.windows(2).find(|w| !(w[1] < w[0])) {
        return Err(ContinuityError::InvalidSchedule(format!("{} does not decrease to {}", w[0], w[1])));
    }
    Ok(())
}

#[derive(Clone, Debug)]
pub struct SweepEntry {
    pub solution: Solution,
    pub trace: TraceDiagnostics,
    pub mass: f64,
    pub cohomological_mass: f64,
    pub min_trace_margin: f64,
    pub lambda_min_global: f64,
    pub mbar_eps: Option<f64>,
}

impl SweepEntry {
    pub fn epsilon(&self) -> f64 {
        self.solution.epsilon
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    BigLimit,
    Collapsing,
    Indeterminate,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub classification: Classification,
    pub extrapolated_mass0: f64,
    pub threshold: f64,
    /// Polynomial coefficients of mass(ε), highest power first.
    pub fit_coefficients: Vec<f64>,
}

#[derive(Clone, Debug)]
pub struct SweepRecord {
    pub n: usize,
    /// `∫ωⁿ`.
    pub volume: f64,
    pub entries: Vec<SweepEntry>,
    pub classification: Option<ClassificationReport>,
}

impl SweepRecord {
    pub fn epsilons(&self) -> Vec<f64> {
        self.entries.iter().map(SweepEntry::epsilon).collect()
    }

    pub fn masses(&self) -> Vec<f64> {
        self.entries.iter().map(|e| e.mass).collect()
    }

    pub fn default_threshold(&self) -> f64 {
        1e-6 * self.volume
    }

    pub fn to_csv(&self) -> String {
        let mut out = SWEEP_CSV_COLUMNS.join(",");
        out.push('\n');
        for e in &self.entries {
            let s = &e.solution;
            let mbar = e.mbar_eps.map_or_else(|| "nan".to_string(), |v| format!("{v:.17e}"));
            writeln!(
                out,
                "{:.17e},{:.17e},{:.17e},{:.17e},{},{:.17e},{:.17e},{:.17e},{:.17e},{}",
                s.epsilon,
                s.sup_u,
                s.inf_u,
                s.residual_sup,
                s.newton_iterations,
                e.mass,
                e.cohomological_mass,
                e.min_trace_margin,
                e.lambda_min_global,
                mbar
            )
            .expect("write to string");
        }
        out
    }
}

/// Builds the per-ε diagnostics attached to a sweep entry.
pub fn sweep_entry(
    solution: Solution,
    metric: &MetricField,
    twist: &TwistField,
    m: Option<&RealField>,
) -> Result<SweepEntry, ContinuityError> {
    let trace = trace_diagnostics(&solution, metric)?;
    Ok(SweepEntry {
        mass: mass(&solution, metric),
        cohomological_mass: twist.cohomological_mass(solution.epsilon),
        min_trace_margin: trace.min_lemma_margin(&solution),
        lambda_min_global: extrema(&trace.lambda_min).min,
        mbar_eps: m.map(|m| mbar(&solution.u, m, metric)),
        solution,
        trace,
    })
}

/// Solves along a decreasing schedule, warm-starting each ε from the previous one.
pub fn epsilon_sweep(
    metric: &MetricField,
    twist: &TwistField,
    schedule: &[f64],
    opts: &SolverOptions,
    m: Option<&RealField>,
) -> Result<SweepRecord, ContinuityError> {
    validate_schedule(schedule)?;
    let mut entries: Vec<SweepEntry> = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let warm = entries.last().map(|e| &e.solution);
        let solution = solve_ma(metric, twist, eps, opts, warm)?;
        log::info!(
            "eps {eps:.6e}: {} newton iterations, residual {:.3e}",
            solution.newton_iterations,
            solution.residual_sup
        );
        entries.push(sweep_entry(solution, metric, twist, m)?);
    }
    let mut record = SweepRecord { n: metric.n(), volume: metric.volume(), entries, classification: None };
    if record.entries.len() >= 4 {
        record.classification = Some(classify_sweep(&record, None)?);
    }
    Ok(record)
}

/// Least-squares polynomial fit of `values` against `x`, highest power first.
pub fn polynomial_fit(x: &[f64], values: &[f64], degree: usize) -> Vec<f64> {
    let a = DMatrix::from_fn(x.len(), degree + 1, |r, c| x[r].powi((degree - c) as i32));
    let b = DVector::from_column_slice(values);
    let svd = a.svd(true, true);
    let coef = svd.solve(&b, 1e-14).expect("SVD with both factors");
    coef.iter().copied().collect()
}

/// Fits `mass(ε)` by a degree-`n` polynomial and classifies its constant term.
pub fn classify_sweep(record: &SweepRecord, threshold: Option<f64>) -> Result<ClassificationReport, ContinuityError> {
    if record.entries.len() < 4 {
        return Err(ContinuityError::TooFewEntries { needed: 4, actual: record.entries.len() });
    }
    let threshold = threshold.unwrap_or_else(|| record.default_threshold());
    let fit_coefficients = polynomial_fit(&record.epsilons(), &record.masses(), record.n);
    let mass0 = *fit_coefficients.last().expect("degree >= 1");
    let classification = if mass0 > threshold {
        Classification::BigLimit
    } else if mass0 < threshold / 10.0 {
        Classification::Collapsing
    } else {
        Classification::Indeterminate
    };
    Ok(ClassificationReport { classification, extrapolated_mass0: mass0, threshold, fit_coefficients })
}
