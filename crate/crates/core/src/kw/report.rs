use serde::Serialize;

use super::{
    check_comparison, check_diff_inequality, guenancia_check, mbar_limit, solve_weighted_poisson, supersolution,
    ComparisonReport, GuenanciaReport, KwError, MbarLimit,
};
use crate::continuity::SweepRecord;
use crate::geometry::MetricField;
use crate::grid::{extrema, RealField};

/// Scalar part of the KW report, serialized as JSON.
#[derive(Clone, Debug, Serialize)]
pub struct KwSummary {
    pub epsilon: f64,
    pub mbar_eps: f64,
    pub mbar0: MbarLimit,
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    pub f_projected_mean: f64,
    pub f_residual_sup: f64,
    pub f_unresolved_sup: f64,
    /// `min(φ₊ − T_ε)`.
    pub comparison_margin: Option<f64>,
    pub comparison: Option<ComparisonReport>,
    pub inf_t: f64,
    /// `max (1 − A·M̄_ε)` over the tail entries with `M̄_ε` within 20% of `M̄₀`.
    pub tail_max_one_minus_a_mbar: Option<f64>,
    pub tail_entries: usize,
    /// `min M (e^B − A)`.
    pub min_m_eb_minus_a: Option<f64>,
    pub diff_ineq_min_residual: f64,
    pub diff_ineq_argmin: usize,
    pub guenancia: GuenanciaReport,
    pub theory_applicable: bool,
    pub f_dump: Option<String>,
    pub phi_plus_dump: Option<String>,
}

#[derive(Clone, Debug)]
pub struct KwReport {
    pub summary: KwSummary,
    pub f: RealField,
    pub phi_plus: Option<RealField>,
}

/// KW pipeline on the smallest-ε entry of a sweep.
///
/// `m` is the curvature weight `M` (computed or synthetic) and `kappa` the
/// field entering the differential inequality.
pub fn kw_report(
    record: &SweepRecord,
    m: &RealField,
    kappa: &RealField,
    metric: &MetricField,
    theory_applicable: bool,
    tol: f64,
) -> Result<KwReport, KwError> {
    let last = record.entries.last().ok_or(KwError::TooFewEntries { needed: 1, actual: 0 })?;
    let sol = &last.solution;
    let mbars: Vec<f64> = record
        .entries
        .iter()
        .map(|e| e.mbar_eps.unwrap_or_else(|| super::mbar(&e.solution.u, m, metric)))
        .collect();
    let mbar_eps = *mbars.last().expect("non-empty");
    let mbar0 = if mbars.len() >= 4 { mbar_limit(&mbars)? } else { MbarLimit::Inapplicable { value: mbar_eps } };
    let poisson = solve_weighted_poisson(&sol.omega_eps, m, mbar_eps)?;
    let t = &last.trace.t;
    let diff = check_diff_inequality(sol, &last.trace, kappa)?;
    let guenancia = guenancia_check(sol, &last.trace, m, metric, tol);

    let mut summary = KwSummary {
        epsilon: sol.epsilon,
        mbar_eps,
        mbar0,
        a: None,
        b: None,
        f_projected_mean: poisson.projected_mean,
        f_residual_sup: poisson.residual_sup,
        f_unresolved_sup: poisson.unresolved_sup,
        comparison_margin: None,
        comparison: None,
        inf_t: extrema(t).min,
        tail_max_one_minus_a_mbar: None,
        tail_entries: 0,
        min_m_eb_minus_a: None,
        diff_ineq_min_residual: diff.min_residual,
        diff_ineq_argmin: diff.argmin,
        guenancia,
        theory_applicable,
        f_dump: None,
        phi_plus_dump: None,
    };
    let mut phi_plus = None;
    if let Some(m0) = mbar0.positive() {
        let sup = supersolution(&poisson.f, m0)?;
        let tail: Vec<f64> = mbars.iter().filter(|v| (*v - m0).abs() <= 0.2 * m0).map(|v| 1.0 - sup.a * v).collect();
        summary.tail_entries = tail.len();
        summary.tail_max_one_minus_a_mbar = tail.iter().cloned().reduce(f64::max);
        summary.min_m_eb_minus_a = Some(extrema(&m.map(|v| v * (sup.b.exp() - sup.a))).min);
        summary.comparison_margin = Some(extrema(&sup.phi_plus.zip_map(t, |p, t| p - t)).min);
        summary.comparison = Some(check_comparison(t, &sup.phi_plus, m, &sol.omega_eps, tol)?);
        summary.a = Some(sup.a);
        summary.b = Some(sup.b);
        phi_plus = Some(sup.phi_plus);
    }
    Ok(KwReport { summary, f: poisson.f, phi_plus })
}
