use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;

use super::run::{entry_stem, ClassificationFile, Manifest, CLASSIFICATION_FILE, CONFIG_FILE, FIELDS_DIR, KW_FILE, SWEEP_CSV};
use super::{parse_scenario, ScenarioError};
use crate::continuity::{polynomial_fit, ClassificationReport, SWEEP_CSV_COLUMNS};
use crate::grid::{extrema, integrate, read_real};

pub const SUMMARY_FILE: &str = "summary.json";
pub const PLOT_CSV: &str = "plot.csv";
pub const PLOT_CSV_COLUMNS: [&str; 5] = ["epsilon", "mass", "cohomological_mass", "sup_u", "inf_T"];

/// One parsed row of `sweep.csv`.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub epsilon: f64,
    pub sup_u: f64,
    pub inf_u: f64,
    pub residual_sup: f64,
    pub newton_iterations: usize,
    pub mass: f64,
    pub cohomological_mass: f64,
    pub min_trace_margin: f64,
    pub lambda_min_global: f64,
    pub mbar_eps: f64,
}

pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRow>, ScenarioError> {
    let mut lines = text.lines();
    let header = lines.next().unwrap_or_default();
    if header != SWEEP_CSV_COLUMNS.join(",") {
        return Err(ScenarioError::Artifact(format!("unexpected sweep.csv header {header:?}")));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != SWEEP_CSV_COLUMNS.len() {
                return Err(ScenarioError::Artifact(format!("sweep.csv row {}: {} cells", i + 1, cells.len())));
            }
            let num = |j: usize| {
                cells[j]
                    .parse::<f64>()
                    .map_err(|e| ScenarioError::Artifact(format!("sweep.csv row {} column {}: {e}", i + 1, SWEEP_CSV_COLUMNS[j])))
            };
            Ok(SweepRow {
                epsilon: num(0)?,
                sup_u: num(1)?,
                inf_u: num(2)?,
                residual_sup: num(3)?,
                newton_iterations: cells[4]
                    .parse()
                    .map_err(|e| ScenarioError::Artifact(format!("sweep.csv row {}: {e}", i + 1)))?,
                mass: num(5)?,
                cohomological_mass: num(6)?,
                min_trace_margin: num(7)?,
                lambda_min_global: num(8)?,
                mbar_eps: num(9)?,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize)]
pub struct MassRow {
    pub epsilon: f64,
    pub mass: f64,
    pub cohomological_mass: f64,
    pub sup_u: f64,
    pub inf_t: f64,
    pub min_trace_margin: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct KwConstants {
    #[serde(rename = "A")]
    pub a: Option<f64>,
    #[serde(rename = "B")]
    pub b: Option<f64>,
    pub mbar0: Option<f64>,
    pub mbar0_status: String,
    pub mbar_eps: Option<f64>,
    pub inf_t: Option<f64>,
    pub comparison_margin: Option<f64>,
}

/// Differences between the tabulated sweep and values recomputed from dumps.
#[derive(Clone, Debug, Serialize)]
pub struct Recomputation {
    pub max_mass_rel_diff: f64,
    pub max_trace_margin_diff: f64,
    pub max_fit_coefficient_diff: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ReportSummary {
    pub scenario: String,
    pub n: usize,
    pub volume: f64,
    pub entries: usize,
    pub table: Vec<MassRow>,
    /// Degree-`n` fit of `mass(ε)`, highest power first.
    pub fit_coefficients: Vec<f64>,
    pub classification: Option<ClassificationReport>,
    pub min_trace_margin: f64,
    pub kw: KwConstants,
    pub recomputation: Recomputation,
}

fn read(dir: &Path, rel: &str) -> Result<String, ScenarioError> {
    let path = dir.join(rel);
    fs::read_to_string(&path).map_err(|source| ScenarioError::Io { path, source })
}

/// Aggregates a run directory into `summary.json` and `plot.csv`.
pub fn report(dir: &Path) -> Result<ReportSummary, ScenarioError> {
    let manifest = Manifest::load(dir)?;
    let config = parse_scenario(&read(dir, CONFIG_FILE)?)?;
    let rows = parse_sweep_csv(&read(dir, SWEEP_CSV)?)?;
    if rows.len() != manifest.entries {
        return Err(ScenarioError::Artifact(format!("sweep.csv has {} rows, manifest {}", rows.len(), manifest.entries)));
    }
    let class: ClassificationFile =
        serde_json::from_str(&read(dir, CLASSIFICATION_FILE)?).map_err(|e| ScenarioError::Artifact(format!("{CLASSIFICATION_FILE}: {e}")))?;
    let kw: serde_json::Value =
        serde_json::from_str(&read(dir, KW_FILE)?).map_err(|e| ScenarioError::Artifact(format!("{KW_FILE}: {e}")))?;

    let scenario = config.build()?;
    let lat = &scenario.lattice;
    let field = |rel: &str| read_real(&dir.join(rel), lat).map_err(|e| ScenarioError::Artifact(format!("{rel}: {e}")));
    let density = field(&format!("{FIELDS_DIR}/volume_density"))?;
    let n = config.n as f64;

    let mut table = Vec::with_capacity(rows.len());
    let mut mass_diff: f64 = 0.0;
    let mut margin_diff: f64 = 0.0;
    for (k, row) in rows.iter().enumerate() {
        let u = field(&entry_stem("u", k))?;
        let t = field(&entry_stem("T", k))?;
        let mass = integrate(&u.zip_map(&density, |u, d| u.exp() * d));
        mass_diff = mass_diff.max((mass - row.mass).abs() / row.mass.abs().max(f64::MIN_POSITIVE));
        let margin = extrema(&t.zip_map(&u, |t, u| t + u / n)).min;
        margin_diff = margin_diff.max((margin - row.min_trace_margin).abs());
        table.push(MassRow {
            epsilon: row.epsilon,
            mass: row.mass,
            cohomological_mass: row.cohomological_mass,
            sup_u: row.sup_u,
            inf_t: extrema(&t).min,
            min_trace_margin: row.min_trace_margin,
        });
    }

    let eps: Vec<f64> = rows.iter().map(|r| r.epsilon).collect();
    let masses: Vec<f64> = rows.iter().map(|r| r.mass).collect();
    let fit_coefficients = if rows.len() > config.n { polynomial_fit(&eps, &masses, config.n) } else { Vec::new() };
    let fit_diff = match &class.classification {
        Some(c) => c.fit_coefficients.iter().zip(&fit_coefficients).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
        None => 0.0,
    };

    let num = |key: &str| kw.get(key).and_then(serde_json::Value::as_f64);
    let mbar0 = kw.get("mbar0");
    let summary = ReportSummary {
        scenario: config.name.clone(),
        n: config.n,
        volume: class.volume,
        entries: rows.len(),
        min_trace_margin: rows.iter().map(|r| r.min_trace_margin).fold(f64::INFINITY, f64::min),
        table,
        fit_coefficients,
        classification: class.classification,
        kw: KwConstants {
            a: num("A"),
            b: num("B"),
            mbar0: mbar0.and_then(|v| v.get("value")).and_then(serde_json::Value::as_f64),
            mbar0_status: mbar0
                .and_then(|v| v.get("status"))
                .and_then(serde_json::Value::as_str)
                .unwrap_or("missing")
                .to_string(),
            mbar_eps: num("mbar_eps"),
            inf_t: num("inf_t"),
            comparison_margin: num("comparison_margin"),
        },
        recomputation: Recomputation {
            max_mass_rel_diff: mass_diff,
            max_trace_margin_diff: margin_diff,
            max_fit_coefficient_diff: fit_diff,
        },
    };

    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    let path = dir.join(SUMMARY_FILE);
    fs::write(&path, text).map_err(|source| ScenarioError::Io { path, source })?;
    let path = dir.join(PLOT_CSV);
    fs::write(&path, plot_csv(&summary.table)).map_err(|source| ScenarioError::Io { path, source })?;
    Ok(summary)
}

pub fn plot_csv(table: &[MassRow]) -> String {
    let mut out = PLOT_CSV_COLUMNS.join(",");
    out.push('\n');
    for r in table {
        writeln!(out, "{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}", r.epsilon, r.mass, r.cohomological_mass, r.sup_u, r.inf_t)
            .expect("write to string");
    }
    out
}
