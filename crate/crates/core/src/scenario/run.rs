use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Scenario, ScenarioConfig, ScenarioError};
use crate::continuity::{
    classify_sweep, epsilon_sweep, solve_limit, solve_ma, sweep_entry, ClassificationReport, Solution, SweepRecord,
};
use crate::geometry::{chern_curvature, kappa_field, smooth_minorant, CurvatureReport, CurvatureSummary, POSITIVITY_TOLERANCE};
use crate::grid::{extrema, sup_norm, write_real, RealField};
use crate::kw::kw_report;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG_FILE: &str = "config.json";
pub const SWEEP_CSV: &str = "sweep.csv";
pub const CLASSIFICATION_FILE: &str = "classification.json";
pub const KW_FILE: &str = "kw_report.json";
pub const CURVATURE_FILE: &str = "curvature.json";
pub const LIMIT_FILE: &str = "limit.json";
pub const FIELDS_DIR: &str = "fields";

/// Dump stem (relative to the output directory) of a per-entry field.
pub fn entry_stem(prefix: &str, k: usize) -> String {
    format!("{FIELDS_DIR}/{prefix}_e{k:02}")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub scenario: String,
    pub config_sha256: String,
    pub versions: BTreeMap<String, String>,
    pub entries: usize,
    /// Relative path to SHA-256 of every file the run wrote.
    pub files: BTreeMap<String, String>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, ScenarioError> {
        let path = dir.join(MANIFEST);
        if !path.is_file() {
            return Err(ScenarioError::MissingManifest(dir.to_path_buf()));
        }
        let text = fs::read_to_string(&path).map_err(|source| ScenarioError::Io { path: path.clone(), source })?;
        serde_json::from_str(&text).map_err(|e| ScenarioError::Artifact(format!("{}: {e}", path.display())))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ClassificationFile {
    pub volume: f64,
    pub classification: Option<ClassificationReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MinorantInfo {
    pub basepoint: usize,
    pub radius: f64,
    pub peak: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureFile {
    #[serde(flatten)]
    pub summary: CurvatureSummary,
    /// `computed` or `synthetic`.
    pub m_source: &'static str,
    pub kappa_nonnegative: bool,
    pub minorant: Option<MinorantInfo>,
}

/// The `ε = 0` reference solve and the pointwise lower bound it implies.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LimitFile {
    pub sup_u0: f64,
    pub inf_u0: f64,
    pub residual_sup: f64,
    pub newton_iterations: usize,
    /// `min_k (inf u_{ε_k}) − inf u₀`.
    pub min_gap: f64,
}

/// In-memory results of a run, alongside what was written to disk.
#[derive(Clone, Debug)]
pub struct RunOutput {
    pub dir: PathBuf,
    pub record: SweepRecord,
    pub curvature: CurvatureReport,
    pub m: RealField,
    pub limit: Option<Solution>,
    pub manifest: Manifest,
}

/// `κ ≥ 0` up to rounding; a flat metric gives `κ ≡ 0` exactly.
pub fn kappa_nonnegative(kappa: &RealField) -> bool {
    extrema(kappa).min >= -1e-12 * sup_norm(kappa).max(1.0)
}

struct Writer {
    dir: PathBuf,
    files: BTreeMap<String, String>,
}

impl Writer {
    fn new(dir: &Path) -> Result<Self, ScenarioError> {
        let fields = dir.join(FIELDS_DIR);
        fs::create_dir_all(&fields).map_err(|source| ScenarioError::Io { path: fields, source })?;
        Ok(Self { dir: dir.to_path_buf(), files: BTreeMap::new() })
    }

    fn bytes(&mut self, rel: &str, bytes: &[u8]) -> Result<(), ScenarioError> {
        let path = self.dir.join(rel);
        fs::write(&path, bytes).map_err(|source| ScenarioError::Io { path, source })?;
        self.files.insert(rel.to_string(), sha256_hex(bytes));
        Ok(())
    }

    fn json(&mut self, rel: &str, value: &impl Serialize) -> Result<(), ScenarioError> {
        let mut text = serde_json::to_string_pretty(value).expect("report serializes");
        text.push('\n');
        self.bytes(rel, text.as_bytes())
    }

    fn field(&mut self, stem: &str, field: &RealField) -> Result<(), ScenarioError> {
        let name = stem.rsplit('/').next().expect("non-empty stem");
        write_real(&self.dir.join(stem), name, field)?;
        for ext in ["f64", "json"] {
            let rel = format!("{stem}.{ext}");
            let path = self.dir.join(&rel);
            let bytes = fs::read(&path).map_err(|source| ScenarioError::Io { path, source })?;
            self.files.insert(rel, sha256_hex(&bytes));
        }
        Ok(())
    }
}

/// Computed `κ` and the weight `M` used downstream (synthetic when configured).
pub fn curvature_stage(config: &ScenarioConfig, scenario: &Scenario) -> (CurvatureReport, RealField) {
    let curv = chern_curvature(&scenario.metric);
    let report = kappa_field(&curv, &scenario.metric, &config.extremizer.options());
    let m = scenario.synthetic_m.clone().unwrap_or_else(|| report.m.clone());
    (report, m)
}

fn minorant_stage(config: &ScenarioConfig, scenario: &Scenario, m: &RealField) -> Result<Option<(MinorantInfo, RealField)>, ScenarioError> {
    let (base, radius, level) = match &config.synthetic_m {
        Some(s) => (scenario.lattice.node_index(&s.basepoint), s.radius, s.level),
        None => {
            let ex = extrema(m);
            if !(ex.max > 0.0) {
                return Ok(None);
            }
            (ex.argmax, 0.25, 0.5)
        }
    };
    let mt = smooth_minorant(m, base, radius, level)?;
    Ok(Some((MinorantInfo { basepoint: base, radius: mt.radius, peak: mt.peak }, mt.field)))
}

fn write_curvature(w: &mut Writer, config: &ScenarioConfig, scenario: &Scenario, report: &CurvatureReport, m: &RealField) -> Result<(), ScenarioError> {
    let minorant = minorant_stage(config, scenario, m)?;
    w.field(&format!("{FIELDS_DIR}/kappa"), &report.kappa)?;
    w.field(&format!("{FIELDS_DIR}/M"), m)?;
    if let Some((_, field)) = &minorant {
        w.field(&format!("{FIELDS_DIR}/M_tilde"), field)?;
    }
    w.json(
        CURVATURE_FILE,
        &CurvatureFile {
            summary: report.summary(),
            m_source: if scenario.synthetic_m.is_some() { "synthetic" } else { "computed" },
            kappa_nonnegative: kappa_nonnegative(&report.kappa),
            minorant: minorant.map(|(info, _)| info),
        },
    )
}

fn write_manifest(w: &mut Writer, config: &ScenarioConfig, entries: usize) -> Result<Manifest, ScenarioError> {
    let mut versions = BTreeMap::new();
    versions.insert("kahler-core".to_string(), env!("CARGO_PKG_VERSION").to_string());
    versions.insert("dump_format".to_string(), "f64-le-row-major".to_string());
    let manifest = Manifest {
        scenario: config.name.clone(),
        config_sha256: sha256_hex(config.to_json().as_bytes()),
        versions,
        entries,
        files: w.files.clone(),
    };
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    let path = w.dir.join(MANIFEST);
    fs::write(&path, text).map_err(|source| ScenarioError::Io { path, source })?;
    Ok(manifest)
}

/// Full pipeline: curvature, ε-sweep, optional `ε = 0` solve, KW report and dumps.
pub fn run(config: &ScenarioConfig, out: &Path) -> Result<RunOutput, ScenarioError> {
    let scenario = config.build()?;
    let mut w = Writer::new(out)?;
    w.bytes(CONFIG_FILE, config.to_json().as_bytes())?;

    let (curvature, m) = curvature_stage(config, &scenario);
    log::info!("{}: kappa in [{:.4e}, {:.4e}]", config.name, extrema(&curvature.kappa).min, extrema(&curvature.kappa).max);
    write_curvature(&mut w, config, &scenario, &curvature, &m)?;

    let opts = config.solver.options();
    let mut record = epsilon_sweep(&scenario.metric, &scenario.twist, &scenario.schedule, &opts, Some(&m))
        .map_err(|e| ScenarioError::Solver(format!("{}: {e}", config.name)))?;
    if record.entries.len() >= 4 {
        record.classification = Some(classify_sweep(&record, config.classification_threshold)?);
    }
    w.bytes(SWEEP_CSV, record.to_csv().as_bytes())?;
    w.json(CLASSIFICATION_FILE, &ClassificationFile { volume: record.volume, classification: record.classification.clone() })?;

    w.field(&format!("{FIELDS_DIR}/volume_density"), &scenario.metric.volume_density())?;
    for (k, e) in record.entries.iter().enumerate() {
        w.field(&entry_stem("u", k), &e.solution.u)?;
        w.field(&entry_stem("T", k), &e.trace.t)?;
        w.field(&entry_stem("U", k), &e.solution.potential.osc)?;
    }

    let limit = if scenario.twist.field().worst_eigenvalue().0 > POSITIVITY_TOLERANCE {
        let sol = solve_limit(&scenario.metric, &scenario.twist, &opts)
            .map_err(|e| ScenarioError::Solver(format!("{}: limit solve: {e}", config.name)))?;
        let min_gap = record.entries.iter().map(|e| e.solution.inf_u - sol.inf_u).fold(f64::INFINITY, f64::min);
        w.field(&format!("{FIELDS_DIR}/u_limit"), &sol.u)?;
        w.json(
            LIMIT_FILE,
            &LimitFile {
                sup_u0: sol.sup_u,
                inf_u0: sol.inf_u,
                residual_sup: sol.residual_sup,
                newton_iterations: sol.newton_iterations,
                min_gap,
            },
        )?;
        Some(sol)
    } else {
        None
    };

    let applicable = kappa_nonnegative(&curvature.kappa);
    let mut kw = kw_report(&record, &m, &curvature.kappa, &scenario.metric, applicable, config.kw_tolerance)
        .map_err(|e| ScenarioError::Solver(format!("{}: kw report: {e}", config.name)))?;
    w.field(&format!("{FIELDS_DIR}/f"), &kw.f)?;
    kw.summary.f_dump = Some(format!("{FIELDS_DIR}/f"));
    if let Some(p) = &kw.phi_plus {
        w.field(&format!("{FIELDS_DIR}/phi_plus"), p)?;
        kw.summary.phi_plus_dump = Some(format!("{FIELDS_DIR}/phi_plus"));
    }
    w.json(KW_FILE, &kw.summary)?;

    let manifest = write_manifest(&mut w, config, record.entries.len())?;
    Ok(RunOutput { dir: out.to_path_buf(), record, curvature, m, limit, manifest })
}

/// Curvature stage alone: `curvature.json` plus `κ`, `M` and `M̃` dumps.
pub fn run_curvature(config: &ScenarioConfig, out: &Path) -> Result<CurvatureReport, ScenarioError> {
    let scenario = config.build()?;
    let mut w = Writer::new(out)?;
    w.bytes(CONFIG_FILE, config.to_json().as_bytes())?;
    let (report, m) = curvature_stage(config, &scenario);
    write_curvature(&mut w, config, &scenario, &report, &m)?;
    write_manifest(&mut w, config, 0)?;
    Ok(report)
}

#[derive(Clone, Debug, Serialize)]
pub struct SolveFile {
    pub epsilon: f64,
    pub sup_u: f64,
    pub inf_u: f64,
    pub residual_sup: f64,
    pub newton_iterations: usize,
    pub continuation_steps: usize,
    pub mass: f64,
    pub cohomological_mass: f64,
    pub min_trace_margin: f64,
    pub lambda_min_global: f64,
    pub sup_bound: Option<f64>,
}

/// Single solve at `eps`, continued from the schedule entries above it.
pub fn run_solve(config: &ScenarioConfig, eps: f64, out: &Path) -> Result<SolveFile, ScenarioError> {
    let scenario = config.build()?;
    let opts = config.solver.options();
    let solver = |e: crate::continuity::ContinuityError| ScenarioError::Solver(format!("{}: {e}", config.name));
    let mut warm: Option<Solution> = None;
    let mut steps = 0;
    for &e in scenario.schedule.iter().filter(|e| **e > eps) {
        warm = Some(solve_ma(&scenario.metric, &scenario.twist, e, &opts, warm.as_ref()).map_err(solver)?);
        steps += 1;
    }
    let sol = solve_ma(&scenario.metric, &scenario.twist, eps, &opts, warm.as_ref()).map_err(solver)?;
    let entry = sweep_entry(sol, &scenario.metric, &scenario.twist, None).map_err(solver)?;
    let mut w = Writer::new(out)?;
    w.bytes(CONFIG_FILE, config.to_json().as_bytes())?;
    w.field(&format!("{FIELDS_DIR}/u"), &entry.solution.u)?;
    w.field(&format!("{FIELDS_DIR}/T"), &entry.trace.t)?;
    w.field(&format!("{FIELDS_DIR}/U"), &entry.solution.potential.osc)?;
    let s = &entry.solution;
    let file = SolveFile {
        epsilon: eps,
        sup_u: s.sup_u,
        inf_u: s.inf_u,
        residual_sup: s.residual_sup,
        newton_iterations: s.newton_iterations,
        continuation_steps: steps,
        mass: entry.mass,
        cohomological_mass: entry.cohomological_mass,
        min_trace_margin: entry.min_trace_margin,
        lambda_min_global: entry.lambda_min_global,
        sup_bound: s.sup_bound,
    };
    w.json("solution.json", &file)?;
    write_manifest(&mut w, config, 1)?;
    Ok(file)
}
