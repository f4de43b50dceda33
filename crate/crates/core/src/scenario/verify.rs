use std::fs;
use std::path::Path;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::run::{
    entry_stem, kappa_nonnegative, run, sha256_hex, ClassificationFile, LimitFile, Manifest, CLASSIFICATION_FILE, FIELDS_DIR,
    KW_FILE, LIMIT_FILE, MANIFEST, SWEEP_CSV,
};
use super::{FieldSpec, Scenario, ScenarioConfig, ScenarioError};
use crate::continuity::{
    ma_residual_from_potential, sup_bound, trace_diagnostics, Potential, Solution, TraceDiagnostics, SWEEP_CSV_COLUMNS,
};
use crate::geometry::{
    bloch_vector, chern_curvature, fibonacci_sphere, hsc, kappa_field, ricci_form,
};
use crate::grid::{
    ddbar_matrix, extrema, flat_laplacian, integrate, project_resolved, read_real, solve_flat_poisson, sup_norm, wirtinger_derivative,
    RealField, Spectrum,
};
use crate::kw::{check_comparison, check_diff_inequality, guenancia_check, manufactured_triple, mbar, normalize_sup, weighted_laplacian};
use crate::linalg::HermitianField;

/// Every invariant a verification pass reports, in report order.
pub const INVARIANTS: [&str; 30] = [
    "grid.constant_derivative",
    "grid.mixed_derivatives_commute",
    "grid.divergence_theorem",
    "grid.poisson_roundtrip",
    "geometry.metric_valid",
    "geometry.curvature_symmetry",
    "geometry.metric_scaling",
    "geometry.kappa_dominates_samples",
    "geometry.argmax_direction",
    "geometry.ricci_independent",
    "geometry.product_hsc",
    "geometry.smooth_minorant",
    "continuity.residual",
    "continuity.positivity",
    "continuity.sup_bound",
    "continuity.monotonicity",
    "continuity.limit_lower_bound",
    "continuity.trace_lemma",
    "continuity.mass_identity",
    "kw.inf_normalization",
    "kw.mbar_invariance",
    "kw.comparison_soundness",
    "kw.pointwise_c_eps",
    "kw.supersolution_constants",
    "kw.diff_inequality",
    "kw.guenancia",
    "scenario.csv_schema",
    "scenario.manifest_hashes",
    "scenario.determinism",
    "scenario.completeness",
];

pub const VERIFY_FILE: &str = "verify_report.json";

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Skipped,
}

/// One invariant; `margin ≥ 0` (or `> 0` for strict checks) means satisfied.
#[derive(Clone, Debug, Serialize)]
pub struct VerifyEntry {
    pub name: String,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reason: Option<String>,
    pub margin: f64,
    pub tolerance: f64,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct VerifyReport {
    pub scenario: String,
    pub reused_run: bool,
    pub entries: Vec<VerifyEntry>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.entries.iter().all(|e| e.status != Status::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&VerifyEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn failures(&self) -> Vec<&VerifyEntry> {
        self.entries.iter().filter(|e| e.status == Status::Fail).collect()
    }
}

fn entry(name: &str, pass: bool, margin: f64, tolerance: f64, detail: String) -> VerifyEntry {
    VerifyEntry {
        name: name.to_string(),
        status: if pass { Status::Pass } else { Status::Fail },
        reason: None,
        margin,
        tolerance,
        detail,
    }
}

fn skipped(name: &str, reason: &str, margin: f64, tolerance: f64) -> VerifyEntry {
    VerifyEntry {
        name: name.to_string(),
        status: Status::Skipped,
        reason: Some(reason.to_string()),
        margin,
        tolerance,
        detail: String::new(),
    }
}

/// Slack `tolerance − error`; satisfied when non-negative.
fn bound(name: &str, error: f64, tolerance: f64, detail: String) -> VerifyEntry {
    let margin = tolerance - error;
    entry(name, margin >= 0.0, margin, tolerance, detail)
}

struct Loaded {
    scenario: Scenario,
    solutions: Vec<Solution>,
    traces: Vec<TraceDiagnostics>,
    volume_density: RealField,
    kappa: RealField,
    m: RealField,
    minorant: Option<RealField>,
    kw: serde_json::Value,
    limit: Option<(LimitFile, RealField)>,
    csv: String,
    classification: ClassificationFile,
}

fn read_text(dir: &Path, rel: &str) -> Result<String, ScenarioError> {
    let path = dir.join(rel);
    fs::read_to_string(&path).map_err(|source| ScenarioError::Io { path, source })
}

fn parse_json<T: serde::de::DeserializeOwned>(dir: &Path, rel: &str) -> Result<T, ScenarioError> {
    serde_json::from_str(&read_text(dir, rel)?).map_err(|e| ScenarioError::Artifact(format!("{rel}: {e}")))
}

/// Reconstructs a solution from its dumps: `ω_ε = εg + ρ₀ + ∂∂̄U_osc`.
fn rebuild(scenario: &Scenario, eps: f64, u: RealField, osc: RealField) -> Solution {
    let lattice = &scenario.lattice;
    let omega = scenario
        .metric
        .field()
        .scale(eps)
        .add(&HermitianField::constant(lattice, &scenario.twist.constant()))
        .add(&ddbar_matrix(&osc));
    let residual_sup = ma_residual_from_potential(&scenario.metric, &scenario.twist, eps, &u, &osc)
        .map_or(f64::INFINITY, |r| sup_norm(&r));
    let ex = extrema(&u);
    Solution {
        epsilon: eps,
        omega_eps: omega,
        residual_sup,
        newton_iterations: 0,
        sup_u: ex.max,
        inf_u: ex.min,
        sup_bound: sup_bound(&scenario.metric, &scenario.twist, eps),
        potential: Potential { mean: u.mean() + scenario.twist.potential().mean(), osc },
        u,
    }
}

fn load(config: &ScenarioConfig, dir: &Path, manifest: &Manifest) -> Result<Loaded, ScenarioError> {
    let scenario = config.build()?;
    let lat = scenario.lattice.clone();
    let field = |rel: &str| read_real(&dir.join(rel), &lat).map_err(|e| ScenarioError::Artifact(format!("{rel}: {e}")));
    let mut solutions = Vec::new();
    let mut traces = Vec::new();
    for (k, &eps) in scenario.schedule.iter().enumerate() {
        let sol = rebuild(&scenario, eps, field(&entry_stem("u", k))?, field(&entry_stem("U", k))?);
        // A tampered dump can leave ω_ε indefinite; the positivity entry reports it.
        let trace = trace_diagnostics(&sol, &scenario.metric).unwrap_or_else(|_| TraceDiagnostics {
            s: RealField::constant(&lat, f64::NAN),
            t: RealField::constant(&lat, f64::NAN),
            lambda_min: RealField::constant(&lat, f64::NEG_INFINITY),
        });
        solutions.push(sol);
        traces.push(trace);
    }
    let limit = if manifest.files.contains_key(LIMIT_FILE) {
        Some((parse_json::<LimitFile>(dir, LIMIT_FILE)?, field(&format!("{FIELDS_DIR}/u_limit"))?))
    } else {
        None
    };
    let minorant_rel = format!("{FIELDS_DIR}/M_tilde");
    let minorant = if manifest.files.contains_key(&format!("{minorant_rel}.f64")) { Some(field(&minorant_rel)?) } else { None };
    Ok(Loaded {
        volume_density: field(&format!("{FIELDS_DIR}/volume_density"))?,
        kappa: field(&format!("{FIELDS_DIR}/kappa"))?,
        m: field(&format!("{FIELDS_DIR}/M"))?,
        minorant,
        kw: parse_json(dir, KW_FILE)?,
        limit,
        csv: read_text(dir, SWEEP_CSV)?,
        classification: parse_json(dir, CLASSIFICATION_FILE)?,
        scenario,
        solutions,
        traces,
    })
}

fn grid_checks(loaded: &Loaded, rng: &mut ChaCha8Rng, out: &mut Vec<VerifyEntry>) -> Result<(), ScenarioError> {
    let lat = &loaded.scenario.lattice;
    let n = lat.dim_c();
    let constant = RealField::constant(lat, 3.7).to_complex();
    let mut worst: f64 = 0.0;
    for a in 0..n {
        for conj in [false, true] {
            let d = wirtinger_derivative(&constant, a, conj)?;
            worst = worst.max(d.values().iter().map(|v| v.norm()).fold(0.0, f64::max));
        }
    }
    out.push(bound("grid.constant_derivative", worst, 1e-12, "max |d(const)|".into()));

    let h = FieldSpec::random(lat.real_axes(), 3, 6, rng).evaluate(lat)?;
    let hc = h.to_complex();
    let mut rel: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let ab = wirtinger_derivative(&wirtinger_derivative(&hc, b, true)?, a, false)?;
            let ba = wirtinger_derivative(&wirtinger_derivative(&hc, a, false)?, b, true)?;
            let scale = ab.values().iter().map(|v| v.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            let diff = ab.values().iter().zip(ba.values()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            rel = rel.max(diff / scale);
        }
    }
    out.push(bound("grid.mixed_derivatives_commute", rel, 1e-10, "relative, seeded band-limited field".into()));

    let last = loaded.solutions.last().expect("non-empty schedule");
    let mut worst: f64 = 0.0;
    for f in [&h, &last.u] {
        let s = sup_norm(f);
        if s > 0.0 {
            worst = worst.max(integrate(&flat_laplacian(f)).abs() / s);
        }
    }
    out.push(bound("grid.divergence_theorem", worst, 1e-10, "|∫Lh| / sup|h| for a seeded field and u at the smallest ε".into()));

    let mean = h.mean();
    let h0 = h.map(|v| v - mean);
    let back = solve_flat_poisson(&flat_laplacian(&h0)).field;
    let err = sup_norm(&back.zip_map(&h0, |a, b| a - b)) / sup_norm(&h0).max(f64::MIN_POSITIVE);
    out.push(bound("grid.poisson_roundtrip", err, 1e-10, "relative".into()));
    Ok(())
}

fn random_direction(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
    loop {
        let v: Vec<Complex64> = (0..n).map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
        if v.iter().map(|c| c.norm_sqr()).sum::<f64>() > 1e-6 {
            return v;
        }
    }
}

fn sample_nodes(rng: &mut ChaCha8Rng, len: usize, count: usize) -> Vec<usize> {
    if len <= count {
        (0..len).collect()
    } else {
        (0..count).map(|_| rng.random_range(0..len)).collect()
    }
}

fn geometry_checks(config: &ScenarioConfig, loaded: &Loaded, rng: &mut ChaCha8Rng, out: &mut Vec<VerifyEntry>) -> Result<(), ScenarioError> {
    let s = &loaded.scenario;
    let g = &s.metric;
    let lat = &s.lattice;
    let n = g.n();

    let herm = (0..lat.len()).map(|k| g.at(k).hermitian_defect()).fold(0.0, f64::max);
    let (eig, node) = g.field().worst_eigenvalue();
    let margin = (eig - 1e-10).min(1e-12 - herm);
    out.push(entry(
        "geometry.metric_valid",
        herm <= 1e-12 && eig > 1e-10,
        margin,
        1e-10,
        format!("min eigenvalue {eig:.3e} at node {node}, Hermitian defect {herm:.3e}"),
    ));

    let curv = chern_curvature(g);
    let scale = curv.max_abs().max(f64::MIN_POSITIVE);
    let defect = curv.hermitian_defect().max(curv.kahler_defect()) / scale;
    out.push(bound("geometry.curvature_symmetry", if curv.max_abs() == 0.0 { 0.0 } else { defect }, 1e-10, "relative Hermitian and Kähler defects".into()));

    let c = 2.5;
    let scaled = g.scaled(c)?;
    let curv_c = chern_curvature(&scaled);
    let opts = config.extremizer.options();
    let kappa_c = kappa_field(&curv_c, &scaled, &opts).kappa;
    let nodes = sample_nodes(rng, lat.len(), 64);
    let mut hsc_err: f64 = 0.0;
    let mut hsc_scale: f64 = f64::MIN_POSITIVE;
    for &node in &nodes {
        let v = random_direction(rng, n);
        let h = hsc(&curv, g, node, &v)?;
        let hc = hsc(&curv_c, &scaled, node, &v)?;
        hsc_err = hsc_err.max((hc * c - h).abs());
        hsc_scale = hsc_scale.max(h.abs());
    }
    let k_scale = sup_norm(&loaded.kappa).max(f64::MIN_POSITIVE);
    let k_err = sup_norm(&kappa_c.zip_map(&loaded.kappa, |a, b| a * c - b)) / k_scale;
    let rel = if sup_norm(&loaded.kappa) == 0.0 && hsc_err == 0.0 { 0.0 } else { (hsc_err / hsc_scale).max(k_err) };
    out.push(bound("geometry.metric_scaling", rel, 1e-10, format!("g -> {c} g; relative error of c·hsc and c·κ")));

    // Directions the extremizer saw plus independent random ones.
    let mut worst = f64::INFINITY;
    let mut count = 0usize;
    let tol = 1e-12 * k_scale.max(1.0);
    if n == 1 {
        for node in 0..lat.len() {
            let h = hsc(&curv, g, node, &[Complex64::new(1.0, 0.0)])?;
            worst = worst.min(-loaded.kappa.values()[node] - h);
            count += 1;
        }
    } else {
        let sphere = fibonacci_sphere(opts.samples);
        for &node in nodes.iter().take(32) {
            let mut dirs: Vec<Vec<Complex64>> = (0..64).map(|_| random_direction(rng, 2)).collect();
            dirs.extend(sphere.iter().map(|p| bloch_vector(p).to_vec()));
            for v in dirs {
                let h = hsc(&curv, g, node, &v)?;
                worst = worst.min(-loaded.kappa.values()[node] - h);
                count += 1;
            }
        }
    }
    out.push(entry(
        "geometry.kappa_dominates_samples",
        worst + tol >= 0.0,
        worst,
        tol,
        format!("min (−κ − hsc(w)) over {count} node/direction pairs"),
    ));

    let report = kappa_field(&curv, g, &opts);
    let mut worst: f64 = 0.0;
    for node in 0..lat.len() {
        let v = &report.directions[node][..n];
        let h = hsc(&curv, g, node, v)?;
        worst = worst.max((h + report.kappa.values()[node]).abs());
    }
    out.push(bound("geometry.argmax_direction", worst / k_scale.max(1.0), 1e-10, "|hsc(stored direction) + κ|, relative".into()));

    let ric = ricci_form(g);
    let det = g.volume_density();
    let spec = Spectrum::of_real(&det);
    let mut err: f64 = 0.0;
    for k in 0..n {
        let dk = spec.dz(k);
        for l in 0..n {
            let dl = spec.dzbar(l);
            let dkl = spec.ddbar(k, l);
            for node in 0..lat.len() {
                let d = det.values()[node];
                let alt = -(dkl[node] / d - dk[node] * dl[node] / (d * d));
                err = err.max((alt - ric.at(node).get(k, l)).norm());
            }
        }
    }
    let ric_scale = ric.max_abs().max(1.0);
    out.push(bound(
        "geometry.ricci_independent",
        err / ric_scale,
        1e-10,
        "−∂∂̄ log det g against the quotient rule on det g".into(),
    ));

    match &s.factors {
        Some((g1, g2)) => {
            let c1 = chern_curvature(g1);
            let c2 = chern_curvature(g2);
            let one = [Complex64::new(1.0, 0.0)];
            let inner = g2.lattice().len();
            let mut err: f64 = 0.0;
            let mut scale: f64 = f64::MIN_POSITIVE;
            for &node in &nodes {
                let (p, q) = (node / inner, node % inner);
                let v = random_direction(rng, 2);
                let h1 = hsc(&c1, g1, p, &one)?;
                let h2 = hsc(&c2, g2, q, &one)?;
                let n1 = g1.at(p).get(0, 0).re * v[0].norm_sqr();
                let n2 = g2.at(q).get(0, 0).re * v[1].norm_sqr();
                let expect = (h1 * n1 * n1 + h2 * n2 * n2) / ((n1 + n2) * (n1 + n2));
                let got = hsc(&curv, g, node, &v)?;
                err = err.max((got - expect).abs());
                scale = scale.max(h1.abs()).max(h2.abs());
            }
            out.push(bound("geometry.product_hsc", err / scale, 1e-8, format!("{} seeded nodes", nodes.len())));
        }
        None => out.push(skipped("geometry.product_hsc", "model is not a product", 0.0, 1e-8)),
    }

    match &loaded.minorant {
        Some(mt) => {
            let m = &loaded.m;
            let mut margin = f64::INFINITY;
            for (t, mv) in mt.values().iter().zip(m.values()) {
                margin = margin.min(*t).min(mv.max(0.0) - t);
            }
            let (base, level) = match &config.synthetic_m {
                Some(sm) => (lat.node_index(&sm.basepoint), sm.level),
                None => (extrema(m).argmax, 0.5),
            };
            let peak_margin = mt.values()[base] - level * m.values()[base];
            margin = margin.min(peak_margin);
            out.push(entry(
                "geometry.smooth_minorant",
                margin >= 0.0,
                margin,
                0.0,
                format!("0 ≤ M̃ ≤ max(M, 0) everywhere and M̃(x0) ≥ {level}·M(x0) at node {base}"),
            ));
        }
        None => out.push(skipped("geometry.smooth_minorant", "M has no positive node", 0.0, 0.0)),
    }
    Ok(())
}

fn continuity_checks(config: &ScenarioConfig, loaded: &Loaded, out: &mut Vec<VerifyEntry>) {
    let s = &loaded.scenario;
    let n = s.metric.n();
    let tol = config.solver.tolerance;
    let residual = loaded.solutions.iter().map(|sol| sol.residual_sup).fold(0.0, f64::max);
    out.push(bound(
        "continuity.residual",
        residual,
        tol,
        format!("independent pass over {} dumped solutions", loaded.solutions.len()),
    ));

    let lambda = loaded.traces.iter().map(|t| extrema(&t.lambda_min).min).fold(f64::INFINITY, f64::min);
    out.push(entry("continuity.positivity", lambda > 0.0, lambda, 0.0, "min generalized eigenvalue of ω_ε against g".into()));

    let bounded: Vec<f64> = loaded.solutions.iter().filter_map(|sol| sol.sup_bound.map(|b| b + 1e-8 - sol.sup_u)).collect();
    if bounded.is_empty() {
        out.push(skipped("continuity.sup_bound", "εg + ρ is not pointwise positive for any ε", 0.0, 1e-8));
    } else {
        let m = bounded.iter().cloned().fold(f64::INFINITY, f64::min);
        out.push(entry("continuity.sup_bound", m >= 0.0, m, 1e-8, format!("{} entries with positive εg + ρ", bounded.len())));
    }

    if loaded.solutions.len() < 2 {
        out.push(skipped("continuity.monotonicity", "fewer than two sweep entries", 0.0, 1e-8));
    } else {
        let m = loaded
            .solutions
            .windows(2)
            .map(|w| extrema(&w[0].u.zip_map(&w[1].u, |hi, lo| hi - lo)).min + 1e-8)
            .fold(f64::INFINITY, f64::min);
        out.push(entry("continuity.monotonicity", m >= 0.0, m, 1e-8, "min (u_{ε_k} − u_{ε_{k+1}}) + tol".into()));
    }

    match &loaded.limit {
        Some((file, u0)) => {
            let inf0 = extrema(u0).min;
            let m = loaded.solutions.iter().map(|sol| sol.inf_u - inf0 + 1e-8).fold(f64::INFINITY, f64::min);
            let consistent = (file.inf_u0 - inf0).abs() <= 1e-12 * inf0.abs().max(1.0);
            out.push(entry(
                "continuity.limit_lower_bound",
                m >= 0.0 && consistent,
                m,
                1e-8,
                format!("u_ε ≥ inf u₀ = {inf0:.12e}"),
            ));
        }
        None => out.push(skipped("continuity.limit_lower_bound", "ρ is not pointwise positive; no ε = 0 solve", 0.0, 1e-8)),
    }

    let lemma = loaded
        .solutions
        .iter()
        .zip(&loaded.traces)
        .map(|(sol, t)| t.min_lemma_margin(sol))
        .fold(f64::INFINITY, f64::min);
    if n == 1 {
        out.push(skipped(
            "continuity.trace_lemma",
            "n = 1: T_ε = −u_ε identically, so the strict inequality requires n ≥ 2",
            lemma,
            0.0,
        ));
    } else {
        out.push(entry("continuity.trace_lemma", lemma > 0.0, lemma, 0.0, "min (T_ε + u_ε/n) over all entries".into()));
    }

    let mut worst: f64 = 0.0;
    for sol in &loaded.solutions {
        let m = integrate(&sol.u.zip_map(&loaded.volume_density, |u, d| u.exp() * d));
        let c = s.twist.cohomological_mass(sol.epsilon);
        worst = worst.max((m - c).abs() / c.abs().max(f64::MIN_POSITIVE));
    }
    out.push(bound("continuity.mass_identity", worst, 1e-6, "relative, mass recomputed from dumps".into()));
}

fn kw_checks(config: &ScenarioConfig, dir: &Path, loaded: &Loaded, out: &mut Vec<VerifyEntry>) -> Result<(), ScenarioError> {
    let s = &loaded.scenario;
    let n = s.metric.n();
    let m = &loaded.m;
    let last = loaded.solutions.last().expect("non-empty schedule");
    let last_trace = loaded.traces.last().expect("non-empty schedule");
    let num = |key: &str| loaded.kw.get(key).and_then(serde_json::Value::as_f64);

    let f = read_real(&dir.join(format!("{FIELDS_DIR}/f")), &s.lattice)?;
    let mbar_eps = num("mbar_eps").unwrap_or(f64::NAN);
    let projected = num("f_projected_mean").unwrap_or(f64::NAN);
    match weighted_laplacian(&last.omega_eps, &f) {
        Ok(lap) => {
            let defect = RealField::new(
                &s.lattice,
                (0..f.len()).map(|k| lap.values()[k] - (m.values()[k] - mbar_eps - projected)).collect(),
            )?;
            let res = sup_norm(&project_resolved(&defect));
            let unresolved = sup_norm(&defect);
            let inf = extrema(&f).min;
            let mut e = bound(
                "kw.inf_normalization",
                res,
                1e-9,
                format!("inf f = {inf:e}, residual {res:.3e} on resolved modes, {unresolved:.3e} in total"),
            );
            if inf != 0.0 {
                e.status = Status::Fail;
            }
            out.push(e);
        }
        Err(err) => out.push(entry("kw.inf_normalization", false, f64::NEG_INFINITY, 1e-9, err.to_string())),
    }

    let worst = loaded
        .solutions
        .iter()
        .map(|sol| {
            let a = mbar(&sol.u, m, &s.metric);
            let b = mbar(&normalize_sup(&sol.u), m, &s.metric);
            (a - b).abs() / a.abs().max(1.0)
        })
        .fold(0.0, f64::max);
    out.push(bound("kw.mbar_invariance", worst, 1e-12, "mbar(u) against mbar(u − sup u)".into()));

    let mut verified = 0usize;
    let mut margin = f64::INFINITY;
    let mut unverified = 0usize;
    for i in 0..config.manufactured_pairs {
        let seed = config.seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
        match manufactured_triple(&last.omega_eps, seed) {
            Ok(t) => {
                let r = check_comparison(&t.phi_minus, &t.phi_plus, &t.m, &last.omega_eps, 0.0)?;
                if r.is_sub && r.is_super {
                    verified += 1;
                    margin = margin.min(r.ordering_margin);
                } else {
                    unverified += 1;
                }
            }
            Err(crate::kw::KwError::Inapplicable(_)) => unverified += 1,
            Err(e) => return Err(e.into()),
        }
    }
    out.push(entry(
        "kw.comparison_soundness",
        verified > 0 && margin >= -1e-8,
        margin,
        1e-8,
        format!("{verified} verified pairs, {unverified} without verified residual signs"),
    ));

    let c_margin = loaded
        .solutions
        .iter()
        .zip(&loaded.traces)
        .map(|(sol, t)| guenancia_check(sol, t, m, &s.metric, config.kw_tolerance).pointwise_margin)
        .fold(f64::INFINITY, f64::min);
    if n == 1 {
        out.push(skipped("kw.pointwise_c_eps", "n = 1: e^{T_ε} = e^{−u_ε} attains C_ε, strictness requires n ≥ 2", c_margin, 0.0));
    } else {
        out.push(entry("kw.pointwise_c_eps", c_margin > 0.0, c_margin, 0.0, "min (e^{T_ε} − C_ε)".into()));
    }

    match (num("A"), num("B"), num("tail_max_one_minus_a_mbar")) {
        (Some(a), Some(b), Some(tail)) => {
            let m0 = loaded.kw.get("mbar0").and_then(|v| v.get("value")).and_then(serde_json::Value::as_f64).unwrap_or(f64::NAN);
            let consistent = (a - 2.0 / m0).abs() <= 1e-12 * a.abs() && (b - (a.ln() + 1.0)).abs() <= 1e-12 * b.abs();
            let meb = m.values().iter().filter(|v| **v >= 0.0).map(|v| v * (b.exp() - a)).fold(f64::INFINITY, f64::min);
            let margin = (-tail).min(meb);
            out.push(entry(
                "kw.supersolution_constants",
                tail < 0.0 && meb >= 0.0 && consistent,
                margin,
                0.0,
                format!("A = {a}, B = {b}, max tail 1 − A·M̄ = {tail:e}, min M(e^B − A) = {meb:e}"),
            ));
        }
        _ => out.push(skipped(
            "kw.supersolution_constants",
            "hypotheses: M̄₀ ≤ 0 or no tail estimate",
            0.0,
            0.0,
        )),
    }

    let applicable = kappa_nonnegative(&loaded.kappa);
    let diff = loaded
        .solutions
        .iter()
        .zip(&loaded.traces)
        .map(|(sol, t)| check_diff_inequality(sol, t, &loaded.kappa).map(|d| d.min_residual))
        .collect::<Result<Vec<f64>, _>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    if applicable {
        out.push(entry("kw.diff_inequality", diff >= -1e-8, diff, 1e-8, "min residual over all entries".into()));
    } else {
        out.push(skipped("kw.diff_inequality", "hypotheses: κ sign-changing", diff, 1e-8));
    }

    let tol = config.kw_tolerance;
    let g = guenancia_check(last, last_trace, m, &s.metric, tol);
    let g_margin = g.rhs - g.lhs + tol;
    if !applicable {
        out.push(skipped("kw.guenancia", "hypotheses: κ sign-changing", g_margin, tol));
    } else if s.synthetic_m.is_some() {
        out.push(skipped("kw.guenancia", "hypotheses: M is a synthetic override, not the curvature of g", g_margin, tol));
    } else {
        out.push(entry("kw.guenancia", g.holds, g_margin, tol, format!("lhs {:.6e}, rhs {:.6e}", g.lhs, g.rhs)));
    }
    Ok(())
}

fn scenario_checks(config: &ScenarioConfig, dir: &Path, loaded: &Loaded, manifest: &Manifest, out: &mut Vec<VerifyEntry>) -> Result<(), ScenarioError> {
    let mut lines = loaded.csv.lines();
    let header_ok = lines.next() == Some(SWEEP_CSV_COLUMNS.join(",").as_str());
    let rows: Vec<&str> = lines.collect();
    let rows_ok = rows.len() == loaded.solutions.len() && rows.iter().all(|r| r.split(',').count() == SWEEP_CSV_COLUMNS.len());
    let class_ok = loaded.classification.volume.is_finite();
    out.push(entry(
        "scenario.csv_schema",
        header_ok && rows_ok && class_ok,
        if header_ok && rows_ok { 0.0 } else { -1.0 },
        0.0,
        format!("{} rows, header {}", rows.len(), if header_ok { "matches" } else { "differs" }),
    ));

    let mut bad = Vec::new();
    for (rel, hash) in &manifest.files {
        match fs::read(dir.join(rel)) {
            Ok(bytes) if sha256_hex(&bytes) == *hash => {}
            _ => bad.push(rel.clone()),
        }
    }
    out.push(entry(
        "scenario.manifest_hashes",
        bad.is_empty(),
        -(bad.len() as f64),
        0.0,
        if bad.is_empty() { format!("{} files", manifest.files.len()) } else { format!("mismatched: {}", bad.join(", ")) },
    ));

    let rerun_dir = dir.join(".rerun");
    let rerun = run(config, &rerun_dir)?;
    let mut diffs = Vec::new();
    let manifest_name = MANIFEST.to_string();
    for rel in rerun.manifest.files.keys().chain(std::iter::once(&manifest_name)) {
        let a = fs::read(dir.join(rel)).ok();
        let b = fs::read(rerun_dir.join(rel)).ok();
        if a.is_none() || a != b {
            diffs.push(rel.clone());
        }
    }
    fs::remove_dir_all(&rerun_dir).map_err(|source| ScenarioError::Io { path: rerun_dir.clone(), source })?;
    out.push(entry(
        "scenario.determinism",
        diffs.is_empty(),
        -(diffs.len() as f64),
        0.0,
        if diffs.is_empty() {
            format!("{} files byte-identical on rerun", rerun.manifest.files.len() + 1)
        } else {
            format!("differs on rerun: {}", diffs.join(", "))
        },
    ));
    Ok(())
}

/// Runs (or reuses) the scenario output in `dir` and checks every invariant
/// against the dumped artifacts.
pub fn verify(config: &ScenarioConfig, dir: &Path) -> Result<VerifyReport, ScenarioError> {
    let hash = sha256_hex(config.to_json().as_bytes());
    let reused_run = matches!(Manifest::load(dir), Ok(m) if m.config_sha256 == hash);
    if !reused_run {
        run(config, dir)?;
    }
    let manifest = Manifest::load(dir)?;
    let loaded = load(config, dir, &manifest)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut entries = Vec::with_capacity(INVARIANTS.len());
    grid_checks(&loaded, &mut rng, &mut entries)?;
    geometry_checks(config, &loaded, &mut rng, &mut entries)?;
    continuity_checks(config, &loaded, &mut entries);
    kw_checks(config, dir, &loaded, &mut entries)?;
    scenario_checks(config, dir, &loaded, &manifest, &mut entries)?;

    let mut names: Vec<&str> = entries.iter().map(|e| e.name.as_str()).collect();
    names.push("scenario.completeness");
    let complete = names.len() == INVARIANTS.len() && INVARIANTS.iter().all(|n| names.iter().filter(|m| *m == n).count() == 1);
    entries.push(entry(
        "scenario.completeness",
        complete,
        if complete { 0.0 } else { -1.0 },
        0.0,
        format!("{} of {} invariants reported", names.len(), INVARIANTS.len()),
    ));

    let report = VerifyReport { scenario: config.name.clone(), reused_run, entries };
    let mut text = serde_json::to_string_pretty(&report).expect("report serializes");
    text.push('\n');
    let path = dir.join(VERIFY_FILE);
    fs::write(&path, text).map_err(|source| ScenarioError::Io { path, source })?;
    Ok(report)
}
