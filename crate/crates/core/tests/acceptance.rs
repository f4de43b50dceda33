//! Acceptance criteria for the continuity laboratory.
//!
//! Runs as a plain binary under `cargo test`, printing one line per
//! criterion. The process fails if any asserted check fails.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use kahler_core::continuity::{
    classify_sweep, epsilon_sweep, geometric_schedule, solve_limit, solve_ma, sweep_entry, trace_diagnostics,
    Classification, Solution, SolverOptions, SweepRecord, TwistField,
};
use kahler_core::geometry::{chern_curvature, kappa_field, ExtremizerOptions, MetricField};
use kahler_core::grid::{extrema, flat_laplacian, solve_shifted, sup_norm, Lattice, RealField};
use kahler_core::kw::{
    check_comparison, check_diff_inequality, kw_report, manufactured_triple, solve_weighted_poisson, weighted_laplacian,
};
use kahler_core::linalg::{HermitianField, HMat};
use kahler_core::scenario::{load_scenario, run};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

struct Outcome {
    passed: bool,
    detail: String,
    /// Literal criterion is out of reach; `passed` then refers to the documented weaker form.
    known_gap: Option<String>,
}

impl Outcome {
    fn new(passed: bool, detail: String) -> Self {
        Self { passed, detail, known_gap: None }
    }
}

type Sweeps = Vec<(String, SweepRecord)>;

fn opts() -> SolverOptions {
    SolverOptions::default()
}

fn flat(n: usize, res: usize) -> MetricField {
    MetricField::flat(&Lattice::unit(n, res).unwrap(), HMat::identity(n)).unwrap()
}

fn max_dev(field: &RealField, value: f64) -> f64 {
    field.values().iter().map(|v| (v - value).abs()).fold(0.0, f64::max)
}

fn sweep_with(metric: &MetricField, twist: &TwistField, schedule: &[f64], m: Option<&RealField>) -> (SweepRecord, f64) {
    let mut entries = Vec::with_capacity(schedule.len());
    let mut slowest: f64 = 0.0;
    let mut prev: Option<Solution> = None;
    for &eps in schedule {
        let t0 = Instant::now();
        let sol = solve_ma(metric, twist, eps, &opts(), prev.as_ref()).unwrap();
        slowest = slowest.max(t0.elapsed().as_secs_f64());
        prev = Some(sol.clone());
        entries.push(sweep_entry(sol, metric, twist, m).unwrap());
    }
    let mut record = SweepRecord { n: metric.n(), volume: metric.volume(), entries, classification: None };
    record.classification = Some(classify_sweep(&record, None).unwrap());
    (record, slowest)
}

fn flat_torus(sweeps: &mut Sweeps) -> Outcome {
    let g = flat(1, 64);
    let twist = TwistField::geometric(&g);
    let (record, slowest) = sweep_with(&g, &twist, &geometric_schedule(20), None);
    let vol = g.volume();
    let u_err = record.entries.iter().map(|e| max_dev(&e.solution.u, e.epsilon().ln())).fold(0.0, f64::max);
    let m_err = record.entries.iter().map(|e| (e.mass - e.epsilon() * vol).abs()).fold(0.0, f64::max);
    let class = record.classification.as_ref().unwrap().classification;
    sweeps.push(("flat n=1 64²".into(), record));
    Outcome::new(
        u_err <= 1e-9 && m_err <= 1e-9 && slowest < 1.0 && class == Classification::Collapsing,
        format!("|u − log ε| ≤ {u_err:.1e}, |mass − ε·Vol| ≤ {m_err:.1e}, slowest solve {slowest:.3} s, {class:?}"),
    )
}

fn lambda_twist(sweeps: &mut Sweeps) -> Outcome {
    let lambda = 0.7;
    let mut ok = true;
    let mut parts = Vec::new();
    for (n, res) in [(1usize, 64usize), (2, 16)] {
        let g = flat(n, res);
        let twist = TwistField::synthetic(&g, lambda, &RealField::zeros(g.lattice())).unwrap();
        let (record, _) = sweep_with(&g, &twist, &geometric_schedule(20), None);
        let nf = n as f64;
        let vol = g.volume();
        let u_err = record
            .entries
            .iter()
            .map(|e| max_dev(&e.solution.u, nf * (e.epsilon() + lambda).ln()))
            .fold(0.0, f64::max);
        let m_err = record
            .entries
            .iter()
            .map(|e| (e.mass - (e.epsilon() + lambda).powi(n as i32) * vol).abs())
            .fold(0.0, f64::max);
        let class = record.classification.as_ref().unwrap();
        let mass0_err = (class.extrapolated_mass0 - lambda.powi(n as i32) * vol).abs();
        let limit = solve_limit(&g, &twist, &opts()).unwrap();
        let lim_err = max_dev(&limit.u, nf * lambda.ln());
        let below = record
            .entries
            .iter()
            .map(|e| extrema(&e.solution.u).min - limit.inf_u)
            .fold(f64::INFINITY, f64::min);
        ok &= u_err <= 1e-9
            && m_err <= 1e-8
            && class.classification == Classification::BigLimit
            && mass0_err <= 1e-6
            && lim_err <= 1e-9
            && below >= -1e-8;
        parts.push(format!(
            "n={n}: |u| {u_err:.1e}, mass {m_err:.1e}, {:?} mass₀ {mass0_err:.1e}, u₀ {lim_err:.1e}, min(u_ε − inf u₀) {below:.3}",
            class.classification
        ));
        sweeps.push((format!("λ-twist n={n}"), record));
    }
    Outcome::new(ok, parts.join("; "))
}

fn conformal_metric(res: usize) -> MetricField {
    let lat = Lattice::unit(1, res).unwrap();
    MetricField::conformal(&RealField::from_fn(&lat, |x| 0.3 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos())).unwrap()
}

/// `Δ̃u − cu = e^u g − εg − Δ̃ log g − cu`, where `Δ̃ = ∂∂̄`, iterated to a fixed point with `c ≥ sup e^u g`.
fn semilinear_oracle(g: &MetricField, eps: f64) -> RealField {
    let density = g.volume_density();
    let lap_log = flat_laplacian(&g.log_det());
    let mut u = RealField::constant(g.lattice(), eps.ln());
    for _ in 0..5000 {
        let eg = u.zip_map(&density, |u, d| u.exp() * d);
        let c = 1.05 * extrema(&eg).max;
        let rhs: Vec<f64> = (0..u.len())
            .map(|k| eg.values()[k] - eps * density.values()[k] - lap_log.values()[k] - c * u.values()[k])
            .collect();
        let next = solve_shifted(&RealField::new(g.lattice(), rhs).unwrap(), 1.0, c);
        let change = sup_norm(&next.zip_map(&u, |a, b| a - b));
        u = next;
        if change < 1e-14 {
            break;
        }
    }
    u
}

fn conformal_torus(sweeps: &mut Sweeps) -> Outcome {
    let g = conformal_metric(128);
    let twist = TwistField::geometric(&g);
    let mut worst_oracle: f64 = 0.0;
    let mut prev: Option<Solution> = None;
    for eps in [1.0, 0.25, 1.0 / 16.0] {
        let sol = solve_ma(&g, &twist, eps, &opts(), prev.as_ref()).unwrap();
        let oracle = semilinear_oracle(&g, eps);
        worst_oracle = worst_oracle.max(sup_norm(&sol.u.zip_map(&oracle, |a, b| a - b)));
        prev = Some(sol);
    }
    let (record, _) = sweep_with(&g, &twist, &geometric_schedule(12), None);
    let vol = g.volume();
    let m_err = record.entries.iter().map(|e| (e.mass - e.epsilon() * vol).abs()).fold(0.0, f64::max);
    let class = record.classification.as_ref().unwrap().classification;
    sweeps.push(("conformal 128²".into(), record));
    Outcome::new(
        worst_oracle <= 1e-6 && m_err <= 1e-5 && class == Classification::Collapsing,
        format!("|u − oracle| ≤ {worst_oracle:.1e} at ε ∈ {{1, ¼, 1/16}}, |mass − ε·Vol| ≤ {m_err:.1e}, {class:?}"),
    )
}

fn scenario_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn shipped_suite(sweeps: &mut Sweeps) {
    let tmp = tempfile::tempdir().unwrap();
    let mut paths: Vec<PathBuf> = std::fs::read_dir(scenario_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    for path in paths {
        let config = load_scenario(&path).unwrap();
        let out = run(&config, &tmp.path().join(&config.name)).unwrap();
        sweeps.push((format!("scenario {}", config.name), out.record));
    }
}

fn trace_lemma(sweeps: &Sweeps) -> Outcome {
    let mut strict_min = f64::INFINITY;
    let mut equality_max: f64 = 0.0;
    let mut equality_min = f64::INFINITY;
    let mut c_eps_min = f64::INFINITY;
    let mut solutions = 0;
    let mut one_dim = 0;
    for (_, record) in sweeps {
        for e in &record.entries {
            solutions += 1;
            let margin = e.trace.lemma_margin(&e.solution);
            let n = record.n as f64;
            let c_eps = e.solution.u.values().iter().map(|u| (-u / n).exp()).fold(f64::INFINITY, f64::min);
            let c_rel = (extrema(&e.trace.t.map(f64::exp)).min - c_eps) / c_eps;
            if record.n == 1 {
                one_dim += 1;
                equality_max = equality_max.max(sup_norm(&margin));
                equality_min = equality_min.min(extrema(&margin).min);
            } else {
                strict_min = strict_min.min(extrema(&margin).min);
                c_eps_min = c_eps_min.min(c_rel);
            }
        }
    }
    let mut out = Outcome::new(
        strict_min > 0.0 && c_eps_min > 0.0 && equality_max <= 1e-12,
        format!(
            "{solutions} solutions; n ≥ 2: min(T + u/n) = {strict_min:.3e}, min(e^T − C_ε)/C_ε = {c_eps_min:.3e}; \
             n = 1 ({one_dim} solutions): |T + u| ≤ {equality_max:.1e}, min {equality_min:.1e}"
        ),
    );
    if one_dim > 0 && equality_min <= 0.0 {
        out.known_gap = Some("n = 1 forces T_ε = −u_ε, so the margin is rounding-level zero, not strictly positive".into());
    }
    out
}

fn conformal_factor(res: usize, f: impl Fn(&[f64]) -> f64) -> MetricField {
    MetricField::conformal(&RealField::from_fn(&Lattice::unit(1, res).unwrap(), f)).unwrap()
}

/// Factor HSC of `g = e^f` in closed form: `−e^{−f} ∂∂̄f` with `∂∂̄ = Δ/4`.
fn factor_hsc(f: f64, lap_f: f64) -> f64 {
    -(-f).exp() * lap_f / 4.0
}

fn curvature_engine() -> Outcome {
    let (a, b) = (0.4, 0.25);
    let fa = |x: &[f64]| a * (2.0 * PI * x[0]).cos();
    let fb = |x: &[f64]| b * (2.0 * PI * x[1]).sin();
    let g1 = conformal_factor(16, fa);
    let g2 = conformal_factor(16, fb);
    let g = MetricField::product(&g1, &g2).unwrap();
    let curv = chern_curvature(&g);
    let scale = curv.max_abs();
    let herm = curv.hermitian_defect() / scale;
    let kahler = curv.kahler_defect() / scale;

    let (c1, c2) = (chern_curvature(&g1), chern_curvature(&g2));
    let inner = g2.lattice().len();
    let mut block: f64 = 0.0;
    for node in 0..g.lattice().len() {
        let (p, q) = (node / inner, node % inner);
        for i in 0..2 {
            for j in 0..2 {
                for k in 0..2 {
                    for l in 0..2 {
                        let expect = match (i, j, k, l) {
                            (0, 0, 0, 0) => c1.get(p, 0, 0, 0, 0),
                            (1, 1, 1, 1) => c2.get(q, 0, 0, 0, 0),
                            _ => Complex64::new(0.0, 0.0),
                        };
                        block = block.max((curv.get(node, i, j, k, l) - expect).norm());
                    }
                }
            }
        }
    }
    block /= scale;

    let report = kappa_field(&curv, &g, &ExtremizerOptions::default());
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let lat = g.lattice().clone();
    let samples = 100_000usize;
    let golden = PI * (3.0 - 5f64.sqrt());
    let mut kappa_err: f64 = 0.0;
    for _ in 0..20 {
        let node = rng.random_range(0..lat.len());
        let x = lat.coords(node);
        let lap_a = -(2.0 * PI).powi(2) * fa(&x[0..2]);
        let lap_b = -(2.0 * PI).powi(2) * fb(&x[2..4]);
        let (h1, h2) = (factor_hsc(fa(&x[0..2]), lap_a), factor_hsc(fb(&x[2..4]), lap_b));
        let (w1, w2) = (fa(&x[0..2]).exp(), fb(&x[2..4]).exp());
        // The two coordinate axes, where the maximum sits whenever a factor HSC is positive.
        let mut best = h1.max(h2);
        // Golden-angle spiral on the Bloch sphere: z = |v₁|² − |v₂|².
        for i in 0..samples {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / samples as f64;
            let phi = golden * i as f64;
            let v = [Complex64::new((0.5 * (1.0 + z)).sqrt(), 0.0), Complex64::from_polar((0.5 * (1.0 - z)).sqrt(), phi)];
            let (n1, n2) = (w1 * v[0].norm_sqr(), w2 * v[1].norm_sqr());
            best = best.max((h1 * n1 * n1 + h2 * n2 * n2) / ((n1 + n2) * (n1 + n2)));
        }
        kappa_err = kappa_err.max((report.kappa.values()[node] + best).abs());
    }
    Outcome::new(
        kappa_err <= 1e-4 && herm <= 1e-10 && kahler <= 1e-10 && block <= 1e-10,
        format!(
            "|κ − dense CP¹ oracle| ≤ {kappa_err:.1e} at 20 nodes, Hermitian {herm:.1e}, Kähler {kahler:.1e}, factor blocks {block:.1e}"
        ),
    )
}

fn product_metric(res: usize) -> MetricField {
    let g1 = conformal_factor(res, |x| 0.15 * (2.0 * PI * x[0]).cos());
    let g2 = conformal_factor(res, |x| 0.1 * (2.0 * PI * x[1]).sin());
    MetricField::product(&g1, &g2).unwrap()
}

fn omega_at(g: &MetricField, eps: f64) -> HermitianField {
    solve_ma(g, &TwistField::geometric(g), eps, &opts(), None).unwrap().omega_eps
}

fn comparison() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, g) in [("64²", conformal_metric(64)), ("16⁴", product_metric(16))] {
        let omega = omega_at(&g, 0.25);
        let mut worst = f64::INFINITY;
        let mut verified = 0;
        for seed in 0..20u64 {
            let t = manufactured_triple(&omega, seed).unwrap();
            let r = check_comparison(&t.phi_minus, &t.phi_plus, &t.m, &omega, 0.0).unwrap();
            if r.is_sub && r.is_super && r.hypotheses_met {
                verified += 1;
            }
            worst = worst.min(r.ordering_margin);
        }
        ok &= verified == 20 && worst >= -1e-8;
        parts.push(format!("{label}: {verified}/20 verified pairs, min(φ₊ − φ₋) = {worst:.3e}"));
    }
    Outcome::new(ok, parts.join("; "))
}

fn weighted_poisson() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for (label, g) in [("64²", conformal_metric(64)), ("16⁴", product_metric(16))] {
        let omega = omega_at(&g, 0.25);
        let lat = g.lattice().clone();
        let constant = solve_weighted_poisson(&omega, &RealField::constant(&lat, 1.3), 1.3).unwrap();
        let zero = sup_norm(&constant.f);

        let axes = lat.real_axes();
        let f_star = RealField::from_fn(&lat, |x| {
            (0..axes).map(|a| 0.2 * (2.0 * PI * x[a]).sin() / (a + 1) as f64).sum::<f64>()
                + 0.1 * (2.0 * PI * (x[0] - x[axes - 1])).cos()
        });
        let rhs = weighted_laplacian(&omega, &f_star).unwrap();
        let sol = solve_weighted_poisson(&omega, &rhs, 0.0).unwrap();
        let bottom = extrema(&f_star).min;
        let trip = sup_norm(&sol.f.zip_map(&f_star, |a, b| a - (b - bottom)));
        let inf = extrema(&sol.f).min;
        ok &= zero <= 1e-12 && trip <= 1e-8 && inf == 0.0;
        parts.push(format!("{label}: constant M → sup|f| = {zero:.1e}, round trip {trip:.1e}, inf f = {inf:e}"));
    }
    Outcome::new(ok, parts.join("; "))
}

fn diff_inequality() -> Outcome {
    let mut flat_err: f64 = 0.0;
    let mut twist_err: f64 = 0.0;
    let lambda = 0.7;
    for (n, res) in [(1usize, 32usize), (2, 8)] {
        let g = flat(n, res);
        let zero = RealField::zeros(g.lattice());
        let geometric = TwistField::geometric(&g);
        let synthetic = TwistField::synthetic(&g, lambda, &zero).unwrap();
        for eps in [1.0, 0.3, 1e-2, 1e-4] {
            let sol = solve_ma(&g, &geometric, eps, &opts(), None).unwrap();
            let tr = trace_diagnostics(&sol, &g).unwrap();
            let d = check_diff_inequality(&sol, &tr, &zero).unwrap();
            flat_err = flat_err.max(sup_norm(&d.residual));

            let sol = solve_ma(&g, &synthetic, eps, &opts(), None).unwrap();
            let tr = trace_diagnostics(&sol, &g).unwrap();
            let d = check_diff_inequality(&sol, &tr, &zero).unwrap();
            twist_err = twist_err.max(max_dev(&d.residual, lambda / (eps + lambda)));
        }
    }
    Outcome::new(
        flat_err <= 1e-8 && twist_err <= 1e-8,
        format!("flat residual ≤ {flat_err:.1e}, λ-twist |residual − λ/(ε+λ)| ≤ {twist_err:.1e}"),
    )
}

fn monotonicity(sweeps: &Sweeps) -> Outcome {
    let mut worst = f64::NEG_INFINITY;
    let mut pairs = 0;
    for (_, record) in sweeps {
        for w in record.entries.windows(2) {
            // Entries run from large to small ε, so `w[1]` is ε₁ < ε₂.
            let gap = w[1].solution.u.zip_map(&w[0].solution.u, |a, b| a - b);
            worst = worst.max(extrema(&gap).max);
            pairs += 1;
        }
    }
    Outcome::new(worst <= 1e-8, format!("{pairs} adjacent pairs in {} sweeps, max(u_ε₁ − u_ε₂) = {worst:.3e}", sweeps.len()))
}

fn supersolution_constants() -> Outcome {
    let g = flat(1, 64);
    let lat = g.lattice().clone();
    let twist = TwistField::synthetic(&g, 0.7, &RealField::zeros(&lat)).unwrap();
    let m = RealField::constant(&lat, 1.0);
    let record = epsilon_sweep(&g, &twist, &geometric_schedule(20), &opts(), Some(&m)).unwrap();
    // n = 1: M = κ.
    let kappa = m.clone();
    let report = kw_report(&record, &m, &kappa, &g, true, 1e-8).unwrap().summary;
    let (a, b) = (report.a.unwrap_or(f64::NAN), report.b.unwrap_or(f64::NAN));
    let mbar0 = report.mbar0.value();
    let tail = report.tail_max_one_minus_a_mbar.unwrap_or(f64::NAN);
    let margin = report.comparison_margin.unwrap_or(f64::NAN);
    let ok = (mbar0 - 1.0).abs() <= 1e-12
        && (a - 2.0).abs() <= 1e-12
        && (b - (2f64.ln() + 1.0)).abs() <= 1e-12
        && tail < 0.0
        && report.tail_entries > 0
        && margin >= -1e-8
        && report.inf_t <= b + margin.max(0.0);
    Outcome::new(
        ok,
        format!(
            "M̄₀ = {mbar0}, A = {a}, B = {b:.15}, max(1 − A·M̄_ε) = {tail} over {} tail entries, \
             inf T = {:.6} ≤ B with min(φ₊ − T) = {margin:.6}",
            report.tail_entries, report.inf_t
        ),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let mut sweeps: Sweeps = Vec::new();
    let mut results: Vec<(&str, Outcome)> = Vec::new();
    results.push(("flat torus n=1 64²", flat_torus(&mut sweeps)));
    results.push(("λ-twist n=1,2", lambda_twist(&mut sweeps)));
    results.push(("conformal torus 128²", conformal_torus(&mut sweeps)));
    shipped_suite(&mut sweeps);
    results.push(("trace lemma", trace_lemma(&sweeps)));
    results.push(("curvature engine 16⁴", curvature_engine()));
    results.push(("comparison proposition", comparison()));
    results.push(("weighted Poisson", weighted_poisson()));
    results.push(("differential inequality", diff_inequality()));
    results.push(("ε-monotonicity", monotonicity(&sweeps)));
    results.push(("supersolution constants", supersolution_constants()));

    println!("\nacceptance criteria");
    let mut failures = 0;
    for (name, o) in &results {
        let tag = match (&o.known_gap, o.passed) {
            (None, true) => "PASS",
            (Some(_), _) => "FAIL",
            (None, false) => "FAIL",
        };
        println!("{tag} {name}: {}", o.detail);
        if let Some(gap) = &o.known_gap {
            let weaker = if o.passed { "holds" } else { "fails" };
            println!("     literal criterion unattainable: {gap}; asserted n ≥ 2 strict / n = 1 equality form {weaker}");
        }
        if !o.passed {
            failures += 1;
        }
    }
    println!("{} criteria, {failures} asserted failures, {:.1} s\n", results.len(), started.elapsed().as_secs_f64());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
