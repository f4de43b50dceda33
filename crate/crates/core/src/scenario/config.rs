use std::f64::consts::TAU;
use std::fs;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ScenarioError;
use crate::continuity::{validate_schedule, SolverOptions, TwistField};
use crate::geometry::{ExtremizerOptions, MetricField};
use crate::grid::{Lattice, RealField};
use crate::linalg::HMat;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Wave {
    Cos,
    Sin,
}

/// `cos` or `sin` of `2π Σ_a k_a x_a / P_a`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Factor {
    #[serde(rename = "fn")]
    pub wave: Wave,
    pub k: Vec<i32>,
}

/// `coeff · Π factors`; an empty factor list is a constant.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    pub coeff: f64,
    #[serde(default)]
    pub factors: Vec<Factor>,
}

/// Finite trigonometric polynomial on the lattice axes.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FieldSpec(pub Vec<Term>);

impl FieldSpec {
    pub fn constant(c: f64) -> Self {
        Self(vec![Term { coeff: c, factors: Vec::new() }])
    }

    /// `coeff · wave(2π k·x)` as a one-term spec.
    pub fn mode(coeff: f64, wave: Wave, k: &[i32]) -> Self {
        Self(vec![Term { coeff, factors: vec![Factor { wave, k: k.to_vec() }] }])
    }

    /// Seeded sum of `terms` products of at most two waves with `|k_a| ≤ modes`.
    pub fn random(axes: usize, modes: i32, terms: usize, rng: &mut impl Rng) -> Self {
        let mut out = Vec::with_capacity(terms);
        for _ in 0..terms {
            let count = rng.random_range(1..=2);
            let factors = (0..count)
                .map(|_| Factor {
                    wave: if rng.random_bool(0.5) { Wave::Cos } else { Wave::Sin },
                    k: (0..axes).map(|_| rng.random_range(-modes..=modes)).collect(),
                })
                .collect();
            out.push(Term { coeff: rng.random_range(-1.0..1.0), factors });
        }
        Self(out)
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|t| t.coeff == 0.0)
    }

    pub fn validate(&self, axes: usize, what: &str) -> Result<(), ScenarioError> {
        for (i, t) in self.0.iter().enumerate() {
            if !t.coeff.is_finite() {
                return Err(ScenarioError::Config(format!("{what}: term {i} has a non-finite coefficient")));
            }
            if let Some(f) = t.factors.iter().find(|f| f.k.len() != axes) {
                return Err(ScenarioError::Config(format!(
                    "{what}: term {i} has {} wavenumbers, expected {axes}",
                    f.k.len()
                )));
            }
        }
        Ok(())
    }

    pub fn evaluate(&self, lattice: &Lattice) -> Result<RealField, ScenarioError> {
        self.validate(lattice.real_axes(), "field")?;
        let periods = lattice.periods();
        Ok(RealField::from_fn(lattice, |x| {
            self.0
                .iter()
                .map(|t| {
                    t.factors.iter().fold(t.coeff, |acc, f| {
                        let phase: f64 = f.k.iter().zip(x).zip(periods).map(|((k, x), p)| *k as f64 * x / p).sum();
                        acc * match f.wave {
                            Wave::Cos => (TAU * phase).cos(),
                            Wave::Sin => (TAU * phase).sin(),
                        }
                    })
                })
                .sum()
        }))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    FlatTorus,
    /// `g = e^f` with `f` on the two real axes.
    ConformalTorus { f: FieldSpec },
    /// Product of two conformal tori, each spec on its own two axes.
    Product { first: FieldSpec, second: FieldSpec },
    /// `g = G0 + ∂∂̄φ` with a real symmetric `G0`.
    PotentialMetric {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        g0: Option<Vec<Vec<f64>>>,
        phi: FieldSpec,
    },
}

impl ModelSpec {
    pub fn name(&self) -> &'static str {
        match self {
            ModelSpec::FlatTorus => "flat_torus",
            ModelSpec::ConformalTorus { .. } => "conformal_torus",
            ModelSpec::Product { .. } => "product",
            ModelSpec::PotentialMetric { .. } => "potential_metric",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TwistSpec {
    Geometric,
    Synthetic {
        lambda: f64,
        #[serde(default)]
        psi: FieldSpec,
    },
}

/// Curvature weight `M` supplied by the scenario instead of the computed one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticM {
    pub field: FieldSpec,
    /// Multi-index of the minorant base node.
    pub basepoint: Vec<usize>,
    #[serde(default = "default_radius")]
    pub radius: f64,
    #[serde(default = "default_level")]
    pub level: f64,
}

fn default_radius() -> f64 {
    0.25
}

fn default_level() -> f64 {
    0.5
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LatticeSpec {
    pub periods: Vec<f64>,
    pub resolution: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum ScheduleSpec {
    /// `start · ratio^k` for `k < count`.
    Geometric {
        #[serde(default = "default_count")]
        count: usize,
        #[serde(default = "default_start")]
        start: f64,
        #[serde(default = "default_ratio")]
        ratio: f64,
    },
    Explicit(Vec<f64>),
}

fn default_count() -> usize {
    20
}

fn default_start() -> f64 {
    1.0
}

fn default_ratio() -> f64 {
    0.5
}

impl Default for ScheduleSpec {
    fn default() -> Self {
        ScheduleSpec::Geometric { count: default_count(), start: default_start(), ratio: default_ratio() }
    }
}

impl ScheduleSpec {
    pub fn epsilons(&self) -> Vec<f64> {
        match self {
            ScheduleSpec::Geometric { count, start, ratio } => (0..*count).map(|k| start * ratio.powi(k as i32)).collect(),
            ScheduleSpec::Explicit(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverConfig {
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_max_newton")]
    pub max_newton: usize,
    #[serde(default = "default_max_halvings")]
    pub max_halvings: usize,
}

fn default_tolerance() -> f64 {
    SolverOptions::default().tolerance
}

fn default_max_newton() -> usize {
    SolverOptions::default().max_newton
}

fn default_max_halvings() -> usize {
    SolverOptions::default().max_halvings
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { tolerance: default_tolerance(), max_newton: default_max_newton(), max_halvings: default_max_halvings() }
    }
}

impl SolverConfig {
    pub fn options(&self) -> SolverOptions {
        SolverOptions {
            tolerance: self.tolerance,
            max_newton: self.max_newton,
            max_halvings: self.max_halvings,
            ..SolverOptions::default()
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtremizerConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_refine_steps")]
    pub refine_steps: usize,
}

fn default_samples() -> usize {
    ExtremizerOptions::default().samples
}

fn default_refine_steps() -> usize {
    ExtremizerOptions::default().refine_steps
}

impl Default for ExtremizerConfig {
    fn default() -> Self {
        Self { samples: default_samples(), refine_steps: default_refine_steps() }
    }
}

impl ExtremizerConfig {
    pub fn options(&self) -> ExtremizerOptions {
        ExtremizerOptions { samples: self.samples, refine_steps: self.refine_steps }
    }
}

/// Fully resolved scenario; every default is explicit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub n: usize,
    pub model: ModelSpec,
    pub twist: TwistSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic_m: Option<SyntheticM>,
    pub lattice: LatticeSpec,
    pub schedule: ScheduleSpec,
    pub solver: SolverConfig,
    pub extremizer: ExtremizerConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub classification_threshold: Option<f64>,
    pub kw_tolerance: f64,
    pub manufactured_pairs: usize,
    pub output: PathBuf,
    pub seed: u64,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Resolution {
    Uniform(usize),
    PerAxis(Vec<usize>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLattice {
    #[serde(default)]
    periods: Option<Vec<f64>>,
    #[serde(default)]
    resolution: Option<Resolution>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    #[serde(default)]
    name: Option<String>,
    #[serde(default)]
    n: Option<usize>,
    model: ModelSpec,
    #[serde(default)]
    twist: Option<TwistSpec>,
    #[serde(default)]
    synthetic_m: Option<SyntheticM>,
    #[serde(default)]
    lattice: Option<RawLattice>,
    #[serde(default)]
    schedule: Option<ScheduleSpec>,
    #[serde(default)]
    solver: Option<SolverConfig>,
    #[serde(default)]
    extremizer: Option<ExtremizerConfig>,
    #[serde(default)]
    classification_threshold: Option<f64>,
    #[serde(default)]
    kw_tolerance: Option<f64>,
    #[serde(default)]
    manufactured_pairs: Option<usize>,
    #[serde(default)]
    output: Option<PathBuf>,
    #[serde(default)]
    seed: Option<u64>,
}

fn implied_dimension(model: &ModelSpec) -> Option<usize> {
    match model {
        ModelSpec::ConformalTorus { .. } => Some(1),
        ModelSpec::Product { .. } => Some(2),
        ModelSpec::PotentialMetric { g0: Some(g0), .. } => Some(g0.len()),
        _ => None,
    }
}

impl RawScenario {
    fn resolve(self) -> Result<ScenarioConfig, ScenarioError> {
        let n = match (self.n, implied_dimension(&self.model)) {
            (Some(n), Some(m)) if n != m => {
                return Err(ScenarioError::Config(format!("model {} requires n = {m}, got n = {n}", self.model.name())))
            }
            (Some(n), _) => n,
            (None, Some(m)) => m,
            (None, None) => 1,
        };
        if n != 1 && n != 2 {
            return Err(ScenarioError::Config(format!("n must be 1 or 2, got {n}")));
        }
        let axes = 2 * n;
        let mut model = self.model;
        if let ModelSpec::PotentialMetric { g0, .. } = &mut model {
            if g0.is_none() {
                *g0 = Some((0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect());
            }
        }
        let raw_lattice = self.lattice.unwrap_or(RawLattice { periods: None, resolution: None });
        let default_res = if n == 1 { 64 } else { 16 };
        let resolution = match raw_lattice.resolution {
            None => vec![default_res; axes],
            Some(Resolution::Uniform(r)) => vec![r; axes],
            Some(Resolution::PerAxis(v)) => v,
        };
        let periods = raw_lattice.periods.unwrap_or_else(|| vec![1.0; axes]);
        let config = ScenarioConfig {
            name: self.name.unwrap_or_else(|| "scenario".to_string()),
            n,
            model,
            twist: self.twist.unwrap_or(TwistSpec::Geometric),
            synthetic_m: self.synthetic_m,
            lattice: LatticeSpec { periods, resolution },
            schedule: self.schedule.unwrap_or_default(),
            solver: self.solver.unwrap_or_default(),
            extremizer: self.extremizer.unwrap_or_default(),
            classification_threshold: self.classification_threshold,
            kw_tolerance: self.kw_tolerance.unwrap_or(1e-8),
            manufactured_pairs: self.manufactured_pairs.unwrap_or(20),
            output: self.output.unwrap_or_else(|| PathBuf::from("klab-out")),
            seed: self.seed.unwrap_or(0),
        };
        config.validate()?;
        Ok(config)
    }
}

/// Parses a scenario from JSON text, filling defaults and validating.
pub fn parse_scenario(text: &str) -> Result<ScenarioConfig, ScenarioError> {
    let raw: RawScenario = serde_json::from_str(text).map_err(|e| ScenarioError::Config(e.to_string()))?;
    raw.resolve()
}

pub fn load_scenario(path: &Path) -> Result<ScenarioConfig, ScenarioError> {
    let text = fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.to_path_buf(), source })?;
    parse_scenario(&text).map_err(|e| match e {
        ScenarioError::Config(msg) => ScenarioError::Config(format!("{}: {msg}", path.display())),
        other => other,
    })
}

/// Everything a run needs, built from a config.
#[derive(Clone, Debug)]
pub struct Scenario {
    pub lattice: Lattice,
    pub metric: MetricField,
    /// The two conformal factors of a product model.
    pub factors: Option<(MetricField, MetricField)>,
    pub twist: TwistField,
    pub synthetic_m: Option<RealField>,
    pub schedule: Vec<f64>,
}

impl ScenarioConfig {
    /// Canonical JSON form; `parse_scenario` of it reproduces `self`.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }

    pub fn validate(&self) -> Result<(), ScenarioError> {
        let axes = 2 * self.n;
        self.lattice_checked()?;
        match &self.model {
            ModelSpec::FlatTorus => {}
            ModelSpec::ConformalTorus { f } => f.validate(axes, "conformal_torus.f")?,
            ModelSpec::Product { first, second } => {
                first.validate(2, "product.first")?;
                second.validate(2, "product.second")?;
            }
            ModelSpec::PotentialMetric { g0, phi } => {
                phi.validate(axes, "potential_metric.phi")?;
                if let Some(g0) = g0 {
                    self.background(g0)?;
                }
            }
        }
        if let TwistSpec::Synthetic { lambda, psi } = &self.twist {
            if !lambda.is_finite() {
                return Err(ScenarioError::Config(format!("twist lambda {lambda} is not finite")));
            }
            psi.validate(axes, "twist.psi")?;
        }
        if let Some(m) = &self.synthetic_m {
            m.field.validate(axes, "synthetic_m.field")?;
            if m.basepoint.len() != axes || m.basepoint.iter().zip(&self.lattice.resolution).any(|(b, r)| b >= r) {
                return Err(ScenarioError::Config(format!("synthetic_m.basepoint {:?} is not a node", m.basepoint)));
            }
            if !(m.radius > 0.0) || !(m.level > 0.0 && m.level <= 1.0) {
                return Err(ScenarioError::Config("synthetic_m needs radius > 0 and 0 < level <= 1".into()));
            }
        }
        if let ScheduleSpec::Geometric { count, start, ratio } = self.schedule {
            if count == 0 || !(start > 0.0) || !(ratio > 0.0 && ratio < 1.0) {
                return Err(ScenarioError::Config(format!(
                    "geometric schedule needs count >= 1, start > 0, 0 < ratio < 1 (got {count}, {start}, {ratio})"
                )));
            }
        }
        validate_schedule(&self.schedule.epsilons()).map_err(|e| ScenarioError::Config(e.to_string()))?;
        if !(self.solver.tolerance > 0.0) || !(self.kw_tolerance >= 0.0) {
            return Err(ScenarioError::Config("tolerances must be positive".into()));
        }
        if self.extremizer.samples == 0 {
            return Err(ScenarioError::Config("extremizer.samples must be positive".into()));
        }
        Ok(())
    }

    fn lattice_checked(&self) -> Result<Lattice, ScenarioError> {
        Lattice::new(self.n, &self.lattice.periods, &self.lattice.resolution).map_err(|e| ScenarioError::Config(e.to_string()))
    }

    fn background(&self, g0: &[Vec<f64>]) -> Result<HMat, ScenarioError> {
        let n = self.n;
        if g0.len() != n || g0.iter().any(|row| row.len() != n) {
            return Err(ScenarioError::Config(format!("potential_metric.g0 must be {n}x{n}")));
        }
        let mut h = HMat::zeros(n);
        for (i, row) in g0.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                if (v - g0[j][i]).abs() > 1e-12 || !v.is_finite() {
                    return Err(ScenarioError::Config("potential_metric.g0 must be finite and symmetric".into()));
                }
                h.set(i, j, (*v).into());
            }
        }
        if !(h.min_eigenvalue() > 0.0) {
            return Err(ScenarioError::Config("potential_metric.g0 is not positive definite".into()));
        }
        Ok(h)
    }

    pub fn build(&self) -> Result<Scenario, ScenarioError> {
        self.validate()?;
        let lattice = self.lattice_checked()?;
        let mut factors = None;
        let metric = match &self.model {
            ModelSpec::FlatTorus => MetricField::flat(&lattice, HMat::identity(self.n))?,
            ModelSpec::ConformalTorus { f } => MetricField::conformal(&f.evaluate(&lattice)?)?,
            ModelSpec::Product { first, second } => {
                let p = &self.lattice.periods;
                let r = &self.lattice.resolution;
                let l1 = Lattice::new(1, &p[0..2], &r[0..2])?;
                let l2 = Lattice::new(1, &p[2..4], &r[2..4])?;
                let g1 = MetricField::conformal(&first.evaluate(&l1)?)?;
                let g2 = MetricField::conformal(&second.evaluate(&l2)?)?;
                let g = MetricField::product(&g1, &g2)?;
                factors = Some((g1, g2));
                g
            }
            ModelSpec::PotentialMetric { g0, phi } => {
                let identity: Vec<Vec<f64>> =
                    (0..self.n).map(|i| (0..self.n).map(|j| if i == j { 1.0 } else { 0.0 }).collect()).collect();
                let g0 = self.background(g0.as_deref().unwrap_or(&identity))?;
                MetricField::from_potential(g0, &phi.evaluate(&lattice)?)?
            }
        };
        let twist = match &self.twist {
            TwistSpec::Geometric => TwistField::geometric(&metric),
            TwistSpec::Synthetic { lambda, psi } => TwistField::synthetic(&metric, *lambda, &psi.evaluate(&lattice)?)?,
        };
        let synthetic_m = self.synthetic_m.as_ref().map(|m| m.field.evaluate(&lattice)).transpose()?;
        Ok(Scenario { lattice, metric, factors, twist, synthetic_m, schedule: self.schedule.epsilons() })
    }
}
