//! The curvature extremizer `κ(x) = −max_{v} HSC(x, [v])` and the scalar
//! fields derived from it.
//!
//! For `n = 2`, directions are parametrized in a `g`-orthonormal frame by the
//! Bloch sphere: a unit `e ∈ ℂ²` has `e ⊗ ē = ½(I + p·σ)` with `p ∈ S²`, so
//! the holomorphic sectional curvature is an exact quadratic polynomial
//! `c₀ + b·p + pᵀQp` on `S²`. The maximum is located by deterministic
//! Fibonacci sampling followed by a fixed number of Riemannian
//! gradient/Newton ascent steps from the best sample.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::Serialize;

use super::{CurvatureField, GeometryError, MetricField};
use crate::grid::{extrema, gradient_norm, Lattice, RealField};
use crate::linalg::{invert_lower, HMat};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ExtremizerOptions {
    pub samples: usize,
    pub refine_steps: usize,
}

impl Default for ExtremizerOptions {
    fn default() -> Self {
        Self { samples: 256, refine_steps: 10 }
    }
}

/// `κ`, `M = (n+1)κ/2n`, maximizing directions and a Lipschitz estimate of `M`.
#[derive(Clone, Debug)]
pub struct CurvatureReport {
    pub kappa: RealField,
    pub m: RealField,
    /// Per node, a `g`-unit direction attaining the reported maximum.
    pub directions: Vec<[Complex64; 2]>,
    pub lipschitz_estimate: f64,
    pub sample_count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct CurvatureSummary {
    pub kappa_min: f64,
    pub kappa_max: f64,
    #[serde(rename = "M_max")]
    pub m_max: f64,
    pub lipschitz_estimate: f64,
    pub argmax_sample_count: usize,
}

impl CurvatureReport {
    pub fn summary(&self) -> CurvatureSummary {
        let k = extrema(&self.kappa);
        CurvatureSummary {
            kappa_min: k.min,
            kappa_max: k.max,
            m_max: extrema(&self.m).max,
            lipschitz_estimate: self.lipschitz_estimate,
            argmax_sample_count: self.sample_count,
        }
    }
}

/// `(n + 1) / 2n`.
pub fn m_factor(n: usize) -> f64 {
    (n as f64 + 1.0) / (2.0 * n as f64)
}

/// Deterministic near-uniform points on the unit sphere.
pub fn fibonacci_sphere(count: usize) -> Vec<[f64; 3]> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..count)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / count as f64;
            let r = (1.0 - z * z).max(0.0).sqrt();
            let t = golden * i as f64;
            [r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

/// Unit `e ∈ ℂ²` with `e ⊗ ē = ½(I + p·σ)`.
pub fn bloch_vector(p: &[f64; 3]) -> [Complex64; 2] {
    let theta = p[2].clamp(-1.0, 1.0).acos();
    let phi = p[1].atan2(p[0]);
    [Complex64::new((0.5 * theta).cos(), 0.0), Complex64::from_polar((0.5 * theta).sin(), phi)]
}

/// HSC at one node as a quadratic polynomial on the Bloch sphere.
#[derive(Clone, Copy, Debug)]
pub struct SphereQuadratic {
    pub c0: f64,
    pub b: [f64; 3],
    pub q: [[f64; 3]; 3],
}

impl SphereQuadratic {
    pub fn eval(&self, p: &[f64; 3]) -> f64 {
        let mut s = self.c0;
        for a in 0..3 {
            s += self.b[a] * p[a];
            for c in 0..3 {
                s += p[a] * self.q[a][c] * p[c];
            }
        }
        s
    }

    fn euclidean_gradient(&self, p: &[f64; 3]) -> [f64; 3] {
        let mut g = self.b;
        for a in 0..3 {
            for c in 0..3 {
                g[a] += 2.0 * self.q[a][c] * p[c];
            }
        }
        g
    }
}

/// Frame `E` with `‖E e‖_g = |e|`, i.e. `Eᵀ G Ē = I`.
fn unitary_frame(g: &HMat) -> [Complex64; 4] {
    let l = g.cholesky().expect("metric is positive definite");
    let li = invert_lower(2, &l);
    [li[0], li[2], li[1], li[3]]
}

fn node_quadratic(curv: &CurvatureField, node: usize, frame: &[Complex64; 4]) -> SphereQuadratic {
    let r = curv.node(node);
    let e = |i: usize, a: usize| frame[i * 2 + a];
    // R̃_{abcd} = Σ R_{ijkl} E_ia conj(E_jb) E_kc conj(E_ld)
    let mut rt = [ZERO; 16];
    for (idx, slot) in rt.iter_mut().enumerate() {
        let (a, b, c, d) = (idx >> 3, (idx >> 2) & 1, (idx >> 1) & 1, idx & 1);
        let mut s = ZERO;
        for (ridx, rv) in r.iter().enumerate() {
            let (i, j, k, l) = (ridx >> 3, (ridx >> 2) & 1, (ridx >> 1) & 1, ridx & 1);
            s += rv * e(i, a) * e(j, b).conj() * e(k, c) * e(l, d).conj();
        }
        *slot = s;
    }
    let bilinear = |x: &[Complex64; 4], y: &[Complex64; 4]| -> f64 {
        let mut s = ZERO;
        for (idx, v) in rt.iter().enumerate() {
            s += v * x[idx >> 2] * y[idx & 3];
        }
        s.re
    };
    let half = Complex64::new(0.5, 0.0);
    let ih = Complex64::new(0.0, 0.5);
    let rho0 = [half, ZERO, ZERO, half];
    let rho = [[ZERO, half, half, ZERO], [ZERO, -ih, ih, ZERO], [half, ZERO, ZERO, -half]];
    let c0 = bilinear(&rho0, &rho0);
    let mut b = [0.0; 3];
    let mut q = [[0.0; 3]; 3];
    for a in 0..3 {
        b[a] = bilinear(&rho[a], &rho0) + bilinear(&rho0, &rho[a]);
        for c in 0..3 {
            q[a][c] = 0.5 * (bilinear(&rho[a], &rho[c]) + bilinear(&rho[c], &rho[a]));
        }
    }
    SphereQuadratic { c0, b, q }
}

fn normalize(p: [f64; 3]) -> [f64; 3] {
    let r = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
    [p[0] / r, p[1] / r, p[2] / r]
}

fn tangent_basis(p: &[f64; 3]) -> ([f64; 3], [f64; 3]) {
    let seed = if p[0].abs() < 0.8 { [1.0, 0.0, 0.0] } else { [0.0, 1.0, 0.0] };
    let d: f64 = (0..3).map(|i| seed[i] * p[i]).sum();
    let t1 = normalize([seed[0] - d * p[0], seed[1] - d * p[1], seed[2] - d * p[2]]);
    let t2 = [p[1] * t1[2] - p[2] * t1[1], p[2] * t1[0] - p[0] * t1[2], p[0] * t1[1] - p[1] * t1[0]];
    (t1, t2)
}

/// Monotone Riemannian ascent on `S²`: Newton steps where the Riemannian
/// Hessian is negative definite, curvature-scaled gradient steps otherwise,
/// with step halving until the value increases.
pub fn refine_maximum(quad: &SphereQuadratic, start: [f64; 3], steps: usize) -> ([f64; 3], f64) {
    let mut p = start;
    let mut value = quad.eval(&p);
    let dot = |a: &[f64; 3], b: &[f64; 3]| a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
    let qv = |a: &[f64; 3], b: &[f64; 3]| -> f64 {
        let mut s = 0.0;
        for i in 0..3 {
            for j in 0..3 {
                s += a[i] * quad.q[i][j] * b[j];
            }
        }
        2.0 * s
    };
    for _ in 0..steps {
        let grad = quad.euclidean_gradient(&p);
        let radial = dot(&p, &grad);
        let (t1, t2) = tangent_basis(&p);
        let g = [dot(&t1, &grad), dot(&t2, &grad)];
        if g[0].hypot(g[1]) <= 1e-15 * (1.0 + value.abs()) {
            break;
        }
        let h = [[qv(&t1, &t1) - radial, qv(&t1, &t2)], [qv(&t2, &t1), qv(&t2, &t2) - radial]];
        let tr = h[0][0] + h[1][1];
        let det = h[0][0] * h[1][1] - h[0][1] * h[1][0];
        let mut step = if tr < 0.0 && det > 0.0 {
            [-(h[1][1] * g[0] - h[0][1] * g[1]) / det, -(-h[1][0] * g[0] + h[0][0] * g[1]) / det]
        } else {
            let disc = (0.25 * (h[0][0] - h[1][1]).powi(2) + h[0][1] * h[1][0]).max(0.0).sqrt();
            let curvature = (0.5 * tr).abs() + disc;
            let alpha = if curvature > 0.0 { 1.0 / curvature } else { 1.0 };
            [alpha * g[0], alpha * g[1]]
        };
        let mut improved = false;
        for _ in 0..40 {
            let cand = normalize([
                p[0] + step[0] * t1[0] + step[1] * t2[0],
                p[1] + step[0] * t1[1] + step[1] * t2[1],
                p[2] + step[0] * t1[2] + step[1] * t2[2],
            ]);
            let v = quad.eval(&cand);
            if v > value {
                p = cand;
                value = v;
                improved = true;
                break;
            }
            step = [0.5 * step[0], 0.5 * step[1]];
        }
        if !improved {
            break;
        }
    }
    (p, value)
}

/// Per-node maximum of HSC with the sampled values, for diagnostics.
pub struct NodeExtremum {
    pub max_hsc: f64,
    pub direction: [Complex64; 2],
    /// HSC at every sample point, in sample order.
    pub sampled: Vec<f64>,
}

fn extremize_node(curv: &CurvatureField, metric: &MetricField, node: usize, samples: &[[f64; 3]], steps: usize) -> NodeExtremum {
    if curv.n() == 1 {
        let g = metric.at(node).get(0, 0).re;
        let h = curv.get(node, 0, 0, 0, 0).re / (g * g);
        return NodeExtremum {
            max_hsc: h,
            direction: [Complex64::new(1.0 / g.sqrt(), 0.0), ZERO],
            sampled: vec![h],
        };
    }
    let frame = unitary_frame(&metric.at(node));
    let quad = node_quadratic(curv, node, &frame);
    let sampled: Vec<f64> = samples.iter().map(|p| quad.eval(p)).collect();
    let (best, _) = sampled
        .iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |acc, (i, &v)| if v > acc.1 { (i, v) } else { acc });
    let (p, value) = refine_maximum(&quad, samples[best], steps);
    let e = bloch_vector(&p);
    let v = [frame[0] * e[0] + frame[1] * e[1], frame[2] * e[0] + frame[3] * e[1]];
    NodeExtremum { max_hsc: value, direction: v, sampled }
}

/// Extremizer result at a single node (used by verification passes).
pub fn node_extremum(curv: &CurvatureField, metric: &MetricField, node: usize, opts: &ExtremizerOptions) -> NodeExtremum {
    extremize_node(curv, metric, node, &fibonacci_sphere(opts.samples), opts.refine_steps)
}

/// `κ = −max HSC` per node, with `M = (n+1)κ/2n`.
pub fn kappa_field(curv: &CurvatureField, metric: &MetricField, opts: &ExtremizerOptions) -> CurvatureReport {
    let lattice = curv.lattice();
    let samples = fibonacci_sphere(opts.samples);
    let per_node: Vec<(f64, [Complex64; 2])> = (0..lattice.len())
        .into_par_iter()
        .map(|node| {
            let ex = extremize_node(curv, metric, node, &samples, opts.refine_steps);
            (-ex.max_hsc, ex.direction)
        })
        .collect();
    let kappa = RealField::new(lattice, per_node.iter().map(|p| p.0).collect()).expect("lattice length");
    let factor = m_factor(curv.n());
    let m = kappa.map(|k| factor * k);
    let lipschitz = lipschitz_estimate(&m);
    CurvatureReport {
        kappa,
        m,
        directions: per_node.into_iter().map(|p| p.1).collect(),
        lipschitz_estimate: lipschitz,
        sample_count: if curv.n() == 1 { 1 } else { opts.samples },
    }
}

/// Maximum over nodes of the spectral gradient norm.
pub fn lipschitz_estimate(field: &RealField) -> f64 {
    gradient_norm(field).values().iter().cloned().fold(0.0, f64::max)
}

/// A smooth bump minorant `0 ≤ M̃ ≤ M` concentrated at a base node.
#[derive(Clone, Debug)]
pub struct Minorant {
    pub field: RealField,
    pub radius: f64,
    pub peak: f64,
}

fn periodic_distance(lattice: &Lattice, a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .zip(lattice.periods())
        .map(|((x, y), p)| {
            let d = (x - y).rem_euclid(*p);
            let d = d.min(p - d);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Builds `M̃ = level · M(x0) · bump(|x − x0| / radius)`, halving the radius
/// until `M̃ ≤ M` holds at every node.
pub fn smooth_minorant(m: &RealField, base: usize, radius: f64, level: f64) -> Result<Minorant, GeometryError> {
    let lattice = m.lattice();
    let peak_value = m.values()[base];
    if !(peak_value > 0.0) {
        return Err(GeometryError::NonPositiveBase { node: base, value: peak_value });
    }
    if !(level > 0.0 && level <= 1.0) || !(radius > 0.0) {
        return Err(GeometryError::InvalidMinorant { radius, level });
    }
    let center = lattice.coords(base);
    let half_period = lattice.periods().iter().cloned().fold(f64::INFINITY, f64::min) * 0.5;
    let min_spacing = (0..lattice.real_axes()).map(|a| lattice.spacing(a)).fold(f64::INFINITY, f64::min);
    let peak = level * peak_value;
    let mut r = radius.min(half_period);
    loop {
        let field = if r < min_spacing {
            let mut v = vec![0.0; lattice.len()];
            v[base] = peak;
            RealField::new(lattice, v).expect("lattice length")
        } else {
            RealField::new(
                lattice,
                (0..lattice.len())
                    .map(|node| {
                        let s = periodic_distance(lattice, &lattice.coords(node), &center) / r;
                        if s < 1.0 {
                            peak * (1.0 - 1.0 / (1.0 - s * s)).exp()
                        } else {
                            0.0
                        }
                    })
                    .collect(),
            )
            .expect("lattice length")
        };
        // Outside the support M̃ = 0, which is below M wherever M ≥ 0.
        let fits = field.values().iter().zip(m.values()).all(|(t, mv)| *t >= 0.0 && (*t == 0.0 || t <= mv));
        if fits || r < min_spacing {
            return Ok(Minorant { field, radius: r, peak });
        }
        r *= 0.5;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::chern_curvature;
    use std::f64::consts::PI;

    #[test]
    fn fibonacci_points_are_unit_and_spread() {
        let pts = fibonacci_sphere(256);
        assert!(pts.iter().all(|p| ((p[0] * p[0] + p[1] * p[1] + p[2] * p[2]) - 1.0).abs() < 1e-14));
        let mean: f64 = pts.iter().map(|p| p[2]).sum::<f64>() / 256.0;
        assert!(mean.abs() < 1e-12);
    }

    #[test]
    fn bloch_vector_reproduces_density_matrix() {
        for p in fibonacci_sphere(17) {
            let e = bloch_vector(&p);
            let rho12 = e[0] * e[1].conj();
            assert!((rho12 - Complex64::new(0.5 * p[0], -0.5 * p[1])).norm() < 1e-14);
            assert!((e[0].norm_sqr() - 0.5 * (1.0 + p[2])).abs() < 1e-14);
        }
    }

    #[test]
    fn flat_kappa_is_zero() {
        let lat = Lattice::unit(2, 8).unwrap();
        let g = MetricField::flat(&lat, HMat::identity(2)).unwrap();
        let rep = kappa_field(&chern_curvature(&g), &g, &ExtremizerOptions::default());
        assert!(rep.kappa.values().iter().all(|&k| k == 0.0));
        assert!(rep.m.values().iter().all(|&k| k == 0.0));
        assert_eq!(rep.lipschitz_estimate, 0.0);
    }

    #[test]
    fn dimension_one_kappa_is_minus_hsc() {
        let lat = Lattice::unit(1, 32).unwrap();
        let f = RealField::from_fn(&lat, |x| 0.3 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos());
        let g = MetricField::conformal(&f).unwrap();
        let r = chern_curvature(&g);
        let rep = kappa_field(&r, &g, &ExtremizerOptions::default());
        for node in 0..lat.len() {
            let h = crate::geometry::hsc(&r, &g, node, &[Complex64::new(1.0, 0.0)]).unwrap();
            assert!((rep.kappa.values()[node] + h).abs() < 1e-12 * h.abs().max(1.0));
            assert!((rep.m.values()[node] - rep.kappa.values()[node]).abs() < 1e-15);
        }
    }

    #[test]
    fn refinement_finds_quadratic_maximum() {
        // f(p) = −(p − p*)·(p − p*) restricted to S² peaks at p*.
        let target = normalize([0.3, -0.5, 0.8]);
        let quad = SphereQuadratic {
            c0: -1.0,
            b: [2.0 * target[0], 2.0 * target[1], 2.0 * target[2]],
            q: [[-1.0, 0.0, 0.0], [0.0, -1.0, 0.0], [0.0, 0.0, -1.0]],
        };
        let (p, v) = refine_maximum(&quad, normalize([0.0, 0.0, 1.0]), 10);
        assert!((v - 0.0).abs() < 1e-12);
        assert!((0..3).all(|i| (p[i] - target[i]).abs() < 1e-6));
    }

    #[test]
    fn minorant_of_constant() {
        let lat = Lattice::unit(1, 32).unwrap();
        let m = RealField::constant(&lat, 2.0);
        let base = lat.node_index(&[5, 7]);
        let t = smooth_minorant(&m, base, 0.25, 0.5).unwrap();
        assert_eq!(t.field.values()[base], 1.0);
        assert!(t.field.values().iter().all(|&v| (0.0..=2.0).contains(&v)));
        assert_eq!(t.radius, 0.25);
        let zero = RealField::zeros(&lat);
        assert!(matches!(smooth_minorant(&zero, 0, 0.2, 0.5), Err(GeometryError::NonPositiveBase { .. })));
    }

    #[test]
    fn minorant_shrinks_under_generic_field() {
        let lat = Lattice::unit(1, 64).unwrap();
        let m = RealField::from_fn(&lat, |x| {
            (2.0 * PI * x[0]).cos().max(0.0) * (1.0 + 0.5 * (2.0 * PI * x[1]).sin()) + 0.05 * (2.0 * PI * x[1]).cos().powi(2)
        });
        let base = 0;
        let t = smooth_minorant(&m, base, 0.5, 0.5).unwrap();
        assert!(t.radius < 0.5);
        for (a, b) in t.field.values().iter().zip(m.values()) {
            assert!(*a >= 0.0 && a <= b);
        }
        assert!(t.field.values()[base] >= 0.5 * m.values()[base]);
    }

    #[test]
    fn lipschitz_of_constant_is_zero() {
        let lat = Lattice::unit(1, 16).unwrap();
        assert_eq!(lipschitz_estimate(&RealField::constant(&lat, 4.0)), 0.0);
    }
}
