use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{weighted_laplacian, KwError};
use crate::continuity::{Solution, TraceDiagnostics};
use crate::geometry::{m_factor, MetricField};
use crate::grid::{extrema, integrate, sup_norm, Lattice, RealField};
use crate::linalg::HermitianField;

/// Residual signs and ordering for a candidate pair of Eq. `Δφ = M e^φ − 1`.
#[derive(Clone, Debug, Serialize)]
pub struct ComparisonReport {
    pub is_sub: bool,
    pub is_super: bool,
    /// `min(φ₊ − φ₋)`.
    pub ordering_margin: f64,
    pub ordering_argmin: usize,
    pub min_sub_residual: f64,
    pub sub_argmin: usize,
    pub max_super_residual: f64,
    pub super_argmax: usize,
    /// `M ≥ 0` with `max M > 0`.
    pub hypotheses_met: bool,
    /// `Some(ordering_margin ≥ −tol)` when both residual signs and the hypotheses hold.
    pub ordering_holds: Option<bool>,
}

fn kw_residual(omega: &HermitianField, phi: &RealField, m: &RealField) -> Result<RealField, KwError> {
    let lap = weighted_laplacian(omega, phi)?;
    let values = (0..phi.len()).map(|k| lap.values()[k] - (m.values()[k] * phi.values()[k].exp() - 1.0)).collect();
    Ok(RealField::new(phi.lattice(), values).expect("lattice length"))
}

pub fn check_comparison(
    phi_minus: &RealField,
    phi_plus: &RealField,
    m: &RealField,
    omega: &HermitianField,
    tol: f64,
) -> Result<ComparisonReport, KwError> {
    if phi_minus.lattice() != m.lattice() || phi_plus.lattice() != m.lattice() {
        return Err(KwError::LatticeMismatch);
    }
    let sub = extrema(&kw_residual(omega, phi_minus, m)?);
    let sup = extrema(&kw_residual(omega, phi_plus, m)?);
    let gap = extrema(&phi_plus.zip_map(phi_minus, |p, q| p - q));
    let me = extrema(m);
    let hypotheses_met = me.min >= 0.0 && me.max > 0.0;
    let is_sub = sub.min >= -tol;
    let is_super = sup.max <= tol;
    let ordering_holds = (is_sub && is_super && hypotheses_met).then_some(gap.min >= -tol);
    Ok(ComparisonReport {
        is_sub,
        is_super,
        ordering_margin: gap.min,
        ordering_argmin: gap.argmin,
        min_sub_residual: sub.min,
        sub_argmin: sub.argmin,
        max_super_residual: sup.max,
        super_argmax: sup.argmax,
        hypotheses_met,
        ordering_holds,
    })
}

#[derive(Clone, Debug)]
pub struct DiffInequality {
    /// `Δ_{ω_ε}T − (M + ε/n) e^T + 1` with `M = (n+1)κ/2n`.
    pub residual: RealField,
    pub min_residual: f64,
    pub argmin: usize,
}

pub fn check_diff_inequality(sol: &Solution, trace: &TraceDiagnostics, kappa: &RealField) -> Result<DiffInequality, KwError> {
    let n = sol.omega_eps.n();
    let factor = m_factor(n);
    let lap = weighted_laplacian(&sol.omega_eps, &trace.t)?;
    let eps_n = sol.epsilon / n as f64;
    let values = (0..lap.len())
        .map(|k| lap.values()[k] - (factor * kappa.values()[k] + eps_n) * trace.t.values()[k].exp() + 1.0)
        .collect();
    let residual = RealField::new(kappa.lattice(), values).expect("lattice length");
    let ex = extrema(&residual);
    Ok(DiffInequality { min_residual: ex.min, argmin: ex.argmin, residual })
}

#[derive(Clone, Debug, Serialize)]
pub struct GuenanciaReport {
    /// `∫ M e^{T_ε} e^{u_ε} ωⁿ`.
    pub lhs: f64,
    /// `∫ e^{u_ε} ωⁿ`.
    pub rhs: f64,
    #[serde(rename = "C_eps")]
    pub c_eps: f64,
    pub holds: bool,
    /// `min (e^{T_ε} − C_ε)`.
    pub pointwise_margin: f64,
}

pub fn guenancia_check(sol: &Solution, trace: &TraceDiagnostics, m: &RealField, metric: &MetricField, tol: f64) -> GuenanciaReport {
    let n = metric.n() as f64;
    let w = sol.u.zip_map(&metric.volume_density(), |u, d| u.exp() * d);
    let et = trace.t.map(f64::exp);
    let lhs = integrate(&RealField::new(
        m.lattice(),
        (0..m.len()).map(|k| m.values()[k] * et.values()[k] * w.values()[k]).collect(),
    )
    .expect("lattice length"));
    let rhs = integrate(&w);
    let c_eps = sol.u.values().iter().map(|u| (-u / n).exp()).fold(f64::INFINITY, f64::min);
    let pointwise_margin = extrema(&et).min - c_eps;
    GuenanciaReport { lhs, rhs, c_eps, holds: lhs <= rhs + tol, pointwise_margin }
}

/// Exact solution `φ*` of `Δφ = M e^φ − 1` with a bracketing pair around it.
#[derive(Clone, Debug)]
pub struct ManufacturedTriple {
    pub phi_star: RealField,
    pub phi_minus: RealField,
    pub phi_plus: RealField,
    pub m: RealField,
    pub shift: f64,
}

fn random_smooth(lattice: &Lattice, rng: &mut ChaCha8Rng, modes: usize) -> RealField {
    let terms: Vec<(Vec<f64>, f64, f64)> = (0..modes)
        .map(|_| {
            let k: Vec<f64> = (0..lattice.real_axes()).map(|_| rng.random_range(-2i32..=2) as f64).collect();
            (k, rng.random_range(-1.0..1.0), rng.random_range(0.0..std::f64::consts::TAU))
        })
        .collect();
    RealField::from_fn(lattice, |x| {
        terms
            .iter()
            .map(|(k, a, th)| {
                let phase: f64 = k.iter().zip(x).zip(lattice.periods()).map(|((k, x), p)| k * x / p).sum();
                a * (std::f64::consts::TAU * phase + th).cos()
            })
            .sum()
    })
}

fn scaled_to_laplacian(omega: &HermitianField, f: RealField, bound: f64) -> Result<RealField, KwError> {
    let s = sup_norm(&weighted_laplacian(omega, &f)?);
    Ok(if s > 0.0 { f.map(|v| v * bound / s) } else { f })
}

/// Seeded manufactured triple: `M = (1 + Δφ*) e^{−φ*}`, `φ± = φ* ± c + p±`
/// with small smooth perturbations, retried until both residual signs verify.
pub fn manufactured_triple(omega: &HermitianField, seed: u64) -> Result<ManufacturedTriple, KwError> {
    let lattice = omega.lattice();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let phi_star = scaled_to_laplacian(omega, random_smooth(lattice, &mut rng, 4), 0.5)?;
    let lap = weighted_laplacian(omega, &phi_star)?;
    let m = lap.zip_map(&phi_star, |l, p| (1.0 + l) * (-p).exp());
    let shift = rng.random_range(0.05..0.3);
    let mut scale = 0.01 * shift;
    for _ in 0..30 {
        let p_plus = scaled_to_laplacian(omega, random_smooth(lattice, &mut rng, 3), scale)?;
        let p_minus = scaled_to_laplacian(omega, random_smooth(lattice, &mut rng, 3), scale)?;
        let phi_plus = RealField::new(
            lattice,
            (0..m.len()).map(|k| phi_star.values()[k] + shift + p_plus.values()[k]).collect(),
        )
        .expect("lattice length");
        let phi_minus = RealField::new(
            lattice,
            (0..m.len()).map(|k| phi_star.values()[k] - shift + p_minus.values()[k]).collect(),
        )
        .expect("lattice length");
        let report = check_comparison(&phi_minus, &phi_plus, &m, omega, 0.0)?;
        if report.is_sub && report.is_super {
            return Ok(ManufacturedTriple { phi_star, phi_minus, phi_plus, m, shift });
        }
        scale *= 0.5;
    }
    Err(KwError::Inapplicable(format!("no verified manufactured pair for seed {seed}")))
}
