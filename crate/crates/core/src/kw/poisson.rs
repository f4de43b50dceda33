use serde::Serialize;

use super::KwError;
use crate::continuity::weighted_laplacian_with;
use crate::geometry::MetricField;
use crate::grid::{extrema, integrate, project_resolved, solve_shifted, sup_norm, RealField};
use crate::linalg::{gmres, GmresOptions, HermitianField};

fn inverse_field(omega: &HermitianField) -> Result<HermitianField, KwError> {
    for node in 0..omega.lattice().len() {
        let d = omega.at(node).det();
        if !(d > 0.0) || !d.is_finite() {
            return Err(KwError::Singular(node));
        }
    }
    Ok(omega.map(|h| h.inverse().expect("checked determinant")))
}

/// `Δ_{ω_ε} h = g_ε^{ij̄} ∂_i ∂̄_j h`.
pub fn weighted_laplacian(omega: &HermitianField, h: &RealField) -> Result<RealField, KwError> {
    if omega.lattice() != h.lattice() {
        return Err(KwError::LatticeMismatch);
    }
    Ok(weighted_laplacian_with(&inverse_field(omega)?, h))
}

/// `∫ M e^u ωⁿ / ∫ e^u ωⁿ`.
pub fn mbar(u: &RealField, m: &RealField, metric: &MetricField) -> f64 {
    let w = u.zip_map(&metric.volume_density(), |u, d| u.exp() * d);
    integrate(&w.zip_map(m, |w, m| w * m)) / integrate(&w)
}

/// `u − sup u`.
pub fn normalize_sup(u: &RealField) -> RealField {
    let top = extrema(u).max;
    u.map(|v| v - top)
}

/// Estimated `M̄₀` from the tail of a sequence of `M̄_ε`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum MbarLimit {
    Estimate { value: f64, cauchy_gap: f64, cauchy_met: bool },
    Inapplicable { value: f64 },
}

impl MbarLimit {
    pub fn value(&self) -> f64 {
        match *self {
            MbarLimit::Estimate { value, .. } | MbarLimit::Inapplicable { value } => value,
        }
    }

    pub fn positive(&self) -> Option<f64> {
        match *self {
            MbarLimit::Estimate { value, .. } => Some(value),
            MbarLimit::Inapplicable { .. } => None,
        }
    }
}

/// Tail value of `M̄_{ε_k}` with the Cauchy check `|M̄_K − M̄_{K−1}| < 10⁻⁴`.
pub fn mbar_limit(values: &[f64]) -> Result<MbarLimit, KwError> {
    if values.len() < 4 {
        return Err(KwError::TooFewEntries { needed: 4, actual: values.len() });
    }
    let last = values[values.len() - 1];
    if !(last > 0.0) {
        return Ok(MbarLimit::Inapplicable { value: last });
    }
    let gap = (last - values[values.len() - 2]).abs();
    Ok(MbarLimit::Estimate { value: last, cauchy_gap: gap, cauchy_met: gap < 1e-4 })
}

#[derive(Clone, Debug)]
pub struct WeightedPoisson {
    /// Solution with `inf f = 0`.
    pub f: RealField,
    /// Weighted mean removed from the right-hand side.
    pub projected_mean: f64,
    /// Sup of the defect on resolved modes.
    pub residual_sup: f64,
    /// Sup of the defect including the Nyquist-only modes no derivative sees.
    pub unresolved_sup: f64,
    pub iterations: usize,
}

/// Solves `Δ_{ω_ε} f = M − M̄_ε` with `inf f = 0`.
///
/// The Krylov solve runs on the modes the flat Laplacian resolves. The
/// constant part of the defect is the discrete compatibility shift, which
/// `det ω_ε` reproduces only up to aliasing.
pub fn solve_weighted_poisson(omega: &HermitianField, m: &RealField, mbar_eps: f64) -> Result<WeightedPoisson, KwError> {
    if omega.lattice() != m.lattice() {
        return Err(KwError::LatticeMismatch);
    }
    let lattice = m.lattice();
    let inv = inverse_field(omega)?;
    let weight = omega.det();
    let raw = m.map(|v| v - mbar_eps);
    let weighted_mean = integrate(&raw.zip_map(&weight, |r, w| r * w)) / integrate(&weight);
    if weighted_mean.abs() > 1e-8 * sup_norm(&raw).max(1.0) {
        log::warn!("weighted Poisson compatibility defect {weighted_mean:.3e}");
    }
    let s = inv.trace().mean() / omega.n() as f64;
    let field = |x: &[f64]| RealField::new(lattice, x.to_vec()).expect("lattice length");
    let apply = |x: &[f64]| project_resolved(&weighted_laplacian_with(&inv, &field(x))).into_values();
    let precond = |y: &[f64]| solve_shifted(&field(y), s, 0.0).into_values();
    let opts = GmresOptions { rel_tol: 1e-13, abs_tol: 1e-15, ..GmresOptions::default() };
    let out = gmres(apply, precond, project_resolved(&raw).values(), None, &opts);
    let f = field(&out.x);
    let lf = weighted_laplacian_with(&inv, &f);
    let defect = raw.zip_map(&lf, |r, l| r - l);
    let projected_mean = defect.mean();
    let residual_sup = sup_norm(&project_resolved(&defect));
    let unresolved_sup = sup_norm(&defect.map(|d| d - projected_mean));
    log::debug!("weighted Poisson shift {projected_mean:.3e} (weighted mean {weighted_mean:.3e}), residual {residual_sup:.3e}, unresolved {unresolved_sup:.3e}");
    if !(residual_sup <= 1e-9) {
        return Err(KwError::NotConverged { iterations: out.iterations, residual: residual_sup });
    }
    let bottom = extrema(&f).min;
    Ok(WeightedPoisson { f: f.map(|v| v - bottom), projected_mean, residual_sup, unresolved_sup, iterations: out.iterations })
}

/// `A = 2/M̄₀`, `B = log A + 1`, `φ₊ = A f + B`.
#[derive(Clone, Debug)]
pub struct Supersolution {
    pub a: f64,
    pub b: f64,
    pub phi_plus: RealField,
}

pub fn supersolution(f: &RealField, mbar0: f64) -> Result<Supersolution, KwError> {
    if !(mbar0 > 0.0) || !mbar0.is_finite() {
        return Err(KwError::Inapplicable(format!("mbar0 = {mbar0} is not positive")));
    }
    let a = 2.0 / mbar0;
    let b = a.ln() + 1.0;
    Ok(Supersolution { a, b, phi_plus: f.map(|v| a * v + b) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{solve_flat_poisson, Lattice};
    use crate::linalg::HMat;
    use std::f64::consts::PI;

    fn curved_omega(lat: &Lattice) -> HermitianField {
        let phi = RealField::from_fn(lat, |x| 0.02 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin() + 0.01 * (4.0 * PI * x[1]).cos());
        MetricField::from_potential(HMat::scalar(lat.dim_c(), 0.5), &phi).unwrap().field().clone()
    }

    #[test]
    fn flat_scaling_and_constants() {
        let lat = Lattice::unit(1, 32).unwrap();
        let omega = HermitianField::constant(&lat, &HMat::scalar(1, 0.25));
        let h = RealField::from_fn(&lat, |x| (2.0 * PI * x[0]).cos());
        let lap = weighted_laplacian(&omega, &h).unwrap();
        for (l, v) in lap.values().iter().zip(h.values()) {
            assert!((l + 4.0 * PI * PI * v).abs() < 1e-10);
        }
        assert_eq!(sup_norm(&weighted_laplacian(&omega, &RealField::constant(&lat, 3.0)).unwrap()), 0.0);
    }

    #[test]
    fn divergence_structure() {
        for (n, res) in [(1, 32), (2, 8)] {
            let lat = Lattice::unit(n, res).unwrap();
            let omega = curved_omega(&lat);
            let h = RealField::from_fn(&lat, |x| (2.0 * PI * (x[0] + x[1])).sin() + 0.3 * (2.0 * PI * x[lat.real_axes() - 1]).cos());
            let lap = weighted_laplacian(&omega, &h).unwrap();
            assert!(integrate(&lap.zip_map(&omega.det(), |a, b| a * b)).abs() < 1e-8 * sup_norm(&h));
        }
    }

    #[test]
    fn mbar_basics() {
        let lat = Lattice::unit(1, 16).unwrap();
        let g = MetricField::conformal(&RealField::from_fn(&lat, |x| 0.2 * (2.0 * PI * x[1]).sin())).unwrap();
        let u = RealField::from_fn(&lat, |x| -20.0 + (2.0 * PI * x[0]).cos());
        assert_eq!(mbar(&u, &RealField::constant(&lat, 0.0), &g), 0.0);
        assert!((mbar(&u, &RealField::constant(&lat, 1.7), &g) - 1.7).abs() < 1e-15);
        let m = RealField::from_fn(&lat, |x| 1.0 + (2.0 * PI * x[0]).sin());
        assert!((mbar(&u, &m, &g) - mbar(&normalize_sup(&u), &m, &g)).abs() < 1e-12);
        let v = normalize_sup(&u);
        assert_eq!(extrema(&v).max, 0.0);
        assert!(v.values().iter().all(|x| x.exp() <= 1.0));
    }

    #[test]
    fn mbar_limit_rules() {
        assert!(mbar_limit(&[1.0, 1.0, 1.0]).is_err());
        assert_eq!(mbar_limit(&[0.0; 5]).unwrap(), MbarLimit::Inapplicable { value: 0.0 });
        let est = mbar_limit(&[2.0, 1.5, 1.2, 1.00001, 1.0]).unwrap();
        assert_eq!(est, MbarLimit::Estimate { value: 1.0, cauchy_gap: (1.0f64 - 1.00001).abs(), cauchy_met: true });
    }

    #[test]
    fn weighted_poisson_cases() {
        let lat = Lattice::unit(1, 32).unwrap();
        let flat = HermitianField::constant(&lat, &HMat::scalar(1, 0.125));
        let zero = solve_weighted_poisson(&flat, &RealField::constant(&lat, 2.0), 2.0).unwrap();
        assert!(sup_norm(&zero.f) <= 1e-12);
        let m = RealField::from_fn(&lat, |x| (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos());
        let sol = solve_weighted_poisson(&flat, &m, 0.0).unwrap();
        let reference = solve_flat_poisson(&m).field.map(|v| 0.125 * v);
        let bottom = extrema(&reference).min;
        assert!(sup_norm(&sol.f.zip_map(&reference, |a, b| a - (b - bottom))) < 1e-12);
        assert_eq!(extrema(&sol.f).min, 0.0);
    }

    #[test]
    fn weighted_poisson_round_trip() {
        for (n, res) in [(1, 32), (2, 8)] {
            let lat = Lattice::unit(n, res).unwrap();
            let omega = curved_omega(&lat);
            let target = RealField::from_fn(&lat, |x| (2.0 * PI * x[0]).sin() + 0.5 * (2.0 * PI * (x[1] - x[0])).cos());
            let rhs = weighted_laplacian(&omega, &target).unwrap();
            let sol = solve_weighted_poisson(&omega, &rhs, 0.0).unwrap();
            let bottom = extrema(&target).min;
            assert!(sup_norm(&sol.f.zip_map(&target, |a, b| a - (b - bottom))) < 1e-8);
            assert!(sol.projected_mean.abs() < 1e-12);
        }
    }

    #[test]
    fn supersolution_constants() {
        let lat = Lattice::unit(1, 8).unwrap();
        let s = supersolution(&RealField::zeros(&lat), 1.0).unwrap();
        assert_eq!(s.a, 2.0);
        assert!((s.b - (2f64.ln() + 1.0)).abs() < 1e-15);
        assert!(matches!(supersolution(&RealField::zeros(&lat), 0.0), Err(KwError::Inapplicable(_))));
    }
}
