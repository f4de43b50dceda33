use serde::Serialize;

use super::ContinuityError;
use crate::geometry::MetricField;
use crate::grid::{ddbar_matrix, integrate, RealField};
use crate::linalg::{HMat, HermitianField};

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum TwistMode {
    /// `ρ = −Ric(ω) = ∂∂̄ log det g`.
    Geometric,
    /// `ρ = λ · background + ∂∂̄ψ`.
    Synthetic { lambda: f64 },
}

/// Closed twist form `ρ = ρ₀ + ∂∂̄ψ` with constant `ρ₀`.
#[derive(Clone, Debug)]
pub struct TwistField {
    mode: TwistMode,
    constant: HMat,
    potential: RealField,
    rho: HermitianField,
    intersections: Vec<f64>,
}

impl TwistField {
    pub fn geometric(metric: &MetricField) -> Self {
        let n = metric.n();
        Self::build(metric, TwistMode::Geometric, HMat::zeros(n), metric.log_det())
    }

    pub fn synthetic(metric: &MetricField, lambda: f64, psi: &RealField) -> Result<Self, ContinuityError> {
        if psi.lattice() != metric.lattice() {
            return Err(ContinuityError::LatticeMismatch);
        }
        if !lambda.is_finite() {
            return Err(ContinuityError::InvalidParameter(format!("twist lambda {lambda}")));
        }
        let constant = metric.background().scale(lambda);
        Ok(Self::build(metric, TwistMode::Synthetic { lambda }, constant, psi.clone()))
    }

    fn build(metric: &MetricField, mode: TwistMode, constant: HMat, potential: RealField) -> Self {
        let lattice = metric.lattice();
        let rho = HermitianField::constant(lattice, &constant).add(&ddbar_matrix(&potential));
        let intersections = intersection_numbers(metric, &rho);
        Self { mode, constant, potential, rho, intersections }
    }

    pub fn mode(&self) -> &TwistMode {
        &self.mode
    }

    /// Constant part `ρ₀`.
    pub fn constant(&self) -> HMat {
        self.constant
    }

    /// `ψ` with `ρ = ρ₀ + ∂∂̄ψ`.
    pub fn potential(&self) -> &RealField {
        &self.potential
    }

    pub fn field(&self) -> &HermitianField {
        &self.rho
    }

    /// Mixed numbers `I_j = [ω]^{n−j}·[ρ]^j`, `j = 0..=n`.
    pub fn intersections(&self) -> &[f64] {
        &self.intersections
    }

    /// `(ε[ω] + [ρ])ⁿ = Σ_j C(n, j) ε^{n−j} I_j`.
    pub fn cohomological_mass(&self, eps: f64) -> f64 {
        cohomological_mass(eps, &self.intersections)
    }
}

fn intersection_numbers(metric: &MetricField, rho: &HermitianField) -> Vec<f64> {
    let n = metric.n();
    let g = metric.field();
    let i0 = integrate(&g.det());
    let density = (0..g.lattice().len()).map(|k| g.at(k).adjugate().trace_product(&rho.at(k)).re / n as f64).collect();
    let mixed = integrate(&RealField::new(g.lattice(), density).expect("lattice length"));
    if n == 1 {
        vec![i0, mixed]
    } else {
        vec![i0, mixed, integrate(&rho.det())]
    }
}

/// Evaluates `Σ_j C(n, j) ε^{n−j} I_j` for `I = [I_0, …, I_n]`.
pub fn cohomological_mass(eps: f64, intersections: &[f64]) -> f64 {
    let n = intersections.len() - 1;
    let mut binom = 1.0;
    let mut total = 0.0;
    for (j, ij) in intersections.iter().enumerate() {
        total += binom * eps.powi((n - j) as i32) * ij;
        binom = binom * (n - j) as f64 / (j + 1) as f64;
    }
    total
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Lattice;
    use std::f64::consts::PI;

    #[test]
    fn binomial_expansion() {
        assert_eq!(cohomological_mass(0.25, &[1.0, 0.0]), 0.25);
        let m = cohomological_mass(0.3, &[1.0, 0.7, 0.49]);
        assert!((m - 1.0f64.powi(2) * (0.3f64 + 0.7).powi(2)).abs() < 1e-15);
    }

    #[test]
    fn synthetic_flat_intersections() {
        let lat = Lattice::unit(2, 8).unwrap();
        let g = MetricField::flat(&lat, HMat::identity(2)).unwrap();
        let t = TwistField::synthetic(&g, 0.7, &RealField::zeros(&lat)).unwrap();
        let i = t.intersections();
        assert!((i[0] - 1.0).abs() < 1e-13 && (i[1] - 0.7).abs() < 1e-13 && (i[2] - 0.49).abs() < 1e-13);
        assert!((t.cohomological_mass(0.1) - 0.64).abs() < 1e-14);
    }

    #[test]
    fn geometric_twist_has_no_class_on_torus() {
        let lat = Lattice::unit(1, 32).unwrap();
        let f = RealField::from_fn(&lat, |x| 0.3 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos());
        let g = MetricField::conformal(&f).unwrap();
        let t = TwistField::geometric(&g);
        assert!(t.intersections()[1].abs() < 1e-14);
        assert!((t.intersections()[0] - g.volume()).abs() < 1e-15);
    }
}
