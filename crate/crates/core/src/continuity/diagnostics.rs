use super::{ContinuityError, Solution};
use crate::geometry::MetricField;
use crate::grid::{extrema, integrate, RealField};

/// `S = tr_{ω_ε} ω`, `T = log S` and the smallest eigenvalue of `ω_ε` against `ω`.
#[derive(Clone, Debug)]
pub struct TraceDiagnostics {
    pub s: RealField,
    pub t: RealField,
    pub lambda_min: RealField,
}

impl TraceDiagnostics {
    /// `T + u/n` at every node.
    pub fn lemma_margin(&self, sol: &Solution) -> RealField {
        let n = sol.omega_eps.n() as f64;
        self.t.zip_map(&sol.u, |t, u| t + u / n)
    }

    pub fn min_lemma_margin(&self, sol: &Solution) -> f64 {
        extrema(&self.lemma_margin(sol)).min
    }
}

/// Trace diagnostics from the generalized eigenvalues `λ_i` of `ω_ε` against `ω`: `S = Σ 1/λ_i`.
pub fn trace_diagnostics(sol: &Solution, metric: &MetricField) -> Result<TraceDiagnostics, ContinuityError> {
    let lattice = metric.lattice();
    let mut s = Vec::with_capacity(lattice.len());
    let mut lambda_min = Vec::with_capacity(lattice.len());
    for node in 0..lattice.len() {
        let eig = sol.omega_eps.at(node).generalized_eigenvalues(&metric.at(node));
        if !(eig[0] > 0.0) {
            return Err(ContinuityError::PositivityLost { epsilon: sol.epsilon, node, eigenvalue: eig[0] });
        }
        s.push(eig.iter().map(|l| 1.0 / l).sum::<f64>());
        lambda_min.push(eig[0]);
    }
    let s = RealField::new(lattice, s).expect("lattice length");
    Ok(TraceDiagnostics {
        t: s.map(f64::ln),
        s,
        lambda_min: RealField::new(lattice, lambda_min).expect("lattice length"),
    })
}

/// `tr(ω_ε⁻¹ ω)` by direct matrix algebra.
pub fn trace_direct(sol: &Solution, metric: &MetricField) -> RealField {
    let lattice = metric.lattice();
    let values = (0..lattice.len())
        .map(|node| {
            let inv = sol.omega_eps.at(node).inverse().expect("positive definite");
            inv.trace_product(&metric.at(node)).re
        })
        .collect();
    RealField::new(lattice, values).expect("lattice length")
}

/// `∫ e^{u_ε} ωⁿ`.
pub fn mass(sol: &Solution, metric: &MetricField) -> f64 {
    let m = integrate(&sol.u.zip_map(&metric.volume_density(), |u, d| u.exp() * d));
    let check = determinant_mass(sol);
    if (m - check).abs() > 1e-8 * m.abs() {
        log::warn!("mass {m:.12e} and ∫ω_εⁿ {check:.12e} disagree at eps {:.3e}", sol.epsilon);
    }
    m
}

/// `∫ ω_εⁿ = ∫ det(ω_ε) dV`.
pub fn determinant_mass(sol: &Solution) -> f64 {
    integrate(&sol.omega_eps.det())
}
