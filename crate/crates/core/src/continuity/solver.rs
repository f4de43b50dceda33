use serde::Serialize;

use super::{ContinuityError, TwistField};
use crate::geometry::{MetricField, POSITIVITY_TOLERANCE};
use crate::grid::{ddbar_matrix, extrema, solve_shifted, sup_norm, RealField};
use crate::linalg::{gmres, GmresOptions, HermitianField};

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SolverOptions {
    /// Sup-norm residual target.
    pub tolerance: f64,
    pub max_newton: usize,
    pub max_halvings: usize,
    #[serde(skip)]
    pub gmres: GmresOptions,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { tolerance: 1e-10, max_newton: 50, max_halvings: 30, gmres: GmresOptions::default() }
    }
}

/// Total potential `U = ψ + u`, held as its mean plus a zero-mean part so
/// that small oscillations survive next to a large constant.
#[derive(Clone, Debug)]
pub struct Potential {
    pub mean: f64,
    pub osc: RealField,
}

/// Converged `u_ε` with `ω_ε = εg + ρ + ∂∂̄u_ε`.
#[derive(Clone, Debug)]
pub struct Solution {
    pub epsilon: f64,
    pub u: RealField,
    pub omega_eps: HermitianField,
    pub residual_sup: f64,
    pub newton_iterations: usize,
    pub sup_u: f64,
    pub inf_u: f64,
    /// `max log det(g⁻¹(εg + ρ))` when `εg + ρ > 0` at every node.
    pub sup_bound: Option<f64>,
    pub potential: Potential,
}

struct Problem<'a> {
    metric: &'a MetricField,
    twist: &'a TwistField,
    eps: f64,
    log_det_g: RealField,
    /// `εg + ρ₀`.
    base: HermitianField,
}

struct Iterate {
    state: Potential,
    omega: HermitianField,
    residual: RealField,
    sup: f64,
}

impl<'a> Problem<'a> {
    fn new(metric: &'a MetricField, twist: &'a TwistField, eps: f64) -> Self {
        let base = metric.field().scale(eps).add(&HermitianField::constant(metric.lattice(), &twist.constant()));
        Self { metric, twist, eps, log_det_g: metric.log_det(), base }
    }

    fn omega(&self, osc: &RealField) -> HermitianField {
        self.base.add(&ddbar_matrix(osc))
    }

    fn positive(omega: &HermitianField) -> Result<(), (usize, f64)> {
        let (eig, node) = omega.worst_eigenvalue();
        if eig > POSITIVITY_TOLERANCE {
            Ok(())
        } else {
            Err((node, eig))
        }
    }

    /// `F = log det Ω − log det g − u` with `u = U − ψ`.
    fn residual(&self, omega: &HermitianField, state: &Potential) -> RealField {
        let psi = self.twist.potential().values();
        let lg = self.log_det_g.values();
        let osc = state.osc.values();
        let values = (0..lg.len())
            .map(|k| omega.at(k).det().ln() - lg[k] - (state.mean + osc[k] - psi[k]))
            .collect();
        RealField::new(self.metric.lattice(), values).expect("lattice length")
    }

    fn evaluate(&self, state: Potential) -> Result<Iterate, (usize, f64)> {
        let omega = self.omega(&state.osc);
        Self::positive(&omega)?;
        let residual = self.residual(&omega, &state);
        let sup = sup_norm(&residual);
        Ok(Iterate { state, omega, residual, sup })
    }

    /// Iterate with the given oscillating part and the mean making `mean(F) = 0`.
    fn with_balanced_mean(&self, osc: RealField) -> Result<Iterate, (usize, f64)> {
        let omega = self.omega(&osc);
        Self::positive(&omega)?;
        let provisional = Potential { mean: 0.0, osc };
        let shift = self.residual(&omega, &provisional).mean();
        let state = Potential { mean: shift, osc: provisional.osc };
        let residual = self.residual(&omega, &state);
        let sup = sup_norm(&residual);
        Ok(Iterate { state, omega, residual, sup })
    }

    fn cold_start(&self) -> Result<Iterate, ContinuityError> {
        let psi = self.twist.potential();
        let psi_mean = psi.mean();
        // Prefer u constant; fall back to U constant, where Ω = εg + ρ₀.
        self.with_balanced_mean(psi.map(|v| v - psi_mean))
            .or_else(|_| self.with_balanced_mean(RealField::zeros(self.metric.lattice())))
            .map_err(|(node, eigenvalue)| ContinuityError::PositivityLost { epsilon: self.eps, node, eigenvalue })
    }

    fn warm_start(&self, previous: &Potential) -> Result<Iterate, ContinuityError> {
        let mut theta = 1.0;
        for _ in 0..8 {
            if let Ok(it) = self.with_balanced_mean(previous.osc.map(|v| theta * v)) {
                return Ok(it);
            }
            theta *= 0.5;
        }
        self.cold_start()
    }

    fn newton_step(&self, it: &Iterate, opts: &SolverOptions) -> Vec<f64> {
        let lattice = self.metric.lattice();
        let n = self.metric.n();
        let inv = it.omega.map(|h| h.inverse().expect("positive definite"));
        let s = inv.trace().mean() / n as f64;
        let apply = |x: &[f64]| -> Vec<f64> {
            let h = RealField::new(lattice, x.to_vec()).expect("lattice length");
            let lap = weighted_laplacian_with(&inv, &h);
            lap.values().iter().zip(x).map(|(l, v)| l - v).collect()
        };
        let precond = |y: &[f64]| -> Vec<f64> {
            let r = RealField::new(lattice, y.to_vec()).expect("lattice length");
            solve_shifted(&r, s, 1.0).into_values()
        };
        let rhs: Vec<f64> = it.residual.values().iter().map(|v| -v).collect();
        let out = gmres(apply, precond, &rhs, None, &opts.gmres);
        if !out.converged {
            log::debug!("gmres stopped after {} iterations at residual {:.3e}", out.iterations, out.residual);
        }
        out.x
    }

    fn solve(&self, start: Iterate, opts: &SolverOptions) -> Result<Solution, ContinuityError> {
        let mut it = start;
        let mut iterations = 0;
        while it.sup > opts.tolerance {
            if iterations >= opts.max_newton {
                return Err(ContinuityError::Stagnation { epsilon: self.eps, iterations, residual: it.sup });
            }
            iterations += 1;
            let delta = self.newton_step(&it, opts);
            let d_mean = delta.iter().sum::<f64>() / delta.len() as f64;
            let mut alpha = 1.0;
            let mut accepted = None;
            let mut last_failure = None;
            for _ in 0..=opts.max_halvings {
                let osc: Vec<f64> =
                    it.state.osc.values().iter().zip(&delta).map(|(o, d)| o + alpha * (d - d_mean)).collect();
                let state = Potential {
                    mean: it.state.mean + alpha * d_mean,
                    osc: RealField::new(self.metric.lattice(), osc).expect("lattice length"),
                };
                match self.evaluate(state) {
                    Ok(cand) if cand.sup < it.sup => {
                        accepted = Some(cand);
                        break;
                    }
                    Ok(_) => {}
                    Err(fail) => last_failure = Some(fail),
                }
                alpha *= 0.5;
            }
            match accepted {
                Some(cand) => {
                    log::trace!("eps {:.3e} newton {iterations}: residual {:.3e} (step {alpha})", self.eps, cand.sup);
                    it = cand;
                }
                None => {
                    return Err(match last_failure {
                        Some((node, eigenvalue)) if it.sup > 1e3 * opts.tolerance => {
                            ContinuityError::PositivityLost { epsilon: self.eps, node, eigenvalue }
                        }
                        _ => ContinuityError::Stagnation { epsilon: self.eps, iterations, residual: it.sup },
                    });
                }
            }
        }
        Ok(self.finish(it, iterations))
    }

    fn finish(&self, it: Iterate, iterations: usize) -> Solution {
        let psi = self.twist.potential().values();
        let u = RealField::new(
            self.metric.lattice(),
            it.state.osc.values().iter().zip(psi).map(|(o, p)| it.state.mean + o - p).collect(),
        )
        .expect("lattice length");
        let ex = extrema(&u);
        Solution {
            epsilon: self.eps,
            sup_bound: sup_bound(self.metric, self.twist, self.eps),
            u,
            omega_eps: it.omega,
            residual_sup: it.sup,
            newton_iterations: iterations,
            sup_u: ex.max,
            inf_u: ex.min,
            potential: it.state,
        }
    }
}

/// `tr(Ω⁻¹ ∂∂̄h)` given the pointwise inverse `Ω⁻¹`.
pub(crate) fn weighted_laplacian_with(inverse: &HermitianField, h: &RealField) -> RealField {
    let hess = ddbar_matrix(h);
    let values = (0..h.len()).map(|k| inverse.at(k).trace_product(&hess.at(k)).re).collect();
    RealField::new(h.lattice(), values).expect("lattice length")
}

/// `max log det(g⁻¹(εg + ρ))` when `εg + ρ` is positive at every node.
pub fn sup_bound(metric: &MetricField, twist: &TwistField, eps: f64) -> Option<f64> {
    let form = metric.field().scale(eps).add(twist.field());
    if form.worst_eigenvalue().0 <= 0.0 {
        return None;
    }
    let ld = metric.log_det();
    Some(form.det().values().iter().zip(ld.values()).map(|(d, l)| d.ln() - l).fold(f64::NEG_INFINITY, f64::max))
}

/// `F(u) = log det(εg + ρ + ∂∂̄u) − log det g − u`, evaluated from `u` alone.
///
/// Returns `None` when `εg + ρ + ∂∂̄u` fails to be positive definite.
pub fn ma_residual(metric: &MetricField, twist: &TwistField, eps: f64, u: &RealField) -> Option<RealField> {
    let omega = metric.field().scale(eps).add(twist.field()).add(&ddbar_matrix(u));
    if omega.worst_eigenvalue().0 <= 0.0 {
        return None;
    }
    let ld = metric.log_det();
    let values = (0..u.len()).map(|k| omega.at(k).det().ln() - ld.values()[k] - u.values()[k]).collect();
    Some(RealField::new(u.lattice(), values).expect("lattice length"))
}

/// `F` from a stored solution: `log det(εg + ρ₀ + ∂∂̄U_osc) − log det g − u`,
/// where `U_osc` is the zero-mean part of the total potential `ψ + u`.
///
/// Differentiating `U_osc` instead of `u` avoids the cancellation between
/// `∂∂̄ψ` and `∂∂̄u` when `ω_ε` is small.
pub fn ma_residual_from_potential(
    metric: &MetricField,
    twist: &TwistField,
    eps: f64,
    u: &RealField,
    potential_osc: &RealField,
) -> Option<RealField> {
    let lattice = metric.lattice();
    let omega = metric
        .field()
        .scale(eps)
        .add(&HermitianField::constant(lattice, &twist.constant()))
        .add(&ddbar_matrix(potential_osc));
    if omega.worst_eigenvalue().0 <= 0.0 {
        return None;
    }
    let ld = metric.log_det();
    let values = (0..u.len()).map(|k| omega.at(k).det().ln() - ld.values()[k] - u.values()[k]).collect();
    Some(RealField::new(lattice, values).expect("lattice length"))
}

fn check_inputs(metric: &MetricField, twist: &TwistField) -> Result<(), ContinuityError> {
    if twist.field().lattice() != metric.lattice() {
        return Err(ContinuityError::LatticeMismatch);
    }
    Ok(())
}

/// Solves `(εg + ρ + ∂∂̄u)ⁿ = e^u gⁿ` by damped Newton iteration.
pub fn solve_ma(
    metric: &MetricField,
    twist: &TwistField,
    eps: f64,
    opts: &SolverOptions,
    warm_start: Option<&Solution>,
) -> Result<Solution, ContinuityError> {
    if !(eps > 0.0) || !eps.is_finite() {
        return Err(ContinuityError::NonPositiveEpsilon(eps));
    }
    check_inputs(metric, twist)?;
    let problem = Problem::new(metric, twist, eps);
    let start = match warm_start {
        Some(prev) => problem.warm_start(&prev.potential)?,
        None => problem.cold_start()?,
    };
    problem.solve(start, opts)
}

/// The `ε = 0` equation `(ρ + ∂∂̄u)ⁿ = e^u gⁿ`; requires `ρ > 0` pointwise.
pub fn solve_limit(metric: &MetricField, twist: &TwistField, opts: &SolverOptions) -> Result<Solution, ContinuityError> {
    check_inputs(metric, twist)?;
    let (eig, node) = twist.field().worst_eigenvalue();
    if !(eig > POSITIVITY_TOLERANCE) {
        return Err(ContinuityError::TwistNotPositive { node, eigenvalue: eig });
    }
    let problem = Problem::new(metric, twist, 0.0);
    let start = problem.cold_start()?;
    problem.solve(start, opts)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{flat_laplacian, Lattice};
    use crate::linalg::HMat;
    use std::f64::consts::PI;

    fn flat(n: usize, res: usize) -> MetricField {
        MetricField::flat(&Lattice::unit(n, res).unwrap(), HMat::identity(n)).unwrap()
    }

    fn conformal(res: usize) -> MetricField {
        let lat = Lattice::unit(1, res).unwrap();
        MetricField::conformal(&RealField::from_fn(&lat, |x| 0.3 * (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).cos()))
            .unwrap()
    }

    #[test]
    fn flat_constant_ansatz() {
        let g = flat(1, 16);
        let t = TwistField::geometric(&g);
        for eps in [1.0, 0.37, 1e-5] {
            let sol = solve_ma(&g, &t, eps, &SolverOptions::default(), None).unwrap();
            assert!(sol.u.values().iter().all(|v| (v - eps.ln()).abs() < 1e-12));
            assert!(sol.residual_sup <= 1e-10);
        }
    }

    #[test]
    fn lambda_twist_constant_ansatz() {
        for n in [1, 2] {
            let g = flat(n, 8);
            let t = TwistField::synthetic(&g, 0.7, &RealField::zeros(g.lattice())).unwrap();
            let sol = solve_ma(&g, &t, 0.25, &SolverOptions::default(), None).unwrap();
            let expect = n as f64 * (0.95f64).ln();
            assert!(sol.u.values().iter().all(|v| (v - expect).abs() < 1e-12));
            let lim = solve_limit(&g, &t, &SolverOptions::default()).unwrap();
            assert!(lim.u.values().iter().all(|v| (v - n as f64 * 0.7f64.ln()).abs() < 1e-12));
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let g = flat(1, 8);
        let t = TwistField::geometric(&g);
        assert!(matches!(solve_ma(&g, &t, 0.0, &SolverOptions::default(), None), Err(ContinuityError::NonPositiveEpsilon(_))));
        assert!(matches!(solve_limit(&g, &t, &SolverOptions::default()), Err(ContinuityError::TwistNotPositive { .. })));
    }

    /// Independent route for the one-dimensional geometric case:
    /// `L u − c u = e^u g − εg − L log g − c u`, iterated with `c ≥ max e^u g`.
    fn semilinear_oracle(g: &MetricField, eps: f64) -> RealField {
        let gv = g.volume_density();
        let lf = flat_laplacian(&g.log_det());
        let mut u = RealField::constant(g.lattice(), eps.ln());
        for _ in 0..2000 {
            let eg = u.zip_map(&gv, |a, b| a.exp() * b);
            let c = eg.values().iter().cloned().fold(0.0, f64::max) * 1.05;
            let rhs = RealField::new(
                g.lattice(),
                (0..u.len())
                    .map(|k| eg.values()[k] - eps * gv.values()[k] - lf.values()[k] - c * u.values()[k])
                    .collect(),
            )
            .unwrap();
            let next = solve_shifted(&rhs, 1.0, c);
            let change = sup_norm(&next.zip_map(&u, |a, b| a - b));
            u = next;
            if change < 1e-14 {
                break;
            }
        }
        u
    }

    #[test]
    fn conformal_matches_semilinear_oracle() {
        let g = conformal(32);
        let t = TwistField::geometric(&g);
        let mut prev: Option<Solution> = None;
        for eps in [1.0, 0.25] {
            let sol = solve_ma(&g, &t, eps, &SolverOptions::default(), prev.as_ref()).unwrap();
            let oracle = semilinear_oracle(&g, eps);
            let diff = sup_norm(&sol.u.zip_map(&oracle, |a, b| a - b));
            assert!(diff < 1e-9, "eps {eps}: {diff:e}");
            let indep = ma_residual(&g, &t, eps, &sol.u).unwrap();
            assert!(sup_norm(&indep) < 1e-9);
            let stored = ma_residual_from_potential(&g, &t, eps, &sol.u, &sol.potential.osc).unwrap();
            assert!(sup_norm(&stored) <= 1e-10);
            prev = Some(sol);
        }
    }

    #[test]
    fn warm_equals_cold() {
        let g = conformal(16);
        let t = TwistField::geometric(&g);
        let a = solve_ma(&g, &t, 0.5, &SolverOptions::default(), None).unwrap();
        let b = solve_ma(&g, &t, 0.25, &SolverOptions::default(), Some(&a)).unwrap();
        let c = solve_ma(&g, &t, 0.25, &SolverOptions::default(), None).unwrap();
        assert!(sup_norm(&b.u.zip_map(&c.u, |x, y| x - y)) < 1e-10);
    }

    #[test]
    fn potential_metric_in_dimension_two() {
        let lat = Lattice::unit(2, 8).unwrap();
        let phi = RealField::from_fn(&lat, |x| 0.002 * (2.0 * PI * (x[0] + x[3])).cos() + 0.002 * (2.0 * PI * x[1]).sin());
        let g = MetricField::from_potential(HMat::identity(2), &phi).unwrap();
        let t = TwistField::geometric(&g);
        let sol = solve_ma(&g, &t, 0.5, &SolverOptions::default(), None).unwrap();
        assert!(sol.residual_sup <= 1e-10);
        assert!(sup_norm(&ma_residual(&g, &t, 0.5, &sol.u).unwrap()) < 1e-9);
        assert!(sol.sup_bound.is_none());
        let t = TwistField::synthetic(&g, 0.5, &phi.map(|v| 3.0 * v)).unwrap();
        let sol = solve_ma(&g, &t, 0.5, &SolverOptions::default(), None).unwrap();
        assert!(sol.sup_u <= sol.sup_bound.unwrap() + 1e-8);
        assert!(sup_norm(&ma_residual(&g, &t, 0.5, &sol.u).unwrap()) < 1e-9);
    }
}
