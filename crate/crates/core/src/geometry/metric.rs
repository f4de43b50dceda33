use serde::{Deserialize, Serialize};

use super::GeometryError;
use crate::grid::{ddbar_matrix, integrate, Lattice, RealField};
use crate::linalg::{HMat, HermitianField};

/// Minimum eigenvalue accepted for a metric (or `ω_ε`) at any node.
pub const POSITIVITY_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Flat,
    Conformal,
    Potential,
    Product,
}

/// Kähler metric `g_{ij̄}` on a lattice.
///
/// Only the constructors below produce values, and each of them yields a
/// closed (1,1)-form: a constant background plus a discrete `∂∂̄`-exact
/// term, a conformal factor in dimension one, or a product of those.
#[derive(Clone, Debug)]
pub struct MetricField {
    g: HermitianField,
    provenance: Provenance,
    background: HMat,
}

fn check_positive(g: &HermitianField) -> Result<(), GeometryError> {
    let (eig, node) = g.worst_eigenvalue();
    if !(eig > POSITIVITY_TOLERANCE) {
        return Err(GeometryError::NotPositive { node, eigenvalue: eig });
    }
    Ok(())
}

impl MetricField {
    /// Constant metric `G0`.
    pub fn flat(lattice: &Lattice, background: HMat) -> Result<Self, GeometryError> {
        if background.n() != lattice.dim_c() {
            return Err(GeometryError::DimensionMismatch { expected: lattice.dim_c(), actual: background.n() });
        }
        if !(background.min_eigenvalue() > POSITIVITY_TOLERANCE) || background.hermitian_defect() > 1e-12 {
            return Err(GeometryError::BackgroundNotPositive);
        }
        Ok(Self { g: HermitianField::constant(lattice, &background), provenance: Provenance::Flat, background })
    }

    /// `g_{ij̄} = G0_{ij̄} + ∂_i ∂̄_j φ`.
    pub fn from_potential(background: HMat, phi: &RealField) -> Result<Self, GeometryError> {
        let lattice = phi.lattice();
        let base = Self::flat(lattice, background)?;
        let g = base.g.add(&ddbar_matrix(phi));
        check_positive(&g)?;
        Ok(Self { g, provenance: Provenance::Potential, background })
    }

    /// `g = e^f` on a one-dimensional torus.
    pub fn conformal(log_density: &RealField) -> Result<Self, GeometryError> {
        let lattice = log_density.lattice();
        if lattice.dim_c() != 1 {
            return Err(GeometryError::RequiresDimensionOne(lattice.dim_c()));
        }
        let density = log_density.map(f64::exp);
        let background = HMat::scalar(1, density.mean());
        let g = HermitianField::from_fn(lattice, 1, |node| HMat::scalar(1, density.values()[node]));
        Ok(Self { g, provenance: Provenance::Conformal, background })
    }

    /// Block-diagonal `diag(g₁(z₁), g₂(z₂))` on the product lattice.
    pub fn product(first: &MetricField, second: &MetricField) -> Result<Self, GeometryError> {
        let (l1, l2) = (first.lattice(), second.lattice());
        if l1.dim_c() != 1 || l2.dim_c() != 1 {
            return Err(GeometryError::FactorDimensions(l1.dim_c(), l2.dim_c()));
        }
        let periods: Vec<f64> = l1.periods().iter().chain(l2.periods()).copied().collect();
        let resolution: Vec<usize> = l1.resolution().iter().chain(l2.resolution()).copied().collect();
        let lattice = Lattice::new(2, &periods, &resolution)?;
        let inner = l2.len();
        let g = HermitianField::from_fn(&lattice, 2, |node| {
            let (p, q) = (node / inner, node % inner);
            HMat::diag(&[first.g.at(p).get(0, 0).re, second.g.at(q).get(0, 0).re])
        });
        let background = HMat::diag(&[first.background.get(0, 0).re, second.background.get(0, 0).re]);
        Ok(Self { g, provenance: Provenance::Product, background })
    }

    /// `c · g` for a constant `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self, GeometryError> {
        if !(c > 0.0) {
            return Err(GeometryError::BackgroundNotPositive);
        }
        Ok(Self { g: self.g.scale(c), provenance: self.provenance, background: self.background.scale(c) })
    }

    pub fn lattice(&self) -> &Lattice {
        self.g.lattice()
    }

    pub fn n(&self) -> usize {
        self.g.n()
    }

    pub fn field(&self) -> &HermitianField {
        &self.g
    }

    pub fn at(&self, node: usize) -> HMat {
        self.g.at(node)
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Constant representative of the Kähler class `[ω]`.
    pub fn background(&self) -> HMat {
        self.background
    }

    /// `det g`, the density of `ωⁿ` against the flat measure.
    pub fn volume_density(&self) -> RealField {
        self.g.det()
    }

    pub fn log_det(&self) -> RealField {
        self.g.scalar_map(|h| h.det().ln())
    }

    pub fn volume(&self) -> f64 {
        integrate(&self.volume_density())
    }
}
