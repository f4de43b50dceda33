use num_complex::Complex64;
use rayon::prelude::*;

use super::{GeometryError, MetricField};
use crate::grid::{ddbar_matrix, Lattice, Spectrum};
use crate::linalg::{HMat, HermitianField};

/// Chern curvature `R_{ij̄kl̄}` at every node, `n⁴` complex entries per node.
#[derive(Clone, Debug)]
pub struct CurvatureField {
    lattice: Lattice,
    n: usize,
    data: Vec<Complex64>,
}

impl CurvatureField {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, node: usize, i: usize, j: usize, k: usize, l: usize) -> Complex64 {
        let n = self.n;
        self.data[node * n * n * n * n + ((i * n + j) * n + k) * n + l]
    }

    /// All `n⁴` entries at one node, index `((i n + j) n + k) n + l`.
    pub fn node(&self, node: usize) -> &[Complex64] {
        let s = self.n.pow(4);
        &self.data[node * s..(node + 1) * s]
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }

    /// Largest `|R_{ij̄kl̄} − conj(R_{jīlk̄})|`.
    pub fn hermitian_defect(&self) -> f64 {
        self.defect(|i, j, k, l| (j, i, l, k), true)
    }

    /// Largest `|R_{ij̄kl̄} − R_{kj̄il̄}|`.
    pub fn kahler_defect(&self) -> f64 {
        self.defect(|i, j, k, l| (k, j, i, l), false)
    }

    fn defect(&self, perm: impl Fn(usize, usize, usize, usize) -> (usize, usize, usize, usize), conj: bool) -> f64 {
        let n = self.n;
        let mut worst: f64 = 0.0;
        for node in 0..self.lattice.len() {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        for l in 0..n {
                            let (a, b, c, d) = perm(i, j, k, l);
                            let other = self.get(node, a, b, c, d);
                            let other = if conj { other.conj() } else { other };
                            worst = worst.max((self.get(node, i, j, k, l) - other).norm());
                        }
                    }
                }
            }
        }
        worst
    }
}

/// `R_{ij̄kl̄} = −∂_k ∂̄_l g_{ij̄} + g^{pq̄} ∂_k g_{iq̄} ∂̄_l g_{pj̄}`.
pub fn chern_curvature(metric: &MetricField) -> CurvatureField {
    let lattice = metric.lattice().clone();
    let n = metric.n();
    let len = lattice.len();
    let g = metric.field();

    // dg[(i*n+j)*n+k] = ∂_k g_{ij̄}; dbg[...] = ∂̄_k g_{ij̄}; ddg[((i*n+j)*n+k)*n+l] = ∂_k∂̄_l g_{ij̄}.
    let mut dg = Vec::with_capacity(n * n * n);
    let mut dbg = Vec::with_capacity(n * n * n);
    let mut ddg = Vec::with_capacity(n.pow(4));
    for i in 0..n {
        for j in 0..n {
            let comp = g.component(i, j);
            let spec = Spectrum::of_complex(&comp);
            for k in 0..n {
                dg.push(spec.dz(k));
                dbg.push(spec.dzbar(k));
                for l in 0..n {
                    ddg.push(spec.ddbar(k, l));
                }
            }
        }
    }

    let per = n.pow(4);
    let mut data = vec![Complex64::new(0.0, 0.0); len * per];
    data.par_chunks_mut(per).enumerate().for_each(|(node, out)| {
        let inv = g.at(node).inverse().expect("metric is positive definite");
        for i in 0..n {
            for j in 0..n {
                for k in 0..n {
                    for l in 0..n {
                        let mut r = -ddg[((i * n + j) * n + k) * n + l][node];
                        for p in 0..n {
                            for q in 0..n {
                                // g^{pq̄} is the (q, p) entry of the matrix inverse.
                                r += inv.get(q, p) * dg[(i * n + q) * n + k][node] * dbg[(p * n + j) * n + l][node];
                            }
                        }
                        out[((i * n + j) * n + k) * n + l] = r;
                    }
                }
            }
        }
    });
    CurvatureField { lattice, n, data }
}

/// `Ric_{ij̄} = −∂_i ∂̄_j log det g`.
pub fn ricci_form(metric: &MetricField) -> HermitianField {
    ddbar_matrix(&metric.log_det()).scale(-1.0)
}

/// Contraction `g^{ij̄} R_{ij̄kl̄}`; equals the Ricci form for Kähler metrics.
pub fn ricci_contraction(curv: &CurvatureField, metric: &MetricField) -> HermitianField {
    let n = curv.n();
    HermitianField::from_fn(curv.lattice(), n, |node| {
        let inv = metric.at(node).inverse().expect("metric is positive definite");
        let mut out = HMat::zeros(n);
        for k in 0..n {
            for l in 0..n {
                let mut s = Complex64::new(0.0, 0.0);
                for i in 0..n {
                    for j in 0..n {
                        s += inv.get(j, i) * curv.get(node, i, j, k, l);
                    }
                }
                out.set(k, l, s);
            }
        }
        out
    })
}

/// `R(v, v̄, v, v̄)` at a node.
pub fn curvature_quartic(curv: &CurvatureField, node: usize, v: &[Complex64]) -> f64 {
    let n = curv.n();
    let r = curv.node(node);
    let mut s = Complex64::new(0.0, 0.0);
    for i in 0..n {
        for j in 0..n {
            let vij = v[i] * v[j].conj();
            for k in 0..n {
                for l in 0..n {
                    s += r[((i * n + j) * n + k) * n + l] * vij * v[k] * v[l].conj();
                }
            }
        }
    }
    s.re
}

/// Holomorphic sectional curvature `R(v, v̄, v, v̄) / ‖v‖⁴_g`.
pub fn hsc(curv: &CurvatureField, metric: &MetricField, node: usize, v: &[Complex64]) -> Result<f64, GeometryError> {
    if v.len() != curv.n() {
        return Err(GeometryError::DimensionMismatch { expected: curv.n(), actual: v.len() });
    }
    if v.iter().all(|c| c.norm() == 0.0) {
        return Err(GeometryError::ZeroVector);
    }
    let norm2 = metric.at(node).quadratic_form(v);
    Ok(curvature_quartic(curv, node, v) / (norm2 * norm2))
}
