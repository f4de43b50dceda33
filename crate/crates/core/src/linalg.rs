//! Small Hermitian matrices (n <= 2), node-indexed Hermitian fields and a
//! restarted GMRES for the elliptic solves.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::grid::{ComplexField, Lattice, RealField};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const ONE: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Hermitian `n × n` matrix, `n ∈ {1, 2}`, row-major; entry `(i, j)` is `h_{ij̄}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HMat {
    n: usize,
    m: [Complex64; 4],
}

impl HMat {
    pub fn zeros(n: usize) -> Self {
        assert!((1..=2).contains(&n), "HMat supports n = 1, 2");
        Self { n, m: [ZERO; 4] }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, 1.0)
    }

    pub fn scalar(n: usize, c: f64) -> Self {
        let mut h = Self::zeros(n);
        for i in 0..n {
            h.set(i, i, Complex64::new(c, 0.0));
        }
        h
    }

    pub fn diag(values: &[f64]) -> Self {
        let mut h = Self::zeros(values.len());
        for (i, &v) in values.iter().enumerate() {
            h.set(i, i, Complex64::new(v, 0.0));
        }
        h
    }

    /// From row-major entries; the caller is responsible for Hermitian symmetry.
    pub fn from_entries(n: usize, entries: &[Complex64]) -> Self {
        assert_eq!(entries.len(), n * n);
        let mut h = Self::zeros(n);
        h.m[..n * n].copy_from_slice(entries);
        h
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.m[i * self.n + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        self.m[i * self.n + j] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.m[..self.n * self.n]
    }

    pub fn add(&self, other: &HMat) -> HMat {
        let mut out = *self;
        out.m.iter_mut().zip(&other.m).for_each(|(a, b)| *a += b);
        out
    }

    pub fn scale(&self, c: f64) -> HMat {
        let mut out = *self;
        out.m.iter_mut().for_each(|a| *a *= c);
        out
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i).re).sum()
    }

    pub fn det(&self) -> f64 {
        match self.n {
            1 => self.m[0].re,
            _ => (self.m[0] * self.m[3] - self.m[1] * self.m[2]).re,
        }
    }

    /// `adj(A)` with `A · adj(A) = det(A) · I`.
    pub fn adjugate(&self) -> HMat {
        match self.n {
            1 => HMat::identity(1),
            _ => HMat { n: 2, m: [self.m[3], -self.m[1], -self.m[2], self.m[0]] },
        }
    }

    pub fn inverse(&self) -> Option<HMat> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(self.adjugate().scale(1.0 / d))
    }

    /// `tr(self · other)`.
    pub fn trace_product(&self, other: &HMat) -> Complex64 {
        let n = self.n;
        let mut s = ZERO;
        for i in 0..n {
            for k in 0..n {
                s += self.get(i, k) * other.get(k, i);
            }
        }
        s
    }

    /// Eigenvalues in ascending order (length `n`).
    pub fn eigenvalues(&self) -> Vec<f64> {
        match self.n {
            1 => vec![self.m[0].re],
            _ => {
                let (a, d) = (self.m[0].re, self.m[3].re);
                let half = 0.5 * (a + d);
                let r = (0.25 * (a - d) * (a - d) + self.m[1].norm_sqr()).sqrt();
                vec![half - r, half + r]
            }
        }
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Roots `λ` of `det(self − λ·b) = 0`, ascending. `b` must be positive definite.
    pub fn generalized_eigenvalues(&self, b: &HMat) -> Vec<f64> {
        match self.n {
            1 => vec![self.m[0].re / b.m[0].re],
            _ => {
                let det_a = self.det();
                let det_b = b.det();
                let mixed = self.adjugate().trace_product(b).re;
                let disc = (mixed * mixed - 4.0 * det_a * det_b).max(0.0);
                let q = 0.5 * (mixed + mixed.signum() * disc.sqrt());
                if q == 0.0 {
                    return vec![0.0, 0.0];
                }
                let (l1, l2) = (q / det_b, det_a / q);
                if l1 <= l2 {
                    vec![l1, l2]
                } else {
                    vec![l2, l1]
                }
            }
        }
    }

    /// Lower-triangular `L` with `self = L L^*`, row-major.
    pub fn cholesky(&self) -> Option<[Complex64; 4]> {
        match self.n {
            1 => {
                let a = self.m[0].re;
                (a > 0.0).then(|| [Complex64::new(a.sqrt(), 0.0), ZERO, ZERO, ZERO])
            }
            _ => {
                let a = self.m[0].re;
                if a <= 0.0 {
                    return None;
                }
                let l11 = a.sqrt();
                let l21 = self.m[2] / l11;
                let rest = self.m[3].re - l21.norm_sqr();
                if rest <= 0.0 {
                    return None;
                }
                Some([Complex64::new(l11, 0.0), ZERO, l21, Complex64::new(rest.sqrt(), 0.0)])
            }
        }
    }

    /// Largest `|h_{ij} − conj(h_{ji})|`.
    pub fn hermitian_defect(&self) -> f64 {
        let mut d: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                d = d.max((self.get(i, j) - self.get(j, i).conj()).norm());
            }
        }
        d
    }

    /// `Σ h_{ij̄} v_i conj(v_j)`.
    pub fn quadratic_form(&self, v: &[Complex64]) -> f64 {
        let mut s = ZERO;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j) * v[i] * v[j].conj();
            }
        }
        s.re
    }

    pub fn max_abs(&self) -> f64 {
        self.entries().iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

/// Node-indexed field of Hermitian `n × n` matrices.
#[derive(Clone, Debug, PartialEq)]
pub struct HermitianField {
    lattice: Lattice,
    n: usize,
    data: Vec<Complex64>,
}

impl HermitianField {
    pub fn zeros(lattice: &Lattice, n: usize) -> Self {
        Self { lattice: lattice.clone(), n, data: vec![ZERO; lattice.len() * n * n] }
    }

    pub fn constant(lattice: &Lattice, h: &HMat) -> Self {
        let n = h.n();
        let data = (0..lattice.len()).flat_map(|_| h.entries().iter().copied()).collect();
        Self { lattice: lattice.clone(), n, data }
    }

    pub fn from_fn(lattice: &Lattice, n: usize, f: impl Fn(usize) -> HMat + Sync) -> Self {
        let data: Vec<Complex64> = (0..lattice.len())
            .into_par_iter()
            .flat_map_iter(|node| {
                let h = f(node);
                debug_assert_eq!(h.n(), n);
                h.m.into_iter().take(n * n)
            })
            .collect();
        Self { lattice: lattice.clone(), n, data }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn at(&self, node: usize) -> HMat {
        let k = self.n * self.n;
        HMat::from_entries(self.n, &self.data[node * k..(node + 1) * k])
    }

    #[inline]
    pub fn set(&mut self, node: usize, i: usize, j: usize, v: Complex64) {
        self.data[node * self.n * self.n + i * self.n + j] = v;
    }

    pub fn component(&self, i: usize, j: usize) -> ComplexField {
        let k = self.n * self.n;
        let values = (0..self.lattice.len()).map(|node| self.data[node * k + i * self.n + j]).collect();
        ComplexField::new(&self.lattice, values).expect("lattice length")
    }

    pub fn map(&self, f: impl Fn(&HMat) -> HMat + Sync) -> Self {
        Self::from_fn(&self.lattice, self.n, |node| f(&self.at(node)))
    }

    pub fn zip_map(&self, other: &HermitianField, f: impl Fn(&HMat, &HMat) -> HMat + Sync) -> Self {
        debug_assert_eq!(self.n, other.n);
        Self::from_fn(&self.lattice, self.n, |node| f(&self.at(node), &other.at(node)))
    }

    pub fn add(&self, other: &HermitianField) -> Self {
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { lattice: self.lattice.clone(), n: self.n, data }
    }

    pub fn scale(&self, c: f64) -> Self {
        Self { lattice: self.lattice.clone(), n: self.n, data: self.data.iter().map(|a| a * c).collect() }
    }

    pub fn scalar_map(&self, f: impl Fn(&HMat) -> f64 + Sync) -> RealField {
        let values = (0..self.lattice.len()).into_par_iter().map(|node| f(&self.at(node))).collect();
        RealField::new(&self.lattice, values).expect("lattice length")
    }

    pub fn det(&self) -> RealField {
        self.scalar_map(HMat::det)
    }

    pub fn trace(&self) -> RealField {
        self.scalar_map(HMat::trace)
    }

    pub fn min_eigenvalue(&self) -> RealField {
        self.scalar_map(HMat::min_eigenvalue)
    }

    /// Smallest eigenvalue over all nodes together with its node.
    pub fn worst_eigenvalue(&self) -> (f64, usize) {
        (0..self.lattice.len())
            .map(|node| (self.at(node).min_eigenvalue(), node))
            .fold((f64::INFINITY, 0), |best, cur| if cur.0 < best.0 { cur } else { best })
    }

    pub fn max_hermitian_defect(&self) -> f64 {
        (0..self.lattice.len()).map(|node| self.at(node).hermitian_defect()).fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
}

#[cfg(test)]
/// Row-major product of 2x2 (or 1x1) general complex matrices.
pub(crate) fn matmul(n: usize, a: &[Complex64; 4], b: &[Complex64; 4]) -> [Complex64; 4] {
    let mut out = [ZERO; 4];
    for i in 0..n {
        for j in 0..n {
            let mut s = ZERO;
            for k in 0..n {
                s += a[i * n + k] * b[k * n + j];
            }
            out[i * n + j] = s;
        }
    }
    out
}

/// Inverse of a lower-triangular factor from [`HMat::cholesky`].
pub(crate) fn invert_lower(n: usize, l: &[Complex64; 4]) -> [Complex64; 4] {
    match n {
        1 => [ONE / l[0], ZERO, ZERO, ZERO],
        _ => {
            let a = ONE / l[0];
            let d = ONE / l[3];
            [a, ZERO, -l[2] * a * d, d]
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmresOptions {
    pub restart: usize,
    pub max_iter: usize,
    pub rel_tol: f64,
    pub abs_tol: f64,
}

impl Default for GmresOptions {
    fn default() -> Self {
        Self { restart: 40, max_iter: 600, rel_tol: 1e-12, abs_tol: 1e-300 }
    }
}

#[derive(Clone, Debug)]
pub struct GmresOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final true residual 2-norm.
    pub residual: f64,
    pub converged: bool,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// Right-preconditioned restarted GMRES for `A x = b`.
pub fn gmres(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Option<&[f64]>,
    opts: &GmresOptions,
) -> GmresOutcome {
    let len = b.len();
    let mut x = x0.map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; len]);
    let tol = (opts.rel_tol * norm(b)).max(opts.abs_tol);
    let mut iterations = 0;
    let residual_of = |x: &[f64]| -> Vec<f64> { apply(x).iter().zip(b).map(|(ax, bi)| bi - ax).collect() };
    let mut r = residual_of(&x);
    let mut beta = norm(&r);

    while beta > tol && iterations < opts.max_iter {
        let m = opts.restart;
        let mut v: Vec<Vec<f64>> = Vec::with_capacity(m + 1);
        let mut z: Vec<Vec<f64>> = Vec::with_capacity(m);
        let mut h = vec![vec![0.0; m]; m + 1];
        let (mut cs, mut sn) = (vec![0.0; m], vec![0.0; m]);
        let mut g = vec![0.0; m + 1];
        g[0] = beta;
        v.push(r.iter().map(|ri| ri / beta).collect());
        let mut k = 0;
        while k < m && iterations < opts.max_iter {
            let zk = precond(&v[k]);
            let mut w = apply(&zk);
            z.push(zk);
            // Modified Gram-Schmidt, two passes.
            for _ in 0..2 {
                for (i, vi) in v.iter().enumerate() {
                    let c = dot(&w, vi);
                    h[i][k] += c;
                    w.iter_mut().zip(vi).for_each(|(wj, vj)| *wj -= c * vj);
                }
            }
            let hn = norm(&w);
            h[k + 1][k] = hn;
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let denom = h[k][k].hypot(h[k + 1][k]);
            if denom == 0.0 {
                cs[k] = 1.0;
                sn[k] = 0.0;
            } else {
                cs[k] = h[k][k] / denom;
                sn[k] = h[k + 1][k] / denom;
            }
            h[k][k] = cs[k] * h[k][k] + sn[k] * h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            iterations += 1;
            k += 1;
            if g[k].abs() <= tol || hn == 0.0 {
                break;
            }
            v.push(w.iter().map(|wj| wj / hn).collect());
        }
        // Back substitution on the k x k triangle.
        let mut y = vec![0.0; k];
        for i in (0..k).rev() {
            let s: f64 = (i + 1..k).map(|j| h[i][j] * y[j]).sum();
            y[i] = if h[i][i] != 0.0 { (g[i] - s) / h[i][i] } else { 0.0 };
        }
        for (yi, zi) in y.iter().zip(&z) {
            x.iter_mut().zip(zi).for_each(|(xj, zj)| *xj += yi * zj);
        }
        r = residual_of(&x);
        let new_beta = norm(&r);
        if new_beta >= beta && k < m {
            // Breakdown without progress (inconsistent or stagnating system).
            beta = new_beta;
            break;
        }
        beta = new_beta;
    }
    GmresOutcome { x, iterations, residual: beta, converged: beta <= tol }
}
