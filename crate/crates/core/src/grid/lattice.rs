use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use super::GridError;

const MIN_RESOLUTION: usize = 8;

/// Uniform periodic grid on a real `2n`-torus.
///
/// Real axes are ordered `x_1, y_1, x_2, y_2, ...` with complex coordinate
/// `z_a = x_a + i y_a`. Node storage is row-major over the axes in that order.
/// Cloning is cheap; the FFT plans and spectral symbols are shared.
#[derive(Clone)]
pub struct Lattice {
    inner: Arc<Inner>,
}

struct Inner {
    dim_c: usize,
    periods: Vec<f64>,
    resolution: Vec<usize>,
    strides: Vec<usize>,
    len: usize,
    forward: Vec<Arc<dyn Fft<f64>>>,
    inverse: Vec<Arc<dyn Fft<f64>>>,
    /// Per-axis angular wavenumbers in FFT order, Nyquist mode zeroed.
    wavenumbers: Vec<Vec<f64>>,
    /// Per complex axis `a`: symbol of `d/dz_a` at every spectral node.
    dz: Vec<Vec<Complex64>>,
    /// Per complex axis `a`: symbol of `d/dzbar_a` at every spectral node.
    dzbar: Vec<Vec<Complex64>>,
}

impl Lattice {
    /// Builds a lattice with `2 * dim_c` real axes.
    pub fn new(dim_c: usize, periods: &[f64], resolution: &[usize]) -> Result<Self, GridError> {
        if !(1..=2).contains(&dim_c) {
            return Err(GridError::UnsupportedDimension(dim_c));
        }
        let axes = 2 * dim_c;
        if periods.len() != axes || resolution.len() != axes {
            return Err(GridError::AxisCount {
                expected: axes,
                periods: periods.len(),
                resolution: resolution.len(),
            });
        }
        for (axis, &p) in periods.iter().enumerate() {
            if !(p.is_finite() && p > 0.0) {
                return Err(GridError::InvalidPeriod { axis, period: p });
            }
        }
        for (axis, &r) in resolution.iter().enumerate() {
            if !r.is_power_of_two() || r < MIN_RESOLUTION {
                return Err(GridError::InvalidResolution { axis, resolution: r });
            }
        }

        let len = resolution.iter().product();
        let mut strides = vec![1; axes];
        for a in (0..axes - 1).rev() {
            strides[a] = strides[a + 1] * resolution[a + 1];
        }

        let mut planner = FftPlanner::<f64>::new();
        let forward = resolution.iter().map(|&r| planner.plan_fft_forward(r)).collect();
        let inverse = resolution.iter().map(|&r| planner.plan_fft_inverse(r)).collect();

        let wavenumbers: Vec<Vec<f64>> = resolution
            .iter()
            .zip(periods)
            .map(|(&r, &p)| {
                (0..r)
                    .map(|j| {
                        let m = if j < r / 2 {
                            j as f64
                        } else if j == r / 2 {
                            0.0
                        } else {
                            j as f64 - r as f64
                        };
                        2.0 * std::f64::consts::PI * m / p
                    })
                    .collect()
            })
            .collect();

        let mut dz = vec![vec![Complex64::new(0.0, 0.0); len]; dim_c];
        let mut dzbar = dz.clone();
        let mut idx = vec![0usize; axes];
        for node in 0..len {
            let mut rem = node;
            for a in 0..axes {
                idx[a] = rem / strides[a];
                rem %= strides[a];
            }
            for a in 0..dim_c {
                let kx = wavenumbers[2 * a][idx[2 * a]];
                let ky = wavenumbers[2 * a + 1][idx[2 * a + 1]];
                // d/dz = (d/dx - i d/dy) / 2 and d/dx -> i k.
                dz[a][node] = Complex64::new(ky, kx) * 0.5;
                dzbar[a][node] = Complex64::new(-ky, kx) * 0.5;
            }
        }

        Ok(Self {
            inner: Arc::new(Inner {
                dim_c,
                periods: periods.to_vec(),
                resolution: resolution.to_vec(),
                strides,
                len,
                forward,
                inverse,
                wavenumbers,
                dz,
                dzbar,
            }),
        })
    }

    /// Same resolution on every axis and unit periods.
    pub fn unit(dim_c: usize, resolution: usize) -> Result<Self, GridError> {
        Self::new(dim_c, &vec![1.0; 2 * dim_c], &vec![resolution; 2 * dim_c])
    }

    pub fn dim_c(&self) -> usize {
        self.inner.dim_c
    }

    pub fn real_axes(&self) -> usize {
        2 * self.inner.dim_c
    }

    pub fn periods(&self) -> &[f64] {
        &self.inner.periods
    }

    pub fn resolution(&self) -> &[usize] {
        &self.inner.resolution
    }

    pub fn len(&self) -> usize {
        self.inner.len
    }

    pub fn is_empty(&self) -> bool {
        self.inner.len == 0
    }

    pub fn spacing(&self, axis: usize) -> f64 {
        self.inner.periods[axis] / self.inner.resolution[axis] as f64
    }

    /// Flat volume of the torus (product of periods).
    pub fn volume(&self) -> f64 {
        self.inner.periods.iter().product()
    }

    pub fn strides(&self) -> &[usize] {
        &self.inner.strides
    }

    pub fn multi_index(&self, node: usize) -> Vec<usize> {
        let mut rem = node;
        self.inner
            .strides
            .iter()
            .map(|&s| {
                let i = rem / s;
                rem %= s;
                i
            })
            .collect()
    }

    pub fn node_index(&self, multi: &[usize]) -> usize {
        multi
            .iter()
            .zip(&self.inner.strides)
            .zip(&self.inner.resolution)
            .map(|((&i, &s), &r)| (i % r) * s)
            .sum()
    }

    /// Real coordinates of a node.
    pub fn coords(&self, node: usize) -> Vec<f64> {
        self.multi_index(node)
            .iter()
            .enumerate()
            .map(|(a, &i)| i as f64 * self.spacing(a))
            .collect()
    }

    pub(crate) fn wavenumbers(&self, axis: usize) -> &[f64] {
        &self.inner.wavenumbers[axis]
    }

    pub(crate) fn dz_symbol(&self, a: usize) -> &[Complex64] {
        &self.inner.dz[a]
    }

    pub(crate) fn dzbar_symbol(&self, a: usize) -> &[Complex64] {
        &self.inner.dzbar[a]
    }

    /// In-place N-dimensional FFT (unnormalized).
    pub(crate) fn fft(&self, data: &mut [Complex64], inverse: bool) {
        debug_assert_eq!(data.len(), self.len());
        let plans = if inverse { &self.inner.inverse } else { &self.inner.forward };
        for (axis, plan) in plans.iter().enumerate() {
            let n = self.inner.resolution[axis];
            let stride = self.inner.strides[axis];
            if stride == 1 {
                plan.process(data);
                continue;
            }
            // Lines along `axis`: blocks of n*stride, each holding `stride` interleaved lines.
            let block = n * stride;
            let mut lines = vec![Complex64::new(0.0, 0.0); block];
            for chunk in data.chunks_mut(block) {
                for j in 0..stride {
                    for i in 0..n {
                        lines[j * n + i] = chunk[i * stride + j];
                    }
                }
                plan.process(&mut lines);
                for j in 0..stride {
                    for i in 0..n {
                        chunk[i * stride + j] = lines[j * n + i];
                    }
                }
            }
        }
        if inverse {
            let scale = 1.0 / self.len() as f64;
            data.iter_mut().for_each(|v| *v *= scale);
        }
    }
}

impl PartialEq for Lattice {
    fn eq(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.inner, &other.inner)
            || (self.inner.dim_c == other.inner.dim_c
                && self.inner.periods == other.inner.periods
                && self.inner.resolution == other.inner.resolution)
    }
}

impl fmt::Debug for Lattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Lattice")
            .field("dim_c", &self.inner.dim_c)
            .field("periods", &self.inner.periods)
            .field("resolution", &self.inner.resolution)
            .finish()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn node_counts() {
        assert_eq!(Lattice::new(1, &[1.0, 1.0], &[64, 64]).unwrap().len(), 4096);
        assert_eq!(Lattice::unit(2, 16).unwrap().len(), 65536);
    }

    #[test]
    fn rejects_bad_shapes() {
        assert!(matches!(
            Lattice::new(1, &[1.0, 1.0], &[60, 64]),
            Err(GridError::InvalidResolution { axis: 0, resolution: 60 })
        ));
        assert!(matches!(
            Lattice::new(1, &[1.0, 1.0], &[4, 4]),
            Err(GridError::InvalidResolution { .. })
        ));
        assert!(matches!(
            Lattice::new(3, &[1.0; 6], &[8; 6]),
            Err(GridError::UnsupportedDimension(3))
        ));
        assert!(matches!(
            Lattice::new(1, &[1.0, -1.0], &[8, 8]),
            Err(GridError::InvalidPeriod { axis: 1, .. })
        ));
    }

    #[test]
    fn index_round_trip() {
        let lat = Lattice::new(2, &[1.0, 2.0, 1.0, 0.5], &[8, 16, 8, 32]).unwrap();
        for node in [0, 1, 17, 999, lat.len() - 1] {
            assert_eq!(lat.node_index(&lat.multi_index(node)), node);
        }
        let c = lat.coords(lat.node_index(&[1, 2, 0, 4]));
        assert_eq!(c, vec![0.125, 0.25, 0.0, 0.0625]);
    }

    #[test]
    fn fft_round_trip() {
        let lat = Lattice::new(2, &[1.0; 4], &[8, 16, 8, 8]).unwrap();
        let orig: Vec<Complex64> =
            (0..lat.len()).map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos())).collect();
        let mut data = orig.clone();
        lat.fft(&mut data, false);
        lat.fft(&mut data, true);
        for (a, b) in orig.iter().zip(&data) {
            assert!((a - b).norm() < 1e-12);
        }
    }
}
