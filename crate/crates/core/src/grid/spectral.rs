//! Fourier-multiplier calculus on the lattice.
//!
//! Every operator here is a diagonal symbol in Fourier space built from the
//! per-axis wavenumbers with the Nyquist mode zeroed, so mixed Wirtinger
//! derivatives commute exactly and discrete `i∂∂̄`-exact forms stay closed.
//! Constant parts are removed before transforming; derivatives of constants
//! are therefore exactly zero.

use num_complex::Complex64;

use super::{ComplexField, GridError, Lattice, RealField};
use crate::linalg::HermitianField;

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Relative mean threshold above which Poisson right-hand sides are projected.
pub const POISSON_MEAN_TOLERANCE: f64 = 1e-10;

fn spectrum_real(field: &RealField) -> Vec<Complex64> {
    let mean = field.mean();
    let mut data: Vec<Complex64> = field.values().iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    field.lattice().fft(&mut data, false);
    data
}

fn spectrum_complex(field: &ComplexField) -> Vec<Complex64> {
    let n = field.len() as f64;
    let mean = field.values().iter().sum::<Complex64>() / n;
    let mut data: Vec<Complex64> = field.values().iter().map(|&v| v - mean).collect();
    field.lattice().fft(&mut data, false);
    data
}

fn synthesize(lattice: &Lattice, spectrum: &[Complex64], symbol: impl Fn(usize) -> Complex64) -> Vec<Complex64> {
    let mut out: Vec<Complex64> = spectrum.iter().enumerate().map(|(k, &c)| c * symbol(k)).collect();
    lattice.fft(&mut out, true);
    out
}

fn check_axis(lattice: &Lattice, axis: usize) -> Result<(), GridError> {
    if axis >= lattice.dim_c() {
        return Err(GridError::AxisOutOfRange { axis, dim_c: lattice.dim_c() });
    }
    Ok(())
}

fn ddbar_symbol(lattice: &Lattice, a: usize, b: usize) -> impl Fn(usize) -> Complex64 + '_ {
    let dz = lattice.dz_symbol(a);
    let dzb = lattice.dzbar_symbol(b);
    move |k| dz[k] * dzb[k]
}

/// `∂/∂z_a` (or `∂/∂z̄_a` when `conjugate`) of a complex field.
pub fn wirtinger_derivative(field: &ComplexField, axis: usize, conjugate: bool) -> Result<ComplexField, GridError> {
    let lat = field.lattice();
    check_axis(lat, axis)?;
    let sym = if conjugate { lat.dzbar_symbol(axis) } else { lat.dz_symbol(axis) };
    let out = synthesize(lat, &spectrum_complex(field), |k| sym[k]);
    ComplexField::new(lat, out)
}

/// Wirtinger derivative of a real field.
pub fn wirtinger_real(field: &RealField, axis: usize, conjugate: bool) -> Result<ComplexField, GridError> {
    let lat = field.lattice();
    check_axis(lat, axis)?;
    let sym = if conjugate { lat.dzbar_symbol(axis) } else { lat.dz_symbol(axis) };
    let out = synthesize(lat, &spectrum_real(field), |k| sym[k]);
    ComplexField::new(lat, out)
}

/// `∂_{z_a} ∂_{z̄_b}` of a complex field.
pub fn ddbar_complex(field: &ComplexField, a: usize, b: usize) -> Result<ComplexField, GridError> {
    let lat = field.lattice();
    check_axis(lat, a)?;
    check_axis(lat, b)?;
    let out = synthesize(lat, &spectrum_complex(field), ddbar_symbol(lat, a, b));
    ComplexField::new(lat, out)
}

/// Precomputed spectrum of a complex field, for taking many derivatives of
/// the same input with a single forward transform.
pub struct Spectrum<'a> {
    lattice: &'a Lattice,
    data: Vec<Complex64>,
}

impl<'a> Spectrum<'a> {
    pub fn of_complex(field: &'a ComplexField) -> Self {
        Self { lattice: field.lattice(), data: spectrum_complex(field) }
    }

    pub fn of_real(field: &'a RealField) -> Self {
        Self { lattice: field.lattice(), data: spectrum_real(field) }
    }

    pub fn dz(&self, a: usize) -> Vec<Complex64> {
        let s = self.lattice.dz_symbol(a);
        synthesize(self.lattice, &self.data, |k| s[k])
    }

    pub fn dzbar(&self, a: usize) -> Vec<Complex64> {
        let s = self.lattice.dzbar_symbol(a);
        synthesize(self.lattice, &self.data, |k| s[k])
    }

    pub fn ddbar(&self, a: usize, b: usize) -> Vec<Complex64> {
        synthesize(self.lattice, &self.data, ddbar_symbol(self.lattice, a, b))
    }
}

/// Hermitian matrix field `h_{ab̄} = ∂_{z_a} ∂_{z̄_b} h` of a real field.
pub fn ddbar_matrix(field: &RealField) -> HermitianField {
    let lat = field.lattice();
    let n = lat.dim_c();
    let spec = Spectrum::of_real(field);
    let mut out = HermitianField::zeros(lat, n);
    for a in 0..n {
        let diag = spec.ddbar(a, a);
        for (node, v) in diag.iter().enumerate() {
            out.set(node, a, a, Complex64::new(v.re, 0.0));
        }
        for b in a + 1..n {
            let off = spec.ddbar(a, b);
            for (node, v) in off.iter().enumerate() {
                out.set(node, a, b, *v);
                out.set(node, b, a, v.conj());
            }
        }
    }
    out
}

fn laplacian_symbol(lattice: &Lattice) -> impl Fn(usize) -> f64 + '_ {
    let n = lattice.dim_c();
    move |k| (0..n).map(|a| (lattice.dz_symbol(a)[k] * lattice.dzbar_symbol(a)[k]).re).sum()
}

/// Flat `∂∂̄`-Laplacian `Σ_a ∂_{z_a} ∂_{z̄_a}` (a quarter of the real Laplacian).
pub fn flat_laplacian(field: &RealField) -> RealField {
    let lat = field.lattice();
    let sym = laplacian_symbol(lat);
    let out = synthesize(lat, &spectrum_real(field), |k| Complex64::new(sym(k), 0.0));
    RealField::new(lat, out.into_iter().map(|c| c.re).collect()).expect("lattice length")
}

/// Removes every Fourier mode annihilated by the flat Laplacian: the mean
/// and the modes that sit at the Nyquist index on every axis.
pub fn project_resolved(field: &RealField) -> RealField {
    let lat = field.lattice();
    let sym = laplacian_symbol(lat);
    let out = synthesize(lat, &spectrum_real(field), |k| if sym(k) == 0.0 { ZERO } else { Complex64::new(1.0, 0.0) });
    RealField::new(lat, out.into_iter().map(|c| c.re).collect()).expect("lattice length")
}

/// Result of a flat Poisson solve.
#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub field: RealField,
    /// Mean removed from the right-hand side before inversion.
    pub projected_mean: f64,
    /// True when the mean exceeded the compatibility tolerance.
    pub projected: bool,
}

/// Zero-mean `h` with `Σ_a ∂_{z_a}∂_{z̄_a} h = rhs`, inverted mode by mode.
pub fn solve_flat_poisson(rhs: &RealField) -> PoissonSolution {
    let mean = rhs.mean();
    let scale = super::sup_norm(rhs);
    let projected = mean.abs() > POISSON_MEAN_TOLERANCE * scale;
    if projected {
        log::warn!("flat Poisson rhs has mean {mean:.3e} (sup {scale:.3e}); projecting to zero mean");
    }
    let field = solve_shifted(rhs, 1.0, 0.0);
    PoissonSolution { field, projected_mean: mean, projected }
}

/// Solves `scale · Σ_a ∂_a∂̄_a h − shift · h = rhs` in Fourier space.
///
/// With `shift == 0` the mean of `rhs` is discarded and `h` has zero mean.
pub fn solve_shifted(rhs: &RealField, scale: f64, shift: f64) -> RealField {
    let lat = rhs.lattice();
    let sym = laplacian_symbol(lat);
    let mean = rhs.mean();
    let spectrum = spectrum_real(rhs);
    let mut out = synthesize(lat, &spectrum, |k| {
        let d = scale * sym(k) - shift;
        if d == 0.0 {
            ZERO
        } else {
            Complex64::new(1.0 / d, 0.0)
        }
    });
    let dc = if shift != 0.0 { -mean / shift } else { 0.0 };
    RealField::new(lat, out.drain(..).map(|c| c.re + dc).collect()).expect("lattice length")
}

/// Real partial derivative along real axis `axis`.
pub fn real_derivative(field: &RealField, axis: usize) -> RealField {
    let lat = field.lattice();
    let strides = lat.strides();
    let res = lat.resolution();
    let kx = lat.wavenumbers(axis);
    let out = synthesize(lat, &spectrum_real(field), |k| {
        let i = (k / strides[axis]) % res[axis];
        Complex64::new(0.0, kx[i])
    });
    RealField::new(lat, out.into_iter().map(|c| c.re).collect()).expect("lattice length")
}

/// Pointwise Euclidean norm of the real gradient.
pub fn gradient_norm(field: &RealField) -> RealField {
    let lat = field.lattice();
    let mut acc = vec![0.0; lat.len()];
    for axis in 0..lat.real_axes() {
        let d = real_derivative(field, axis);
        acc.iter_mut().zip(d.values()).for_each(|(s, v)| *s += v * v);
    }
    RealField::new(lat, acc.into_iter().map(f64::sqrt).collect()).expect("lattice length")
}

/// Fraction of the non-constant spectral energy carried by the top octave
/// (modes with |m| > N/4 on some axis).
pub fn tail_energy_fraction(field: &RealField) -> f64 {
    let lat = field.lattice();
    let spec = spectrum_real(field);
    let strides = lat.strides();
    let res = lat.resolution();
    let (mut tail, mut total) = (0.0, 0.0);
    for (k, c) in spec.iter().enumerate() {
        let e = c.norm_sqr();
        total += e;
        let high = (0..lat.real_axes()).any(|a| {
            let i = (k / strides[a]) % res[a];
            let m = if i <= res[a] / 2 { i } else { res[a] - i };
            m > res[a] / 4
        });
        if high {
            tail += e;
        }
    }
    if total == 0.0 {
        0.0
    } else {
        tail / total
    }
}
