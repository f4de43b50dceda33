use num_complex::Complex64;

use super::{GridError, Lattice};

/// Node-indexed real scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct RealField {
    lattice: Lattice,
    values: Vec<f64>,
}

/// Node-indexed complex scalar field.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    lattice: Lattice,
    values: Vec<Complex64>,
}

impl RealField {
    pub fn new(lattice: &Lattice, values: Vec<f64>) -> Result<Self, GridError> {
        if values.len() != lattice.len() {
            return Err(GridError::LengthMismatch { expected: lattice.len(), actual: values.len() });
        }
        Ok(Self { lattice: lattice.clone(), values })
    }

    pub fn zeros(lattice: &Lattice) -> Self {
        Self::constant(lattice, 0.0)
    }

    pub fn constant(lattice: &Lattice, c: f64) -> Self {
        Self { lattice: lattice.clone(), values: vec![c; lattice.len()] }
    }

    /// Samples `f` at the real coordinates of every node.
    pub fn from_fn(lattice: &Lattice, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..lattice.len()).map(|node| f(&lattice.coords(node))).collect();
        Self { lattice: lattice.clone(), values }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { lattice: self.lattice.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip_map(&self, other: &RealField, f: impl Fn(f64, f64) -> f64) -> Self {
        debug_assert_eq!(self.lattice, other.lattice);
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Self { lattice: self.lattice.clone(), values }
    }

    /// Node average with Neumaier-compensated summation.
    pub fn mean(&self) -> f64 {
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for &v in &self.values {
            let t = sum + v;
            comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
            sum = t;
        }
        (sum + comp) / self.values.len() as f64
    }

    pub fn to_complex(&self) -> ComplexField {
        ComplexField {
            lattice: self.lattice.clone(),
            values: self.values.iter().map(|&v| Complex64::new(v, 0.0)).collect(),
        }
    }
}

impl ComplexField {
    pub fn new(lattice: &Lattice, values: Vec<Complex64>) -> Result<Self, GridError> {
        if values.len() != lattice.len() {
            return Err(GridError::LengthMismatch { expected: lattice.len(), actual: values.len() });
        }
        Ok(Self { lattice: lattice.clone(), values })
    }

    pub fn zeros(lattice: &Lattice) -> Self {
        Self { lattice: lattice.clone(), values: vec![Complex64::new(0.0, 0.0); lattice.len()] }
    }

    pub fn from_fn(lattice: &Lattice, f: impl Fn(&[f64]) -> Complex64) -> Self {
        let values = (0..lattice.len()).map(|node| f(&lattice.coords(node))).collect();
        Self { lattice: lattice.clone(), values }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [Complex64] {
        &mut self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn re(&self) -> RealField {
        RealField { lattice: self.lattice.clone(), values: self.values.iter().map(|v| v.re).collect() }
    }

    /// Largest absolute imaginary part.
    pub fn max_imag(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.im.abs()))
    }

    pub fn conj(&self) -> Self {
        Self { lattice: self.lattice.clone(), values: self.values.iter().map(|v| v.conj()).collect() }
    }
}

/// Quadrature over the torus: node mean times flat volume.
pub fn integrate(density: &RealField) -> f64 {
    density.mean() * density.lattice().volume()
}

pub fn sup_norm(field: &RealField) -> f64 {
    field.values().iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub fn sup_norm_complex(field: &ComplexField) -> f64 {
    field.values().iter().fold(0.0, |m, v| m.max(v.norm()))
}

/// Discrete extrema with node locations.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Extrema {
    pub min: f64,
    pub max: f64,
    pub argmin: usize,
    pub argmax: usize,
}

/// Exact discrete extrema; ties resolve to the first node in scan order.
pub fn extrema(field: &RealField) -> Extrema {
    let v = field.values();
    let mut e = Extrema { min: v[0], max: v[0], argmin: 0, argmax: 0 };
    for (i, &x) in v.iter().enumerate().skip(1) {
        if x < e.min {
            e.min = x;
            e.argmin = i;
        }
        if x > e.max {
            e.max = x;
            e.argmax = i;
        }
    }
    e
}
