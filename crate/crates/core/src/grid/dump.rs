//! Binary field dumps: little-endian `f64`, row-major, plus a JSON sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{ComplexField, GridError, Lattice, RealField};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FieldKind {
    Real,
    Complex,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DumpHeader {
    pub dim_c: usize,
    pub periods: Vec<f64>,
    pub resolution: Vec<usize>,
    pub field_name: String,
    pub kind: FieldKind,
}

impl DumpHeader {
    pub fn lattice(&self) -> Result<Lattice, GridError> {
        Lattice::new(self.dim_c, &self.periods, &self.resolution)
    }
}

fn paths(stem: &Path) -> (PathBuf, PathBuf) {
    (stem.with_extension("f64"), stem.with_extension("json"))
}

fn header(lattice: &Lattice, name: &str, kind: FieldKind) -> DumpHeader {
    DumpHeader {
        dim_c: lattice.dim_c(),
        periods: lattice.periods().to_vec(),
        resolution: lattice.resolution().to_vec(),
        field_name: name.to_string(),
        kind,
    }
}

fn write_pair(stem: &Path, bytes: Vec<u8>, header: &DumpHeader) -> Result<(), GridError> {
    let (bin, json) = paths(stem);
    fs::write(&bin, bytes)?;
    let mut text = serde_json::to_string_pretty(header)?;
    text.push('\n');
    fs::write(&json, text)?;
    Ok(())
}

/// Writes `<stem>.f64` and `<stem>.json`.
pub fn write_real(stem: &Path, name: &str, field: &RealField) -> Result<(), GridError> {
    let bytes = field.values().iter().flat_map(|v| v.to_le_bytes()).collect();
    write_pair(stem, bytes, &header(field.lattice(), name, FieldKind::Real))
}

/// Complex values are stored as interleaved `(re, im)` pairs.
pub fn write_complex(stem: &Path, name: &str, field: &ComplexField) -> Result<(), GridError> {
    let bytes = field
        .values()
        .iter()
        .flat_map(|v| v.re.to_le_bytes().into_iter().chain(v.im.to_le_bytes()))
        .collect();
    write_pair(stem, bytes, &header(field.lattice(), name, FieldKind::Complex))
}

pub fn read_header(stem: &Path) -> Result<DumpHeader, GridError> {
    let (_, json) = paths(stem);
    Ok(serde_json::from_str(&fs::read_to_string(json)?)?)
}

fn read_f64s(path: &Path) -> Result<Vec<f64>, GridError> {
    let bytes = fs::read(path)?;
    if bytes.len() % 8 != 0 {
        return Err(GridError::Dump(format!("{} is not a whole number of f64 values", path.display())));
    }
    Ok(bytes.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
}

/// Reads a real dump; `lattice` must match the sidecar.
pub fn read_real(stem: &Path, lattice: &Lattice) -> Result<RealField, GridError> {
    let h = read_header(stem)?;
    if h.kind != FieldKind::Real || h.lattice()? != *lattice {
        return Err(GridError::Dump(format!("{}: header does not describe a real field on this lattice", stem.display())));
    }
    RealField::new(lattice, read_f64s(&paths(stem).0)?)
}

pub fn read_complex(stem: &Path, lattice: &Lattice) -> Result<ComplexField, GridError> {
    let h = read_header(stem)?;
    if h.kind != FieldKind::Complex || h.lattice()? != *lattice {
        return Err(GridError::Dump(format!("{}: header does not describe a complex field on this lattice", stem.display())));
    }
    let raw = read_f64s(&paths(stem).0)?;
    ComplexField::new(lattice, raw.chunks_exact(2).map(|c| Complex64::new(c[0], c[1])).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layout_is_little_endian_row_major() {
        let dir = tempfile::tempdir().unwrap();
        let lat = Lattice::new(1, &[1.0, 2.0], &[8, 16]).unwrap();
        let f = RealField::new(&lat, (0..lat.len()).map(|i| i as f64 * 0.5).collect()).unwrap();
        let stem = dir.path().join("u");
        write_real(&stem, "u", &f).unwrap();
        let bytes = std::fs::read(dir.path().join("u.f64")).unwrap();
        assert_eq!(bytes.len(), 8 * 128);
        assert_eq!(&bytes[8..16], &0.5f64.to_le_bytes());
        let h = read_header(&stem).unwrap();
        assert_eq!(h.kind, FieldKind::Real);
        assert_eq!(h.resolution, vec![8, 16]);
        assert_eq!(read_real(&stem, &lat).unwrap(), f);
        assert!(read_complex(&stem, &lat).is_err());
    }

    #[test]
    fn complex_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let lat = Lattice::unit(1, 8).unwrap();
        let f = ComplexField::from_fn(&lat, |x| Complex64::new(x[0], -x[1]));
        let stem = dir.path().join("c");
        write_complex(&stem, "c", &f).unwrap();
        assert_eq!(read_complex(&stem, &lat).unwrap(), f);
    }
}
