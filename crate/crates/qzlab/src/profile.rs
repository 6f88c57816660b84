//! Radial profiles: one real- or complex-valued function sampled on a grid.

use crate::error::{Error, Result};
use crate::grid::GridRef;
use crate::stencil::Parity;
use num_complex::Complex64;
use std::io::{BufRead, Write};
use std::path::Path;

/// Far-field behavior tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FarField {
    /// Decays toward r_max; integrals warn when the tail is not negligible.
    Decaying,
    /// No decay assumption.
    Free,
}

#[derive(Debug, Clone)]
pub enum ProfileData {
    Real(Vec<f64>),
    Complex(Vec<Complex64>),
}

/// A sampled radial function with parity and far-field metadata.
///
/// Even parity implies a vanishing discrete first derivative at the origin;
/// that holds by construction of the ghost-folded stencils. Odd parity
/// requires a zero sample at the origin and is checked on construction.
#[derive(Debug, Clone)]
pub struct Profile {
    pub grid: GridRef,
    pub data: ProfileData,
    pub parity: Parity,
    pub far_field: FarField,
}

impl Profile {
    pub fn new_real(grid: GridRef, values: Vec<f64>, parity: Parity, far_field: FarField) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::GridMismatch);
        }
        if parity == Parity::Odd {
            let scale = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
            if values[0].abs() > 1e-10 * scale.max(1e-300) {
                return Err(Error::ParityMismatch(format!(
                    "odd profile with nonzero origin value {}",
                    values[0]
                )));
            }
        }
        Ok(Profile {
            grid,
            data: ProfileData::Real(values),
            parity,
            far_field,
        })
    }

    pub fn new_complex(
        grid: GridRef,
        values: Vec<Complex64>,
        parity: Parity,
        far_field: FarField,
    ) -> Result<Self> {
        if values.len() != grid.n {
            return Err(Error::GridMismatch);
        }
        if parity == Parity::Odd {
            let scale = values.iter().fold(0.0f64, |m, v| m.max(v.norm()));
            if values[0].norm() > 1e-10 * scale.max(1e-300) {
                return Err(Error::ParityMismatch(
                    "odd profile with nonzero origin value".into(),
                ));
            }
        }
        Ok(Profile {
            grid,
            data: ProfileData::Complex(values),
            parity,
            far_field,
        })
    }

    pub fn n(&self) -> usize {
        self.grid.n
    }

    pub fn is_real(&self) -> bool {
        matches!(self.data, ProfileData::Real(_))
    }

    pub fn as_real(&self) -> Result<&[f64]> {
        match &self.data {
            ProfileData::Real(v) => Ok(v),
            ProfileData::Complex(_) => Err(Error::ComplexValued),
        }
    }

    pub fn as_complex(&self) -> Vec<Complex64> {
        match &self.data {
            ProfileData::Real(v) => v.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            ProfileData::Complex(v) => v.clone(),
        }
    }

    /// Pointwise modulus.
    pub fn abs_values(&self) -> Vec<f64> {
        match &self.data {
            ProfileData::Real(v) => v.iter().map(|x| x.abs()).collect(),
            ProfileData::Complex(v) => v.iter().map(|x| x.norm()).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.abs_values().into_iter().fold(0.0, f64::max)
    }

    /// CSV with header `xi,value` (real) or `xi,re,im` (complex),
    /// 17 significant digits.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        match &self.data {
            ProfileData::Real(v) => {
                writeln!(f, "xi,value")?;
                for (x, val) in self.grid.nodes.iter().zip(v) {
                    writeln!(f, "{:.16e},{:.16e}", x, val)?;
                }
            }
            ProfileData::Complex(v) => {
                writeln!(f, "xi,re,im")?;
                for (x, val) in self.grid.nodes.iter().zip(v) {
                    writeln!(f, "{:.16e},{:.16e},{:.16e}", x, val.re, val.im)?;
                }
            }
        }
        Ok(())
    }
}

/// Parse a profile CSV (either layout) into (xi, columns).
pub fn read_csv_columns(path: &Path) -> Result<(Vec<f64>, Vec<Vec<f64>>)> {
    let f = std::io::BufReader::new(std::fs::File::open(path)?);
    let mut lines = f.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Malformed("empty csv".into()))??;
    let ncols = header.split(',').count();
    if ncols < 2 {
        return Err(Error::Malformed(format!("unexpected header `{header}`")));
    }
    let mut xi = Vec::new();
    let mut cols: Vec<Vec<f64>> = vec![Vec::new(); ncols - 1];
    for line in lines {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',');
        let x: f64 = it
            .next()
            .ok_or_else(|| Error::Malformed(line.clone()))?
            .trim()
            .parse()
            .map_err(|_| Error::Malformed(line.clone()))?;
        xi.push(x);
        for col in cols.iter_mut() {
            let v: f64 = it
                .next()
                .ok_or_else(|| Error::Malformed(line.clone()))?
                .trim()
                .parse()
                .map_err(|_| Error::Malformed(line.clone()))?;
            col.push(v);
        }
    }
    Ok((xi, cols))
}
