//! Complex P1 coefficient vectors stored as split real/imaginary blocks.

use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceKind {
    FineFem,
    CoarseFem,
    Lod,
}

impl fmt::Display for SpaceKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SpaceKind::FineFem => "fine_fem",
            SpaceKind::CoarseFem => "coarse_fem",
            SpaceKind::Lod => "lod",
        })
    }
}

/// Identifies the discrete space a coefficient vector belongs to. For LOD
/// spaces `level` is the coarse level the basis is indexed by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SpaceId {
    pub kind: SpaceKind,
    pub level: u32,
    pub dim: usize,
}

impl SpaceId {
    pub fn new(kind: SpaceKind, level: u32, dim: usize) -> Self {
        Self { kind, level, dim }
    }
}

impl fmt::Display for SpaceId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}(level {}, {} dofs)", self.kind, self.level, self.dim)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub space: SpaceId,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl ComplexField {
    pub fn new(space: SpaceId, re: Vec<f64>, im: Vec<f64>) -> Result<Self> {
        if re.len() != space.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                found: re.len(),
            });
        }
        if im.len() != space.dim {
            return Err(Error::DimensionMismatch {
                expected: space.dim,
                found: im.len(),
            });
        }
        Ok(Self { space, re, im })
    }

    pub fn zeros(space: SpaceId) -> Self {
        Self {
            space,
            re: vec![0.0; space.dim],
            im: vec![0.0; space.dim],
        }
    }

    pub fn constant(space: SpaceId, c: Complex64) -> Self {
        Self {
            space,
            re: vec![c.re; space.dim],
            im: vec![c.im; space.dim],
        }
    }

    pub fn from_complex(space: SpaceId, values: &[Complex64]) -> Result<Self> {
        Self::new(
            space,
            values.iter().map(|c| c.re).collect(),
            values.iter().map(|c| c.im).collect(),
        )
    }

    pub fn to_complex(&self) -> Vec<Complex64> {
        self.re
            .iter()
            .zip(&self.im)
            .map(|(&r, &i)| Complex64::new(r, i))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.re.len()
    }

    pub fn is_empty(&self) -> bool {
        self.re.is_empty()
    }

    pub fn value(&self, i: usize) -> Complex64 {
        Complex64::new(self.re[i], self.im[i])
    }

    /// Nodal modulus `|u(z)|`.
    pub fn modulus(&self, i: usize) -> f64 {
        self.re[i].hypot(self.im[i])
    }

    pub fn max_modulus(&self) -> f64 {
        (0..self.len()).fold(0.0, |m, i| m.max(self.modulus(i)))
    }

    pub fn ensure_space(&self, expected: SpaceId) -> Result<()> {
        if self.space != expected {
            return Err(Error::SpaceMismatch {
                expected,
                found: self.space,
            });
        }
        Ok(())
    }

    /// `c * self` for a complex scalar.
    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = self.clone();
        for k in 0..self.len() {
            let v = c * self.value(k);
            out.re[k] = v.re;
            out.im[k] = v.im;
        }
        out
    }

    /// `e^{iω} self`.
    pub fn rotate(&self, omega: f64) -> Self {
        self.scale(Complex64::from_polar(1.0, omega))
    }

    /// `i self`, i.e. `(re, im) -> (-im, re)`.
    pub fn times_i(&self) -> Self {
        Self {
            space: self.space,
            re: self.im.iter().map(|x| -x).collect(),
            im: self.re.clone(),
        }
    }

    /// `self + a * other` with real `a`.
    pub fn axpy(&self, a: f64, other: &Self) -> Result<Self> {
        other.ensure_space(self.space)?;
        let mut out = self.clone();
        for k in 0..self.len() {
            out.re[k] += a * other.re[k];
            out.im[k] += a * other.im[k];
        }
        Ok(out)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.axpy(-1.0, other)
    }

    /// Euclidean real inner product of the coefficient blocks.
    pub fn dot(&self, other: &Self) -> f64 {
        self.re
            .iter()
            .zip(&other.re)
            .map(|(a, b)| a * b)
            .sum::<f64>()
            + self
                .im
                .iter()
                .zip(&other.im)
                .map(|(a, b)| a * b)
                .sum::<f64>()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (0..self.len()).fold(0.0, |m, k| {
            m.max((self.re[k] - other.re[k]).abs())
                .max((self.im[k] - other.im[k]).abs())
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn space(n: usize) -> SpaceId {
        SpaceId::new(SpaceKind::FineFem, 1, n)
    }

    #[test]
    fn times_i_matches_complex_multiplication() {
        let u = ComplexField::new(space(2), vec![1.0, -2.0], vec![0.5, 3.0]).unwrap();
        let a = u.times_i();
        let b = u.scale(Complex64::i());
        assert_eq!(a, b);
    }

    #[test]
    fn rotation_by_two_pi_is_identity_to_roundoff() {
        let u = ComplexField::new(space(2), vec![1.0, -2.0], vec![0.5, 3.0]).unwrap();
        assert!(u.rotate(2.0 * std::f64::consts::PI).max_abs_diff(&u) < 1e-14);
    }

    #[test]
    fn length_is_checked() {
        assert!(ComplexField::new(space(3), vec![0.0; 2], vec![0.0; 3]).is_err());
    }

    #[test]
    fn space_mismatch_is_reported() {
        let u = ComplexField::zeros(space(2));
        let other = SpaceId::new(SpaceKind::CoarseFem, 1, 2);
        assert!(matches!(
            u.ensure_space(other),
            Err(Error::SpaceMismatch { .. })
        ));
    }
}
