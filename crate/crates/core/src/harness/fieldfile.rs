//! `GLF1` binary field files.
//!
//! Layout, all integers little endian:
//!
//! | bytes | content |
//! |---|---|
//! | 4 | magic `GLF1` |
//! | 4 | version `u32` (1) |
//! | 4 | mesh level `u32` |
//! | 8 | vertex count `u64` |
//! | 4 | metadata length `u32` |
//! | len | metadata, UTF-8 JSON |
//! | 16 n | `f64` real parts, then `f64` imaginary parts |

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::{ComplexField, SpaceId, SpaceKind};

pub const MAGIC: &[u8; 4] = b"GLF1";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FieldMeta {
    pub kappa: f64,
    pub beta: f64,
    pub ell: usize,
    /// Space the field was computed in; coefficients are always nodal values
    /// on the stored mesh level.
    pub space: String,
    pub seed: u64,
    pub energy: f64,
}

/// Nodal values on a structured mesh, as stored in a field file.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldFile {
    pub level: u32,
    pub meta: FieldMeta,
    pub re: Vec<f64>,
    pub im: Vec<f64>,
}

impl FieldFile {
    /// Wraps a nodal field on the structured mesh of `level`.
    pub fn new(level: u32, meta: FieldMeta, field: &ComplexField) -> Result<Self> {
        let n = (1usize << level) + 1;
        if field.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                found: field.len(),
            });
        }
        Ok(Self {
            level,
            meta,
            re: field.re.clone(),
            im: field.im.clone(),
        })
    }

    /// The stored values as a field of the fine space at `level`.
    pub fn field(&self) -> ComplexField {
        ComplexField {
            space: SpaceId::new(SpaceKind::FineFem, self.level, self.re.len()),
            re: self.re.clone(),
            im: self.im.clone(),
        }
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        let m = &self.meta;
        if ![m.kappa, m.beta, m.energy].iter().all(|x| x.is_finite()) {
            // JSON has no NaN, so the header would not read back
            return Err(Error::InvalidInput(format!(
                "field metadata must be finite (kappa {}, beta {}, energy {})",
                m.kappa, m.beta, m.energy
            )));
        }
        let meta = serde_json::to_vec(&self.meta)?;
        let meta_len = u32::try_from(meta.len())
            .map_err(|_| Error::InvalidInput("metadata too large".into()))?;
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&self.level.to_le_bytes())?;
        w.write_all(&(self.re.len() as u64).to_le_bytes())?;
        w.write_all(&meta_len.to_le_bytes())?;
        w.write_all(&meta)?;
        let mut buf = Vec::with_capacity(16 * self.re.len());
        for v in self.re.iter().chain(&self.im) {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("file too short for a header".into()))?;
        if &magic != MAGIC {
            return Err(Error::Format(format!("bad magic {magic:?}")));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(Error::Format(format!("unsupported version {version}")));
        }
        let level = read_u32(&mut r)?;
        let n = read_u64(&mut r)?;
        let side = 1u64
            .checked_shl(level)
            .filter(|_| level <= 16)
            .ok_or_else(|| Error::Format(format!("mesh level {level} out of range")))?
            + 1;
        if n != side * side {
            return Err(Error::Format(format!(
                "vertex count {n} does not match mesh level {level}"
            )));
        }
        let meta_len = read_u32(&mut r)? as usize;
        let mut meta = vec![0u8; meta_len];
        r.read_exact(&mut meta)
            .map_err(|_| Error::Format("truncated metadata".into()))?;
        let meta: FieldMeta = serde_json::from_slice(&meta)?;
        let n = n as usize;
        let mut payload = vec![0u8; 16 * n];
        r.read_exact(&mut payload)
            .map_err(|_| Error::Format("truncated payload".into()))?;
        let mut extra = [0u8; 1];
        if r.read(&mut extra)? != 0 {
            return Err(Error::Format("trailing bytes after payload".into()));
        }
        let vals: Vec<f64> = payload
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (re, im) = vals.split_at(n);
        Ok(Self {
            level,
            meta,
            re: re.to_vec(),
            im: im.to_vec(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let f = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(f);
        self.write_to(&mut w)?;
        w.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let f = std::fs::File::open(path)?;
        Self::read_from(std::io::BufReader::new(f))
    }
}

fn read_u32(r: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut impl Read) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)
        .map_err(|_| Error::Format("truncated header".into()))?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> FieldFile {
        let n = 25;
        FieldFile {
            level: 2,
            meta: FieldMeta {
                kappa: 8.0,
                beta: 0.0,
                ell: 0,
                space: "fine_fem".into(),
                seed: 1,
                energy: 0.125,
            },
            re: (0..n).map(|i| (i as f64).sin()).collect(),
            im: (0..n).map(|i| -(i as f64) / 3.0).collect(),
        }
    }

    #[test]
    fn round_trip_is_bitwise() {
        let f = sample();
        let mut buf = Vec::new();
        f.write_to(&mut buf).unwrap();
        let meta_len = u32::from_le_bytes(buf[20..24].try_into().unwrap()) as usize;
        assert_eq!(buf.len(), 24 + meta_len + 2 * 25 * 8);
        let g = FieldFile::read_from(&buf[..]).unwrap();
        assert_eq!(f, g);
        assert!(f
            .re
            .iter()
            .zip(&g.re)
            .all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn corrupt_headers_are_rejected() {
        let mut buf = Vec::new();
        sample().write_to(&mut buf).unwrap();
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(
            FieldFile::read_from(&bad[..]),
            Err(Error::Format(_))
        ));
        let mut bad = buf.clone();
        bad[4] = 9;
        assert!(matches!(
            FieldFile::read_from(&bad[..]),
            Err(Error::Format(_))
        ));
        assert!(FieldFile::read_from(&buf[..buf.len() - 3]).is_err());
    }

    #[test]
    fn non_finite_metadata_is_refused() {
        let mut f = sample();
        f.meta.energy = f64::NAN;
        assert!(matches!(
            f.write_to(Vec::new()),
            Err(Error::InvalidInput(_))
        ));
    }
}
