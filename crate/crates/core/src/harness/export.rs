//! Sampling `|u|` on uniform grids and locating vortex cores.

use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::mesh::TriMesh;
use crate::par;

use super::csv::Table;
use super::fieldfile::FieldFile;

pub const DEFAULT_GRID: usize = 256;

/// `|u|` sampled on an `n × n` grid covering `[0,1]²` including the
/// boundary, row-major with `x` fastest.
#[derive(Clone, Debug, PartialEq)]
pub struct ModulusGrid {
    pub n: usize,
    pub values: Vec<f64>,
}

impl ModulusGrid {
    pub fn coord(&self, i: usize) -> f64 {
        i as f64 / (self.n - 1) as f64
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[j * self.n + i]
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Grid points `(i, j)` where `|u| < threshold` and no neighbour in the
    /// 3×3 stencil is smaller. Ties go to the point that comes first in
    /// row-major order.
    pub fn local_minima(&self, threshold: f64) -> Vec<(usize, usize)> {
        let n = self.n;
        let mut out = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let v = self.at(i, j);
                if !(v < threshold) {
                    continue;
                }
                let k = j * n + i;
                let mut is_min = true;
                'stencil: for dj in -1i64..=1 {
                    for di in -1i64..=1 {
                        let (ii, jj) = (i as i64 + di, j as i64 + dj);
                        if (di, dj) == (0, 0)
                            || ii < 0
                            || jj < 0
                            || ii >= n as i64
                            || jj >= n as i64
                        {
                            continue;
                        }
                        let kk = jj as usize * n + ii as usize;
                        let w = self.values[kk];
                        if w < v || (w == v && kk < k) {
                            is_min = false;
                            break 'stencil;
                        }
                    }
                }
                if is_min {
                    out.push((i, j));
                }
            }
        }
        out
    }
}

/// Samples the P1 interpolant of nodal values `u` on the structured mesh.
pub fn sample_modulus(mesh: &TriMesh, u: &ComplexField, n: usize) -> Result<ModulusGrid> {
    if u.len() != mesh.num_vertices() {
        return Err(Error::DimensionMismatch {
            expected: mesh.num_vertices(),
            found: u.len(),
        });
    }
    if n < 2 {
        return Err(Error::InvalidInput(
            "grid needs at least 2 points per side".into(),
        ));
    }
    let mut values = vec![0.0; n * n];
    par::fill(&mut values, |k| {
        let (i, j) = (k % n, k / n);
        let x = i as f64 / (n - 1) as f64;
        let y = j as f64 / (n - 1) as f64;
        let (e, b) = mesh.locate(x, y);
        let t = mesh.triangles[e];
        let re: f64 = (0..3).map(|a| b[a] * u.re[t[a]]).sum();
        let im: f64 = (0..3).map(|a| b[a] * u.im[t[a]]).sum();
        re.hypot(im)
    });
    Ok(ModulusGrid { n, values })
}

/// Samples the field stored in a field file on an `n × n` grid.
pub fn export_field(file: &FieldFile, n: usize) -> Result<ModulusGrid> {
    let mesh = TriMesh::structured(file.level);
    sample_modulus(&mesh, &file.field(), n)
}

impl ModulusGrid {
    /// CSV rows `x,y,abs_u`.
    pub fn to_table(&self, config_hash: &str) -> Table {
        let mut t = Table::new(config_hash, &["x", "y", "abs_u"]);
        for j in 0..self.n {
            for i in 0..self.n {
                t.push(vec![
                    self.coord(i).into(),
                    self.coord(j).into(),
                    self.at(i, j).into(),
                ]);
            }
        }
        t
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::field::{SpaceId, SpaceKind};
    use num_complex::Complex64;

    #[test]
    fn constant_field_samples_to_one() {
        let m = TriMesh::structured(3);
        let u = ComplexField::constant(
            SpaceId::new(SpaceKind::FineFem, 3, m.num_vertices()),
            Complex64::new(0.6, 0.8),
        );
        let g = sample_modulus(&m, &u, 17).unwrap();
        assert!(g.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        assert!(g.local_minima(0.3).is_empty());
    }

    #[test]
    fn isolated_dips_are_counted_once() {
        let n = 9;
        let mut values = vec![1.0; n * n];
        values[2 * n + 2] = 0.1;
        values[6 * n + 6] = 0.0;
        values[6 * n + 7] = 0.0;
        values[4 * n + 4] = 0.5;
        let g = ModulusGrid { n, values };
        assert_eq!(g.local_minima(0.3), vec![(2, 2), (6, 6)]);
    }
}
