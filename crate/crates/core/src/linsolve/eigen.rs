//! Smallest eigenpairs of a symmetric pencil `(H, G)` with `G` positive
//! definite, by block inverse iteration with Rayleigh–Ritz.

use faer::{Mat, Side};
use num_complex::Complex64;

use super::SpdFactor;
use crate::assembly::FormOperator;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

const MAX_ITERS: usize = 500;

#[derive(Clone, Debug)]
pub struct EigenResult {
    /// Ascending.
    pub values: Vec<f64>,
    /// Complex coefficient vectors, `G`-orthonormal in the real sense.
    pub vectors: Vec<Vec<Complex64>>,
    /// `‖H v − λ G v‖_{G⁻¹}` per pair, with `‖v‖_G = 1`.
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// Shift `σ` whose factorization `H − σ G` drove the iteration.
    pub shift: f64,
}

/// The `k` algebraically smallest eigenpairs of the real-bilinear pencil
/// `(H, G)`. Both operators act on complex vectors; the iteration runs on
/// their real `2n × 2n` representations.
pub fn eig_smallest(h: &FormOperator, g: &FormOperator, k: usize, tol: f64) -> Result<EigenResult> {
    let n = h.nrows();
    if g.nrows() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: g.nrows(),
        });
    }
    let real = eig_smallest_real(&h.to_real_block(), &g.to_real_block(), k, tol)?;
    let vectors = real
        .vectors
        .iter()
        .map(|v| (0..n).map(|i| Complex64::new(v[i], v[n + i])).collect())
        .collect();
    Ok(EigenResult {
        values: real.values,
        vectors,
        residuals: real.residuals,
        converged: real.converged,
        iterations: real.iterations,
        shift: real.shift,
    })
}

#[derive(Clone, Debug)]
pub struct RealEigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    pub residuals: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    pub shift: f64,
}

pub fn eig_smallest_real(
    h: &CsrMatrix<f64>,
    g: &CsrMatrix<f64>,
    k: usize,
    tol: f64,
) -> Result<RealEigenResult> {
    let n = h.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidInput(format!(
            "cannot compute {k} eigenpairs of a pencil of size {n}"
        )));
    }
    let g_factor = SpdFactor::from_real(g)?;
    let (shift, solver) = shifted_factor(h, g)?;
    let p = (2 * k).max(k + 2).min(n);

    let mut rng = Lcg(0x9E37_79B9_7F4A_7C15);
    let mut x: Vec<Vec<f64>> = (0..p)
        .map(|_| (0..n).map(|_| rng.next_signed()).collect())
        .collect();
    let mut gx = g_orthonormalize(&mut x, g, &mut rng);

    let mut values = vec![0.0; k];
    let mut residuals = vec![f64::INFINITY; k];
    let mut vectors = Vec::new();
    for it in 1..=MAX_ITERS {
        let mut y = solver.solve_many_real(&gx);
        let gy = g_orthonormalize(&mut y, g, &mut rng);
        let hy: Vec<Vec<f64>> = y.iter().map(|c| h.mul_vec(c)).collect();
        let hs = Mat::<f64>::from_fn(p, p, |i, j| 0.5 * (dot(&y[i], &hy[j]) + dot(&y[j], &hy[i])));
        let evd = hs
            .self_adjoint_eigen(Side::Lower)
            .map_err(|e| Error::Factorization(format!("Rayleigh-Ritz: {e:?}")))?;
        let q = evd.U();
        let theta: Vec<f64> = (0..p).map(|i| evd.S().column_vector()[i]).collect();
        let combine = |cols: &[Vec<f64>]| -> Vec<Vec<f64>> {
            (0..p)
                .map(|j| {
                    let mut out = vec![0.0; n];
                    for (i, c) in cols.iter().enumerate() {
                        let w = q[(i, j)];
                        for (o, v) in out.iter_mut().zip(c) {
                            *o += w * v;
                        }
                    }
                    out
                })
                .collect()
        };
        x = combine(&y);
        gx = combine(&gy);
        let hx = combine(&hy);
        for i in 0..k {
            let r: Vec<f64> = (0..n).map(|t| hx[i][t] - theta[i] * gx[i][t]).collect();
            let gr = g_factor.solve_real(&r);
            residuals[i] = dot(&r, &gr).max(0.0).sqrt();
            values[i] = theta[i];
        }
        vectors = x[..k].to_vec();
        if residuals.iter().all(|&r| r <= tol) {
            return Ok(RealEigenResult {
                values,
                vectors,
                residuals,
                converged: true,
                iterations: it,
                shift,
            });
        }
    }
    log::warn!("eigensolver stopped after {MAX_ITERS} iterations, residuals {residuals:?}");
    Ok(RealEigenResult {
        values,
        vectors,
        residuals,
        converged: false,
        iterations: MAX_ITERS,
        shift,
    })
}

/// Factors `H − σ G` for the first `σ` in `0, −10⁻⁸ s, −10⁻⁶ s, …` that
/// gives a positive definite matrix, where `s = max|H| / max|G|`. A positive
/// definite shifted matrix puts `σ` below the spectrum, so inverse iteration
/// converges to the algebraically smallest eigenvalues.
fn shifted_factor(h: &CsrMatrix<f64>, g: &CsrMatrix<f64>) -> Result<(f64, SpdFactor)> {
    let s = h.max_abs().max(f64::MIN_POSITIVE) / g.max_abs();
    let mut shifts = vec![0.0];
    let mut m = 1e-8;
    while m <= 1e8 {
        shifts.push(-m * s);
        m *= 100.0;
    }
    for sigma in shifts {
        let shifted = if sigma == 0.0 {
            h.clone()
        } else {
            h.add(&g.scaled(-sigma))
        };
        if let Ok(f) = SpdFactor::from_real(&shifted) {
            return Ok((sigma, f));
        }
    }
    Err(Error::Factorization(
        "no shift made the pencil positive definite".into(),
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Modified Gram–Schmidt in the `G` inner product, two passes. Columns that
/// collapse are replaced by fresh pseudo-random vectors. Returns `G x`.
fn g_orthonormalize(x: &mut [Vec<f64>], g: &CsrMatrix<f64>, rng: &mut Lcg) -> Vec<Vec<f64>> {
    let n = g.nrows();
    let mut gx: Vec<Vec<f64>> = Vec::with_capacity(x.len());
    for j in 0..x.len() {
        let mut attempts = 0;
        loop {
            let before = dot(&x[j], &g.mul_vec(&x[j])).sqrt();
            for _pass in 0..2 {
                for i in 0..j {
                    let c = dot(&gx[i], &x[j]);
                    for t in 0..n {
                        x[j][t] -= c * x[i][t];
                    }
                }
            }
            let gj = g.mul_vec(&x[j]);
            let norm = dot(&x[j], &gj).max(0.0).sqrt();
            if norm > 1e-10 * before && norm > 0.0 {
                x[j].iter_mut().for_each(|v| *v /= norm);
                gx.push(gj.into_iter().map(|v| v / norm).collect());
                break;
            }
            attempts += 1;
            assert!(attempts < 10, "cannot extend the G-orthonormal block");
            x[j] = (0..n).map(|_| rng.next_signed()).collect();
        }
    }
    gx
}

/// 64-bit linear congruential generator (Knuth's MMIX constants).
struct Lcg(u64);

impl Lcg {
    fn next_signed(&mut self) -> f64 {
        self.0 = self
            .0
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        ((self.0 >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_pencil_has_unit_spectrum() {
        let mut t = Vec::new();
        for i in 0..30 {
            t.push((i, i, 2.0 + (i % 3) as f64));
            if i + 1 < 30 {
                t.push((i, i + 1, -0.5));
                t.push((i + 1, i, -0.5));
            }
        }
        let g = CsrMatrix::from_triplets(30, 30, &t);
        let r = eig_smallest_real(&g, &g, 4, 1e-10).unwrap();
        assert!(r.converged);
        assert!(r.values.iter().all(|v| (v - 1.0).abs() < 1e-10));
    }

    #[test]
    fn indefinite_pencil_finds_negative_eigenvalues() {
        let n = 20;
        let t: Vec<_> = (0..n).map(|i| (i, i, i as f64 - 5.5)).collect();
        let h = CsrMatrix::from_triplets(n, n, &t);
        let g = CsrMatrix::identity(n);
        let r = eig_smallest_real(&h, &g, 3, 1e-10).unwrap();
        assert!(r.converged);
        for (i, v) in r.values.iter().enumerate() {
            assert!((v - (i as f64 - 5.5)).abs() < 1e-9, "{v}");
        }
    }
}
