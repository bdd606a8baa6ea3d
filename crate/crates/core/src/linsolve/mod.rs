//! Linear solvers: SPD solves, patch saddle points and the pencil eigensolver.

mod eigen;
mod saddle;

pub use eigen::{eig_smallest, eig_smallest_real, EigenResult, RealEigenResult};
pub use saddle::{solve_saddle, SaddleFactor, SaddleSystem};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Llt;
use faer::{Mat, Side};
use num_complex::Complex64;

use crate::assembly::FormOperator;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

/// Sparse Cholesky factor of a Hermitian positive definite matrix. Purely
/// real matrices are factored in real arithmetic.
#[derive(Debug, Clone)]
pub struct SpdFactor {
    n: usize,
    inner: SpdInner,
}

#[derive(Debug, Clone)]
enum SpdInner {
    Real(Llt<usize, f64>),
    Complex(Llt<usize, Complex64>),
}

impl SpdFactor {
    pub fn new(m: &CsrMatrix<Complex64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                found: m.ncols(),
            });
        }
        let n = m.nrows();
        let inner = if m.values().iter().all(|v| v.im == 0.0) {
            let re = m.map(|v| v.re);
            SpdInner::Real(
                re.to_faer()
                    .sp_cholesky(Side::Lower)
                    .map_err(|e| Error::Factorization(format!("{e:?}")))?,
            )
        } else {
            SpdInner::Complex(
                m.to_faer()
                    .sp_cholesky(Side::Lower)
                    .map_err(|e| Error::Factorization(format!("{e:?}")))?,
            )
        };
        Ok(Self { n, inner })
    }

    pub fn from_real(m: &CsrMatrix<f64>) -> Result<Self> {
        Self::new(&m.to_complex())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(rhs.len(), self.n);
        match &self.inner {
            SpdInner::Real(llt) => {
                let b = Mat::<f64>::from_fn(
                    self.n,
                    2,
                    |i, j| {
                        if j == 0 {
                            rhs[i].re
                        } else {
                            rhs[i].im
                        }
                    },
                );
                let x = llt.solve(&b);
                (0..self.n)
                    .map(|i| Complex64::new(x[(i, 0)], x[(i, 1)]))
                    .collect()
            }
            SpdInner::Complex(llt) => {
                let b = Mat::<Complex64>::from_fn(self.n, 1, |i, _| rhs[i]);
                let x = llt.solve(&b);
                (0..self.n).map(|i| x[(i, 0)]).collect()
            }
        }
    }

    pub fn solve_real(&self, rhs: &[f64]) -> Vec<f64> {
        match &self.inner {
            SpdInner::Real(llt) => {
                let b = Mat::<f64>::from_fn(self.n, 1, |i, _| rhs[i]);
                let x = llt.solve(&b);
                (0..self.n).map(|i| x[(i, 0)]).collect()
            }
            SpdInner::Complex(_) => {
                let c: Vec<Complex64> = rhs.iter().map(|&r| Complex64::new(r, 0.0)).collect();
                self.solve(&c).into_iter().map(|v| v.re).collect()
            }
        }
    }

    pub(crate) fn solve_mat(&self, b: &Mat<Complex64>) -> Mat<Complex64> {
        match &self.inner {
            SpdInner::Real(llt) => {
                let k = b.ncols();
                let rb = Mat::<f64>::from_fn(self.n, 2 * k, |i, j| {
                    if j < k {
                        b[(i, j)].re
                    } else {
                        b[(i, j - k)].im
                    }
                });
                let x = llt.solve(&rb);
                Mat::from_fn(self.n, k, |i, j| Complex64::new(x[(i, j)], x[(i, j + k)]))
            }
            SpdInner::Complex(llt) => llt.solve(b),
        }
    }

    /// Solves for several right-hand sides stored as columns.
    pub fn solve_many_real(&self, cols: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let SpdInner::Real(llt) = &self.inner else {
            return cols.iter().map(|c| self.solve_real(c)).collect();
        };
        let b = Mat::<f64>::from_fn(self.n, cols.len(), |i, j| cols[j][i]);
        let x = llt.solve(&b);
        (0..cols.len())
            .map(|j| (0..self.n).map(|i| x[(i, j)]).collect())
            .collect()
    }
}

const PCG_MAX_ITERS: usize = 20_000;

/// Jacobi-preconditioned conjugate gradients for a Hermitian positive
/// definite operator. Stops at relative residual `tol`.
pub fn solve_spd(op: &FormOperator, rhs: &[Complex64], tol: f64) -> Result<Vec<Complex64>> {
    if op.conj.is_some() {
        return Err(Error::InvalidInput(
            "conjugate gradients need a complex-linear operator".into(),
        ));
    }
    let n = op.nrows();
    if rhs.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: rhs.len(),
        });
    }
    let diag: Vec<f64> = op.lin.diagonal().iter().map(|d| d.re).collect();
    if diag.iter().any(|&d| !(d > 0.0)) {
        return Err(Error::InvalidInput(
            "operator has a nonpositive diagonal entry".into(),
        ));
    }
    let dot = |a: &[Complex64], b: &[Complex64]| -> Complex64 {
        a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
    };
    let norm = |a: &[Complex64]| dot(a, a).re.sqrt();
    let bnorm = norm(rhs);
    let mut x = vec![Complex64::default(); n];
    if bnorm == 0.0 {
        return Ok(x);
    }
    let mut r = rhs.to_vec();
    let mut z: Vec<Complex64> = r.iter().zip(&diag).map(|(v, d)| v / d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z).re;
    let mut res = 1.0;
    for it in 0..PCG_MAX_ITERS.max(10 * n) {
        let ap = op.lin.mul_vec(&p);
        let pap = dot(&p, &ap).re;
        if !(pap > 0.0) {
            return Err(Error::NotConverged {
                iterations: it,
                residual: res,
            });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += p[i] * alpha;
            r[i] -= ap[i] * alpha;
        }
        res = norm(&r) / bnorm;
        if res <= tol {
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] / diag[i];
        }
        let rz_new = dot(&r, &z).re;
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + p[i] * beta;
        }
    }
    Err(Error::NotConverged {
        iterations: PCG_MAX_ITERS.max(10 * n),
        residual: res,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::{assemble_h1k_gram, assemble_mass, FormKind};
    use crate::mesh::TriMesh;

    #[test]
    fn mass_solve_recovers_unit_vector() {
        let m = TriMesh::structured(3);
        let mass = assemble_mass(&m);
        let j = 17;
        let mut e = vec![Complex64::default(); m.num_vertices()];
        e[j] = Complex64::new(1.0, 0.0);
        let col = mass.apply(&e);
        let x = solve_spd(&mass, &col, 1e-12).unwrap();
        for (i, v) in x.iter().enumerate() {
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((v.re - want).abs() < 1e-10 && v.im.abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_and_cg_agree_on_complex_hermitian() {
        // 1D Laplacian plus a magnetic-like skew part and a shift
        let n = 40;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, Complex64::new(3.0, 0.0)));
            if i + 1 < n {
                t.push((i, i + 1, Complex64::new(-1.0, 0.4)));
                t.push((i + 1, i, Complex64::new(-1.0, -0.4)));
            }
        }
        let m = CsrMatrix::from_triplets(n, n, &t);
        let op = FormOperator {
            kind: FormKind::ABeta,
            lin: m.clone(),
            conj: None,
            kappa: None,
            beta: None,
        };
        let b: Vec<Complex64> = (0..n)
            .map(|i| Complex64::new((i as f64).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let x1 = solve_spd(&op, &b, 1e-13).unwrap();
        let x2 = SpdFactor::new(&m).unwrap().solve(&b);
        for (a, c) in x1.iter().zip(&x2) {
            assert!((a - c).norm() < 1e-11);
        }
    }

    #[test]
    fn gram_solve_of_constant_image_returns_ones() {
        let m = TriMesh::structured(4);
        let g = assemble_h1k_gram(&m, 8.0).unwrap();
        let ones = vec![Complex64::new(1.0, 0.0); m.num_vertices()];
        let b = g.apply(&ones);
        let x = solve_spd(&g, &b, 1e-12).unwrap();
        assert!(x.iter().all(|v| (v.re - 1.0).abs() < 1e-9));
        let y = g.factor().unwrap().solve(&b);
        assert!(y.iter().all(|v| (v.re - 1.0).abs() < 1e-12));
    }

    #[test]
    fn indefinite_matrix_is_rejected_by_cholesky() {
        let m = CsrMatrix::from_triplets(
            2,
            2,
            &[
                (0, 0, Complex64::new(1.0, 0.0)),
                (1, 1, Complex64::new(-1.0, 0.0)),
            ],
        );
        assert!(SpdFactor::new(&m).is_err());
    }
}
