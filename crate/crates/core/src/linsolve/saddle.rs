use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::Lu;
use faer::{Mat, Side};
use num_complex::Complex64;

use super::SpdFactor;
use crate::error::{Error, Result};
use crate::sparse::CsrMatrix;

const CONSTRAINT_TOL: f64 = 1e-10;
const STATIONARITY_TOL: f64 = 1e-9;
const RANK_TOL: f64 = 1e-13;

/// `min ½ wᴴ A w − Re(wᴴ f)` subject to `C w = 0`, for several loads `f`.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    /// Hermitian primal block (`n × n`).
    pub a: CsrMatrix<Complex64>,
    /// Constraint rows (`m × n`).
    pub c: CsrMatrix<Complex64>,
    pub rhs: Vec<Vec<Complex64>>,
    /// Names the system in error messages.
    pub label: String,
}

/// Solves the KKT system `[A Cᴴ; C 0] [w; λ] = [f; 0]` and returns the
/// primal parts. Zero constraint rows are dropped first; the remaining rows
/// must have full rank.
pub fn solve_saddle(sys: &SaddleSystem) -> Result<Vec<Vec<Complex64>>> {
    SaddleFactor::new(&sys.a, &sys.c, &sys.label)?.solve(&sys.rhs)
}

/// A factorized saddle-point operator, reusable across loads.
///
/// When `A` is positive definite the constraints are eliminated through the
/// Schur complement `S = C A⁻¹ Cᴴ`, which needs one sparse Cholesky
/// factorization and `m` triangular solves. Otherwise the full KKT matrix is
/// factored by sparse LU.
pub struct SaddleFactor {
    n: usize,
    kkt: CsrMatrix<Complex64>,
    c: CsrMatrix<Complex64>,
    method: Method,
    label: String,
}

enum Method {
    Schur {
        a: SpdFactor,
        /// `A⁻¹ Cᴴ`, `n × m`.
        z: Mat<Complex64>,
        s: faer::linalg::solvers::Llt<Complex64>,
    },
    Kkt(Lu<usize, Complex64>),
}

impl std::fmt::Debug for SaddleFactor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SaddleFactor")
            .field("label", &self.label)
            .field("primal", &self.n)
            .field("constraints", &self.c.nrows())
            .field("schur", &self.uses_schur())
            .finish()
    }
}

impl SaddleFactor {
    pub fn new(a: &CsrMatrix<Complex64>, c: &CsrMatrix<Complex64>, label: &str) -> Result<Self> {
        let n = a.nrows();
        if a.ncols() != n || c.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: c.ncols(),
            });
        }
        let keep: Vec<usize> = (0..c.nrows())
            .filter(|&r| c.row(r).1.iter().any(|v| *v != Complex64::default()))
            .collect();
        let all: Vec<usize> = (0..n).collect();
        let c = c.submatrix(&keep, &all);
        let m = c.nrows();

        let defect = rank_defect(&c)?;
        if defect > 0 {
            return Err(Error::SingularSaddle {
                label: label.to_string(),
                rank_defect: defect,
            });
        }

        // constraint rows are scaled to the magnitude of A
        let amax = a.max_abs();
        let cmax = c.max_abs();
        let scale = if cmax > 0.0 && amax > 0.0 {
            amax / cmax
        } else {
            1.0
        };
        let c = c.scaled(scale);
        let mut trip: Vec<(usize, usize, Complex64)> = a.triplets().collect();
        for (r, col, v) in c.triplets() {
            trip.push((n + r, col, v));
            trip.push((col, n + r, v.conj()));
        }
        let kkt = CsrMatrix::from_triplets(n + m, n + m, &trip);
        let method = match schur(a, &c) {
            Some(m) => m,
            None => Method::Kkt(
                kkt.to_faer()
                    .sp_lu()
                    .map_err(|e| Error::Factorization(format!("{label}: {e:?}")))?,
            ),
        };
        Ok(Self {
            n,
            kkt,
            c,
            method,
            label: label.to_string(),
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Active constraint count after dropping zero rows.
    pub fn constraints(&self) -> usize {
        self.c.nrows()
    }

    /// Whether the Schur complement path is in use.
    pub fn uses_schur(&self) -> bool {
        matches!(self.method, Method::Schur { .. })
    }

    /// Applies the inverse KKT operator to the columns of `b` (`n + m` rows).
    fn apply_inverse(&self, b: &Mat<Complex64>) -> Mat<Complex64> {
        let (n, m) = (self.n, self.c.nrows());
        match &self.method {
            Method::Kkt(lu) => lu.solve(b),
            Method::Schur { a, z, s } => {
                let k = b.ncols();
                let top = Mat::from_fn(n, k, |i, j| b[(i, j)]);
                let y = a.solve_mat(&top);
                // S λ = C y − g
                let mut rhs = Mat::<Complex64>::zeros(m, k);
                for j in 0..k {
                    let col: Vec<Complex64> = (0..n).map(|i| y[(i, j)]).collect();
                    let cy = self.c.mul_vec(&col);
                    for r in 0..m {
                        rhs[(r, j)] = cy[r] - b[(n + r, j)];
                    }
                }
                let lam = if m > 0 { s.solve(&rhs) } else { rhs };
                Mat::from_fn(n + m, k, |i, j| {
                    if i < n {
                        let mut v = y[(i, j)];
                        for r in 0..m {
                            v -= z[(i, r)] * lam[(r, j)];
                        }
                        v
                    } else {
                        lam[(i - n, j)]
                    }
                })
            }
        }
    }

    pub fn solve(&self, rhs: &[Vec<Complex64>]) -> Result<Vec<Vec<Complex64>>> {
        let (n, m) = (self.n, self.c.nrows());
        for f in rhs {
            if f.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: f.len(),
                });
            }
        }
        let nr = rhs.len();
        let b = Mat::<Complex64>::from_fn(n + m, nr, |i, j| {
            if i < n {
                rhs[j][i]
            } else {
                Complex64::default()
            }
        });
        let x = self.apply_inverse(&b);
        let mut out = Vec::with_capacity(nr);
        for (j, f) in rhs.iter().enumerate() {
            let mut col: Vec<Complex64> = (0..n + m).map(|i| x[(i, j)]).collect();
            let mut check = residuals(&self.kkt, &col, f, &self.c, n);
            if check.0 > CONSTRAINT_TOL || check.1 > STATIONARITY_TOL {
                // one step of iterative refinement
                let kx = self.kkt.mul_vec(&col);
                let r = Mat::<Complex64>::from_fn(n + m, 1, |i, _| {
                    let bi = if i < n { f[i] } else { Complex64::default() };
                    bi - kx[i]
                });
                let d = self.apply_inverse(&r);
                for (i, v) in col.iter_mut().enumerate() {
                    *v += d[(i, 0)];
                }
                check = residuals(&self.kkt, &col, f, &self.c, n);
            }
            if !(check.0 <= CONSTRAINT_TOL && check.1 <= STATIONARITY_TOL) {
                return Err(Error::SaddleResidual {
                    label: self.label.clone(),
                    constraint: check.0,
                    stationarity: check.1,
                });
            }
            col.truncate(n);
            out.push(col);
        }
        Ok(out)
    }
}

/// The Schur complement factorization, or `None` when `A` or `S` is not
/// numerically positive definite.
fn schur(a: &CsrMatrix<Complex64>, c: &CsrMatrix<Complex64>) -> Option<Method> {
    let n = a.nrows();
    let m = c.nrows();
    let af = SpdFactor::new(a).ok()?;
    let mut ct = Mat::<Complex64>::zeros(n, m);
    for (r, col, v) in c.triplets() {
        ct[(col, r)] = v.conj();
    }
    let z = af.solve_mat(&ct);
    let mut s = Mat::<Complex64>::zeros(m, m);
    for r in 0..m {
        let (cols, vals) = c.row(r);
        for q in 0..m {
            let mut acc = Complex64::default();
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * z[(j, q)];
            }
            s[(r, q)] = acc;
        }
    }
    // symmetrize against round-off
    let s = Mat::from_fn(m, m, |i, j| (s[(i, j)] + s[(j, i)].conj()) * 0.5);
    let s = if m > 0 {
        s.llt(Side::Lower).ok()?
    } else {
        Mat::<Complex64>::identity(1, 1).llt(Side::Lower).ok()?
    };
    Some(Method::Schur { a: af, z, s })
}

/// (scaled constraint residual, relative stationarity residual).
fn residuals(
    kkt: &CsrMatrix<Complex64>,
    x: &[Complex64],
    f: &[Complex64],
    c: &CsrMatrix<Complex64>,
    n: usize,
) -> (f64, f64) {
    let w = &x[..n];
    let wmax = w.iter().fold(0.0f64, |a, v| a.max(v.norm()));
    let mut cres = 0.0f64;
    if wmax > 0.0 {
        for r in 0..c.nrows() {
            let (cols, vals) = c.row(r);
            let mut acc = Complex64::default();
            let mut l1 = 0.0;
            for (&j, &v) in cols.iter().zip(vals) {
                acc += v * w[j];
                l1 += v.norm();
            }
            cres = cres.max(acc.norm() / (l1 * wmax));
        }
    }
    let kx = kkt.mul_vec(x);
    let fnorm = f.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    let rnorm = (0..n)
        .map(|i| (f[i] - kx[i]).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let stat = if fnorm > 0.0 { rnorm / fnorm } else { rnorm };
    (cres, stat)
}

/// Number of numerically dependent rows of `c`, from the spectrum of `C Cᴴ`.
fn rank_defect(c: &CsrMatrix<Complex64>) -> Result<usize> {
    let m = c.nrows();
    if m == 0 {
        return Ok(0);
    }
    let cct = c.matmul(&c.conj_transpose());
    let mut g = Mat::<Complex64>::zeros(m, m);
    for (r, col, v) in cct.triplets() {
        g[(r, col)] = v;
    }
    let ev = g
        .self_adjoint_eigenvalues(Side::Lower)
        .map_err(|e| Error::Factorization(format!("constraint rank check: {e:?}")))?;
    let max = ev.iter().fold(0.0f64, |a, &b| a.max(b));
    Ok(ev.iter().filter(|&&l| l <= RANK_TOL * max).count())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn laplace(n: usize) -> CsrMatrix<Complex64> {
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, c(2.0)));
            if i + 1 < n {
                t.push((i, i + 1, Complex64::new(-1.0, 0.2)));
                t.push((i + 1, i, Complex64::new(-1.0, -0.2)));
            }
        }
        CsrMatrix::from_triplets(n, n, &t)
    }

    #[test]
    fn zero_load_gives_zero_solution() {
        let n = 10;
        let sys = SaddleSystem {
            a: laplace(n),
            c: CsrMatrix::from_triplets(1, n, &(0..n).map(|j| (0, j, c(1.0))).collect::<Vec<_>>()),
            rhs: vec![vec![Complex64::default(); n]],
            label: "test".into(),
        };
        let w = solve_saddle(&sys).unwrap();
        assert!(w[0].iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn constraints_hold_and_zero_rows_are_dropped() {
        let n = 12;
        let mut t = Vec::new();
        for j in 0..n {
            t.push((0, j, c(1.0)));
            t.push((2, j, c(j as f64)));
        }
        let sys = SaddleSystem {
            a: laplace(n),
            c: CsrMatrix::from_triplets(3, n, &t),
            rhs: vec![(0..n).map(|i| Complex64::new(i as f64, 1.0)).collect()],
            label: "test".into(),
        };
        let w = &solve_saddle(&sys).unwrap()[0];
        let s0: Complex64 = w.iter().sum();
        let s1: Complex64 = w.iter().enumerate().map(|(j, v)| v * j as f64).sum();
        assert!(s0.norm() < 1e-12 && s1.norm() < 1e-10);
    }

    #[test]
    fn dependent_rows_are_reported() {
        let n = 6;
        let mut t = Vec::new();
        for j in 0..n {
            t.push((0, j, c(1.0)));
            t.push((1, j, c(2.0)));
        }
        let sys = SaddleSystem {
            a: laplace(n),
            c: CsrMatrix::from_triplets(2, n, &t),
            rhs: vec![vec![c(1.0); n]],
            label: "patch 7".into(),
        };
        match solve_saddle(&sys) {
            Err(Error::SingularSaddle { label, rank_defect }) => {
                assert_eq!(label, "patch 7");
                assert_eq!(rank_defect, 1);
            }
            other => panic!("expected a rank error, got {other:?}"),
        }
    }
}
