//! Dense oracles shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use gl_lod::mesh::TriMesh;
use gl_lod::potential::MagneticPotential;
use gl_lod::quadrature::QuadratureRule;
use gl_lod::sparse::CsrMatrix;

/// Hat function values and gradients on a triangle at `p`, from a direct
/// solve of the affine interpolation conditions.
fn hats(x: [[f64; 2]; 3], p: [f64; 2]) -> ([f64; 3], [[f64; 2]; 3]) {
    let m = DMatrix::from_row_slice(
        3,
        3,
        &[
            1.0, x[0][0], x[0][1], 1.0, x[1][0], x[1][1], 1.0, x[2][0], x[2][1],
        ],
    );
    let inv = m.try_inverse().expect("nondegenerate triangle");
    let mut val = [0.0; 3];
    let mut grad = [[0.0; 2]; 3];
    for a in 0..3 {
        // coefficients of hat a: column a of the inverse
        let (c0, cx, cy) = (inv[(0, a)], inv[(1, a)], inv[(2, a)]);
        val[a] = c0 + cx * p[0] + cy * p[1];
        grad[a] = [cx, cy];
    }
    (val, grad)
}

/// Dense `H[j][k] = a_β(φ_k, φ_j)` with
/// `a_β(v, w) = ∫ (i/κ ∇v + A v)·conj(i/κ ∇w + A w) + β v conj(w)`,
/// integrated with the given rule mapped to each triangle.
pub fn dense_abeta(
    mesh: &TriMesh,
    pot: &MagneticPotential,
    kappa: f64,
    beta: f64,
    quad: &QuadratureRule,
) -> DMatrix<Complex64> {
    let n = mesh.num_vertices();
    let mut h = DMatrix::<Complex64>::zeros(n, n);
    let i = Complex64::new(0.0, 1.0);
    for t in &mesh.triangles {
        let x = t.map(|v| mesh.vertices[v]);
        let jac = ((x[1][0] - x[0][0]) * (x[2][1] - x[0][1])
            - (x[2][0] - x[0][0]) * (x[1][1] - x[0][1]))
            .abs();
        for (b, &w) in quad.points.iter().zip(&quad.weights) {
            let p = [
                b[0] * x[0][0] + b[1] * x[1][0] + b[2] * x[2][0],
                b[0] * x[0][1] + b[1] * x[1][1] + b[2] * x[2][1],
            ];
            let a = pot.eval(p[0], p[1]);
            let (phi, g) = hats(x, p);
            // each factor (i/κ ∇φ + A φ) as a complex 2-vector
            let d: Vec<[Complex64; 2]> = (0..3)
                .map(|k| {
                    [
                        i * (g[k][0] / kappa) + a[0] * phi[k],
                        i * (g[k][1] / kappa) + a[1] * phi[k],
                    ]
                })
                .collect();
            for j in 0..3 {
                for k in 0..3 {
                    let v = d[k][0] * d[j][0].conj()
                        + d[k][1] * d[j][1].conj()
                        + beta * phi[k] * phi[j];
                    h[(t[j], t[k])] += v * (w * jac);
                }
            }
        }
    }
    h
}

pub fn csr_to_dense(m: &CsrMatrix<Complex64>) -> DMatrix<Complex64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (r, c, v) in m.triplets() {
        d[(r, c)] += v;
    }
    d
}

/// Real block `[[Re H, −Im H], [Im H, Re H]]` of a Hermitian matrix.
pub fn real_block(h: &DMatrix<Complex64>) -> DMatrix<f64> {
    let (n, m) = h.shape();
    DMatrix::from_fn(2 * n, 2 * m, |r, c| {
        let v = h[(r % n, c % m)];
        match (r < n, c < m) {
            (true, true) | (false, false) => v.re,
            (true, false) => -v.im,
            (false, true) => v.im,
        }
    })
}

pub fn complex_to_real(v: &[Complex64]) -> DVector<f64> {
    let n = v.len();
    DVector::from_fn(2 * n, |r, _| if r < n { v[r].re } else { v[r - n].im })
}

pub fn real_to_complex(v: &DVector<f64>) -> Vec<Complex64> {
    let n = v.len() / 2;
    (0..n).map(|i| Complex64::new(v[i], v[n + i])).collect()
}

/// Minimizer of `½ xᵀAx − fᵀx` subject to `Cx = 0`, through an orthonormal
/// basis of the null space of `C` taken from the SVD.
pub fn nullspace_solve(a: &DMatrix<f64>, c: &DMatrix<f64>, f: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let svd = c.transpose().svd(true, false);
    let u = svd.u.unwrap();
    let smax = svd.singular_values.max();
    let rank = svd
        .singular_values
        .iter()
        .filter(|&&s| s > 1e-12 * smax)
        .count();
    // ker C is the orthogonal complement of range(Cᵀ)
    let range = u.columns(0, rank).into_owned();
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(n - rank);
    let mut q: Vec<DVector<f64>> = range.column_iter().map(|c| c.into_owned()).collect();
    for e in 0..n {
        let mut v = DVector::<f64>::zeros(n);
        v[e] = 1.0;
        for _ in 0..2 {
            for b in q.iter() {
                let d = b.dot(&v);
                v.axpy(-d, b, 1.0);
            }
        }
        let nv = v.norm();
        if nv > 1e-8 {
            v /= nv;
            q.push(v.clone());
            basis.push(v);
        }
        if basis.len() == n - rank {
            break;
        }
    }
    let z = DMatrix::from_columns(&basis);
    let red = z.transpose() * a * &z;
    let rhs = z.transpose() * f;
    let y = red.lu().solve(&rhs).expect("reduced system is regular");
    z * y
}
