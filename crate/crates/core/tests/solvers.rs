mod common;

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use proptest::prelude::*;

use gl_lod::glenergy::EnergyContext;
use gl_lod::linsolve::{eig_smallest, SaddleFactor};
use gl_lod::mesh::build_hierarchy;
use gl_lod::minimize::initial_guess;
use gl_lod::potential::MagneticPotential;
use gl_lod::sparse::CsrMatrix;

use common::*;

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// Smallest generalized eigenvalues of a real symmetric pencil via
/// `L⁻¹ H L⁻ᵀ` with `G = L Lᵀ`.
fn dense_pencil(h: &DMatrix<f64>, g: &DMatrix<f64>) -> Vec<f64> {
    let l = g.clone().cholesky().expect("G is SPD").l();
    let li = l.try_inverse().unwrap();
    let m = &li * h * li.transpose();
    let m = (&m + m.transpose()) * 0.5;
    let mut ev: Vec<f64> = m.symmetric_eigenvalues().iter().copied().collect();
    ev.sort_by(f64::total_cmp);
    ev
}

#[test]
fn pencil_eigenvalues_match_dense_oracle() {
    let mh = Arc::new(build_hierarchy(1, 3).unwrap());
    let ctx = EnergyContext::fine(mh, MagneticPotential::sinusoidal(), 4.0).unwrap();
    let v = initial_guess(ctx.space(), 3);
    let h = ctx.hessian_operator(&v).unwrap();
    let hd = csr_to_dense_real(&h.to_real_block());
    for g in [ctx.fine_mass.clone(), ctx.fine_gram.clone()] {
        let gd = csr_to_dense_real(&g.to_real_block());
        let want = dense_pencil(&hd, &gd);
        let got = eig_smallest(&h, &g, 5, 1e-10).unwrap();
        assert!(got.converged);
        for (a, b) in got.values.iter().zip(&want) {
            assert!((a - b).abs() < 1e-7 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }
}

fn csr_to_dense_real(m: &CsrMatrix<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(m.nrows(), m.ncols());
    for (r, col, v) in m.triplets() {
        d[(r, col)] += v;
    }
    d
}

/// Hermitian positive definite tridiagonal test matrix.
fn hpd(n: usize, shift: f64) -> CsrMatrix<Complex64> {
    let mut t = Vec::new();
    for i in 0..n {
        t.push((i, i, c(2.0 + shift, 0.0)));
        if i + 1 < n {
            t.push((i, i + 1, c(-1.0, 0.3)));
            t.push((i + 1, i, c(-1.0, -0.3)));
        }
    }
    CsrMatrix::from_triplets(n, n, &t)
}

fn constraints(n: usize, m: usize) -> CsrMatrix<Complex64> {
    let mut t = Vec::new();
    for r in 0..m {
        for j in 0..n {
            let x = ((r + 1) * (j + 2)) as f64;
            if (r + j) % 3 != 0 {
                t.push((r, j, c(x.sin(), 0.0)));
            }
        }
    }
    CsrMatrix::from_triplets(m, n, &t)
}

fn dense_kkt(
    a: &CsrMatrix<Complex64>,
    cm: &CsrMatrix<Complex64>,
    f: &[Complex64],
) -> Vec<Complex64> {
    let ar = real_block(&csr_to_dense(a));
    let cr = real_block(&csr_to_dense(cm));
    real_to_complex(&nullspace_solve(&ar, &cr, &complex_to_real(f)))
}

#[test]
fn schur_path_matches_dense_constrained_solve() {
    let (n, m) = (30, 4);
    let a = hpd(n, 0.5);
    let cm = constraints(n, m);
    let f: Vec<Complex64> = (0..n)
        .map(|i| c((i as f64).cos(), 0.1 * i as f64))
        .collect();
    let fac = SaddleFactor::new(&a, &cm, "test").unwrap();
    assert!(fac.uses_schur());
    let w = fac.solve(std::slice::from_ref(&f)).unwrap().pop().unwrap();
    let want = dense_kkt(&a, &cm, &f);
    for (x, y) in w.iter().zip(&want) {
        assert!((x - y).norm() < 1e-10);
    }
}

#[test]
fn semidefinite_primal_block_falls_back_to_lu() {
    // graph Laplacian: singular on constants, regular on the constraint kernel
    let n = 20;
    let mut t = Vec::new();
    for i in 0..n - 1 {
        t.push((i, i, c(1.0, 0.0)));
        t.push((i + 1, i + 1, c(1.0, 0.0)));
        t.push((i, i + 1, c(-1.0, 0.0)));
        t.push((i + 1, i, c(-1.0, 0.0)));
    }
    let a = CsrMatrix::from_triplets(n, n, &t);
    let ones: Vec<(usize, usize, Complex64)> = (0..n).map(|j| (0, j, c(1.0, 0.0))).collect();
    let cm = CsrMatrix::from_triplets(1, n, &ones);
    let f: Vec<Complex64> = (0..n).map(|i| c((i as f64 * 0.7).sin(), 0.0)).collect();
    let fac = SaddleFactor::new(&a, &cm, "laplacian").unwrap();
    assert!(!fac.uses_schur());
    let w = fac.solve(std::slice::from_ref(&f)).unwrap().pop().unwrap();
    let want = dense_kkt(&a, &cm, &f);
    for (x, y) in w.iter().zip(&want) {
        assert!((x - y).norm() < 1e-9);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn saddle_solution_is_feasible_and_stationary(
        shift in 0.05f64..3.0,
        m in 1usize..6,
        loads in proptest::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 25),
    ) {
        let n = 25;
        let a = hpd(n, shift);
        let cm = constraints(n, m);
        let f: Vec<Complex64> = loads.iter().map(|&(x, y)| c(x, y)).collect();
        let w = SaddleFactor::new(&a, &cm, "prop").unwrap().solve(std::slice::from_ref(&f)).unwrap().pop().unwrap();
        let cw = cm.mul_vec(&w);
        prop_assert!(cw.iter().all(|v| v.norm() < 1e-10));
        // A w − f lies in range(Cᴴ): its projection onto ker C vanishes
        let aw = a.mul_vec(&w);
        let r: Vec<Complex64> = aw.iter().zip(&f).map(|(x, y)| x - y).collect();
        let cr = real_block(&csr_to_dense(&cm));
        let rr = complex_to_real(&r);
        let proj = &cr.transpose() * (&cr * cr.transpose()).lu().solve(&(&cr * &rr)).unwrap();
        let resid: DVector<f64> = rr - proj;
        prop_assert!(resid.amax() < 1e-9);
    }
}
