//! P1 assembly of the discrete forms and the coarse/fine transfer operators.
//!
//! A [`FormOperator`] stores a real-bilinear form on complex coefficient
//! vectors as `y = L z + N conj(z)` with `L` Hermitian and `N` complex
//! symmetric; the form is `b(z, w) = Re(wᴴ y)`. Writing `L = S + iK` and
//! `N = P + iQ`, the equivalent real operator on `[Re z; Im z]` is
//! `[[S + P, Q − K], [K + Q, S − P]]`.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{ComplexField, SpaceId, SpaceKind};
use crate::linsolve::{self, SpdFactor};
use crate::mesh::{MeshHierarchy, TriMesh};
use crate::par;
use crate::potential::MagneticPotential;
use crate::quadrature::QuadratureRule;
use crate::sparse::CsrMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum FormKind {
    Mass,
    Stiffness,
    ABeta,
    H1kGram,
    Hessian,
    CoarseFineMass,
}

#[derive(Clone, Debug)]
pub struct FormOperator {
    pub kind: FormKind,
    pub lin: CsrMatrix<Complex64>,
    pub conj: Option<CsrMatrix<Complex64>>,
    pub kappa: Option<f64>,
    pub beta: Option<f64>,
}

impl FormOperator {
    pub fn real(kind: FormKind, m: &CsrMatrix<f64>) -> Self {
        Self {
            kind,
            lin: m.to_complex(),
            conj: None,
            kappa: None,
            beta: None,
        }
    }

    pub fn nrows(&self) -> usize {
        self.lin.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.lin.ncols()
    }

    pub fn apply(&self, z: &[Complex64]) -> Vec<Complex64> {
        let mut y = self.lin.mul_vec(z);
        if let Some(n) = &self.conj {
            let zc: Vec<Complex64> = z.iter().map(|c| c.conj()).collect();
            for (a, b) in y.iter_mut().zip(n.mul_vec(&zc)) {
                *a += b;
            }
        }
        y
    }

    /// Applies the operator to a field; the result is the coefficient vector
    /// of the functional `b(v, ·)`, tagged with the same space.
    pub fn apply_field(&self, v: &ComplexField) -> Result<ComplexField> {
        if v.len() != self.ncols() {
            return Err(Error::DimensionMismatch {
                expected: self.ncols(),
                found: v.len(),
            });
        }
        let y = self.apply(&v.to_complex());
        let space = SpaceId {
            dim: y.len(),
            ..v.space
        };
        ComplexField::from_complex(space, &y)
    }

    /// `b(z, w) = Re(wᴴ (L z + N conj z))`.
    pub fn form(&self, z: &[Complex64], w: &[Complex64]) -> f64 {
        let y = self.apply(z);
        w.iter().zip(&y).map(|(a, b)| (a.conj() * b).re).sum()
    }

    pub fn form_fields(&self, z: &ComplexField, w: &ComplexField) -> f64 {
        self.form(&z.to_complex(), &w.to_complex())
    }

    /// Symmetric block `S = Re L`.
    pub fn s_block(&self) -> CsrMatrix<f64> {
        self.lin.map(|c| c.re)
    }

    /// Skew block `K = Im L`.
    pub fn k_block(&self) -> CsrMatrix<f64> {
        self.lin.map(|c| c.im)
    }

    /// The real `2n × 2n` operator acting on `[Re z; Im z]`.
    pub fn to_real_block(&self) -> CsrMatrix<f64> {
        let (n, m) = (self.nrows(), self.ncols());
        let mut trip = Vec::with_capacity(4 * self.lin.nnz());
        for (r, c, v) in self.lin.triplets() {
            trip.push((r, c, v.re));
            trip.push((r, m + c, -v.im));
            trip.push((n + r, c, v.im));
            trip.push((n + r, m + c, v.re));
        }
        if let Some(nm) = &self.conj {
            for (r, c, v) in nm.triplets() {
                trip.push((r, c, v.re));
                trip.push((r, m + c, v.im));
                trip.push((n + r, c, v.im));
                trip.push((n + r, m + c, -v.re));
            }
        }
        CsrMatrix::from_triplets(2 * n, 2 * m, &trip)
    }

    /// Factorizes a Hermitian positive definite, complex-linear operator.
    pub fn factor(&self) -> Result<SpdFactor> {
        if self.conj.is_some() {
            return Err(Error::InvalidInput(
                "cannot factor an operator with a conjugate-linear part".into(),
            ));
        }
        SpdFactor::new(&self.lin)
    }
}

/// Per-element geometry shared by assembly and energy evaluation.
#[derive(Clone, Debug)]
pub struct ElementGeometry {
    pub area: Vec<f64>,
    pub grads: Vec<[[f64; 2]; 3]>,
}

impl ElementGeometry {
    pub fn new(mesh: &TriMesh) -> Self {
        let ne = mesh.num_triangles();
        Self {
            area: par::map_range(ne, |e| mesh.area(e)),
            grads: par::map_range(ne, |e| mesh.hat_gradients(e)),
        }
    }
}

fn scatter<T: crate::sparse::Scalar>(mesh: &TriMesh, local: &[[[T; 3]; 3]]) -> CsrMatrix<T> {
    let mut trip = Vec::with_capacity(9 * local.len());
    for (e, m) in local.iter().enumerate() {
        let t = mesh.triangles[e];
        for j in 0..3 {
            for k in 0..3 {
                trip.push((t[j], t[k], m[j][k]));
            }
        }
    }
    let n = mesh.num_vertices();
    CsrMatrix::from_triplets(n, n, &trip)
}

fn local_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

fn local_stiffness(area: f64, g: &[[f64; 2]; 3]) -> [[f64; 3]; 3] {
    let mut m = [[0.0; 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            m[j][k] = area * (g[j][0] * g[k][0] + g[j][1] * g[k][1]);
        }
    }
    m
}

pub fn mass_matrix(mesh: &TriMesh) -> CsrMatrix<f64> {
    let local = par::map_range(mesh.num_triangles(), |e| local_mass(mesh.area(e)));
    scatter(mesh, &local)
}

pub fn stiffness_matrix(mesh: &TriMesh) -> CsrMatrix<f64> {
    let local = par::map_range(mesh.num_triangles(), |e| {
        local_stiffness(mesh.area(e), &mesh.hat_gradients(e))
    });
    scatter(mesh, &local)
}

pub fn assemble_mass(mesh: &TriMesh) -> FormOperator {
    FormOperator::real(FormKind::Mass, &mass_matrix(mesh))
}

pub fn assemble_stiffness(mesh: &TriMesh) -> FormOperator {
    FormOperator::real(FormKind::Stiffness, &stiffness_matrix(mesh))
}

pub fn assemble_h1k_gram(mesh: &TriMesh, kappa: f64) -> Result<FormOperator> {
    check_kappa(kappa)?;
    let k2 = 1.0 / (kappa * kappa);
    let local = par::map_range(mesh.num_triangles(), |e| {
        let area = mesh.area(e);
        let m = local_mass(area);
        let s = local_stiffness(area, &mesh.hat_gradients(e));
        let mut out = [[0.0; 3]; 3];
        for j in 0..3 {
            for k in 0..3 {
                out[j][k] = m[j][k] + k2 * s[j][k];
            }
        }
        out
    });
    let mut op = FormOperator::real(FormKind::H1kGram, &scatter(mesh, &local));
    op.kappa = Some(kappa);
    Ok(op)
}

fn check_kappa(kappa: f64) -> Result<()> {
    if !(kappa > 0.0 && kappa.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "kappa must be positive, got {kappa}"
        )));
    }
    Ok(())
}

/// Local Hermitian matrix `H[j][k] = a_β(φ_k, φ_j)` on element `e`.
pub fn local_abeta(
    mesh: &TriMesh,
    e: usize,
    potential: &MagneticPotential,
    kappa: f64,
    beta: f64,
    quad: &QuadratureRule,
) -> [[Complex64; 3]; 3] {
    let area = mesh.area(e);
    let g = mesh.hat_gradients(e);
    let ik = 1.0 / kappa;
    let s = local_stiffness(area, &g);
    let m = local_mass(area);
    let mut h = [[Complex64::default(); 3]; 3];
    for j in 0..3 {
        for k in 0..3 {
            h[j][k] = Complex64::new(ik * ik * s[j][k] + beta * m[j][k], 0.0);
        }
    }
    for (lam, &w) in quad.points.iter().zip(&quad.weights) {
        let p = mesh.point(e, lam);
        let a = potential.eval(p[0], p[1]);
        let wq = 2.0 * area * w;
        let a2 = a[0] * a[0] + a[1] * a[1];
        let adg = [0, 1, 2].map(|k| a[0] * g[k][0] + a[1] * g[k][1]);
        for j in 0..3 {
            for k in 0..3 {
                h[j][k] += Complex64::new(
                    wq * a2 * lam[k] * lam[j],
                    wq * ik * (lam[j] * adg[k] - lam[k] * adg[j]),
                );
            }
        }
    }
    h
}

pub fn assemble_abeta(
    mesh: &TriMesh,
    potential: &MagneticPotential,
    kappa: f64,
    beta: f64,
    quad: &QuadratureRule,
) -> Result<FormOperator> {
    check_kappa(kappa)?;
    if !(beta >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "beta must be nonnegative, got {beta}"
        )));
    }
    if quad.degree < 4 {
        return Err(Error::InvalidInput(format!(
            "quadrature rule {} has degree {}, at least 4 is required",
            quad.name, quad.degree
        )));
    }
    let local = par::map_range(mesh.num_triangles(), |e| {
        local_abeta(mesh, e, potential, kappa, beta, quad)
    });
    Ok(FormOperator {
        kind: FormKind::ABeta,
        lin: scatter(mesh, &local),
        conj: None,
        kappa: Some(kappa),
        beta: Some(beta),
    })
}

/// Barycentric coordinates of `p` with respect to element `e`.
pub fn barycentric(mesh: &TriMesh, e: usize, p: [f64; 2]) -> [f64; 3] {
    let g = mesh.hat_gradients(e);
    let t = mesh.triangles[e];
    [0, 1, 2].map(|k| {
        // λ_k vanishes at the other two vertices
        let o = mesh.vertices[t[(k + 1) % 3]];
        g[k][0] * (p[0] - o[0]) + g[k][1] * (p[1] - o[1])
    })
}

/// `B[z, j] = ∫ φ_z^coarse φ_j^fine`, exact via a degree-2 rule on fine elements.
pub fn coarse_fine_mass_matrix(mh: &MeshHierarchy) -> CsrMatrix<f64> {
    let coarse = mh.coarse();
    let fine = mh.fine();
    let quad = QuadratureRule::degree2();
    let local = par::map_range(fine.num_triangles(), |e| {
        let parent = mh.coarse_parent(e);
        let area = fine.area(e);
        let mut m = [[0.0; 3]; 3];
        for (lam, &w) in quad.points.iter().zip(&quad.weights) {
            let p = fine.point(e, lam);
            let mu = barycentric(coarse, parent, p);
            for a in 0..3 {
                for b in 0..3 {
                    m[a][b] += 2.0 * area * w * mu[a] * lam[b];
                }
            }
        }
        m
    });
    let mut trip = Vec::with_capacity(9 * local.len());
    for (e, m) in local.iter().enumerate() {
        let ct = coarse.triangles[mh.coarse_parent(e)];
        let ft = fine.triangles[e];
        for a in 0..3 {
            for b in 0..3 {
                trip.push((ct[a], ft[b], m[a][b]));
            }
        }
    }
    CsrMatrix::from_triplets(coarse.num_vertices(), fine.num_vertices(), &trip)
}

pub fn assemble_coarse_fine_mass(mh: &MeshHierarchy) -> FormOperator {
    FormOperator::real(FormKind::CoarseFineMass, &coarse_fine_mass_matrix(mh))
}

/// Nodal interpolation of coarse P1 functions on the fine mesh (`n_fine × n_coarse`).
pub fn prolongation_matrix(mh: &MeshHierarchy) -> CsrMatrix<f64> {
    let coarse = mh.coarse();
    let fine = mh.fine();
    let mut trip = Vec::with_capacity(3 * fine.num_vertices());
    for (v, p) in fine.vertices.iter().enumerate() {
        let (e, lam) = coarse.locate(p[0], p[1]);
        for k in 0..3 {
            if lam[k].abs() > 1e-14 {
                trip.push((v, coarse.triangles[e][k], lam[k]));
            }
        }
    }
    CsrMatrix::from_triplets(fine.num_vertices(), coarse.num_vertices(), &trip)
}

pub fn fine_space(mh: &MeshHierarchy) -> SpaceId {
    SpaceId::new(SpaceKind::FineFem, mh.fine_k, mh.fine().num_vertices())
}

pub fn coarse_space(mh: &MeshHierarchy) -> SpaceId {
    SpaceId::new(
        SpaceKind::CoarseFem,
        mh.coarse_k,
        mh.coarse().num_vertices(),
    )
}

pub fn prolongate(mh: &MeshHierarchy, v: &ComplexField) -> Result<ComplexField> {
    v.ensure_space(coarse_space(mh))?;
    let p = prolongation_matrix(mh);
    ComplexField::new(fine_space(mh), p.mul_vec(&v.re), p.mul_vec(&v.im))
}

/// Coarse `L²` projection with cached operators.
#[derive(Debug)]
pub struct CoarseProjector {
    coarse: SpaceId,
    fine: SpaceId,
    b: CsrMatrix<f64>,
    mass: SpdFactor,
}

impl CoarseProjector {
    pub fn new(mh: &MeshHierarchy) -> Result<Self> {
        Ok(Self {
            coarse: coarse_space(mh),
            fine: fine_space(mh),
            b: coarse_fine_mass_matrix(mh),
            mass: SpdFactor::new(&mass_matrix(mh.coarse()).to_complex())?,
        })
    }

    pub fn project(&self, v: &ComplexField) -> Result<ComplexField> {
        v.ensure_space(self.fine)?;
        let rhs = self.b.mul_complex(&v.to_complex());
        ComplexField::from_complex(self.coarse, &self.mass.solve(&rhs))
    }
}

/// `π_h v`: solves `M_c x = B v` per real/imaginary block.
pub fn l2_project_coarse(mh: &MeshHierarchy, v: &ComplexField) -> Result<ComplexField> {
    v.ensure_space(fine_space(mh))?;
    let b = coarse_fine_mass_matrix(mh);
    let mc = assemble_mass(mh.coarse());
    let x = linsolve::solve_spd(&mc, &b.mul_complex(&v.to_complex()), 1e-13)?;
    ComplexField::from_complex(coarse_space(mh), &x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_hierarchy;

    #[test]
    fn local_mass_is_closed_form() {
        let m = TriMesh::structured(0);
        let mm = mass_matrix(&m);
        // vertex 1 belongs to the lower triangle only
        assert!((mm.get(1, 1) - 0.5 / 6.0).abs() < 1e-16);
        assert!((mm.get(1, 0) - 0.5 / 12.0).abs() < 1e-16);
        assert!((mm.values().iter().sum::<f64>() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn barycentric_reproduces_vertices() {
        let m = TriMesh::structured(2);
        for e in 0..m.num_triangles() {
            for (k, &v) in m.triangles[e].iter().enumerate() {
                let lam = barycentric(&m, e, m.vertices[v]);
                for (q, l) in lam.iter().enumerate() {
                    let want = if q == k { 1.0 } else { 0.0 };
                    assert!((l - want).abs() < 1e-13);
                }
            }
        }
    }

    #[test]
    fn coarse_fine_mass_equals_prolongated_mass() {
        let mh = build_hierarchy(1, 3).unwrap();
        let b = coarse_fine_mass_matrix(&mh);
        let p = prolongation_matrix(&mh);
        let mf = mass_matrix(mh.fine());
        let ptm = p.transpose().matmul(&mf);
        let (bd, od) = (b.to_dense(), ptm.to_dense());
        for (r1, r2) in bd.iter().zip(&od) {
            for (x, y) in r1.iter().zip(r2) {
                assert!((x - y).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn real_block_of_hermitian_form_is_symmetric() {
        let m = TriMesh::structured(2);
        let op = assemble_abeta(
            &m,
            &MagneticPotential::sinusoidal(),
            4.0,
            0.0,
            &QuadratureRule::degree4(),
        )
        .unwrap();
        let rb = op.to_real_block();
        let t = rb.transpose();
        for (r, c, v) in rb.triplets() {
            assert!((v - t.get(r, c)).abs() < 1e-14);
        }
    }

    #[test]
    fn low_degree_rule_is_rejected() {
        let m = TriMesh::structured(1);
        let r = assemble_abeta(
            &m,
            &MagneticPotential::zero(),
            1.0,
            0.0,
            &QuadratureRule::degree2(),
        );
        assert!(r.is_err());
        assert!(assemble_h1k_gram(&m, 0.0).is_err());
    }
}
