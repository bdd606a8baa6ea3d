//! Localized orthogonal decomposition spaces.
//!
//! For a coarse element `T` the truncated corrector `C_{T,ℓ} v` is the
//! function `w` supported in `N^ℓ(T)` with coarse `L²` projection zero and
//! `a_β(w, φ) = a_{β,T}(v, φ)` for all such `φ`. The corrected basis is
//! `ψ_z = φ_z − Σ_{T ∋ z} C_{T,ℓ} φ_z`.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::assembly::{
    self, barycentric, coarse_fine_mass_matrix, local_abeta, prolongation_matrix, FormOperator,
};
use crate::error::{Error, Result};
use crate::field::{ComplexField, SpaceId, SpaceKind};
use crate::linsolve::SaddleFactor;
use crate::mesh::{MeshHierarchy, Patch};
use crate::par;
use crate::potential::MagneticPotential;
use crate::quadrature::QuadratureRule;
use crate::sparse::CsrMatrix;

/// Everything the corrector problems share for one `(mesh, A, κ, β)`.
pub struct LodProblem {
    pub mh: Arc<MeshHierarchy>,
    pub potential: MagneticPotential,
    pub kappa: f64,
    pub beta: f64,
    pub quad: QuadratureRule,
    /// `a_β` on the fine mesh.
    pub a_fine: FormOperator,
    /// Coarse–fine mass `B`.
    pub b: CsrMatrix<f64>,
    /// Coarse-to-fine prolongation `P`.
    pub p: CsrMatrix<f64>,
    local: Vec<[[Complex64; 3]; 3]>,
    full_domain: OnceLock<std::result::Result<Arc<SaddleFactor>, String>>,
}

impl std::fmt::Debug for LodProblem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("LodProblem")
            .field("coarse_k", &self.mh.coarse_k)
            .field("fine_k", &self.mh.fine_k)
            .field("kappa", &self.kappa)
            .field("beta", &self.beta)
            .finish()
    }
}

/// A fine-mesh function stored by its nonzero vertex values, ascending.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SparseField {
    pub indices: Vec<usize>,
    pub values: Vec<Complex64>,
}

impl SparseField {
    pub fn to_dense(&self, n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); n];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }
}

impl LodProblem {
    pub fn new(
        mh: Arc<MeshHierarchy>,
        potential: MagneticPotential,
        kappa: f64,
        beta: f64,
    ) -> Result<Self> {
        let quad = QuadratureRule::degree4();
        let fine = mh.fine();
        let a_fine = assembly::assemble_abeta(fine, &potential, kappa, beta, &quad)?;
        let local = par::map_range(fine.num_triangles(), |e| {
            local_abeta(fine, e, &potential, kappa, beta, &quad)
        });
        Ok(Self {
            b: coarse_fine_mass_matrix(&mh),
            p: prolongation_matrix(&mh),
            mh,
            potential,
            kappa,
            beta,
            quad,
            a_fine,
            local,
            full_domain: OnceLock::new(),
        })
    }

    /// Load vector `a_{β,T}(v, φ_j)` over all fine vertices `j`, where `v` is
    /// the coarse P1 function on `T` with vertex values `input`.
    pub fn element_load(&self, t: usize, input: &[Complex64; 3]) -> SparseField {
        let coarse = self.mh.coarse();
        let fine = self.mh.fine();
        let mut acc: Vec<(usize, Complex64)> = Vec::new();
        for &e in self.mh.coarse_children(t) {
            let verts = fine.triangles[e];
            let vals = verts.map(|v| {
                let mu = barycentric(coarse, t, fine.vertices[v]);
                input[0] * mu[0] + input[1] * mu[1] + input[2] * mu[2]
            });
            let h = &self.local[e];
            for j in 0..3 {
                let f = h[j][0] * vals[0] + h[j][1] * vals[1] + h[j][2] * vals[2];
                acc.push((verts[j], f));
            }
        }
        acc.sort_by_key(|&(i, _)| i);
        let mut out = SparseField::default();
        for (i, v) in acc {
            if out.indices.last() == Some(&i) {
                *out.values.last_mut().unwrap() += v;
            } else {
                out.indices.push(i);
                out.values.push(v);
            }
        }
        out
    }

    fn patch_factor(&self, patch: &Patch) -> Result<Arc<SaddleFactor>> {
        let full = patch.coarse_elements.len() == self.mh.coarse().num_triangles();
        let build = || -> Result<SaddleFactor> {
            let free = &patch.fine_interior_vertices;
            let a = self.a_fine.lin.submatrix(free, free);
            let c = self
                .b
                .submatrix(&patch.coarse_vertices_active, free)
                .to_complex();
            let label = if full {
                "full-domain patch".to_string()
            } else {
                format!(
                    "patch of coarse element {} (ell = {})",
                    patch.center_element, patch.ell
                )
            };
            SaddleFactor::new(&a, &c, &label)
        };
        if full {
            self.full_domain
                .get_or_init(|| build().map(Arc::new).map_err(|e| e.to_string()))
                .clone()
                .map_err(Error::Factorization)
        } else {
            build().map(Arc::new)
        }
    }

    /// Correctors `C_{T,ℓ} v` for coarse P1 inputs on `T`, one per entry of
    /// `inputs`, on the given patch of `T`.
    pub fn correctors_on_patch(
        &self,
        patch: &Patch,
        inputs: &[[Complex64; 3]],
    ) -> Result<Vec<SparseField>> {
        let free = &patch.fine_interior_vertices;
        let nf = self.mh.fine().num_vertices();
        let mut local_index = vec![usize::MAX; nf];
        for (k, &v) in free.iter().enumerate() {
            local_index[v] = k;
        }
        let loads: Vec<Vec<Complex64>> = inputs
            .iter()
            .map(|inp| {
                let load = self.element_load(patch.center_element, inp);
                let mut f = vec![Complex64::default(); free.len()];
                for (&i, &v) in load.indices.iter().zip(&load.values) {
                    if local_index[i] != usize::MAX {
                        f[local_index[i]] = v;
                    }
                }
                f
            })
            .collect();
        let factor = self.patch_factor(patch)?;
        let sols = factor.solve(&loads)?;
        Ok(sols
            .into_iter()
            .map(|w| SparseField {
                indices: free.clone(),
                values: w,
            })
            .collect())
    }

    /// `C_{T,ℓ} v` for each input.
    pub fn element_corrector_for(
        &self,
        t: usize,
        ell: usize,
        inputs: &[[Complex64; 3]],
    ) -> Result<Vec<SparseField>> {
        self.correctors_on_patch(&self.mh.patch(t, ell), inputs)
    }

    /// `C_{T,ℓ} φ_a` for the three coarse hats of `T`, in local vertex order.
    pub fn element_corrector(&self, t: usize, ell: usize) -> Result<Vec<SparseField>> {
        self.element_corrector_for(t, ell, &unit_inputs())
    }

    /// Ideal corrector `C v` of a coarse function: the `W` component with
    /// `a_β(C v, w) = a_β(v, w)` for all `w ∈ W`, from one global saddle solve.
    pub fn ideal_corrector(&self, v: &ComplexField) -> Result<ComplexField> {
        v.ensure_space(assembly::coarse_space(&self.mh))?;
        let fine_v = self.p.mul_complex(&v.to_complex());
        let f = self.a_fine.apply(&fine_v);
        let c = self.b.to_complex();
        let factor = SaddleFactor::new(&self.a_fine.lin, &c, "global corrector")?;
        let w = factor.solve(&[f])?.pop().unwrap();
        ComplexField::from_complex(assembly::fine_space(&self.mh), &w)
    }

    /// `a_β` energy `Re(wᴴ H_t w)` of a fine function restricted to fine element `e`.
    pub fn element_energy(&self, e: usize, w: &[Complex64]) -> f64 {
        let verts = self.mh.fine().triangles[e];
        let h = &self.local[e];
        let mut s = Complex64::default();
        for j in 0..3 {
            for k in 0..3 {
                s += w[verts[j]].conj() * h[j][k] * w[verts[k]];
            }
        }
        s.re
    }
}

fn unit_inputs() -> [[Complex64; 3]; 3] {
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::default();
    [[one, zero, zero], [zero, one, zero], [zero, zero, one]]
}

/// The corrected basis `ψ_z` of a localized LOD space, indexed by coarse vertex.
#[derive(Clone, Debug)]
pub struct LodSpace {
    pub mh: Arc<MeshHierarchy>,
    pub kappa: f64,
    pub beta: f64,
    pub ell: usize,
    /// `Ψ` with `Ψ[j, z] = ψ_z(x_j)`, fine vertices by coarse vertices.
    pub psi: CsrMatrix<Complex64>,
    /// `Ψᵀ` (not conjugated).
    pub psi_t: CsrMatrix<Complex64>,
    /// `(Σ_a ‖C_{T,ℓ} φ_a‖²_{a_β})^{1/2}` per coarse element.
    pub corrector_norms: Vec<f64>,
}

/// Builds `V_{h,ℓ}^LOD`. Coarse cell rows are processed in a sliding window
/// so only two rows of element correctors are alive at a time.
pub fn build_lod_space(problem: &LodProblem, ell: usize) -> Result<LodSpace> {
    if ell == 0 {
        return Err(Error::InvalidInput("ell must be at least 1".into()));
    }
    let mh = &problem.mh;
    let coarse = mh.coarse();
    let n = coarse.n;
    let nf = mh.fine().num_vertices();
    let nc = coarse.num_vertices();

    let mut columns: Vec<SparseField> = Vec::with_capacity(nc);
    let mut norms = vec![0.0; coarse.num_triangles()];
    let mut prev: Vec<(usize, Vec<SparseField>)> = Vec::new();
    let mut scratch = vec![Complex64::default(); nf];
    let mut touched = vec![false; nf];
    let p_t = problem.p.transpose();
    for jv in 0..=n {
        let cur: Vec<(usize, Vec<SparseField>)> = if jv < n {
            let elems: Vec<usize> = (2 * jv * n..2 * (jv + 1) * n).collect();
            par::map_slice(&elems, |&t| {
                problem.element_corrector(t, ell).map(|c| (t, c))
            })
            .into_iter()
            .collect::<Result<_>>()?
        } else {
            Vec::new()
        };
        for (t, corr) in &cur {
            let elems = support_elements(problem, &corr[0]);
            let mut e2 = 0.0;
            for c in corr {
                let w = c.to_dense(nf);
                e2 += elems
                    .iter()
                    .map(|&e| problem.element_energy(e, &w))
                    .sum::<f64>();
            }
            norms[*t] = e2.max(0.0).sqrt();
        }
        for i in 0..=n {
            let z = jv * (n + 1) + i;
            let mut idx: Vec<usize> = Vec::new();
            let (pc, pv) = p_t.row(z);
            for (&j, &v) in pc.iter().zip(pv) {
                if !touched[j] {
                    touched[j] = true;
                    idx.push(j);
                }
                scratch[j] += Complex64::new(v, 0.0);
            }
            for (t, corr) in prev.iter().chain(cur.iter()) {
                let Some(a) = coarse.triangles[*t].iter().position(|&v| v == z) else {
                    continue;
                };
                let c = &corr[a];
                for (&j, &v) in c.indices.iter().zip(&c.values) {
                    if !touched[j] {
                        touched[j] = true;
                        idx.push(j);
                    }
                    scratch[j] -= v;
                }
            }
            idx.sort_unstable();
            let mut col = SparseField::default();
            for &j in &idx {
                col.indices.push(j);
                col.values.push(scratch[j]);
                scratch[j] = Complex64::default();
                touched[j] = false;
            }
            columns.push(col);
        }
        prev = cur;
    }

    let mut indptr = Vec::with_capacity(nc + 1);
    indptr.push(0);
    let total: usize = columns.iter().map(|c| c.indices.len()).sum();
    let mut indices = Vec::with_capacity(total);
    let mut values = Vec::with_capacity(total);
    for c in columns {
        indices.extend(c.indices);
        values.extend(c.values);
        indptr.push(indices.len());
    }
    let psi_t = CsrMatrix::from_raw(nc, nf, indptr, indices, values);
    let psi = psi_t.transpose();
    Ok(LodSpace {
        mh: Arc::clone(mh),
        kappa: problem.kappa,
        beta: problem.beta,
        ell,
        psi,
        psi_t,
        corrector_norms: norms,
    })
}

/// Fine elements whose three vertices include one in the support.
fn support_elements(problem: &LodProblem, field: &SparseField) -> Vec<usize> {
    let fine = problem.mh.fine();
    let mut out: Vec<usize> = field
        .indices
        .iter()
        .flat_map(|&v| fine.vertex_elements(v).iter().copied())
        .collect();
    out.sort_unstable();
    out.dedup();
    out
}

impl LodSpace {
    /// Reassembles a space from `Ψᵀ` (coarse vertices by fine vertices).
    pub fn from_parts(
        mh: Arc<MeshHierarchy>,
        kappa: f64,
        beta: f64,
        ell: usize,
        psi_t: CsrMatrix<Complex64>,
        corrector_norms: Vec<f64>,
    ) -> Result<Self> {
        let nc = mh.coarse().num_vertices();
        let nf = mh.fine().num_vertices();
        if psi_t.nrows() != nc || psi_t.ncols() != nf {
            return Err(Error::DimensionMismatch {
                expected: nc,
                found: psi_t.nrows(),
            });
        }
        if corrector_norms.len() != mh.coarse().num_triangles() {
            return Err(Error::DimensionMismatch {
                expected: mh.coarse().num_triangles(),
                found: corrector_norms.len(),
            });
        }
        Ok(Self {
            psi: psi_t.transpose(),
            mh,
            kappa,
            beta,
            ell,
            psi_t,
            corrector_norms,
        })
    }

    pub fn space_id(&self) -> SpaceId {
        SpaceId::new(SpaceKind::Lod, self.mh.coarse_k, self.dim())
    }

    pub fn dim(&self) -> usize {
        self.psi.ncols()
    }

    pub fn fine_dim(&self) -> usize {
        self.psi.nrows()
    }

    /// Fine coefficients `Ψ c`.
    pub fn expand(&self, c: &[Complex64]) -> Vec<Complex64> {
        self.psi.mul_vec(c)
    }

    pub fn expand_field(&self, v: &ComplexField) -> Result<ComplexField> {
        v.ensure_space(self.space_id())?;
        ComplexField::from_complex(
            assembly::fine_space(&self.mh),
            &self.expand(&v.to_complex()),
        )
    }

    /// `Ψᴴ y`: restricts a fine load vector to the LOD basis.
    pub fn restrict(&self, y: &[Complex64]) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); self.dim()];
        par::fill(&mut out, |z| {
            let (cols, vals) = self.psi_t.row(z);
            cols.iter().zip(vals).map(|(&j, v)| v.conj() * y[j]).sum()
        });
        out
    }

    /// The basis function `ψ_z` as a fine field.
    pub fn basis(&self, z: usize) -> ComplexField {
        let (cols, vals) = self.psi_t.row(z);
        let f = SparseField {
            indices: cols.to_vec(),
            values: vals.to_vec(),
        };
        ComplexField::from_complex(assembly::fine_space(&self.mh), &f.to_dense(self.fine_dim()))
            .expect("dimension matches the fine space")
    }
}

/// Galerkin restriction `Ψᴴ L Ψ` (and `Ψᴴ N conj Ψ`) of a fine operator.
pub fn coarse_operator(space: &LodSpace, fine_op: &FormOperator) -> Result<FormOperator> {
    if fine_op.nrows() != space.fine_dim() || fine_op.ncols() != space.fine_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.fine_dim(),
            found: fine_op.nrows(),
        });
    }
    let psi_h = space.psi_t.map(|v| v.conj());
    let lin = psi_h.matmul(&fine_op.lin.matmul(&space.psi));
    let conj = fine_op.conj.as_ref().map(|n| {
        let psi_bar = space.psi.map(|v| v.conj());
        psi_h.matmul(&n.matmul(&psi_bar))
    });
    Ok(FormOperator {
        kind: fine_op.kind,
        lin,
        conj,
        kappa: fine_op.kappa,
        beta: fine_op.beta,
    })
}

/// Tail energies `‖C_{T,ℓ_max} v‖_{a_β, Ω∖N^ℓ(T)}` for `ℓ = 0..ℓ_max−1`, where
/// `v` is the coarse P1 function on `T` with vertex values `input`.
pub fn corrector_decay_profile(
    problem: &LodProblem,
    t: usize,
    ell_max: usize,
    input: [Complex64; 3],
) -> Result<Vec<(usize, f64)>> {
    if ell_max == 0 {
        return Err(Error::InvalidInput("ell_max must be at least 1".into()));
    }
    let corr = problem
        .element_corrector_for(t, ell_max, &[input])?
        .pop()
        .unwrap();
    let nf = problem.mh.fine().num_vertices();
    let w = corr.to_dense(nf);
    let dist = problem.mh.coarse().layer_distances(t);
    let fine_elems = support_elements(problem, &corr);
    let energies: Vec<(usize, f64)> = fine_elems
        .iter()
        .map(|&e| {
            (
                dist[problem.mh.coarse_parent(e)],
                problem.element_energy(e, &w).max(0.0),
            )
        })
        .collect();
    Ok((0..ell_max)
        .map(|ell| {
            let tail: f64 = energies
                .iter()
                .filter(|(d, _)| *d > ell)
                .map(|(_, en)| en)
                .sum();
            (ell, tail.sqrt())
        })
        .collect())
}
