//! The Ginzburg–Landau energy
//! `E(v) = ½ a_0(v, v) + ¼ ∫ (|v|² − 1)²`
//! with its first and second derivatives, for fields in a fine, coarse or
//! LOD space. All integrals are evaluated on the fine mesh.

use std::sync::{Arc, OnceLock};

use num_complex::Complex64;

use crate::assembly::{
    self, assemble_abeta, assemble_h1k_gram, assemble_mass, fine_space, prolongation_matrix,
    FormKind, FormOperator,
};
use crate::error::{Error, Result};
use crate::field::{ComplexField, SpaceId};
use crate::linsolve::SpdFactor;
use crate::lodspace::{coarse_operator, LodSpace};
use crate::mesh::MeshHierarchy;
use crate::par;
use crate::potential::MagneticPotential;
use crate::quadrature::QuadratureRule;
use crate::sparse::CsrMatrix;

/// How coefficients of the active space map to fine coefficients.
#[derive(Clone, Debug)]
pub enum SpaceMap {
    Fine,
    Prolongation {
        p: CsrMatrix<f64>,
        pt: CsrMatrix<f64>,
    },
    Lod(Arc<LodSpace>),
}

pub struct EnergyContext {
    pub mh: Arc<MeshHierarchy>,
    pub potential: MagneticPotential,
    pub kappa: f64,
    /// `a_0` on the fine mesh.
    pub a0: FormOperator,
    pub fine_mass: FormOperator,
    pub fine_gram: FormOperator,
    pub map: SpaceMap,
    space: SpaceId,
    quad: QuadratureRule,
    weights: Arc<Vec<f64>>,
    active_gram: FormOperator,
    gram_factor: SpdFactor,
    mass_factor: OnceLock<std::result::Result<SpdFactor, String>>,
}

impl std::fmt::Debug for EnergyContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("EnergyContext")
            .field("space", &self.space)
            .field("kappa", &self.kappa)
            .finish()
    }
}

impl EnergyContext {
    pub fn fine(mh: Arc<MeshHierarchy>, potential: MagneticPotential, kappa: f64) -> Result<Self> {
        let space = fine_space(&mh);
        Self::build(mh, potential, kappa, SpaceMap::Fine, space)
    }

    pub fn coarse(
        mh: Arc<MeshHierarchy>,
        potential: MagneticPotential,
        kappa: f64,
    ) -> Result<Self> {
        let space = assembly::coarse_space(&mh);
        let p = prolongation_matrix(&mh);
        let pt = p.transpose();
        Self::build(
            mh,
            potential,
            kappa,
            SpaceMap::Prolongation { p, pt },
            space,
        )
    }

    pub fn lod(space: Arc<LodSpace>, potential: MagneticPotential) -> Result<Self> {
        let id = space.space_id();
        let mh = Arc::clone(&space.mh);
        let kappa = space.kappa;
        Self::build(mh, potential, kappa, SpaceMap::Lod(space), id)
    }

    fn build(
        mh: Arc<MeshHierarchy>,
        potential: MagneticPotential,
        kappa: f64,
        map: SpaceMap,
        space: SpaceId,
    ) -> Result<Self> {
        let quad = QuadratureRule::degree4();
        let fine = mh.fine();
        let a0 = assemble_abeta(fine, &potential, kappa, 0.0, &quad)?;
        let fine_mass = assemble_mass(fine);
        let fine_gram = assemble_h1k_gram(fine, kappa)?;
        let ne = fine.num_triangles();
        let nq = quad.len();
        let mut weights = vec![0.0; ne * nq];
        for e in 0..ne {
            let area = fine.area(e);
            for q in 0..nq {
                weights[e * nq + q] = 2.0 * area * quad.weights[q];
            }
        }
        let active_gram = match &map {
            SpaceMap::Fine => fine_gram.clone(),
            SpaceMap::Prolongation { .. } => assemble_h1k_gram(mh.coarse(), kappa)?,
            SpaceMap::Lod(s) => coarse_operator(s, &fine_gram)?,
        };
        let gram_factor = active_gram.factor()?;
        Ok(Self {
            mh,
            potential,
            kappa,
            a0,
            fine_mass,
            fine_gram,
            map,
            space,
            quad,
            weights: Arc::new(weights),
            active_gram,
            gram_factor,
            mass_factor: OnceLock::new(),
        })
    }

    pub fn space(&self) -> SpaceId {
        self.space
    }

    pub fn fine_space(&self) -> SpaceId {
        fine_space(&self.mh)
    }

    /// `H¹_κ` Gram matrix of the active space.
    pub fn gram(&self) -> &FormOperator {
        &self.active_gram
    }

    pub fn gram_factor(&self) -> &SpdFactor {
        &self.gram_factor
    }

    /// Fine coefficients of an active-space field.
    pub fn to_fine(&self, v: &ComplexField) -> Result<Vec<Complex64>> {
        v.ensure_space(self.space)?;
        let c = v.to_complex();
        Ok(self.expand(&c))
    }

    pub fn to_fine_field(&self, v: &ComplexField) -> Result<ComplexField> {
        ComplexField::from_complex(self.fine_space(), &self.to_fine(v)?)
    }

    fn expand(&self, c: &[Complex64]) -> Vec<Complex64> {
        match &self.map {
            SpaceMap::Fine => c.to_vec(),
            SpaceMap::Prolongation { p, .. } => p.mul_complex(c),
            SpaceMap::Lod(s) => s.expand(c),
        }
    }

    /// Adjoint of [`Self::expand`] applied to a fine load vector.
    fn restrict(&self, y: &[Complex64]) -> Vec<Complex64> {
        match &self.map {
            SpaceMap::Fine => y.to_vec(),
            SpaceMap::Prolongation { pt, .. } => pt.mul_complex(y),
            SpaceMap::Lod(s) => s.restrict(y),
        }
    }

    /// Restricts a fine operator to the active space.
    fn restrict_operator(&self, op: FormOperator) -> Result<FormOperator> {
        match &self.map {
            SpaceMap::Fine => Ok(op),
            SpaceMap::Prolongation { p, .. } => {
                let pc = p.to_complex();
                let pt = pc.transpose();
                Ok(FormOperator {
                    lin: pt.matmul(&op.lin.matmul(&pc)),
                    conj: op.conj.as_ref().map(|n| pt.matmul(&n.matmul(&pc))),
                    ..op
                })
            }
            SpaceMap::Lod(s) => coarse_operator(s, &op),
        }
    }

    /// Values of the fine P1 function at all quadrature points, element-major.
    fn point_values(&self, v: &[Complex64]) -> Vec<Complex64> {
        let fine = self.mh.fine();
        let nq = self.quad.len();
        let mut out = vec![Complex64::default(); fine.num_triangles() * nq];
        par::fill(&mut out, |k| {
            let (e, q) = (k / nq, k % nq);
            let t = fine.triangles[e];
            let l = &self.quad.points[q];
            v[t[0]] * l[0] + v[t[1]] * l[1] + v[t[2]] * l[2]
        });
        out
    }

    /// `¼ ∫ (|V|² − 1)²` for fine coefficients `V`.
    pub fn quartic_fine(&self, v: &[Complex64]) -> f64 {
        let pv = self.point_values(v);
        0.25 * par::sum_range(pv.len(), |k| {
            let s = pv[k].norm_sqr() - 1.0;
            self.weights[k] * s * s
        })
    }

    pub fn energy_fine(&self, v: &[Complex64]) -> f64 {
        0.5 * self.a0.form(v, v) + self.quartic_fine(v)
    }

    pub fn energy(&self, v: &ComplexField) -> Result<f64> {
        Ok(self.energy_fine(&self.to_fine(v)?))
    }

    /// Fine load `⟨E′(V), φ_j⟩` for all fine hats.
    pub fn gradient_fine(&self, v: &[Complex64]) -> Vec<Complex64> {
        let fine = self.mh.fine();
        let nq = self.quad.len();
        let pv = self.point_values(v);
        let local = par::map_range(fine.num_triangles(), |e| {
            let mut out = [Complex64::default(); 3];
            for q in 0..nq {
                let k = e * nq + q;
                let r = pv[k] * (self.weights[k] * (pv[k].norm_sqr() - 1.0));
                let l = &self.quad.points[q];
                for j in 0..3 {
                    out[j] += r * l[j];
                }
            }
            out
        });
        let mut y = self.a0.apply(v);
        for (e, l) in local.iter().enumerate() {
            let t = fine.triangles[e];
            for j in 0..3 {
                y[t[j]] += l[j];
            }
        }
        y
    }

    /// Coefficients of the functional `⟨E′(v), ·⟩` on the active space.
    pub fn gradient(&self, v: &ComplexField) -> Result<ComplexField> {
        let g = self.restrict(&self.gradient_fine(&self.to_fine(v)?));
        ComplexField::from_complex(self.space, &g)
    }

    /// `⟨E′(v), w⟩ = Re(wᴴ g)` for a gradient vector `g`.
    pub fn pair(g: &ComplexField, w: &ComplexField) -> f64 {
        g.dot(w)
    }

    /// Hessian `E″(V)` on the fine space: `a_0 + M_{2|V|²−1}` plus the
    /// conjugate-linear part `M_{V²}`.
    pub fn hessian_fine(&self, v: &[Complex64]) -> FormOperator {
        let fine = self.mh.fine();
        let nq = self.quad.len();
        let pv = self.point_values(v);
        let local: Vec<(LocalReal, LocalComplex)> = par::map_range(fine.num_triangles(), |e| {
            let mut lm = [[0.0; 3]; 3];
            let mut nm = [[Complex64::default(); 3]; 3];
            for q in 0..nq {
                let k = e * nq + q;
                let w = self.weights[k];
                let a = w * (2.0 * pv[k].norm_sqr() - 1.0);
                let b = pv[k] * pv[k] * w;
                let l = &self.quad.points[q];
                for j in 0..3 {
                    for m in 0..3 {
                        lm[j][m] += a * l[j] * l[m];
                        nm[j][m] += b * (l[j] * l[m]);
                    }
                }
            }
            (lm, nm)
        });
        let n = fine.num_vertices();
        let mut lt = Vec::with_capacity(9 * local.len());
        let mut nt = Vec::with_capacity(9 * local.len());
        for (e, (lm, nm)) in local.iter().enumerate() {
            let t = fine.triangles[e];
            for j in 0..3 {
                for m in 0..3 {
                    lt.push((t[j], t[m], Complex64::new(lm[j][m], 0.0)));
                    nt.push((t[j], t[m], nm[j][m]));
                }
            }
        }
        let reaction = CsrMatrix::from_triplets(n, n, &lt);
        FormOperator {
            kind: FormKind::Hessian,
            lin: self.a0.lin.add(&reaction),
            conj: Some(CsrMatrix::from_triplets(n, n, &nt)),
            kappa: Some(self.kappa),
            beta: None,
        }
    }

    /// `E″(v)` as an operator on the active space.
    pub fn hessian_operator(&self, v: &ComplexField) -> Result<FormOperator> {
        let h = self.hessian_fine(&self.to_fine(v)?);
        self.restrict_operator(h)
    }

    /// Mass matrix of the active space.
    pub fn active_mass(&self) -> Result<FormOperator> {
        self.restrict_operator(self.fine_mass.clone())
    }

    fn mass_factor(&self) -> Result<&SpdFactor> {
        self.mass_factor
            .get_or_init(|| {
                self.active_mass()
                    .and_then(|m| m.factor())
                    .map_err(|e| e.to_string())
            })
            .as_ref()
            .map_err(|e| Error::Factorization(e.clone()))
    }

    /// `L²`-dual norm `(gᴴ M⁻¹ g)^{1/2}` of an active-space functional.
    pub fn mass_dual_norm(&self, g: &ComplexField) -> Result<f64> {
        g.ensure_space(self.space)?;
        let c = g.to_complex();
        let x = self.mass_factor()?.solve(&c);
        Ok(dual(&c, &x))
    }

    /// `H¹_κ`-dual norm `(gᴴ G⁻¹ g)^{1/2}` of an active-space functional.
    pub fn h1k_dual_norm(&self, g: &ComplexField) -> Result<f64> {
        g.ensure_space(self.space)?;
        let c = g.to_complex();
        let x = self.gram_factor.solve(&c);
        Ok(dual(&c, &x))
    }

    pub fn h1k_norm(&self, v: &ComplexField) -> Result<f64> {
        v.ensure_space(self.space)?;
        Ok(self.active_gram.form_fields(v, v).max(0.0).sqrt())
    }

    /// Dual norm of `E′(v)` in the active space's `L²` inner product; zero
    /// exactly at discrete critical points.
    pub fn gle_residual(&self, v: &ComplexField) -> Result<f64> {
        self.mass_dual_norm(&self.gradient(v)?)
    }

    /// Precomputes what is needed to evaluate `E(v − τ d) − E(v)` for many
    /// `τ` without cancellation against `E(v)`.
    pub fn line(&self, v: &ComplexField, d: &ComplexField) -> Result<EnergyLine> {
        let vf = self.to_fine(v)?;
        let df = self.to_fine(d)?;
        let avd = self.a0.form(&vf, &df);
        let add = self.a0.form(&df, &df);
        let pv = self.point_values(&vf);
        let pd = self.point_values(&df);
        let n = pv.len();
        let mut cross = vec![0.0; n];
        let mut dd = vec![0.0; n];
        let mut base = vec![0.0; n];
        for k in 0..n {
            cross[k] = (pv[k] * pd[k].conj()).re;
            dd[k] = pd[k].norm_sqr();
            base[k] = pv[k].norm_sqr();
        }
        Ok(EnergyLine {
            avd,
            add,
            cross,
            dd,
            base,
            weights: Arc::clone(&self.weights),
        })
    }
}

fn dual(c: &[Complex64], x: &[Complex64]) -> f64 {
    c.iter()
        .zip(x)
        .map(|(a, b)| (a.conj() * b).re)
        .sum::<f64>()
        .max(0.0)
        .sqrt()
}

type LocalReal = [[f64; 3]; 3];
type LocalComplex = [[Complex64; 3]; 3];

/// `τ ↦ E(v − τ d) − E(v)` evaluated from differences only.
#[derive(Clone, Debug)]
pub struct EnergyLine {
    avd: f64,
    add: f64,
    cross: Vec<f64>,
    dd: Vec<f64>,
    base: Vec<f64>,
    weights: Arc<Vec<f64>>,
}

impl EnergyLine {
    pub fn delta(&self, tau: f64) -> f64 {
        let quad = -tau * self.avd + 0.5 * tau * tau * self.add;
        let quartic = 0.25
            * par::sum_range(self.base.len(), |k| {
                let ds = -2.0 * tau * self.cross[k] + tau * tau * self.dd[k];
                self.weights[k] * ds * (ds + 2.0 * self.base[k] - 2.0)
            });
        quad + quartic
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_hierarchy;

    fn ctx(kappa: f64) -> EnergyContext {
        let mh = Arc::new(build_hierarchy(1, 3).unwrap());
        EnergyContext::fine(mh, MagneticPotential::sinusoidal(), kappa).unwrap()
    }

    #[test]
    fn zero_field_has_quarter_energy() {
        let c = ctx(8.0);
        let z = ComplexField::zeros(c.space());
        assert!((c.energy(&z).unwrap() - 0.25).abs() < 1e-14);
        assert!(c.gradient(&z).unwrap().re.iter().all(|&x| x == 0.0));
    }

    #[test]
    fn line_delta_matches_direct_difference() {
        let c = ctx(4.0);
        let n = c.space().dim;
        let v = ComplexField::from_complex(
            c.space(),
            &(0..n)
                .map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 0.3).cos() * 0.5))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let d = v.rotate(0.4).scale(Complex64::new(0.3, 0.0));
        let line = c.line(&v, &d).unwrap();
        for &tau in &[0.01, 0.5, 1.0] {
            let direct = c.energy(&v.axpy(-tau, &d).unwrap()).unwrap() - c.energy(&v).unwrap();
            assert!((line.delta(tau) - direct).abs() < 1e-13, "{tau}");
        }
    }
}
