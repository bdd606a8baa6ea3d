//! Error norms, best approximation in LOD spaces and rate fits.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assembly::FormOperator;
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::lodspace::{coarse_operator, LodSpace};
use crate::minimize::SpaceChoice;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorRecord {
    pub space: SpaceChoice,
    pub kappa: f64,
    pub beta: f64,
    pub ell: usize,
    pub coarse_h: f64,
    pub fine_h: f64,
    pub seed: u64,
    pub err_h1k: f64,
    pub err_l2: f64,
    /// `NaN` where no best approximation applies.
    pub err_best: f64,
    pub energy: f64,
    pub energy_ref: f64,
    pub iters: usize,
}

/// Relative size of `Im ∫ u_ref conj(u)` above which inputs count as not
/// phase aligned.
pub const PHASE_TOL: f64 = 1e-8;

/// Whether `∫ reference conj(u)` is real and nonnegative up to [`PHASE_TOL`].
pub fn is_phase_aligned(u: &ComplexField, reference: &ComplexField, mass: &FormOperator) -> bool {
    let uc = u.to_complex();
    let mr = mass.apply(&reference.to_complex());
    let alpha: Complex64 = uc.iter().zip(&mr).map(|(a, b)| a.conj() * b).sum();
    alpha.im.abs() <= PHASE_TOL * alpha.norm() && alpha.re >= 0.0
}

fn norm_of_difference(
    u: &ComplexField,
    reference: &ComplexField,
    op: &FormOperator,
) -> Result<f64> {
    reference.ensure_space(u.space)?;
    if op.nrows() != u.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            found: op.nrows(),
        });
    }
    let d = u.sub(reference)?;
    Ok(op.form_fields(&d, &d).max(0.0).sqrt())
}

/// `‖u − u_ref‖_{H¹_κ}` for fine fields, with `gram` the fine `H¹_κ` Gram.
/// Callers align phases first (see [`is_phase_aligned`]).
pub fn error_h1k(u: &ComplexField, reference: &ComplexField, gram: &FormOperator) -> Result<f64> {
    norm_of_difference(u, reference, gram)
}

/// `‖u − u_ref‖_{L²}`.
pub fn error_l2(u: &ComplexField, reference: &ComplexField, mass: &FormOperator) -> Result<f64> {
    norm_of_difference(u, reference, mass)
}

/// `inf_{v ∈ V_{h,ℓ}^LOD} ‖u_ref − v‖_{H¹_κ}` through the normal equations
/// `(Ψᴴ G Ψ) c = Ψᴴ G u_ref`.
pub fn best_approximation_error(
    space: &LodSpace,
    reference: &ComplexField,
    gram: &FormOperator,
) -> Result<f64> {
    if reference.len() != space.fine_dim() {
        return Err(Error::DimensionMismatch {
            expected: space.fine_dim(),
            found: reference.len(),
        });
    }
    let coarse = coarse_operator(space, gram)?;
    let r = reference.to_complex();
    let rhs = space.restrict(&gram.apply(&r));
    let c = coarse.factor()?.solve(&rhs);
    let v = space.expand(&c);
    let d: Vec<Complex64> = r.iter().zip(&v).map(|(a, b)| a - b).collect();
    Ok(gram.form(&d, &d).max(0.0).sqrt())
}

/// Least-squares slope of `log y` against `log x`.
pub fn fit_loglog(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.iter().any(|&(x, y)| !(x > 0.0 && y > 0.0)) {
        return Err(Error::DegenerateFit("entries must be positive".into()));
    }
    let pts: Vec<(f64, f64)> = pairs.iter().map(|&(x, y)| (x.ln(), y.ln())).collect();
    slope(&pts)
}

fn slope(pts: &[(f64, f64)]) -> Result<f64> {
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if pts.len() < 2 || !(sxx > 1e-14 * (1.0 + mx * mx)) {
        return Err(Error::DegenerateFit(format!(
            "need at least two distinct abscissae, got {}",
            pts.len()
        )));
    }
    Ok(sxy / sxx)
}

/// Convergence rate `p` in `err ≈ C hᵖ`. With `drop_coarsest` the pair with
/// the largest `h` is left out.
pub fn fit_rate(pairs: &[(f64, f64)], drop_coarsest: bool) -> Result<f64> {
    let mut pts = pairs.to_vec();
    if drop_coarsest && !pts.is_empty() {
        let i = pts
            .iter()
            .enumerate()
            .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
            .map(|(i, _)| i)
            .unwrap();
        pts.remove(i);
    }
    fit_loglog(&pts)
}

/// Decay rate `r` in `err ≈ C e^{−r ℓ}`.
pub fn fit_decay(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.iter().any(|&(_, e)| !(e > 0.0)) {
        return Err(Error::DegenerateFit("errors must be positive".into()));
    }
    let pts: Vec<(f64, f64)> = pairs.iter().map(|&(l, e)| (l, e.ln())).collect();
    Ok(-slope(&pts)?)
}
