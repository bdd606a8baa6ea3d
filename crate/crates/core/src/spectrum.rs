//! Smallest eigenvalues of `E″(u)` and the coercivity constant `ρ(κ)⁻¹`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::analysis::fit_loglog;
use crate::assembly::FormOperator;
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::glenergy::EnergyContext;
use crate::linsolve::{eig_smallest, EigenResult};

pub const DEFAULT_EIGS: usize = 6;
pub const EIG_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumReport {
    pub kappa: f64,
    /// Pencil `(E″(u), M)`, ascending.
    pub l2_eigs: Vec<f64>,
    /// Pencil `(E″(u), G)` with `G` the `H¹_κ` Gram, ascending.
    pub h1k_eigs: Vec<f64>,
    /// Index of the gauge mode among `l2_eigs`.
    pub gauge_index: usize,
    /// `λ₂`: smallest `L²` eigenvalue other than the gauge mode.
    pub lambda2: f64,
    /// `μ₂ = ρ(κ)⁻¹`.
    pub rho_inv: f64,
    /// `|(v, iu)_{L²}| / (‖v‖ ‖u‖)` for the gauge eigenvector `v`.
    pub zero_mode_overlap: f64,
    pub l2_converged: bool,
    pub h1k_converged: bool,
    /// `H¹_κ`-dual norm of `E″(u)(iu)`.
    pub gauge_residual: f64,
    pub u_h1k_norm: f64,
}

impl SpectrumReport {
    /// The gauge eigenvalue `λ₁`.
    pub fn lambda1(&self) -> f64 {
        self.l2_eigs[self.gauge_index]
    }

    /// Smallest `L²` eigenvalues with the gauge mode listed first.
    pub fn table_eigs(&self) -> Vec<f64> {
        let mut out = vec![self.lambda1()];
        out.extend(
            self.l2_eigs
                .iter()
                .enumerate()
                .filter(|&(i, _)| i != self.gauge_index)
                .map(|(_, &v)| v),
        );
        out
    }
}

/// `|(v, w)_M| / (‖v‖_M ‖w‖_M)` in the real inner product.
fn overlap(mass: &FormOperator, v: &[Complex64], w: &[Complex64]) -> f64 {
    let vw = mass.form(v, w);
    let vv = mass.form(v, v);
    let ww = mass.form(w, w);
    if vv <= 0.0 || ww <= 0.0 {
        return 0.0;
    }
    vw.abs() / (vv * ww).sqrt()
}

/// The eigenpair with the largest overlap with `iu` is the gauge mode.
fn gauge_mode(res: &EigenResult, mass: &FormOperator, iu: &[Complex64]) -> (usize, f64) {
    res.vectors
        .iter()
        .map(|v| overlap(mass, v, iu))
        .enumerate()
        .fold(
            (0, -1.0),
            |best, (i, o)| if o > best.1 { (i, o) } else { best },
        )
}

fn second(values: &[f64], skip: usize) -> f64 {
    values
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != skip)
        .map(|(_, &v)| v)
        .next()
        .unwrap_or(f64::NAN)
}

/// `(‖E″(u)(iu)‖_{H¹_κ′}, ‖u‖_{H¹_κ})`.
pub fn gauge_residual(ctx: &EnergyContext, u: &ComplexField) -> Result<(f64, f64)> {
    let h = ctx.hessian_operator(u)?;
    let hiu = h.apply_field(&u.times_i())?;
    Ok((ctx.h1k_dual_norm(&hiu)?, ctx.h1k_norm(u)?))
}

/// Solves both pencils at `u` for the `k` smallest eigenvalues.
pub fn spectrum_at(ctx: &EnergyContext, u: &ComplexField, k: usize) -> Result<SpectrumReport> {
    if k < 2 {
        return Err(Error::InvalidInput(
            "at least two eigenvalues are needed".into(),
        ));
    }
    u.ensure_space(ctx.space())?;
    let h = ctx.hessian_operator(u)?;
    let mass = ctx.active_mass()?;
    let iu = u.times_i().to_complex();

    let l2 = eig_smallest(&h, &mass, k, EIG_TOL)?;
    let (gi, ov) = gauge_mode(&l2, &mass, &iu);
    let h1 = eig_smallest(&h, ctx.gram(), k, EIG_TOL)?;
    let (gj, _) = gauge_mode(&h1, &mass, &iu);
    let (gres, unorm) = gauge_residual(ctx, u)?;
    Ok(SpectrumReport {
        kappa: ctx.kappa,
        lambda2: second(&l2.values, gi),
        rho_inv: second(&h1.values, gj),
        gauge_index: gi,
        l2_eigs: l2.values,
        h1k_eigs: h1.values,
        zero_mode_overlap: ov,
        l2_converged: l2.converged,
        h1k_converged: h1.converged,
        gauge_residual: gres,
        u_h1k_norm: unorm,
    })
}

/// Exponent `α` in `ρ(κ) ∼ κ^α` fitted to `(κ, ρ(κ)⁻¹)` pairs.
pub fn coercivity_trend_pairs(pairs: &[(f64, f64)]) -> Result<f64> {
    if pairs.iter().any(|&(k, r)| !(k > 0.0 && r > 0.0)) {
        return Err(Error::DegenerateFit("κ and ρ⁻¹ must be positive".into()));
    }
    let pts: Vec<(f64, f64)> = pairs.iter().map(|&(k, r)| (k, 1.0 / r)).collect();
    fit_loglog(&pts)
}

/// [`coercivity_trend_pairs`] over reports. `κ = 32` is left out unless
/// `include_kappa32` is set.
pub fn coercivity_trend(reports: &[SpectrumReport], include_kappa32: bool) -> Result<f64> {
    let pairs: Vec<(f64, f64)> = reports
        .iter()
        .filter(|r| include_kappa32 || r.kappa != 32.0)
        .map(|r| (r.kappa, r.rho_inv))
        .collect();
    coercivity_trend_pairs(&pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_recovers_exponent() {
        let pairs: Vec<(f64, f64)> = [4.0, 8.0, 16.0]
            .iter()
            .map(|&k: &f64| (k, k.powi(-2)))
            .collect();
        assert!((coercivity_trend_pairs(&pairs).unwrap() - 2.0).abs() < 1e-10);
    }

    #[test]
    fn repeated_kappa_is_degenerate() {
        assert!(coercivity_trend_pairs(&[(8.0, 0.1), (8.0, 0.2)]).is_err());
    }
}
