//! Sobolev gradient descent with Armijo backtracking.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::assembly::FormOperator;
use crate::error::{Error, Result};
use crate::field::{ComplexField, SpaceId};
use crate::glenergy::EnergyContext;
use crate::lodspace::{build_lod_space, LodProblem};
use crate::mesh::build_hierarchy;
use crate::potential::MagneticPotential;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpaceChoice {
    FineFem,
    CoarseFem,
    Lod,
}

/// Starting field of a minimization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartKind {
    /// All coefficients equal to one.
    #[default]
    Constant,
    /// [`initial_guess`] with the configured seed.
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepParams {
    pub initial: f64,
    pub backtrack: f64,
    /// Sufficient-decrease constant `c` in `E(v − τ d) ≤ E(v) − c τ ⟨E′(v), d⟩`.
    pub armijo: f64,
    /// The line search fails once `τ` drops below this.
    pub min_step: f64,
}

impl Default for StepParams {
    fn default() -> Self {
        Self {
            initial: 1.0,
            backtrack: 0.5,
            armijo: 1e-4,
            min_step: 1e-12,
        }
    }
}

/// Options of the descent loop itself, independent of the space.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentOptions {
    pub delta: f64,
    pub max_iters: usize,
    pub step: StepParams,
    /// When set, the energy test only stops the iteration once the
    /// `H¹_κ`-dual norm of `E′` is also below this value.
    pub residual_tol: Option<f64>,
}

impl Default for DescentOptions {
    fn default() -> Self {
        Self {
            delta: 1e-10,
            max_iters: 200_000,
            step: StepParams::default(),
            residual_tol: None,
        }
    }
}

impl DescentOptions {
    fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0) {
            return Err(Error::InvalidInput("delta must be positive".into()));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidInput("max_iters must be at least 1".into()));
        }
        let s = &self.step;
        if !(s.initial > 0.0
            && s.backtrack > 0.0
            && s.backtrack < 1.0
            && s.armijo > 0.0
            && s.armijo < 1.0)
        {
            return Err(Error::InvalidInput(format!(
                "invalid line-search parameters {s:?}"
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MinimizeConfig {
    pub space: SpaceChoice,
    pub kappa: f64,
    pub beta: f64,
    pub ell: usize,
    pub coarse_k: u32,
    pub fine_k: u32,
    pub seed: u64,
    pub start: StartKind,
    pub descent: DescentOptions,
}

impl MinimizeConfig {
    pub fn new(space: SpaceChoice, kappa: f64, coarse_k: u32, fine_k: u32) -> Self {
        Self {
            space,
            kappa,
            beta: 0.0,
            ell: 8,
            coarse_k,
            fine_k,
            seed: 1,
            start: StartKind::Constant,
            descent: DescentOptions::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxIters,
}

#[derive(Clone, Debug)]
pub struct MinimizeResult {
    pub u: ComplexField,
    pub energy: f64,
    pub iters: usize,
    /// `E` before the first step and after every accepted step.
    pub energy_trace: Vec<f64>,
    /// `H¹_κ`-dual norm of `E′` at every iterate.
    pub residual_trace: Vec<f64>,
    pub stop_reason: StopReason,
    /// Final `H¹_κ`-dual norm of `E′`.
    pub residual: f64,
}

/// Runs the descent `v ← v − τ G⁻¹ E′(v)` in the context's active space.
pub fn minimize_in(
    ctx: &EnergyContext,
    start: ComplexField,
    opts: &DescentOptions,
) -> Result<MinimizeResult> {
    opts.validate()?;
    start.ensure_space(ctx.space())?;
    let mut u = start;
    let mut energy = ctx.energy(&u)?;
    let mut trace = vec![energy];
    let mut residuals = Vec::new();
    let mut stop = StopReason::MaxIters;
    let mut iters = 0;
    let mut residual;
    loop {
        let g = ctx.gradient(&u)?;
        let d = ComplexField::from_complex(ctx.space(), &ctx.gram_factor().solve(&g.to_complex()))?;
        let slope = g.dot(&d);
        residual = slope.max(0.0).sqrt();
        residuals.push(residual);
        if iters >= opts.max_iters {
            break;
        }
        if slope == 0.0 {
            stop = StopReason::Tolerance;
            break;
        }
        let line = ctx.line(&u, &d)?;
        let mut tau = opts.step.initial;
        let de = loop {
            let de = line.delta(tau);
            if de <= -opts.step.armijo * tau * slope {
                break de;
            }
            tau *= opts.step.backtrack;
            if tau < opts.step.min_step {
                return Err(Error::LineSearch {
                    iteration: iters,
                    min_step: opts.step.min_step,
                });
            }
        };
        u = u.axpy(-tau, &d)?;
        energy += de;
        trace.push(energy);
        iters += 1;
        if de.abs() >= opts.delta || opts.residual_tol.is_some_and(|tol| residual > tol) {
            continue;
        }
        // the residual test applies to the state that is returned
        let g = ctx.gradient(&u)?;
        let r = ctx.h1k_dual_norm(&g)?;
        if opts.residual_tol.is_none_or(|tol| r <= tol) {
            residual = r;
            residuals.push(r);
            stop = StopReason::Tolerance;
            break;
        }
    }
    let energy = ctx.energy(&u)?;
    Ok(MinimizeResult {
        u,
        energy,
        iters,
        energy_trace: trace,
        residual_trace: residuals,
        stop_reason: stop,
        residual,
    })
}

/// Builds the space described by `cfg` and minimizes in it.
pub fn minimize(
    cfg: &MinimizeConfig,
    potential: &MagneticPotential,
) -> Result<(EnergyContext, MinimizeResult)> {
    let ctx = build_context(cfg, potential)?;
    let res = minimize_in(&ctx, start_field(ctx.space(), cfg), &cfg.descent)?;
    Ok((ctx, res))
}

pub fn start_field(space: SpaceId, cfg: &MinimizeConfig) -> ComplexField {
    match cfg.start {
        StartKind::Constant => ComplexField::constant(space, Complex64::new(1.0, 0.0)),
        StartKind::Random => initial_guess(space, cfg.seed),
    }
}

/// The energy context for the space selected by `cfg`.
pub fn build_context(cfg: &MinimizeConfig, potential: &MagneticPotential) -> Result<EnergyContext> {
    if cfg.space == SpaceChoice::Lod && cfg.ell == 0 {
        return Err(Error::InvalidInput("ell must be at least 1".into()));
    }
    let coarse_k = if cfg.space == SpaceChoice::FineFem {
        cfg.coarse_k.min(cfg.fine_k.saturating_sub(1))
    } else {
        cfg.coarse_k
    };
    let mh = Arc::new(build_hierarchy(coarse_k, cfg.fine_k)?);
    match cfg.space {
        SpaceChoice::FineFem => EnergyContext::fine(mh, potential.clone(), cfg.kappa),
        SpaceChoice::CoarseFem => EnergyContext::coarse(mh, potential.clone(), cfg.kappa),
        SpaceChoice::Lod => {
            let problem = LodProblem::new(mh, potential.clone(), cfg.kappa, cfg.beta)?;
            let space = build_lod_space(&problem, cfg.ell)?;
            EnergyContext::lod(Arc::new(space), potential.clone())
        }
    }
}

/// Deterministic pseudo-random start. A 64-bit linear congruential
/// generator `s ← 6364136223846793005 s + 1442695040888963407` (seeded with
/// `seed` passed through one SplitMix64 round) yields, per coefficient, a
/// real then an imaginary part; the top 53 bits `m` of each state map to
/// `(2 m / 2⁵³ − 1) / √2`, so every nodal modulus is at most one.
pub fn initial_guess(space: SpaceId, seed: u64) -> ComplexField {
    let mut state = splitmix(seed);
    let mut next = || {
        state = state
            .wrapping_mul(6_364_136_223_846_793_005)
            .wrapping_add(1_442_695_040_888_963_407);
        let m = (state >> 11) as f64 / (1u64 << 53) as f64;
        (2.0 * m - 1.0) * std::f64::consts::FRAC_1_SQRT_2
    };
    let mut re = Vec::with_capacity(space.dim);
    let mut im = Vec::with_capacity(space.dim);
    for _ in 0..space.dim {
        re.push(next());
        im.push(next());
    }
    ComplexField { space, re, im }
}

fn splitmix(seed: u64) -> u64 {
    let mut z = seed.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Multiplies `u` by `α/|α|` with `α = ∫ u_ref conj(u)`, so that
/// `∫ u_ref conj(û)` is real and nonnegative.
pub fn align_phase(
    u: &ComplexField,
    reference: &ComplexField,
    mass: &FormOperator,
) -> Result<ComplexField> {
    reference.ensure_space(u.space)?;
    let uc = u.to_complex();
    let mr = mass.apply(&reference.to_complex());
    let alpha: Complex64 = uc.iter().zip(&mr).map(|(a, b)| a.conj() * b).sum();
    let scale = uc.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt()
        * mr.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    if alpha.norm() <= 1e-14 * scale || alpha.norm() == 0.0 {
        return Err(Error::OrthogonalStates);
    }
    Ok(u.scale(alpha / alpha.norm()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_mass;
    use crate::field::SpaceKind;
    use crate::mesh::TriMesh;

    #[test]
    fn initial_guess_is_bounded_and_seeded() {
        let s = SpaceId::new(SpaceKind::FineFem, 3, 81);
        let a = initial_guess(s, 7);
        assert_eq!(a, initial_guess(s, 7));
        assert_ne!(a, initial_guess(s, 8));
        assert!(a.max_modulus() <= 1.0);
    }

    #[test]
    fn phase_alignment_unwinds_rotation() {
        let m = TriMesh::structured(2);
        let mass = assemble_mass(&m);
        let s = SpaceId::new(SpaceKind::FineFem, 2, m.num_vertices());
        let r = initial_guess(s, 3);
        let u = r.rotate(std::f64::consts::PI / 3.0);
        let back = align_phase(&u, &r, &mass).unwrap();
        assert!(back.max_abs_diff(&r) < 1e-12);
        let zero = ComplexField::zeros(s);
        assert!(matches!(
            align_phase(&zero, &r, &mass),
            Err(Error::OrthogonalStates)
        ));
    }
}
