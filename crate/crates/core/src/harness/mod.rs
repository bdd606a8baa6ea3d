//! Experiment harness: configuration, sweeps and persistence.

pub mod cache;
pub mod csv;
pub mod export;
pub mod fieldfile;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::analysis::{
    best_approximation_error, error_h1k, error_l2, fit_decay, fit_rate, ErrorRecord,
};
use crate::error::{Error, Result};
use crate::field::ComplexField;
use crate::glenergy::EnergyContext;
use crate::lodspace::LodProblem;
use crate::mesh::build_hierarchy;
use crate::minimize::{
    align_phase, initial_guess, minimize_in, DescentOptions, MinimizeResult, SpaceChoice, StartKind,
};
use crate::potential::MagneticPotential;
use crate::spectrum::{coercivity_trend, spectrum_at, SpectrumReport, DEFAULT_EIGS};

use self::cache::LodCache;
use self::csv::{fmt_f64, Cell, Table};

pub const CONVERGENCE_HEADER: [&str; 13] = [
    "space", "kappa", "beta", "ell", "coarse_h", "fine_h", "seed", "err_h1k", "err_l2", "err_best",
    "energy", "iters", "status",
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kappas: Vec<f64>,
    pub betas: Vec<f64>,
    pub ells: Vec<usize>,
    pub coarse_ks: Vec<u32>,
    pub fine_k: u32,
    pub seeds: Vec<u64>,
    pub start: StartKind,
    pub delta: f64,
    /// Extra stopping condition on the `H¹_κ`-dual norm of `E′`.
    pub residual_tol: Option<f64>,
    pub max_iters: usize,
    pub out_dir: PathBuf,
    /// LOD basis cache directory; `None` disables caching.
    pub cache_dir: Option<PathBuf>,
    pub drop_coarsest: bool,
    pub include_kappa32: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            kappas: vec![8.0],
            betas: vec![0.0, 1.0],
            ells: vec![8],
            coarse_ks: vec![2, 3, 4],
            fine_k: 7,
            seeds: vec![1],
            start: StartKind::Constant,
            delta: 1e-10,
            residual_tol: Some(1e-8),
            max_iters: 200_000,
            out_dir: PathBuf::from("out"),
            cache_dir: None,
            drop_coarsest: false,
            include_kappa32: false,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.kappas.is_empty() {
            return bad("kappas must not be empty".into());
        }
        if self.seeds.is_empty() {
            return bad("seeds must not be empty".into());
        }
        if let Some(k) = self.kappas.iter().find(|&&k| !(k > 0.0 && k.is_finite())) {
            return bad(format!("kappa must be positive, got {k}"));
        }
        if let Some(b) = self.betas.iter().find(|&&b| !(b >= 0.0 && b.is_finite())) {
            return bad(format!("beta must be nonnegative, got {b}"));
        }
        if self.ells.contains(&0) {
            return bad("ell must be at least 1".into());
        }
        if let Some(&k) = self.coarse_ks.iter().max() {
            if k >= self.fine_k {
                return bad(format!(
                    "fine_k ({}) must exceed every coarse_k (max {k})",
                    self.fine_k
                ));
            }
        }
        if !(self.delta > 0.0) {
            return bad("delta must be positive".into());
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, without the output and cache
    /// directories (they do not affect results).
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out_dir = PathBuf::new();
        c.cache_dir = None;
        let json = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&json)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn descent(&self) -> DescentOptions {
        DescentOptions {
            delta: self.delta,
            max_iters: self.max_iters,
            residual_tol: self.residual_tol,
            ..DescentOptions::default()
        }
    }

    fn start_field(&self, ctx: &EnergyContext, seed: u64) -> ComplexField {
        match self.start {
            StartKind::Constant => {
                ComplexField::constant(ctx.space(), num_complex::Complex64::new(1.0, 0.0))
            }
            StartKind::Random => initial_guess(ctx.space(), seed),
        }
    }

    fn cache(&self) -> LodCache {
        LodCache::new(self.cache_dir.clone())
    }
}

/// A fine-space minimizer together with its context.
pub struct Reference {
    pub kappa: f64,
    pub seed: u64,
    pub ctx: EnergyContext,
    pub result: MinimizeResult,
}

impl Reference {
    pub fn u(&self) -> &ComplexField {
        &self.result.u
    }
}

pub fn compute_reference(
    cfg: &ExperimentConfig,
    potential: &MagneticPotential,
    kappa: f64,
    seed: u64,
) -> Result<Reference> {
    let mh = Arc::new(build_hierarchy(cfg.fine_k - 1, cfg.fine_k)?);
    let ctx = EnergyContext::fine(mh, potential.clone(), kappa)?;
    let result = minimize_in(&ctx, cfg.start_field(&ctx, seed), &cfg.descent())?;
    log::info!(
        "reference kappa={kappa} seed={seed}: E={:.10e} after {} iterations",
        result.energy,
        result.iters
    );
    Ok(Reference {
        kappa,
        seed,
        ctx,
        result,
    })
}

/// A minimizer in a coarse FEM or LOD space, expanded to the fine mesh.
pub struct SpaceRun {
    pub ctx: EnergyContext,
    pub result: MinimizeResult,
    pub fine: ComplexField,
}

pub fn run_lod(
    cfg: &ExperimentConfig,
    potential: &MagneticPotential,
    kappa: f64,
    beta: f64,
    ell: usize,
    coarse_k: u32,
    seed: u64,
) -> Result<SpaceRun> {
    let mh = Arc::new(build_hierarchy(coarse_k, cfg.fine_k)?);
    let problem = LodProblem::new(mh, potential.clone(), kappa, beta)?;
    let space = Arc::new(cfg.cache().get_or_build(&problem, ell)?);
    let ctx = EnergyContext::lod(space, potential.clone())?;
    finish_run(cfg, ctx, seed)
}

pub fn run_coarse_fem(
    cfg: &ExperimentConfig,
    potential: &MagneticPotential,
    kappa: f64,
    coarse_k: u32,
    seed: u64,
) -> Result<SpaceRun> {
    let mh = Arc::new(build_hierarchy(coarse_k, cfg.fine_k)?);
    let ctx = EnergyContext::coarse(mh, potential.clone(), kappa)?;
    finish_run(cfg, ctx, seed)
}

fn finish_run(cfg: &ExperimentConfig, ctx: EnergyContext, seed: u64) -> Result<SpaceRun> {
    let result = minimize_in(&ctx, cfg.start_field(&ctx, seed), &cfg.descent())?;
    let fine = ctx.to_fine_field(&result.u)?;
    Ok(SpaceRun { ctx, result, fine })
}

/// One convergence-sweep row; `status` is `ok` or the error message.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvergenceRow {
    pub record: ErrorRecord,
    pub status: String,
}

impl ConvergenceRow {
    pub fn is_ok(&self) -> bool {
        self.status == "ok"
    }
}

fn measure(
    reference: &Reference,
    run: &SpaceRun,
    best: Option<f64>,
    base: ErrorRecord,
) -> Result<ErrorRecord> {
    let rctx = &reference.ctx;
    let aligned = align_phase(&run.fine, reference.u(), &rctx.fine_mass)?;
    Ok(ErrorRecord {
        err_h1k: error_h1k(&aligned, reference.u(), &rctx.fine_gram)?,
        err_l2: error_l2(&aligned, reference.u(), &rctx.fine_mass)?,
        err_best: best.unwrap_or(f64::NAN),
        energy: run.result.energy,
        iters: run.result.iters,
        ..base
    })
}

#[allow(clippy::too_many_arguments)]
fn blank_record(
    space: SpaceChoice,
    kappa: f64,
    beta: f64,
    ell: usize,
    coarse_k: u32,
    cfg: &ExperimentConfig,
    seed: u64,
    energy_ref: f64,
) -> ErrorRecord {
    ErrorRecord {
        space,
        kappa,
        beta,
        ell,
        coarse_h: 2f64.powi(-(coarse_k as i32)),
        fine_h: 2f64.powi(-(cfg.fine_k as i32)),
        seed,
        err_h1k: f64::NAN,
        err_l2: f64::NAN,
        err_best: f64::NAN,
        energy: f64::NAN,
        energy_ref,
        iters: 0,
    }
}

fn row_from(res: Result<ErrorRecord>, blank: ErrorRecord) -> ConvergenceRow {
    match res {
        Ok(record) => ConvergenceRow {
            record,
            status: "ok".into(),
        },
        Err(e) => {
            log::error!("convergence job failed: {e}");
            ConvergenceRow {
                record: blank,
                status: format!("error: {e}").replace(',', ";"),
            }
        }
    }
}

/// Errors of coarse FEM and LOD minimizers against fine references, for
/// every `(κ, seed)` and then every coarse level, `β` and `ℓ`. Failed jobs
/// become rows with a non-`ok` status.
pub fn convergence(
    cfg: &ExperimentConfig,
    potential: &MagneticPotential,
) -> Result<Vec<ConvergenceRow>> {
    cfg.validate()?;
    let mut rows = Vec::new();
    for &kappa in &cfg.kappas {
        for &seed in &cfg.seeds {
            let reference = compute_reference(cfg, potential, kappa, seed)?;
            let eref = reference.result.energy;
            for &ck in &cfg.coarse_ks {
                let blank = blank_record(
                    SpaceChoice::CoarseFem,
                    kappa,
                    f64::NAN,
                    0,
                    ck,
                    cfg,
                    seed,
                    eref,
                );
                let res = run_coarse_fem(cfg, potential, kappa, ck, seed)
                    .and_then(|run| measure(&reference, &run, None, blank.clone()));
                rows.push(row_from(res, blank));
            }
            for &beta in &cfg.betas {
                for &ell in &cfg.ells {
                    for &ck in &cfg.coarse_ks {
                        let blank =
                            blank_record(SpaceChoice::Lod, kappa, beta, ell, ck, cfg, seed, eref);
                        let res =
                            run_lod(cfg, potential, kappa, beta, ell, ck, seed).and_then(|run| {
                                let SpaceRun { ctx, .. } = &run;
                                let space = match &ctx.map {
                                    crate::glenergy::SpaceMap::Lod(s) => Arc::clone(s),
                                    _ => unreachable!("LOD run has an LOD map"),
                                };
                                let best = best_approximation_error(
                                    &space,
                                    reference.u(),
                                    &reference.ctx.fine_gram,
                                )?;
                                measure(&reference, &run, Some(best), blank.clone())
                            });
                        log::info!("kappa={kappa} beta={beta} ell={ell} coarse_k={ck} done");
                        rows.push(row_from(res, blank));
                    }
                }
            }
        }
    }
    Ok(rows)
}

fn space_tag(s: SpaceChoice) -> &'static str {
    match s {
        SpaceChoice::FineFem => "fine_fem",
        SpaceChoice::CoarseFem => "coarse_fem",
        SpaceChoice::Lod => "lod",
    }
}

/// CSV table of a convergence sweep, with fitted `H¹_κ` rates per
/// `(κ, β, ℓ, seed)` series in the trailer.
pub fn convergence_table(cfg: &ExperimentConfig, rows: &[ConvergenceRow]) -> Table {
    let mut t = Table::new(&cfg.hash(), &CONVERGENCE_HEADER);
    for r in rows {
        let e = &r.record;
        t.push(vec![
            space_tag(e.space).into(),
            e.kappa.into(),
            e.beta.into(),
            e.ell.into(),
            e.coarse_h.into(),
            e.fine_h.into(),
            e.seed.into(),
            e.err_h1k.into(),
            e.err_l2.into(),
            e.err_best.into(),
            e.energy.into(),
            e.iters.into(),
            Cell::Text(r.status.clone()),
        ]);
    }
    for (label, pairs) in rate_series(rows) {
        if let Ok(rate) = fit_rate(&pairs, cfg.drop_coarsest) {
            t.trailer.push((format!("rate[{label}]"), fmt_f64(rate)));
        }
    }
    t
}

/// `(h, err_h1k)` series grouped by space and parameters, in row order.
pub fn rate_series(rows: &[ConvergenceRow]) -> Vec<(String, Vec<(f64, f64)>)> {
    let mut out: Vec<(String, Vec<(f64, f64)>)> = Vec::new();
    for r in rows.iter().filter(|r| r.is_ok()) {
        let e = &r.record;
        let label = match e.space {
            SpaceChoice::Lod => format!(
                "lod kappa={} beta={} ell={} seed={}",
                e.kappa, e.beta, e.ell, e.seed
            ),
            s => format!("{} kappa={} seed={}", space_tag(s), e.kappa, e.seed),
        };
        match out.iter_mut().find(|(l, _)| *l == label) {
            Some((_, v)) => v.push((e.coarse_h, e.err_h1k)),
            None => out.push((label, vec![(e.coarse_h, e.err_h1k)])),
        }
    }
    out
}

#[derive(Clone, Debug, PartialEq)]
pub struct DecayRun {
    pub kappa: f64,
    pub beta: f64,
    pub coarse_k: u32,
    pub ell_ref: usize,
    /// `(ℓ, ε_ℓ)` with `ε_ℓ = ‖u_ℓ − u_{ℓ_ref}‖_{H¹_κ}`.
    pub rows: Vec<(usize, f64)>,
    pub energies: Vec<f64>,
    pub rate: Option<f64>,
}

/// Localization errors of LOD minimizers against the one at
/// `ℓ_ref = max(ells) + 5`.
pub fn decay(
    cfg: &ExperimentConfig,
    potential: &MagneticPotential,
    kappa: f64,
    beta: f64,
    coarse_k: u32,
    seed: u64,
) -> Result<DecayRun> {
    cfg.validate()?;
    let ell_max = *cfg
        .ells
        .iter()
        .max()
        .ok_or_else(|| Error::InvalidInput("ells must not be empty".into()))?;
    let ell_ref = ell_max + 5;
    let reference = run_lod(cfg, potential, kappa, beta, ell_ref, coarse_k, seed)?;
    let mh = Arc::new(build_hierarchy(cfg.fine_k - 1, cfg.fine_k)?);
    let fine = EnergyContext::fine(mh, potential.clone(), kappa)?;
    let mut ells = cfg.ells.clone();
    ells.sort_unstable();
    ells.dedup();
    let mut rows = Vec::new();
    let mut energies = Vec::new();
    for ell in ells {
        let run = run_lod(cfg, potential, kappa, beta, ell, coarse_k, seed)?;
        let aligned = align_phase(&run.fine, &reference.fine, &fine.fine_mass)?;
        rows.push((ell, error_h1k(&aligned, &reference.fine, &fine.fine_gram)?));
        energies.push(run.result.energy);
        log::info!(
            "decay kappa={kappa} ell={ell}: {:.6e}",
            rows.last().unwrap().1
        );
    }
    let pairs: Vec<(f64, f64)> = rows.iter().map(|&(l, e)| (l as f64, e)).collect();
    let rate = fit_decay(&pairs).ok();
    Ok(DecayRun {
        kappa,
        beta,
        coarse_k,
        ell_ref,
        rows,
        energies,
        rate,
    })
}

pub fn decay_table(cfg: &ExperimentConfig, runs: &[DecayRun]) -> Table {
    let mut t = Table::new(
        &cfg.hash(),
        &[
            "kappa", "beta", "coarse_h", "ell", "ell_ref", "err_h1k", "energy",
        ],
    );
    for run in runs {
        let coarse_h = 2f64.powi(-(run.coarse_k as i32));
        for (&(ell, err), &en) in run.rows.iter().zip(&run.energies) {
            t.push(vec![
                run.kappa.into(),
                run.beta.into(),
                coarse_h.into(),
                ell.into(),
                run.ell_ref.into(),
                err.into(),
                en.into(),
            ]);
        }
        if let Some(r) = run.rate {
            let label = format!(
                "kappa={} beta={} coarse_h={}",
                run.kappa, run.beta, coarse_h
            );
            t.trailer.push((format!("decay_rate[{label}]"), fmt_f64(r)));
            t.trailer
                .push((format!("theta[{label}]"), fmt_f64((-r).exp())));
        }
    }
    t
}

/// Spectrum reports at the fine reference of every `κ`.
pub fn spectrum_sweep(
    cfg: &ExperimentConfig,
    potential: &MagneticPotential,
) -> Result<Vec<(f64, SpectrumReport)>> {
    cfg.validate()?;
    let seed = cfg.seeds[0];
    cfg.kappas
        .iter()
        .map(|&kappa| {
            let r = compute_reference(cfg, potential, kappa, seed)?;
            let rep = spectrum_at(&r.ctx, r.u(), DEFAULT_EIGS)?;
            Ok((r.result.energy, rep))
        })
        .collect()
}

pub fn spectrum_table(cfg: &ExperimentConfig, reports: &[(f64, SpectrumReport)]) -> Table {
    let mut t = Table::new(
        &cfg.hash(),
        &[
            "kappa",
            "energy",
            "lambda1",
            "lambda2",
            "lambda3",
            "lambda4",
            "lambda5",
            "rho_inv",
            "zero_mode_overlap",
            "converged",
        ],
    );
    for (energy, r) in reports {
        let eigs = r.table_eigs();
        let mut row: Vec<Cell> = vec![r.kappa.into(), (*energy).into()];
        for i in 0..5 {
            row.push(eigs.get(i).copied().unwrap_or(f64::NAN).into());
        }
        row.push(r.rho_inv.into());
        row.push(r.zero_mode_overlap.into());
        row.push(Cell::Text((r.l2_converged && r.h1k_converged).to_string()));
        t.push(row);
    }
    let reps: Vec<SpectrumReport> = reports.iter().map(|(_, r)| r.clone()).collect();
    if let Ok(alpha) = coercivity_trend(&reps, cfg.include_kappa32) {
        t.trailer.push(("alpha".into(), fmt_f64(alpha)));
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_rejects_bad_levels_and_empty_kappas() {
        let mut c = ExperimentConfig::default();
        assert!(c.validate().is_ok());
        c.coarse_ks = vec![7];
        assert!(c.validate().is_err());
        let c = ExperimentConfig {
            kappas: vec![],
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_directories() {
        let a = ExperimentConfig::default();
        let b = ExperimentConfig {
            out_dir: "elsewhere".into(),
            cache_dir: Some("c".into()),
            ..Default::default()
        };
        assert_eq!(a.hash(), b.hash());
        let c = ExperimentConfig {
            fine_k: 6,
            ..Default::default()
        };
        assert_ne!(a.hash(), c.hash());
    }

    #[test]
    fn json_overrides_defaults() {
        let c = ExperimentConfig::from_json(r#"{"kappas": [8, 16], "fine_k": 6}"#).unwrap();
        assert_eq!(c.kappas, vec![8.0, 16.0]);
        assert_eq!(c.fine_k, 6);
        assert_eq!(c.betas, vec![0.0, 1.0]);
        assert!(ExperimentConfig::from_json(r#"{"kapas": [8]}"#).is_err());
    }
}
