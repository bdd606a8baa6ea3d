use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use gl_lod::analysis::best_approximation_error;
use gl_lod::glenergy::EnergyContext;
use gl_lod::harness::cache::LodCache;
use gl_lod::harness::csv::Table;
use gl_lod::harness::export::{export_field, DEFAULT_GRID};
use gl_lod::harness::fieldfile::{FieldFile, FieldMeta};
use gl_lod::harness::{
    compute_reference, convergence, convergence_table, decay, decay_table, run_coarse_fem, run_lod,
    spectrum_sweep, spectrum_table, ExperimentConfig,
};
use gl_lod::lodspace::LodProblem;
use gl_lod::mesh::build_hierarchy;
use gl_lod::minimize::StartKind;
use gl_lod::potential::MagneticPotential;

#[derive(Parser)]
#[command(
    name = "gl-lod",
    version,
    about = "Ginzburg-Landau minimizers in FEM and LOD spaces"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize the energy in one space and write the state as a field file.
    Minimize(MinimizeArgs),
    /// Errors of coarse FEM and LOD minimizers against fine references.
    Convergence(SweepArgs),
    /// Localization errors against a large-ℓ LOD minimizer.
    Decay(SweepArgs),
    /// Smallest eigenvalues of the Hessian at fine references.
    Spectrum(SweepArgs),
    /// Sample |u| of a field file on a uniform grid.
    ExportField(ExportArgs),
    /// Best-approximation error of a stored reference in an LOD space.
    BestApprox(BestApproxArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Space {
    Fem,
    CoarseFem,
    Lod,
}

#[derive(Clone, Copy, ValueEnum)]
enum Start {
    Constant,
    Random,
}

impl From<Start> for StartKind {
    fn from(s: Start) -> Self {
        match s {
            Start::Constant => StartKind::Constant,
            Start::Random => StartKind::Random,
        }
    }
}

#[derive(Args)]
struct MinimizeArgs {
    #[arg(long, value_enum, default_value = "fem")]
    space: Space,
    #[arg(long)]
    kappa: f64,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 8)]
    ell: usize,
    #[arg(long, default_value_t = 3)]
    coarse_k: u32,
    #[arg(long, default_value_t = 7)]
    fine_k: u32,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, value_enum, default_value = "constant")]
    start: Start,
    #[arg(long)]
    delta: Option<f64>,
    /// Also require this H¹_κ-dual norm of E′ before stopping.
    #[arg(long)]
    residual_tol: Option<f64>,
    /// Stop on the energy test alone.
    #[arg(long, conflicts_with = "residual_tol")]
    no_residual_tol: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    /// JSON configuration; flags below override its values.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    kappas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    betas: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    ells: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    coarse_ks: Option<Vec<u32>>,
    #[arg(long)]
    fine_k: Option<u32>,
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    seeds: Option<Vec<u64>>,
    #[arg(long, value_enum)]
    start: Option<Start>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    residual_tol: Option<f64>,
    #[arg(long, conflicts_with = "residual_tol")]
    no_residual_tol: bool,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
    #[arg(long)]
    drop_coarsest: bool,
    #[arg(long)]
    include_kappa32: bool,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value_t = DEFAULT_GRID)]
    n: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BestApproxArgs {
    /// Fine reference field file.
    #[arg(long)]
    reference: PathBuf,
    #[arg(long, default_value_t = 0.0)]
    beta: f64,
    #[arg(long, default_value_t = 8)]
    ell: usize,
    #[arg(long)]
    coarse_k: u32,
    #[arg(long)]
    cache_dir: Option<PathBuf>,
}

impl SweepArgs {
    fn config(&self) -> anyhow::Result<ExperimentConfig> {
        let mut c = match &self.config {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .with_context(|| format!("reading {}", p.display()))?;
                ExperimentConfig::from_json(&text)?
            }
            None => ExperimentConfig::default(),
        };
        if let Some(v) = &self.kappas {
            c.kappas = v.clone();
        }
        if let Some(v) = &self.betas {
            c.betas = v.clone();
        }
        if let Some(v) = &self.ells {
            c.ells = v.clone();
        }
        if let Some(v) = &self.coarse_ks {
            c.coarse_ks = v.clone();
        }
        if let Some(v) = self.fine_k {
            c.fine_k = v;
        }
        if let Some(v) = &self.seeds {
            c.seeds = v.clone();
        }
        if let Some(v) = self.start {
            c.start = v.into();
        }
        if let Some(v) = self.delta {
            c.delta = v;
        }
        if self.residual_tol.is_some() {
            c.residual_tol = self.residual_tol;
        }
        if self.no_residual_tol {
            c.residual_tol = None;
        }
        if let Some(v) = self.max_iters {
            c.max_iters = v;
        }
        if let Some(v) = &self.out_dir {
            c.out_dir = v.clone();
        }
        if self.cache_dir.is_some() {
            c.cache_dir = self.cache_dir.clone();
        }
        c.drop_coarsest |= self.drop_coarsest;
        c.include_kappa32 |= self.include_kappa32;
        c.validate()?;
        Ok(c)
    }
}

fn save_table(cfg: &ExperimentConfig, name: &str, table: &Table) -> anyhow::Result<()> {
    std::fs::create_dir_all(&cfg.out_dir)
        .with_context(|| format!("creating {}", cfg.out_dir.display()))?;
    let path = cfg.out_dir.join(name);
    table.save(&path)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_minimize(a: &MinimizeArgs) -> anyhow::Result<()> {
    let mut cfg = ExperimentConfig {
        kappas: vec![a.kappa],
        betas: vec![a.beta],
        ells: vec![a.ell],
        coarse_ks: vec![],
        fine_k: a.fine_k,
        seeds: vec![a.seed],
        start: a.start.into(),
        cache_dir: a.cache_dir.clone(),
        ..ExperimentConfig::default()
    };
    if !matches!(a.space, Space::Fem) {
        cfg.coarse_ks = vec![a.coarse_k];
    }
    if let Some(d) = a.delta {
        cfg.delta = d;
    }
    if a.residual_tol.is_some() {
        cfg.residual_tol = a.residual_tol;
    }
    if a.no_residual_tol {
        cfg.residual_tol = None;
    }
    if let Some(m) = a.max_iters {
        cfg.max_iters = m;
    }
    cfg.validate()?;
    let pot = MagneticPotential::sinusoidal();
    let (fine, result, tag) = match a.space {
        Space::Fem => {
            let r = compute_reference(&cfg, &pot, a.kappa, a.seed)?;
            (r.result.u.clone(), r.result, "fine_fem")
        }
        Space::CoarseFem => {
            let r = run_coarse_fem(&cfg, &pot, a.kappa, a.coarse_k, a.seed)?;
            (r.fine, r.result, "coarse_fem")
        }
        Space::Lod => {
            let r = run_lod(&cfg, &pot, a.kappa, a.beta, a.ell, a.coarse_k, a.seed)?;
            (r.fine, r.result, "lod")
        }
    };
    let meta = FieldMeta {
        kappa: a.kappa,
        beta: a.beta,
        ell: a.ell,
        space: tag.into(),
        seed: a.seed,
        energy: result.energy,
    };
    FieldFile::new(a.fine_k, meta, &fine)?.save(&a.out)?;
    println!(
        "energy={:.15e} iters={} residual={:.6e} stop={:?} out={}",
        result.energy,
        result.iters,
        result.residual,
        result.stop_reason,
        a.out.display()
    );
    Ok(())
}

fn cmd_convergence(a: &SweepArgs) -> anyhow::Result<()> {
    let cfg = a.config()?;
    let rows = convergence(&cfg, &MagneticPotential::sinusoidal())?;
    let failed = rows.iter().filter(|r| !r.is_ok()).count();
    save_table(&cfg, "convergence.csv", &convergence_table(&cfg, &rows))?;
    if failed > 0 {
        eprintln!(
            "{failed} of {} jobs failed; see the status column",
            rows.len()
        );
    }
    Ok(())
}

fn cmd_decay(a: &SweepArgs) -> anyhow::Result<()> {
    let cfg = a.config()?;
    if cfg.coarse_ks.is_empty() || cfg.betas.is_empty() || cfg.ells.is_empty() {
        bail!("decay needs nonempty coarse_ks, betas and ells");
    }
    let pot = MagneticPotential::sinusoidal();
    let mut runs = Vec::new();
    for &kappa in &cfg.kappas {
        for &beta in &cfg.betas {
            for &ck in &cfg.coarse_ks {
                match decay(&cfg, &pot, kappa, beta, ck, cfg.seeds[0]) {
                    Ok(r) => runs.push(r),
                    Err(e) => {
                        eprintln!("decay kappa={kappa} beta={beta} coarse_k={ck} failed: {e}")
                    }
                }
            }
        }
    }
    save_table(&cfg, "decay.csv", &decay_table(&cfg, &runs))
}

fn cmd_spectrum(a: &SweepArgs) -> anyhow::Result<()> {
    let cfg = a.config()?;
    let reports = spectrum_sweep(&cfg, &MagneticPotential::sinusoidal())?;
    save_table(&cfg, "spectrum.csv", &spectrum_table(&cfg, &reports))
}

fn cmd_export_field(a: &ExportArgs) -> anyhow::Result<()> {
    let file = FieldFile::load(&a.input)?;
    let grid = export_field(&file, a.n)?;
    let hash = file_hash(&a.input)?;
    grid.to_table(&hash).save(&a.out)?;
    println!(
        "min={:.6e} max={:.6e} out={}",
        grid.min(),
        grid.max(),
        a.out.display()
    );
    Ok(())
}

fn file_hash(p: &Path) -> anyhow::Result<String> {
    use sha2::{Digest, Sha256};
    let bytes = std::fs::read(p)?;
    Ok(Sha256::digest(&bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect())
}

fn cmd_best_approx(a: &BestApproxArgs) -> anyhow::Result<()> {
    let file = FieldFile::load(&a.reference)?;
    let fine_k = file.level;
    if a.coarse_k >= fine_k {
        bail!(
            "coarse-k ({}) must be below the reference level ({fine_k})",
            a.coarse_k
        );
    }
    let pot = MagneticPotential::sinusoidal();
    let kappa = file.meta.kappa;
    let mh = Arc::new(build_hierarchy(a.coarse_k, fine_k)?);
    let fine = EnergyContext::fine(Arc::clone(&mh), pot.clone(), kappa)?;
    let problem = LodProblem::new(mh, pot, kappa, a.beta)?;
    let space = LodCache::new(a.cache_dir.clone()).get_or_build(&problem, a.ell)?;
    let err = best_approximation_error(&space, &file.field(), &fine.fine_gram)?;
    println!("err_best={err:.15e}");
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let res = match &cli.command {
        Command::Minimize(a) => cmd_minimize(a),
        Command::Convergence(a) => cmd_convergence(a),
        Command::Decay(a) => cmd_decay(a),
        Command::Spectrum(a) => cmd_spectrum(a),
        Command::ExportField(a) => cmd_export_field(a),
        Command::BestApprox(a) => cmd_best_approx(a),
    };
    match res {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
