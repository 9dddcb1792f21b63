use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use ppcalib::calib::{calibrate, n_test, BandChoice, CalibrationSettings, PitMethod};
use ppcalib::experiment::{run_experiment, write_experiment, write_report, BandSpec, ExperimentConfig};
use ppcalib::fit::FitOptions;
use ppcalib::io::{load_pattern, read_json, save_pattern, write_json, write_pattern_csv};
use ppcalib::models::{parse_basis, ModelParams, ModelSpec};
use ppcalib::registry::{FamilyRegistry, FitRequest};
use ppcalib::sim::{sample_batch, sampler_for, InitialState, McmcConfig};
use ppcalib::{derive_seed, PointPattern, RngStream, Window};

mod parse;

use parse::{parse_coefficients, parse_fixed, parse_grid, parse_window};

/// Simulate, fit and check the calibration of spatial point process models.
#[derive(Parser)]
#[command(name = "ppcalib", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw one pattern from a model and write it as CSV.
    Simulate(SimulateArgs),
    /// Fit a model family to a pattern.
    Fit(FitArgs),
    /// PIT or rank calibration report for a model and a pattern.
    Calibrate(CalibrateArgs),
    /// Fraction of model replicates with fewer points than the pattern.
    Ntest(NtestArgs),
    /// Run a complete built-in or configured experiment.
    Experiment(ExperimentArgs),
}

#[derive(Args)]
struct SeedArg {
    /// Master seed; all randomness derives from it.
    #[arg(long, env = "PPCALIB_SEED", default_value_t = 0)]
    seed: u64,
}

#[derive(Args, Clone)]
struct McmcArgs {
    /// Birth-death iterations per Gibbs draw.
    #[arg(long)]
    iterations: Option<u64>,
    /// Probability of proposing a birth.
    #[arg(long)]
    p_birth: Option<f64>,
    /// Start chains from an empty pattern instead of a thinned Poisson draw.
    #[arg(long)]
    empty_start: bool,
}

impl McmcArgs {
    fn apply(&self, mut cfg: McmcConfig) -> McmcConfig {
        if let Some(n) = self.iterations {
            cfg.n_iterations = n;
        }
        if let Some(p) = self.p_birth {
            cfg.p_birth = p;
        }
        if self.empty_start {
            cfg.initial_state = InitialState::Empty;
        }
        cfg
    }
}

#[derive(Args)]
struct ModelArgs {
    /// Model JSON file (a fit result file also works).
    #[arg(long, conflicts_with = "family")]
    model: Option<PathBuf>,
    /// Model family: poisson, strauss or geyer.
    #[arg(long)]
    family: Option<String>,
    /// Comma-separated coefficients; `log(x)` and `exp(x)` are accepted.
    #[arg(long, allow_hyphen_values = true)]
    theta: Option<String>,
    /// Comma-separated basis terms, e.g. `1,u1,u2,u1^2`.
    #[arg(long)]
    basis: Option<String>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    r: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
}

impl ModelArgs {
    fn resolve(&self) -> Result<ModelSpec> {
        if let Some(path) = &self.model {
            let params: ModelParams =
                read_json(path).with_context(|| format!("reading model {}", path.display()))?;
            return Ok(params.build()?);
        }
        let family = self
            .family
            .as_deref()
            .ok_or_else(|| anyhow!("family: give --family or --model"))?;
        let mut params = ModelParams::new(&family.to_ascii_lowercase());
        if let Some(b) = &self.basis {
            params.set_basis(b)?;
        }
        params.theta = self.theta.as_deref().map(parse_coefficients).transpose()?;
        params.gamma = self.gamma;
        params.r = self.r;
        params.alpha = self.alpha;
        params.beta = self.beta;
        Ok(params.build()?)
    }
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Window `x_min,x_max,y_min,y_max`.
    #[arg(long, default_value = "0,1,0,1", allow_hyphen_values = true)]
    window: String,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    mcmc: McmcArgs,
    /// Output CSV; a `<stem>.window.json` sidecar is written next to it.
    /// Without it the CSV goes to stdout.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PatternArgs {
    /// Pattern CSV with header `x,y`.
    #[arg(long)]
    pattern: PathBuf,
    /// Window `x_min,x_max,y_min,y_max`; defaults to the sidecar file.
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
}

impl PatternArgs {
    fn load(&self) -> Result<PointPattern> {
        let window = self.window.as_deref().map(parse_window).transpose()?;
        load_pattern(&self.pattern, window)
            .with_context(|| format!("reading pattern {}", self.pattern.display()))
    }
}

#[derive(Args)]
struct FitArgs {
    #[command(flatten)]
    pattern: PatternArgs,
    /// Family to fit: poisson, strauss or geyer.
    #[arg(long)]
    family: String,
    /// Trend basis terms.
    #[arg(long, default_value = "1")]
    basis: String,
    /// Fixed interaction parameters, e.g. `r=0.05,alpha=4.5`.
    #[arg(long)]
    fixed: Option<String>,
    /// Midpoint quadrature cells per axis for pseudolikelihood fits.
    #[arg(long, default_value_t = 64)]
    quad_grid: usize,
    /// Output JSON; stdout if omitted.
    #[arg(long, short)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BandArg {
    None,
    Binomial,
    Bootstrap,
}

#[derive(Args)]
struct CalibrateArgs {
    #[command(flatten)]
    pattern: PatternArgs,
    #[command(flatten)]
    model: ModelArgs,
    /// Pixel grid `NXxNY` (or a single number for a square grid).
    #[arg(long, default_value = "20x20")]
    grid: String,
    /// Replicates for rank-based PITs.
    #[arg(long, short, default_value_t = 499)]
    k: usize,
    #[arg(long, default_value_t = 5)]
    bins: usize,
    #[arg(long, default_value_t = 0.9)]
    level: f64,
    /// Band drawn on the histogram; defaults to binomial for exact PITs and
    /// bootstrap for ranks.
    #[arg(long, value_enum)]
    band: Option<BandArg>,
    #[arg(long, default_value_t = 500)]
    n_boot: usize,
    /// Use simulation ranks even for Poisson models.
    #[arg(long)]
    force_empirical: bool,
    /// File name prefix inside the output directory.
    #[arg(long, default_value = "model")]
    label: String,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    mcmc: McmcArgs,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

#[derive(Args)]
struct NtestArgs {
    #[command(flatten)]
    pattern: PatternArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[arg(long, short, default_value_t = 499)]
    k: usize,
    #[command(flatten)]
    seed: SeedArg,
    #[command(flatten)]
    mcmc: McmcArgs,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Built-in experiment: inhom_poisson, strauss or geyer.
    #[arg(required_unless_present = "config")]
    name: Option<String>,
    /// Experiment JSON; flags override its values.
    #[arg(long, conflicts_with = "name")]
    config: Option<PathBuf>,
    /// Use published point estimates for the competitors instead of refitting.
    #[arg(long)]
    reference_estimates: bool,
    #[arg(long, env = "PPCALIB_SEED")]
    seed: Option<u64>,
    #[arg(long, allow_hyphen_values = true)]
    window: Option<String>,
    #[arg(long)]
    grid: Option<String>,
    #[arg(long, short)]
    k: Option<usize>,
    #[arg(long)]
    bins: Option<usize>,
    #[arg(long)]
    n_boot: Option<usize>,
    #[arg(long, value_enum)]
    band: Option<BandArg>,
    #[command(flatten)]
    mcmc: McmcArgs,
    /// Output directory.
    #[arg(long, short)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Calibrate(a) => calibrate_cmd(a),
        Command::Ntest(a) => ntest(a),
        Command::Experiment(a) => experiment(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn simulate(a: SimulateArgs) -> Result<()> {
    let model = a.model.resolve()?;
    let window = parse_window(&a.window)?;
    let cfg = a.mcmc.apply(McmcConfig::default());
    let sampler = sampler_for(&model, window, &cfg)?;
    let pattern = sampler.sample_stream(RngStream::new(derive_seed(a.seed.seed, "simulate"), 0));
    match &a.out {
        Some(path) => {
            save_pattern(&pattern, path).with_context(|| format!("writing {}", path.display()))?;
            eprintln!("{} points written to {}", pattern.len(), path.display());
        }
        None => write_pattern_csv(&pattern, io::stdout().lock())?,
    }
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let pattern = a.pattern.load()?;
    let (r, alpha) = match &a.fixed {
        Some(s) => parse_fixed(s)?,
        None => (None, None),
    };
    let request = FitRequest {
        basis: parse_basis(&a.basis)?,
        r,
        alpha,
    };
    let opts = FitOptions {
        quad_grid: a.quad_grid,
        ..FitOptions::default()
    };
    let result = FamilyRegistry::builtin().fit(&a.family, &pattern, &request, &opts)?;
    let params = ModelParams::from(&result.model);
    let mut table = String::new();
    table.push_str(&format!("family      {}\n", params.family));
    if let (Some(basis), Some(theta)) = (&params.basis, &params.theta) {
        for (t, c) in basis.iter().zip(theta) {
            table.push_str(&format!("theta[{t}]  {c:.6}\n"));
        }
    }
    for (name, v) in [("beta", params.beta), ("gamma", params.gamma), ("r", params.r), ("alpha", params.alpha)] {
        if let Some(v) = v {
            table.push_str(&format!("{name:<11} {v:.6}\n"));
        }
    }
    table.push_str(&format!(
        "converged   {} ({} iterations, |grad| {:.2e})\n",
        result.converged, result.n_iterations, result.gradient_norm
    ));
    for w in &result.warnings {
        table.push_str(&format!("warning     {w}\n"));
    }
    match &a.out {
        Some(path) => {
            write_json(&result, path)?;
            print!("{table}");
        }
        None => {
            eprint!("{table}");
            let mut out = io::stdout().lock();
            serde_json::to_writer_pretty(&mut out, &result)?;
            writeln!(out)?;
        }
    }
    Ok(())
}

fn calibrate_cmd(a: CalibrateArgs) -> Result<()> {
    let pattern = a.pattern.load()?;
    let model = a.model.resolve()?;
    let (nx, ny) = parse_grid(&a.grid)?;
    let method = if a.force_empirical { PitMethod::Empirical } else { PitMethod::Auto };
    let mut settings = CalibrationSettings {
        nx,
        ny,
        bins: a.bins,
        level: a.level,
        k: a.k,
        method,
        band: BandChoice::None,
        mcmc: a.mcmc.apply(McmcConfig::default()),
        seed: a.seed.seed,
    };
    let ranks = settings.uses_ranks(&model);
    settings.band = match a.band {
        Some(BandArg::None) => BandChoice::None,
        Some(BandArg::Binomial) => BandChoice::Binomial,
        Some(BandArg::Bootstrap) => BandChoice::Bootstrap { n_boot: a.n_boot },
        None if ranks => BandChoice::Bootstrap { n_boot: a.n_boot },
        None => BandChoice::Binomial,
    };
    let report = calibrate(&pattern, &model, &settings)?;
    let summary = write_report(&a.out, &a.label, &report, &model, &pattern)?;
    print_summary(&a.out, &a.label, &summary);
    Ok(())
}

fn print_summary(dir: &Path, label: &str, s: &ppcalib::io::Summary) {
    println!("{label}: {} points, {:?} over {} pixels", s.n_points, s.pit_kind, s.n_values);
    println!("  delta {:.4}  chi2 p {:.4}  ks p {:.4}", s.delta, s.chi_square_p, s.ks_p);
    println!("  bins {:?}", s.bin_counts);
    if let (Some(lo), Some(hi)) = (&s.lower_band, &s.upper_band) {
        println!("  band lower {lo:?} upper {hi:?}");
    }
    if !s.flags.is_empty() {
        println!("  flags {}", s.flags.join(", "));
    }
    println!("  written to {}", dir.display());
}

fn ntest(a: NtestArgs) -> Result<()> {
    let pattern = a.pattern.load()?;
    let model = a.model.resolve()?;
    let cfg = a.mcmc.apply(McmcConfig::default());
    let reps = sample_batch(&model, *pattern.window(), a.k, &cfg, derive_seed(a.seed.seed, "replicates"))?;
    let t = n_test(&pattern, &reps)?;
    let mut out = io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, &t)?;
    writeln!(out)?;
    Ok(())
}

fn experiment(a: ExperimentArgs) -> Result<()> {
    let mut cfg = match (&a.config, &a.name) {
        (Some(path), _) => read_json::<ExperimentConfig>(path)
            .with_context(|| format!("reading experiment config {}", path.display()))?,
        (None, Some(name)) => ExperimentConfig::builtin(name, a.reference_estimates)?,
        (None, None) => bail!("give an experiment name or --config"),
    };
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(w) = &a.window {
        let w: Window = parse_window(w)?;
        cfg.window = [w.x_min, w.x_max, w.y_min, w.y_max];
    }
    if let Some(g) = &a.grid {
        (cfg.nx, cfg.ny) = parse_grid(g)?;
    }
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(b) = a.bins {
        cfg.bins = b;
    }
    if let Some(n) = a.n_boot {
        cfg.n_boot = n;
    }
    if let Some(b) = a.band {
        cfg.band = match b {
            BandArg::None => BandSpec::None,
            BandArg::Binomial => BandSpec::Binomial,
            BandArg::Bootstrap => BandSpec::Bootstrap,
        };
    }
    cfg.mcmc = a.mcmc.apply(cfg.mcmc);
    let outcome = run_experiment(&cfg)?;
    let table = write_experiment(&outcome, &a.out)?;
    print!("{table}");
    Ok(())
}
