use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use sawlab::ensembles::{HalfSpaceWeight, SphereWeight};
use sawlab::pipeline::{
    self, CompareRequest, PredictConfig, SimulationConfig, ValidateConfig, DEFAULT_CHAINS, DEFAULT_N, DEFAULT_SAMPLES,
    DEFAULT_TOLERANCE,
};
use sawlab::{Ensemble, ExponentSet};

#[derive(Parser)]
#[command(name = "sawlab", version, about = "Weighted pivot-algorithm ensembles for hitting-angle distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run pivot chains and write weighted hitting-angle samples.
    Simulate(SimulateArgs),
    /// Write a predicted θ distribution function.
    Predict(PredictArgs),
    /// Compare samples with a prediction; exit status 1 on failure.
    Compare(CompareArgs),
    /// Check all three ensembles against the ordinary random walk.
    ValidateRw(ValidateArgs),
}

#[derive(Args)]
struct Common {
    /// Key-value (TOML) file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    ensemble: Option<Ensemble>,
    /// e.g. nu=0.587597,gamma=1.15698,gamma1=0.679
    #[arg(long)]
    exponents: Option<String>,
    /// Start point (0,0,a) for the sphere ensemble.
    #[arg(long)]
    a: Option<f64>,
    #[arg(long = "cutoff-deg")]
    cutoff_deg: Option<f64>,
    /// Ordinary random walk with b = 3/2 exponents.
    #[arg(long)]
    rw: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "N")]
    n: Option<usize>,
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads (results do not depend on this).
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long = "burn-in")]
    burn_in: Option<u64>,
    #[arg(long = "half-weight")]
    half_weight: Option<String>,
    #[arg(long = "sphere-weight")]
    sphere_weight: Option<String>,
    #[arg(long = "checkpoint-dir")]
    checkpoint_dir: Option<PathBuf>,
    #[arg(long = "checkpoint-every")]
    checkpoint_every: Option<u64>,
}

#[derive(Args)]
struct PredictArgs {
    #[command(flatten)]
    common: Common,
    /// Grid spacing in degrees.
    #[arg(long)]
    step: Option<f64>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sample CSV written by `simulate`.
    #[arg(long)]
    samples: PathBuf,
    /// Prediction CSV written by `predict`.
    #[arg(long)]
    prediction: PathBuf,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Random-walk sphere samples used for the lattice correction.
    #[arg(long = "rw-reference")]
    rw_reference: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long = "N")]
    n: Option<usize>,
    /// Samples per ensemble.
    #[arg(long)]
    samples: Option<u64>,
    #[arg(long)]
    chains: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    workers: Option<usize>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long = "cutoff-deg")]
    cutoff_deg: Option<f64>,
    #[arg(long)]
    tolerance: Option<f64>,
    /// Predict with this b instead of 3/2.
    #[arg(long = "b-override")]
    b_override: Option<f64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Config file contents. Keys mirror the long flags.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "kebab-case")]
struct FileConfig {
    ensemble: Option<Ensemble>,
    exponents: Option<String>,
    a: Option<f64>,
    cutoff_deg: Option<f64>,
    rw: Option<bool>,
    out: Option<PathBuf>,
    #[serde(rename = "N")]
    n: Option<usize>,
    samples: Option<u64>,
    chains: Option<usize>,
    seed: Option<u64>,
    workers: Option<usize>,
    burn_in: Option<u64>,
    half_weight: Option<String>,
    sphere_weight: Option<String>,
    checkpoint_dir: Option<PathBuf>,
    checkpoint_every: Option<u64>,
    step: Option<f64>,
    tolerance: Option<f64>,
    rw_reference: Option<PathBuf>,
    b_override: Option<f64>,
}

fn load_config(path: Option<&Path>) -> Result<FileConfig> {
    let Some(path) = path else { return Ok(FileConfig::default()) };
    let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
    toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
}

fn parse_exponents(spec: &str) -> Result<ExponentSet> {
    let (mut nu, mut gamma, mut gamma1) = (None, None, None);
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part.split_once('=').with_context(|| format!("expected key=value, got '{part}'"))?;
        let value: f64 = value.trim().parse().with_context(|| format!("bad number in '{part}'"))?;
        match key.trim() {
            "nu" => nu = Some(value),
            "gamma" => gamma = Some(value),
            "gamma1" => gamma1 = Some(value),
            other => bail!("unknown exponent '{other}' (expected nu, gamma, gamma1)"),
        }
    }
    let base = ExponentSet::saw_3d();
    Ok(ExponentSet::new(
        nu.unwrap_or(base.nu()),
        gamma.unwrap_or(base.gamma()),
        gamma1.unwrap_or(base.gamma1()),
        base.d(),
    )?)
}

fn parse_half_weight(s: &str) -> Result<HalfSpaceWeight> {
    match s {
        "height" => Ok(HalfSpaceWeight::Height),
        "endpoint-norm" => Ok(HalfSpaceWeight::EndpointNorm),
        _ => bail!("unknown half-space weight '{s}' (expected height or endpoint-norm)"),
    }
}

fn parse_sphere_weight(s: &str) -> Result<SphereWeight> {
    match s {
        "flux" => Ok(SphereWeight::Flux),
        "boundary-norm" => Ok(SphereWeight::BoundaryNorm),
        _ => bail!("unknown sphere weight '{s}' (expected flux or boundary-norm)"),
    }
}

/// Exponents: explicit values win, then the random-walk preset, then the SAW values.
fn exponents(flag: Option<&str>, file: Option<&str>, rw: bool) -> Result<ExponentSet> {
    match flag.or(file) {
        Some(spec) => parse_exponents(spec),
        None if rw => Ok(ExponentSet::random_walk()),
        None => Ok(ExponentSet::saw_3d()),
    }
}

fn required_out(flag: Option<PathBuf>, file: Option<PathBuf>) -> Result<PathBuf> {
    flag.or(file).context("--out is required")
}

fn simulate(args: SimulateArgs) -> Result<ExitCode> {
    let c = args.common;
    let file = load_config(c.config.as_deref())?;
    let ensemble = c.ensemble.or(file.ensemble).context("--ensemble is required")?;
    let rw = c.rw || file.rw.unwrap_or(false);
    let out = required_out(c.out, file.out)?;
    let mut cfg = SimulationConfig::new(ensemble);
    cfg.random_walk = rw;
    cfg.exponents = exponents(c.exponents.as_deref(), file.exponents.as_deref(), rw)?;
    cfg.n_steps = args.n.or(file.n).unwrap_or(DEFAULT_N);
    cfg.samples = args.samples.or(file.samples).unwrap_or(DEFAULT_SAMPLES);
    cfg.chains = args.chains.or(file.chains).unwrap_or(DEFAULT_CHAINS);
    cfg.seed = args.seed.or(file.seed).unwrap_or(0);
    cfg.workers = args.workers.or(file.workers).unwrap_or_else(default_workers);
    cfg.burn_in = args.burn_in.or(file.burn_in);
    if let Some(a) = c.a.or(file.a) {
        cfg.sphere_a = a;
    }
    if let Some(t) = c.cutoff_deg.or(file.cutoff_deg) {
        cfg.cutoff_deg = t;
    }
    if let Some(w) = args.half_weight.or(file.half_weight) {
        cfg.weights.half_space = parse_half_weight(&w)?;
    }
    if let Some(w) = args.sphere_weight.or(file.sphere_weight) {
        cfg.weights.sphere = parse_sphere_weight(&w)?;
    }
    cfg.checkpoint_dir = args.checkpoint_dir.or(file.checkpoint_dir);
    cfg.checkpoint_every = args.checkpoint_every.or(file.checkpoint_every);
    check_writable(&out)?;

    let sim = pipeline::simulate(&cfg)?;
    pipeline::write_simulation(&out, &sim)?;
    let emitted: usize = sim.chains.iter().map(|c| c.samples.len()).sum();
    eprintln!("wrote {emitted} samples to {} in {:.1}s", out.display(), sim.wall_time_s);
    Ok(ExitCode::SUCCESS)
}

fn predict(args: PredictArgs) -> Result<ExitCode> {
    let c = args.common;
    let file = load_config(c.config.as_deref())?;
    let ensemble = c.ensemble.or(file.ensemble).context("--ensemble is required")?;
    let rw = c.rw || file.rw.unwrap_or(false);
    let out = required_out(c.out, file.out)?;
    let mut cfg = PredictConfig::new(ensemble);
    cfg.exponents = exponents(c.exponents.as_deref(), file.exponents.as_deref(), rw)?;
    if let Some(a) = c.a.or(file.a) {
        cfg.sphere_a = a;
    }
    if let Some(t) = c.cutoff_deg.or(file.cutoff_deg) {
        cfg.cutoff_deg = t;
    }
    if let Some(s) = args.step.or(file.step) {
        cfg.step_deg = s;
    }
    let pred = pipeline::predict(&cfg)?;
    sawlab::io::write_prediction(&out, ensemble, &pred)?;
    eprintln!("wrote {} grid points to {}", pred.grid.len(), out.display());
    Ok(ExitCode::SUCCESS)
}

fn compare(args: CompareArgs) -> Result<ExitCode> {
    let file = load_config(args.config.as_deref())?;
    let req = CompareRequest {
        samples: args.samples,
        prediction: args.prediction,
        tolerance: args.tolerance.or(file.tolerance).unwrap_or(DEFAULT_TOLERANCE),
        rw_reference: args.rw_reference.or(file.rw_reference),
    };
    let (report, summary) = pipeline::compare_files(&req)?;
    if let Some(out) = args.out.or(file.out) {
        pipeline::write_comparison(&out, &report, &summary)?;
    }
    println!(
        "{} max|dF|={:.6} at {}deg ks={:.6} beyond3sigma={}/{} tol={}",
        if summary.pass { "PASS" } else { "FAIL" },
        summary.max_abs_delta,
        summary.theta_at_max_deg,
        summary.ks_stat,
        summary.beyond_3sigma,
        summary.grid_points,
        summary.tolerance,
    );
    Ok(if summary.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn validate(args: ValidateArgs) -> Result<ExitCode> {
    let file = load_config(args.config.as_deref())?;
    let mut cfg = ValidateConfig::default();
    cfg.n_steps = args.n.or(file.n).unwrap_or(cfg.n_steps);
    cfg.samples = args.samples.or(file.samples).unwrap_or(cfg.samples);
    cfg.chains = args.chains.or(file.chains).unwrap_or(cfg.chains);
    cfg.seed = args.seed.or(file.seed).unwrap_or(cfg.seed);
    cfg.workers = args.workers.or(file.workers).unwrap_or_else(default_workers);
    cfg.sphere_a = args.a.or(file.a).unwrap_or(cfg.sphere_a);
    cfg.cutoff_deg = args.cutoff_deg.or(file.cutoff_deg).unwrap_or(cfg.cutoff_deg);
    cfg.tolerance = args.tolerance.or(file.tolerance).unwrap_or(cfg.tolerance);
    cfg.b_override = args.b_override.or(file.b_override);
    let out = args.out.or(file.out);

    let report = pipeline::validate_rw(&cfg)?;
    if let Some(dir) = &out {
        pipeline::write_validation(dir, &report)?;
    }
    for e in &report.entries {
        let s = &e.summary;
        let mut line = format!(
            "{:<6} {} max|dF|={:.6} at {}deg beyond3sigma={}/{}",
            e.ensemble.tag(),
            if s.pass { "PASS" } else { "FAIL" },
            s.max_abs_delta,
            s.theta_at_max_deg,
            s.beyond_3sigma,
            s.grid_points
        );
        if let Some(u) = &e.uncorrected {
            line.push_str(&format!(" (uncorrected max|dF|={:.6})", u.max_abs_delta));
        }
        println!("{line}");
    }
    println!("{}", if report.pass { "PASS" } else { "FAIL" });
    Ok(if report.pass { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Fails early, before any simulation time is spent, if `out` cannot be created.
fn check_writable(out: &Path) -> Result<()> {
    let dir = match out.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    if !dir.is_dir() {
        bail!("output directory {} does not exist", dir.display());
    }
    tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("output directory {} is not writable", dir.display()))?;
    Ok(())
}

/// Error chain on one line, skipping causes already quoted by their parent.
fn describe(e: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in e.chain() {
        let msg = cause.to_string();
        if !out.contains(&msg) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&msg);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Predict(a) => predict(a),
        Command::Compare(a) => compare(a),
        Command::ValidateRw(a) => validate(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::from(2)
        }
    }
}
