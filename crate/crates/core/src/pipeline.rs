//! End-to-end runs: simulate, predict, compare and the random-walk validation.
//!
//! Chains run on a worker pool but results are always assembled in chain-id
//! order, so outputs depend only on the configuration and the master seed.

use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checkpoint::ChainCheckpoint;
use crate::ensembles::{
    lattice_correction_profile, Ensemble, ExponentSet, Observable, SphereSpec, WeightScheme, WeightedSample,
    DEFAULT_CUTOFF_DEG, DEFAULT_SPHERE_A,
};
use crate::error::{Error, Result};
use crate::io::{self, SampleRecord, SCHEMA_VERSION};
use crate::pivot::{default_burn_in, Chain, ChainConfig};
use crate::predictions::{Density, PredictedCdf};
use crate::stats::{self, apply_correction, compare, default_grid, ComparisonReport, EmpiricalCdf, DEFAULT_BATCHES};

/// Desk-scale defaults.
pub const DEFAULT_N: usize = 2000;
pub const DEFAULT_SAMPLES: u64 = 1_000_000;
pub const DEFAULT_CHAINS: usize = 8;
pub const DEFAULT_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationConfig {
    pub ensemble: Ensemble,
    pub n_steps: usize,
    /// Total samples emitted across all chains.
    pub samples: u64,
    pub chains: usize,
    pub seed: u64,
    /// Ordinary random walk instead of the self-avoiding walk.
    pub random_walk: bool,
    pub exponents: ExponentSet,
    #[serde(default)]
    pub weights: WeightScheme,
    pub sphere_a: f64,
    pub cutoff_deg: f64,
    /// Attempted pivots before sampling; `None` means 10·N.
    pub burn_in: Option<u64>,
    /// Worker threads; does not affect results.
    pub workers: usize,
    #[serde(default)]
    pub checkpoint_dir: Option<PathBuf>,
    /// Attempted pivots between checkpoints when `checkpoint_dir` is set.
    #[serde(default)]
    pub checkpoint_every: Option<u64>,
}

impl SimulationConfig {
    pub fn new(ensemble: Ensemble) -> Self {
        SimulationConfig {
            ensemble,
            n_steps: DEFAULT_N,
            samples: DEFAULT_SAMPLES,
            chains: DEFAULT_CHAINS,
            seed: 0,
            random_walk: false,
            exponents: ExponentSet::saw_3d(),
            weights: WeightScheme::default(),
            sphere_a: DEFAULT_SPHERE_A,
            cutoff_deg: DEFAULT_CUTOFF_DEG,
            burn_in: None,
            workers: 1,
            checkpoint_dir: None,
            checkpoint_every: None,
        }
    }

    /// Random-walk mode with the matching exponents.
    pub fn random_walk(mut self) -> Self {
        self.random_walk = true;
        self.exponents = ExponentSet::random_walk();
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::InvalidConfig(format!("N must be at least 2, got {}", self.n_steps)));
        }
        if self.samples == 0 {
            return Err(Error::InvalidConfig("sample budget must be positive".into()));
        }
        if self.chains == 0 {
            return Err(Error::InvalidConfig("need at least one chain".into()));
        }
        if self.workers == 0 {
            return Err(Error::InvalidConfig("need at least one worker".into()));
        }
        if !(self.cutoff_deg > 0.0 && self.cutoff_deg < 90.0) {
            return Err(Error::InvalidConfig(format!("cutoff must lie in (0, 90), got {}", self.cutoff_deg)));
        }
        if self.checkpoint_every == Some(0) {
            return Err(Error::InvalidConfig("checkpoint interval must be positive".into()));
        }
        SphereSpec::new(self.sphere_a)?;
        Ok(())
    }

    pub fn observable(&self) -> Result<Observable> {
        Ok(Observable {
            ensemble: self.ensemble,
            exponents: self.exponents,
            weights: self.weights,
            sphere: SphereSpec::new(self.sphere_a)?,
            cutoff_deg: self.cutoff_deg,
        })
    }

    pub fn chain_config(&self, chain_id: u64) -> ChainConfig {
        ChainConfig {
            n_steps: self.n_steps,
            self_avoiding: !self.random_walk,
            constraint: self.ensemble.constraint(),
            burn_in: self.burn_in.unwrap_or_else(|| default_burn_in(self.n_steps)),
            seed: self.seed,
            chain_id,
        }
    }

    /// Samples owed by chain `k`: an even split, remainder to the first chains.
    pub fn quota(&self, k: usize) -> u64 {
        let base = self.samples / self.chains as u64;
        base + u64::from((k as u64) < self.samples % self.chains as u64)
    }

    /// Conditioning cutoff as applied at analysis time.
    pub fn analysis_cutoff(&self) -> Option<f64> {
        self.ensemble.is_conditioned().then_some(self.cutoff_deg)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainSummary {
    pub chain_id: u64,
    pub burn_in: u64,
    pub attempted: u64,
    pub accepted: u64,
    pub acceptance_fraction: f64,
    pub samples: u64,
}

#[derive(Debug, Clone)]
pub struct ChainRun {
    pub summary: ChainSummary,
    /// `(attempt index, sample)` in emission order.
    pub samples: Vec<(u64, WeightedSample)>,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub config: SimulationConfig,
    pub chains: Vec<ChainRun>,
    pub wall_time_s: f64,
}

impl SimulationOutput {
    pub fn records(&self) -> impl Iterator<Item = SampleRecord> + '_ {
        self.chains
            .iter()
            .flat_map(|c| c.samples.iter().map(move |(attempt, s)| SampleRecord::new(s, c.summary.chain_id, *attempt)))
    }

    pub fn chain_samples(&self) -> Vec<Vec<WeightedSample>> {
        self.chains.iter().map(|c| c.samples.iter().map(|(_, s)| *s).collect()).collect()
    }

    /// Empirical CDF on the default grid with batch-means errors.
    pub fn empirical_cdf(&self, grid: &[f64]) -> Result<EmpiricalCdf> {
        let chains = self.chain_samples();
        let refs: Vec<&[WeightedSample]> = chains.iter().map(|c| c.as_slice()).collect();
        EmpiricalCdf::from_chains(&refs, grid, self.config.analysis_cutoff(), DEFAULT_BATCHES)
    }
}

/// Attempts allowed per owed sample before a chain gives up.
const MAX_ATTEMPTS_PER_SAMPLE: u64 = 10_000;

fn run_chain(cfg: &SimulationConfig, observable: &Observable, k: usize) -> Result<ChainRun> {
    let chain_id = k as u64;
    let quota = cfg.quota(k);
    let mut chain = Chain::new(cfg.chain_config(chain_id))?;
    chain.burn_in();
    let burn_in = chain.attempted();
    let checkpoint = cfg
        .checkpoint_dir
        .as_ref()
        .map(|dir| (dir.join(format!("chain-{chain_id:04}.json")), cfg.checkpoint_every.unwrap_or(1_000_000)));
    let limit = quota.saturating_mul(MAX_ATTEMPTS_PER_SAMPLE).max(1_000_000);
    let mut samples = Vec::with_capacity(quota as usize);
    while (samples.len() as u64) < quota {
        if chain.attempted() - burn_in >= limit {
            return Err(Error::InsufficientData(format!(
                "chain {chain_id} produced {} of {quota} samples in {limit} attempts",
                samples.len()
            )));
        }
        chain.step();
        if let Some(s) = observable.sample(chain.walk())? {
            samples.push((chain.attempted(), s));
        }
        if let Some((path, every)) = &checkpoint {
            if (chain.attempted() - burn_in) % every == 0 {
                ChainCheckpoint::capture(&chain).save(path)?;
            }
        }
    }
    if let Some((path, _)) = &checkpoint {
        ChainCheckpoint::capture(&chain).save(path)?;
    }
    Ok(ChainRun {
        summary: ChainSummary {
            chain_id,
            burn_in,
            attempted: chain.attempted(),
            accepted: chain.accepted(),
            acceptance_fraction: chain.acceptance_fraction(),
            samples: quota,
        },
        samples,
    })
}

/// Runs every chain (burn-in, then sampling after each attempted pivot).
pub fn simulate(cfg: &SimulationConfig) -> Result<SimulationOutput> {
    cfg.validate()?;
    let observable = cfg.observable()?;
    if let Some(dir) = &cfg.checkpoint_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.workers).build()?;
    let chains = pool.install(|| {
        (0..cfg.chains).into_par_iter().map(|k| run_chain(cfg, &observable, k)).collect::<Result<Vec<_>>>()
    })?;
    Ok(SimulationOutput { config: cfg.clone(), chains, wall_time_s: start.elapsed().as_secs_f64() })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleMetadata {
    pub schema_version: u32,
    pub kind: String,
    pub version: String,
    pub config: SimulationConfig,
    /// Exponent applied to the walk scale in the importance weight.
    pub weight_exponent: f64,
    pub b: f64,
    pub total_samples: u64,
    pub chains: Vec<ChainSummary>,
    pub wall_time_s: f64,
    /// Command line reproducing the run.
    pub rerun: String,
}

pub fn weight_exponent(cfg: &SimulationConfig) -> f64 {
    match cfg.ensemble {
        Ensemble::Full => cfg.exponents.weight_full(),
        _ => cfg.exponents.weight_boundary(),
    }
}

pub fn rerun_command(cfg: &SimulationConfig, out: &Path) -> String {
    let e = &cfg.exponents;
    let mut cmd = format!(
        "sawlab simulate --ensemble {} --N {} --samples {} --chains {} --seed {} --a {} --cutoff-deg {} \
         --exponents nu={},gamma={},gamma1={} --half-weight {} --sphere-weight {}",
        cfg.ensemble,
        cfg.n_steps,
        cfg.samples,
        cfg.chains,
        cfg.seed,
        cfg.sphere_a,
        cfg.cutoff_deg,
        e.nu(),
        e.gamma(),
        e.gamma1(),
        match cfg.weights.half_space {
            crate::ensembles::HalfSpaceWeight::Height => "height",
            crate::ensembles::HalfSpaceWeight::EndpointNorm => "endpoint-norm",
        },
        match cfg.weights.sphere {
            crate::ensembles::SphereWeight::Flux => "flux",
            crate::ensembles::SphereWeight::BoundaryNorm => "boundary-norm",
        },
    );
    if cfg.random_walk {
        cmd.push_str(" --rw");
    }
    if let Some(b) = cfg.burn_in {
        cmd.push_str(&format!(" --burn-in {b}"));
    }
    cmd.push_str(&format!(" --out {}", out.display()));
    cmd
}

/// Writes `out` (samples) and `out.json` (metadata).
pub fn write_simulation(out: &Path, sim: &SimulationOutput) -> Result<()> {
    io::write_samples(out, sim.records())?;
    let meta = SampleMetadata {
        schema_version: SCHEMA_VERSION,
        kind: "samples".into(),
        version: crate::VERSION.into(),
        config: sim.config.clone(),
        weight_exponent: weight_exponent(&sim.config),
        b: sim.config.exponents.b(),
        total_samples: sim.chains.iter().map(|c| c.samples.len() as u64).sum(),
        chains: sim.chains.iter().map(|c| c.summary.clone()).collect(),
        wall_time_s: sim.wall_time_s,
        rerun: rerun_command(&sim.config, out),
    };
    io::write_json(&io::sidecar_path(out), &meta)
}

pub fn read_sample_metadata(samples: &Path) -> Result<SampleMetadata> {
    let path = io::sidecar_path(samples);
    let meta: SampleMetadata = io::read_json(&path)?;
    io::check_schema(&path, meta.schema_version)?;
    Ok(meta)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictConfig {
    pub ensemble: Ensemble,
    pub exponents: ExponentSet,
    pub sphere_a: f64,
    pub cutoff_deg: f64,
    /// Grid spacing in degrees.
    pub step_deg: f64,
}

impl PredictConfig {
    pub fn new(ensemble: Ensemble) -> Self {
        PredictConfig {
            ensemble,
            exponents: ExponentSet::saw_3d(),
            sphere_a: DEFAULT_SPHERE_A,
            cutoff_deg: DEFAULT_CUTOFF_DEG,
            step_deg: 1.0,
        }
    }
}

pub fn density_for(ensemble: Ensemble, b: f64, a: f64) -> Density {
    match ensemble {
        Ensemble::Full => Density::Bisecting,
        Ensemble::Half => Density::HalfSpace { b },
        Ensemble::Sphere => Density::Sphere { a, b },
    }
}

/// Grid used for `ensemble`: 1° (or `step`) up to the cutoff, or 180° for the sphere.
pub fn grid_for(ensemble: Ensemble, cutoff_deg: f64, step_deg: f64) -> Vec<f64> {
    let max = if ensemble.is_conditioned() { cutoff_deg } else { 180.0 };
    if step_deg == 1.0 {
        default_grid(max)
    } else {
        stats::uniform_grid(max, step_deg)
    }
}

pub fn predict(cfg: &PredictConfig) -> Result<PredictedCdf> {
    SphereSpec::new(cfg.sphere_a)?;
    if !(cfg.step_deg > 0.0) {
        return Err(Error::InvalidConfig(format!("grid step must be positive, got {}", cfg.step_deg)));
    }
    let density = density_for(cfg.ensemble, cfg.exponents.b(), cfg.sphere_a);
    let grid = grid_for(cfg.ensemble, cfg.cutoff_deg, cfg.step_deg);
    let cutoff = cfg.ensemble.is_conditioned().then_some(cfg.cutoff_deg);
    PredictedCdf::new(density, &grid, cutoff)
}

fn chains_of(records: &[SampleRecord]) -> Vec<Vec<WeightedSample>> {
    io::group_by_chain(records).into_iter().map(|(_, v)| v).collect()
}

fn refs(chains: &[Vec<WeightedSample>]) -> Vec<&[WeightedSample]> {
    chains.iter().map(|c| c.as_slice()).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareSummary {
    pub schema_version: u32,
    pub ensemble: Ensemble,
    pub max_abs_delta: f64,
    pub theta_at_max_deg: f64,
    pub ks_stat: f64,
    pub beyond_3sigma: usize,
    pub grid_points: usize,
    pub tolerance: f64,
    pub effective_samples: f64,
    pub samples: u64,
    pub corrected: bool,
    pub pass: bool,
}

impl CompareSummary {
    pub fn new(ensemble: Ensemble, report: &ComparisonReport, emp: &EmpiricalCdf, corrected: bool) -> Self {
        CompareSummary {
            schema_version: SCHEMA_VERSION,
            ensemble,
            max_abs_delta: report.max_abs_delta,
            theta_at_max_deg: report.theta_at_max_deg,
            ks_stat: report.ks_stat,
            beyond_3sigma: report.beyond_3sigma,
            grid_points: report.rows.len(),
            tolerance: report.tolerance,
            effective_samples: emp.effective_samples,
            samples: emp.samples,
            corrected,
            pass: report.pass,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CompareRequest {
    pub samples: PathBuf,
    pub prediction: PathBuf,
    pub tolerance: f64,
    /// Random-walk sphere samples whose lattice-correction profile is divided out.
    pub rw_reference: Option<PathBuf>,
}

/// Compares a sample file with a prediction file.
pub fn compare_files(req: &CompareRequest) -> Result<(ComparisonReport, CompareSummary)> {
    let meta = read_sample_metadata(&req.samples)?;
    let (pred_ensemble, pred) = io::read_prediction(&req.prediction)?;
    if pred_ensemble != meta.config.ensemble {
        return Err(Error::InvalidConfig(format!(
            "samples are from the {} ensemble but the prediction is for {}",
            meta.config.ensemble, pred_ensemble
        )));
    }
    let cutoff = meta.config.analysis_cutoff();
    if cutoff != pred.cutoff_deg {
        return Err(Error::GridMismatch(format!(
            "sample cutoff {cutoff:?} differs from prediction cutoff {:?}",
            pred.cutoff_deg
        )));
    }
    let records = io::read_samples(&req.samples)?;
    if let Some(r) = records.iter().find(|r| r.ensemble != meta.config.ensemble) {
        return Err(Error::Schema {
            file: req.samples.clone(),
            detail: format!("row tagged '{}' in a {} sample file", r.ensemble, meta.config.ensemble),
        });
    }
    let chains = chains_of(&records);
    let mut emp = EmpiricalCdf::from_chains(&refs(&chains), &pred.grid, cutoff, DEFAULT_BATCHES)?;
    let corrected = match &req.rw_reference {
        Some(path) => {
            if meta.config.ensemble != Ensemble::Sphere {
                return Err(Error::InvalidConfig("lattice correction applies to the sphere ensemble only".into()));
            }
            let rw_meta = read_sample_metadata(path)?;
            if rw_meta.config.ensemble != Ensemble::Sphere || rw_meta.config.sphere_a != meta.config.sphere_a {
                return Err(Error::InvalidConfig(format!(
                    "reference {} is not a sphere run with a = {}",
                    path.display(),
                    meta.config.sphere_a
                )));
            }
            let rw = chains_of(&io::read_samples(path)?);
            let profile = lattice_correction_profile(
                &refs(&rw),
                &SphereSpec::new(meta.config.sphere_a)?,
                &pred.grid,
                DEFAULT_BATCHES,
            )?;
            emp = apply_correction(&emp, &profile)?;
            true
        }
        None => false,
    };
    let report = compare(&emp, &pred, req.tolerance)?;
    let summary = CompareSummary::new(meta.config.ensemble, &report, &emp, corrected);
    Ok((report, summary))
}

/// Writes `out` (comparison rows) and `out.json` (summary).
pub fn write_comparison(out: &Path, report: &ComparisonReport, summary: &CompareSummary) -> Result<()> {
    io::write_comparison(out, report)?;
    io::write_json(&io::sidecar_path(out), summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidateConfig {
    pub n_steps: usize,
    /// Samples per ensemble.
    pub samples: u64,
    pub chains: usize,
    pub seed: u64,
    /// Not serialised: reports must not depend on it.
    #[serde(skip, default = "one")]
    pub workers: usize,
    pub sphere_a: f64,
    pub cutoff_deg: f64,
    pub tolerance: f64,
    /// Replace the prediction's `b` (negative control).
    pub b_override: Option<f64>,
}

fn one() -> usize {
    1
}

impl Default for ValidateConfig {
    fn default() -> Self {
        ValidateConfig {
            n_steps: DEFAULT_N,
            samples: DEFAULT_SAMPLES,
            chains: DEFAULT_CHAINS,
            seed: 0,
            workers: 1,
            sphere_a: DEFAULT_SPHERE_A,
            cutoff_deg: DEFAULT_CUTOFF_DEG,
            tolerance: DEFAULT_TOLERANCE,
            b_override: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationEntry {
    pub ensemble: Ensemble,
    pub b: Option<f64>,
    pub summary: CompareSummary,
    pub rows: Vec<stats::ComparisonRow>,
    /// Sphere only: the comparison before the lattice correction.
    pub uncorrected: Option<CompareSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub schema_version: u32,
    pub version: String,
    pub config: ValidateConfig,
    pub entries: Vec<ValidationEntry>,
    pub pass: bool,
}

/// Random-walk simulations of all three ensembles, in [`Ensemble::ALL`] order.
pub fn rw_simulations(cfg: &ValidateConfig) -> Result<Vec<SimulationOutput>> {
    Ensemble::ALL
        .iter()
        .map(|&ensemble| {
            let mut sim_cfg = SimulationConfig::new(ensemble).random_walk();
            sim_cfg.n_steps = cfg.n_steps;
            sim_cfg.samples = cfg.samples;
            sim_cfg.chains = cfg.chains;
            sim_cfg.seed = cfg.seed;
            sim_cfg.workers = cfg.workers;
            sim_cfg.sphere_a = cfg.sphere_a;
            sim_cfg.cutoff_deg = cfg.cutoff_deg;
            simulate(&sim_cfg)
        })
        .collect()
}

/// Compares random-walk runs with the `b = 3/2` predictions (or `b_override`).
///
/// The sphere run is split by chain parity: the even chains calibrate the
/// lattice-correction profile, which is then applied to the odd chains.
pub fn rw_report(cfg: &ValidateConfig, sims: &[SimulationOutput]) -> Result<ValidationReport> {
    let b = cfg.b_override.unwrap_or(ExponentSet::random_walk().b());
    let mut entries = Vec::new();
    for sim in sims {
        let ensemble = sim.config.ensemble;
        let grid = grid_for(ensemble, sim.config.cutoff_deg, 1.0);
        let cutoff = sim.config.analysis_cutoff();
        let pred = PredictedCdf::new(density_for(ensemble, b, sim.config.sphere_a), &grid, cutoff)?;
        let chains = sim.chain_samples();
        let entry = if ensemble == Ensemble::Sphere {
            if chains.len() < 2 {
                return Err(Error::InvalidConfig("sphere validation needs at least two chains".into()));
            }
            let calib: Vec<&[WeightedSample]> = chains.iter().step_by(2).map(|c| c.as_slice()).collect();
            let test: Vec<&[WeightedSample]> = chains.iter().skip(1).step_by(2).map(|c| c.as_slice()).collect();
            let spec = SphereSpec::new(sim.config.sphere_a)?;
            let profile = lattice_correction_profile(&calib, &spec, &grid, DEFAULT_BATCHES)?;
            let raw = EmpiricalCdf::from_chains(&test, &grid, cutoff, DEFAULT_BATCHES)?;
            let raw_report = compare(&raw, &pred, cfg.tolerance)?;
            let emp = apply_correction(&raw, &profile)?;
            let report = compare(&emp, &pred, cfg.tolerance)?;
            ValidationEntry {
                ensemble,
                b: Some(b),
                summary: CompareSummary::new(ensemble, &report, &emp, true),
                rows: report.rows,
                uncorrected: Some(CompareSummary::new(ensemble, &raw_report, &raw, false)),
            }
        } else {
            let emp = EmpiricalCdf::from_chains(&refs(&chains), &grid, cutoff, DEFAULT_BATCHES)?;
            let report = compare(&emp, &pred, cfg.tolerance)?;
            ValidationEntry {
                ensemble,
                b: (ensemble == Ensemble::Half).then_some(b),
                summary: CompareSummary::new(ensemble, &report, &emp, false),
                rows: report.rows,
                uncorrected: None,
            }
        };
        entries.push(entry);
    }
    let pass = entries.iter().all(|e| e.summary.pass);
    Ok(ValidationReport {
        schema_version: SCHEMA_VERSION,
        version: crate::VERSION.into(),
        config: cfg.clone(),
        entries,
        pass,
    })
}

/// [`rw_simulations`] followed by [`rw_report`].
pub fn validate_rw(cfg: &ValidateConfig) -> Result<ValidationReport> {
    rw_report(cfg, &rw_simulations(cfg)?)
}

/// Writes `report.json` plus one `rw-<ensemble>.csv` comparison per ensemble into `dir`.
pub fn write_validation(dir: &Path, report: &ValidationReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    for e in &report.entries {
        let rows = ComparisonReport {
            rows: e.rows.clone(),
            max_abs_delta: e.summary.max_abs_delta,
            theta_at_max_deg: e.summary.theta_at_max_deg,
            ks_stat: e.summary.ks_stat,
            beyond_3sigma: e.summary.beyond_3sigma,
            tolerance: e.summary.tolerance,
            pass: e.summary.pass,
        };
        io::write_comparison(&dir.join(format!("rw-{}.csv", e.ensemble)), &rows)?;
    }
    io::write_json(&dir.join("report.json"), report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(ensemble: Ensemble) -> SimulationConfig {
        let mut c = SimulationConfig::new(ensemble);
        c.n_steps = 40;
        c.samples = 640;
        c.chains = 2;
        c.seed = 7;
        c
    }

    #[test]
    fn quotas_sum_to_budget() {
        let mut c = small(Ensemble::Full);
        c.samples = 10;
        c.chains = 3;
        assert_eq!((0..3).map(|k| c.quota(k)).collect::<Vec<_>>(), vec![4, 3, 3]);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut c = small(Ensemble::Half);
        c.samples = 0;
        assert!(matches!(simulate(&c), Err(Error::InvalidConfig(m)) if m.contains("budget")));
        let mut c = small(Ensemble::Half);
        c.n_steps = 1;
        assert!(matches!(simulate(&c), Err(Error::InvalidConfig(m)) if m.contains("N must")));
        let mut c = small(Ensemble::Sphere);
        c.sphere_a = 1.0;
        assert!(simulate(&c).is_err());
    }

    #[test]
    fn simulate_is_deterministic_and_worker_independent() {
        for ensemble in Ensemble::ALL {
            let mut c = small(ensemble);
            let a: Vec<SampleRecord> = simulate(&c).unwrap().records().collect();
            c.workers = 2;
            let b: Vec<SampleRecord> = simulate(&c).unwrap().records().collect();
            assert_eq!(a, b);
            assert_eq!(a.len(), 640);
        }
    }

    #[test]
    fn predict_examples() {
        let p = predict(&PredictConfig::new(Ensemble::Full)).unwrap();
        let s85 = 85f64.to_radians().sin().powi(2);
        assert!((p.values[45] - 0.5 / s85).abs() < 1e-14);

        let mut c = PredictConfig::new(Ensemble::Sphere);
        c.sphere_a = 0.0;
        let p = predict(&c).unwrap();
        assert_eq!(p.grid.len(), 181);
        for (t, f) in p.grid.iter().zip(&p.values) {
            assert!((f - (1.0 - t.to_radians().cos()) / 2.0).abs() < 1e-14);
        }

        let mut c = PredictConfig::new(Ensemble::Half);
        c.exponents = ExponentSet::random_walk();
        let p = predict(&c).unwrap();
        let norm = 1.0 - 85f64.to_radians().cos();
        assert!((p.values[60] - 0.5 / norm).abs() < 1e-14);

        let mut c = PredictConfig::new(Ensemble::Half);
        c.exponents = ExponentSet::new(0.5, 1.0, 0.9, 3.0).unwrap();
        assert!(c.exponents.b() <= 1.0);
        assert!(predict(&c).is_err());
    }
}
