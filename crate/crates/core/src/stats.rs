//! Weighted empirical CDFs, batch-means error bars and prediction comparison.
//!
//! Samples are accumulated into bins whose right edges are the grid points:
//! bin `k` holds `θ ∈ (grid[k-1], grid[k]]` (bin 0 holds `θ ≤ grid[0]`), and
//! one overflow bin holds everything above the last grid point. Every
//! statistic below is a ratio of bin-weight sums, so accumulators merge by
//! addition.

use serde::{Deserialize, Serialize};

use crate::ensembles::WeightedSample;
use crate::error::{Error, Result};
use crate::predictions::PredictedCdf;

/// Default number of contiguous batches per chain.
pub const DEFAULT_BATCHES: usize = 32;

/// Fewest batches per chain accepted by the batch-means estimator.
pub const MIN_BATCHES: usize = 8;

/// Largest relative profile error for which a bin is still corrected.
pub const MAX_PROFILE_REL_ERROR: f64 = 0.5;

/// `0, step, 2·step, …, max` in degrees.
pub fn uniform_grid(max_deg: f64, step_deg: f64) -> Vec<f64> {
    let n = (max_deg / step_deg).round() as usize;
    (0..=n).map(|k| (k as f64 * step_deg).min(max_deg)).collect()
}

/// One-degree grid up to the cutoff (plane ensembles) or 180° (sphere).
pub fn default_grid(max_deg: f64) -> Vec<f64> {
    uniform_grid(max_deg, 1.0)
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.is_empty() {
        return Err(Error::GridMismatch("empty grid".into()));
    }
    if !grid.windows(2).all(|w| w[0] < w[1]) {
        return Err(Error::GridMismatch("grid must be strictly increasing".into()));
    }
    Ok(())
}

#[inline]
fn bin_index(grid: &[f64], theta: f64) -> usize {
    grid.partition_point(|&g| g < theta)
}

/// Weight per grid bin plus the overflow bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinnedWeights {
    pub bins: Vec<f64>,
    pub count: u64,
    pub sum_w2: f64,
}

impl BinnedWeights {
    pub fn new(grid_len: usize) -> Self {
        BinnedWeights { bins: vec![0.0; grid_len + 1], count: 0, sum_w2: 0.0 }
    }

    pub fn add(&mut self, grid: &[f64], theta: f64, weight: f64) {
        self.bins[bin_index(grid, theta)] += weight;
        self.count += 1;
        self.sum_w2 += weight * weight;
    }

    pub fn merge(&mut self, other: &BinnedWeights) {
        for (a, b) in self.bins.iter_mut().zip(&other.bins) {
            *a += b;
        }
        self.count += other.count;
        self.sum_w2 += other.sum_w2;
    }

    pub fn total(&self) -> f64 {
        self.bins.iter().sum()
    }

    /// Cumulative weight at each grid point (overflow bin excluded).
    pub fn cumulative(&self) -> Vec<f64> {
        let mut acc = 0.0;
        self.bins[..self.bins.len() - 1]
            .iter()
            .map(|w| {
                acc += w;
                acc
            })
            .collect()
    }

    fn scaled(&self, factors: &[f64]) -> BinnedWeights {
        BinnedWeights {
            bins: self.bins.iter().zip(factors).map(|(w, f)| w / f).collect(),
            count: self.count,
            sum_w2: f64::NAN,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmpiricalCdf {
    pub grid: Vec<f64>,
    pub cdf: Vec<f64>,
    pub stderr: Vec<f64>,
    /// Samples that passed the cutoff.
    pub samples: u64,
    /// Kish effective sample size `(Σw)² / Σw²`.
    pub effective_samples: f64,
    pub total_weight: f64,
    pub cutoff_deg: Option<f64>,
    /// Per chain, per batch bin weights.
    batches: Vec<Vec<BinnedWeights>>,
}

fn included(s: &WeightedSample, cutoff: Option<f64>) -> bool {
    cutoff.is_none_or(|c| s.theta_deg <= c)
}

fn accumulate(samples: &[WeightedSample], grid: &[f64], cutoff: Option<f64>) -> BinnedWeights {
    let mut acc = BinnedWeights::new(grid.len());
    for s in samples.iter().filter(|s| included(s, cutoff)) {
        acc.add(grid, s.theta_deg, s.weight);
    }
    acc
}

fn split_batches(
    samples: &[WeightedSample],
    grid: &[f64],
    cutoff: Option<f64>,
    n_batches: usize,
) -> Result<Vec<BinnedWeights>> {
    if samples.len() < n_batches {
        return Err(Error::InsufficientData(format!("{} samples cannot fill {n_batches} batches", samples.len())));
    }
    let len = samples.len();
    Ok((0..n_batches)
        .map(|b| accumulate(&samples[b * len / n_batches..(b + 1) * len / n_batches], grid, cutoff))
        .collect())
}

/// Standard error of `Σ num / Σ den` pooled over chains, each chain split into batches.
///
/// Per chain the ratio estimator is linearised over its batches,
/// `var_c = M/(M−1) Σ_b (W_b/W_c)² (F_b − F_c)²`, which reduces to the plain
/// batch-means `s²/M` for equal batch weights; chains then combine as
/// `Σ_c (W_c/W)² var_c`.
fn pooled_ratio_stderr(chains: &[Vec<(Vec<f64>, f64)>], points: usize) -> Vec<f64> {
    let total: f64 = chains.iter().flat_map(|c| c.iter().map(|(_, w)| w)).sum();
    let mut var = vec![0.0; points];
    if total <= 0.0 {
        return var;
    }
    for chain in chains {
        let m = chain.len() as f64;
        let w_c: f64 = chain.iter().map(|(_, w)| w).sum();
        if w_c <= 0.0 || chain.len() < 2 {
            continue;
        }
        let share = w_c / total;
        for (g, v) in var.iter_mut().enumerate() {
            let f_c = chain.iter().map(|(num, _)| num[g]).sum::<f64>() / w_c;
            let s: f64 = chain
                .iter()
                .filter(|(_, w)| *w > 0.0)
                .map(|(num, w)| {
                    let r = w / w_c;
                    r * r * (num[g] / w - f_c).powi(2)
                })
                .sum();
            *v += share * share * s * m / (m - 1.0);
        }
    }
    var.into_iter().map(f64::sqrt).collect()
}

fn cdf_stderr(batches: &[Vec<BinnedWeights>], points: usize) -> Vec<f64> {
    let chains: Vec<Vec<(Vec<f64>, f64)>> =
        batches.iter().map(|chain| chain.iter().map(|b| (b.cumulative(), b.total())).collect()).collect();
    pooled_ratio_stderr(&chains, points)
}

impl EmpiricalCdf {
    /// Builds the CDF and its batch-means errors from per-chain sample streams.
    pub fn from_chains(
        chains: &[&[WeightedSample]],
        grid: &[f64],
        cutoff_deg: Option<f64>,
        n_batches: usize,
    ) -> Result<Self> {
        check_grid(grid)?;
        if n_batches < MIN_BATCHES {
            return Err(Error::InsufficientData(format!(
                "{n_batches} batches per chain, at least {MIN_BATCHES} needed"
            )));
        }
        let batches =
            chains.iter().map(|c| split_batches(c, grid, cutoff_deg, n_batches)).collect::<Result<Vec<_>>>()?;
        Self::from_batches(grid.to_vec(), cutoff_deg, batches)
    }

    fn from_batches(grid: Vec<f64>, cutoff_deg: Option<f64>, batches: Vec<Vec<BinnedWeights>>) -> Result<Self> {
        let mut pooled = BinnedWeights::new(grid.len());
        for b in batches.iter().flatten() {
            pooled.merge(b);
        }
        let total = pooled.total();
        if pooled.count == 0 || total <= 0.0 {
            return Err(Error::InsufficientData("no samples left after the cutoff".into()));
        }
        let cdf = pooled.cumulative().into_iter().map(|c| (c / total).min(1.0)).collect();
        let stderr =
            if batches.iter().all(|c| c.len() >= 2) { cdf_stderr(&batches, grid.len()) } else { vec![0.0; grid.len()] };
        Ok(EmpiricalCdf {
            cdf,
            stderr,
            samples: pooled.count,
            effective_samples: total * total / pooled.sum_w2,
            total_weight: total,
            cutoff_deg,
            batches,
            grid,
        })
    }

    /// Concatenate the chains of two CDFs on the same grid.
    pub fn merge(&self, other: &EmpiricalCdf) -> Result<EmpiricalCdf> {
        if self.grid != other.grid || self.cutoff_deg != other.cutoff_deg {
            return Err(Error::GridMismatch("cannot merge CDFs on different grids or cutoffs".into()));
        }
        let batches = self.batches.iter().chain(&other.batches).cloned().collect();
        Self::from_batches(self.grid.clone(), self.cutoff_deg, batches)
    }

    /// Pooled weight per bin (grid bins plus overflow).
    pub fn bin_weights(&self) -> Vec<f64> {
        let mut pooled = BinnedWeights::new(self.grid.len());
        for b in self.batches.iter().flatten() {
            pooled.merge(b);
        }
        pooled.bins
    }
}

/// `F̂(θ_g) = Σ w·1[θ ≤ θ_g] / Σ w` over samples passing the cutoff.
///
/// Error bars need the chain structure; see [`batch_errors`] and
/// [`EmpiricalCdf::from_chains`]. The returned `stderr` is zero.
pub fn weighted_cdf(samples: &[WeightedSample], grid: &[f64], cutoff_deg: Option<f64>) -> Result<EmpiricalCdf> {
    check_grid(grid)?;
    let acc = accumulate(samples, grid, cutoff_deg);
    EmpiricalCdf::from_batches(grid.to_vec(), cutoff_deg, vec![vec![acc]])
}

/// Batch-means standard error of `F̂` at each grid point, pooled across chains.
pub fn batch_errors(
    chains: &[&[WeightedSample]],
    grid: &[f64],
    cutoff_deg: Option<f64>,
    n_batches: usize,
) -> Result<Vec<f64>> {
    Ok(EmpiricalCdf::from_chains(chains, grid, cutoff_deg, n_batches)?.stderr)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub theta_deg: f64,
    pub cdf_pred: f64,
    pub cdf_sim: f64,
    pub delta: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub rows: Vec<ComparisonRow>,
    pub max_abs_delta: f64,
    pub theta_at_max_deg: f64,
    /// Kolmogorov-type distance `sup |F̂ − F|` over the grid; descriptive only.
    pub ks_stat: f64,
    /// Grid points with `|ΔF| > 3σ`.
    pub beyond_3sigma: usize,
    pub tolerance: f64,
    pub pass: bool,
}

impl ComparisonReport {
    /// Rows at multiples of `step_deg`, the way the selected simulation points are plotted.
    pub fn selected(&self, step_deg: f64) -> Vec<&ComparisonRow> {
        self.rows
            .iter()
            .filter(|r| {
                let k = r.theta_deg / step_deg;
                (k - k.round()).abs() < 1e-9
            })
            .collect()
    }
}

/// Fraction of grid points allowed beyond 3σ.
pub const MAX_FRACTION_BEYOND_3SIGMA: f64 = 0.05;

/// ΔF = F̂ − F_pred per grid point; passes iff `max |ΔF| ≤ tolerance` and at
/// most 5% of the points lie beyond 3σ.
pub fn compare(emp: &EmpiricalCdf, pred: &PredictedCdf, tolerance: f64) -> Result<ComparisonReport> {
    if emp.grid != pred.grid {
        return Err(Error::GridMismatch(format!(
            "simulation grid has {} points, prediction grid {}",
            emp.grid.len(),
            pred.grid.len()
        )));
    }
    if emp.cutoff_deg != pred.cutoff_deg {
        return Err(Error::GridMismatch(format!(
            "simulation cutoff {:?} differs from prediction cutoff {:?}",
            emp.cutoff_deg, pred.cutoff_deg
        )));
    }
    let rows: Vec<ComparisonRow> = emp
        .grid
        .iter()
        .zip(&emp.cdf)
        .zip(&emp.stderr)
        .zip(&pred.values)
        .map(|(((&theta_deg, &sim), &stderr), &p)| ComparisonRow {
            theta_deg,
            cdf_pred: p,
            cdf_sim: sim,
            delta: sim - p,
            stderr,
        })
        .collect();
    Ok(report_from_rows(rows, tolerance))
}

fn report_from_rows(rows: Vec<ComparisonRow>, tolerance: f64) -> ComparisonReport {
    let (mut max_abs_delta, mut theta_at_max_deg) = (0.0, rows.first().map_or(0.0, |r| r.theta_deg));
    for r in &rows {
        if r.delta.abs() > max_abs_delta {
            max_abs_delta = r.delta.abs();
            theta_at_max_deg = r.theta_deg;
        }
    }
    let beyond_3sigma = rows.iter().filter(|r| r.delta.abs() > 3.0 * r.stderr + 1e-12).count();
    let allowed = (MAX_FRACTION_BEYOND_3SIGMA * rows.len() as f64).floor() as usize;
    let pass = max_abs_delta <= tolerance && beyond_3sigma <= allowed;
    ComparisonReport { rows, max_abs_delta, theta_at_max_deg, ks_stat: max_abs_delta, beyond_3sigma, tolerance, pass }
}

/// Multiplicative per-bin distortion of a simulated density relative to its prediction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionProfile {
    pub grid: Vec<f64>,
    /// One entry per grid bin plus the overflow bin.
    pub factor: Vec<f64>,
    pub stderr: Vec<f64>,
    pub usable: Vec<bool>,
}

impl CorrectionProfile {
    pub fn identity(grid: &[f64]) -> Self {
        let n = grid.len() + 1;
        CorrectionProfile { grid: grid.to_vec(), factor: vec![1.0; n], stderr: vec![0.0; n], usable: vec![true; n] }
    }

    /// Bins that will not be corrected.
    pub fn flagged_bins(&self) -> Vec<usize> {
        self.usable.iter().enumerate().filter(|(_, &u)| !u).map(|(k, _)| k).collect()
    }

    fn effective_factor(&self, k: usize) -> f64 {
        if self.usable[k] {
            self.factor[k]
        } else {
            1.0
        }
    }
}

/// Ratio of the empirical bin masses of `emp` to those of `pred`.
///
/// Bins with no samples or no predicted mass get factor one and an infinite
/// error; bins whose relative error exceeds 50% are marked unusable.
pub fn correction_profile(emp: &EmpiricalCdf, pred: &PredictedCdf) -> Result<CorrectionProfile> {
    if emp.grid != pred.grid || emp.cutoff_deg != pred.cutoff_deg {
        return Err(Error::GridMismatch("correction profile needs matching grids and cutoffs".into()));
    }
    let n = emp.grid.len() + 1;
    let mut pred_mass = pred.bin_masses();
    pred_mass.push(1.0 - pred.values.last().copied().unwrap_or(0.0));
    let weights = emp.bin_weights();
    let total: f64 = weights.iter().sum();
    let chains: Vec<Vec<(Vec<f64>, f64)>> =
        emp.batches.iter().map(|chain| chain.iter().map(|b| (b.bins.clone(), b.total())).collect()).collect();
    let mass_err = pooled_ratio_stderr(&chains, n);

    let mut profile = CorrectionProfile::identity(&emp.grid);
    for k in 0..n {
        let m = weights[k] / total;
        let p = pred_mass[k];
        if weights[k] <= 0.0 || p <= 1e-300 {
            profile.stderr[k] = f64::INFINITY;
            profile.usable[k] = false;
            continue;
        }
        profile.factor[k] = m / p;
        profile.stderr[k] = mass_err[k] / p;
        profile.usable[k] = profile.stderr[k] <= MAX_PROFILE_REL_ERROR * profile.factor[k];
    }
    Ok(profile)
}

/// Divide every bin of `emp` by the profile factor and re-accumulate.
///
/// Batch-means errors are recomputed on the corrected batches; the profile's
/// own uncertainty is added in quadrature to first order.
pub fn apply_correction(emp: &EmpiricalCdf, profile: &CorrectionProfile) -> Result<EmpiricalCdf> {
    if emp.grid != profile.grid {
        return Err(Error::GridMismatch("profile grid differs from the CDF grid".into()));
    }
    let n = emp.grid.len() + 1;
    let factors: Vec<f64> = (0..n).map(|k| profile.effective_factor(k)).collect();
    let batches: Vec<Vec<BinnedWeights>> =
        emp.batches.iter().map(|chain| chain.iter().map(|b| b.scaled(&factors)).collect()).collect();
    let mut out = EmpiricalCdf::from_batches(emp.grid.clone(), emp.cutoff_deg, batches)?;
    out.effective_samples = emp.effective_samples;

    let weights = emp.bin_weights();
    let total: f64 = weights.iter().sum();
    let c: Vec<f64> = (0..n).map(|k| weights[k] / total / factors[k]).collect();
    let t: f64 = c.iter().sum();
    for (g, se) in out.stderr.iter_mut().enumerate() {
        let f = out.cdf[g];
        let extra: f64 = (0..n)
            .filter(|&k| profile.usable[k])
            .map(|k| {
                let indicator = if k <= g { 1.0 } else { 0.0 };
                let d = -c[k] / factors[k] * (indicator - f) / t;
                (d * profile.stderr[k]).powi(2)
            })
            .sum();
        *se = (*se * *se + extra).sqrt();
    }
    Ok(out)
}
