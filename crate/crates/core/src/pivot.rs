//! Pivot-algorithm Markov chain on fixed-length walks.
//!
//! A move picks a site `i` uniformly from `0..N` and a non-identity lattice
//! symmetry `g` uniformly from the 47 candidates, then maps every later site
//! `ω(j)` to `ω(i) + g(ω(j) - ω(i))`. The proposal is symmetric (the reverse
//! move uses `g⁻¹` at the same site), so accepting exactly the proposals that
//! keep the walk valid leaves the uniform distribution on valid walks
//! stationary.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{enumerate_octahedral_group, enumerate_saws, LatticePoint, OctahedralSymmetry, Walk};

/// Domain restriction enforced on every accepted walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    None,
    /// The origin lies on the plane `z = 0`; all later sites need `z >= 1`.
    HalfSpace,
}

impl Constraint {
    pub fn admits(&self, walk: &Walk) -> bool {
        match self {
            Constraint::None => true,
            Constraint::HalfSpace => walk.sites()[1..].iter().all(|p| p.z >= 1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_steps: usize,
    /// `false` runs the ordinary random walk (no self-avoidance).
    pub self_avoiding: bool,
    pub constraint: Constraint,
    /// Attempted pivots discarded before sampling.
    pub burn_in: u64,
    pub seed: u64,
    pub chain_id: u64,
}

impl ChainConfig {
    pub fn new(n_steps: usize, self_avoiding: bool, constraint: Constraint, seed: u64, chain_id: u64) -> Self {
        ChainConfig { n_steps, self_avoiding, constraint, burn_in: default_burn_in(n_steps), seed, chain_id }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_steps < 2 {
            return Err(Error::InvalidConfig(format!("N must be at least 2, got {}", self.n_steps)));
        }
        if self.n_steps >= u32::MAX as usize {
            return Err(Error::InvalidConfig(format!("N = {} is too large", self.n_steps)));
        }
        Ok(())
    }
}

/// Ten attempted pivots per step.
pub fn default_burn_in(n_steps: usize) -> u64 {
    10 * n_steps as u64
}

/// The per-chain generator: ChaCha8 keyed by the master seed, one stream per chain.
pub fn chain_rng(seed: u64, chain_id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chain_id);
    rng
}

/// Candidate site sequence for pivoting `walk` about site `i` with `g`.
pub fn pivot_move(walk: &Walk, i: usize, g: &OctahedralSymmetry) -> Vec<LatticePoint> {
    let sites = walk.sites();
    assert!(i < walk.steps(), "pivot site {i} out of range for a {}-step walk", walk.steps());
    let pivot = sites[i];
    let mut out = sites[..=i].to_vec();
    out.extend(sites[i + 1..].iter().map(|&p| pivot + g.apply(p - pivot)));
    out
}

#[derive(Debug, Clone)]
pub struct Chain {
    config: ChainConfig,
    walk: Walk,
    attempted: u64,
    accepted: u64,
    rng: ChaCha8Rng,
    group: Vec<OctahedralSymmetry>,
    arm: Vec<LatticePoint>,
}

impl Chain {
    /// Straight rod along +z, counters at zero.
    pub fn new(config: ChainConfig) -> Result<Chain> {
        config.validate()?;
        let walk = Walk::rod(config.n_steps, config.self_avoiding);
        let rng = chain_rng(config.seed, config.chain_id);
        Ok(Chain::from_parts(config, walk, 0, 0, rng))
    }

    pub(crate) fn from_parts(config: ChainConfig, walk: Walk, attempted: u64, accepted: u64, rng: ChaCha8Rng) -> Chain {
        let arm = Vec::with_capacity(config.n_steps);
        Chain { config, walk, attempted, accepted, rng, group: enumerate_octahedral_group(), arm }
    }

    pub fn config(&self) -> &ChainConfig {
        &self.config
    }

    pub fn walk(&self) -> &Walk {
        &self.walk
    }

    pub fn attempted(&self) -> u64 {
        self.attempted
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn acceptance_fraction(&self) -> f64 {
        if self.attempted == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempted as f64
        }
    }

    pub(crate) fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    /// One attempted pivot; returns whether it was accepted.
    pub fn step(&mut self) -> bool {
        let n = self.config.n_steps;
        let i = self.rng.gen_range(0..n);
        let g = self.group[self.rng.gen_range(1..self.group.len())];
        let accepted = self.try_pivot(i, &g);
        self.attempted += 1;
        if accepted {
            self.accepted += 1;
        }
        debug_assert!(self.walk.check_invariants().is_ok());
        debug_assert!(self.config.constraint.admits(&self.walk));
        accepted
    }

    /// Run `count` attempted pivots.
    pub fn advance(&mut self, count: u64) {
        for _ in 0..count {
            self.step();
        }
    }

    /// Discard the configured burn-in.
    pub fn burn_in(&mut self) {
        self.advance(self.config.burn_in);
    }

    fn try_pivot(&mut self, i: usize, g: &OctahedralSymmetry) -> bool {
        let half_space = self.config.constraint == Constraint::HalfSpace;
        let sites = self.walk.sites();
        let pivot = sites[i];
        self.arm.clear();
        for &p in &sites[i + 1..] {
            let q = pivot + g.apply(p - pivot);
            if half_space && q.z < 1 {
                return false;
            }
            // Images of the moving arm are mutually distinct, so only the fixed
            // part 0..=i can collide with them.
            if let Some(k) = self.walk.index_of(q) {
                if k <= i {
                    return false;
                }
            }
            self.arm.push(q);
        }
        self.walk.replace_tail(i, &self.arm);
        true
    }
}

/// Result of [`uniformity_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct UniformityReport {
    pub n_walks: usize,
    pub samples: u64,
    /// Visits per enumerated walk, in enumeration order.
    pub counts: Vec<u64>,
    /// Σ ((f_k − 1/K) / σ_k)² with batch-means σ_k.
    pub chi_square: f64,
    pub degrees_of_freedom: usize,
    /// `dof + 4·sqrt(2·dof)`.
    pub threshold: f64,
    pub all_visited: bool,
}

impl UniformityReport {
    pub fn passed(&self) -> bool {
        self.all_visited && self.chi_square <= self.threshold
    }
}

const UNIFORMITY_BATCHES: usize = 32;

/// Runs `chain` for `n_steps` attempted pivots (after burn-in), bins every
/// visited walk against the brute-force list and tests for uniformity.
///
/// Consecutive states of the chain are correlated, so the per-walk variance
/// comes from batch means rather than the multinomial formula.
pub fn uniformity_check(chain: &mut Chain, n_steps: u64) -> Result<UniformityReport> {
    let n = chain.config().n_steps;
    if !chain.config().self_avoiding || chain.config().constraint != Constraint::None {
        return Err(Error::InvalidConfig("uniformity check needs an unconstrained self-avoiding chain".into()));
    }
    let walks = enumerate_saws(n)?;
    let k = walks.len();
    if n_steps < (UNIFORMITY_BATCHES * k) as u64 {
        return Err(Error::InsufficientData(format!(
            "{n_steps} samples cannot resolve {k} walks in {UNIFORMITY_BATCHES} batches"
        )));
    }
    let index: HashMap<Vec<LatticePoint>, usize> =
        walks.iter().enumerate().map(|(j, w)| (w.sites().to_vec(), j)).collect();

    chain.burn_in();
    let batch_len = n_steps / UNIFORMITY_BATCHES as u64;
    let lens: Vec<u64> = (0..UNIFORMITY_BATCHES)
        .map(|b| if b + 1 == UNIFORMITY_BATCHES { n_steps - batch_len * b as u64 } else { batch_len })
        .collect();
    let mut batch_counts = vec![vec![0u64; k]; UNIFORMITY_BATCHES];
    for (bc, &len) in batch_counts.iter_mut().zip(&lens) {
        for _ in 0..len {
            chain.step();
            let j = *index
                .get(chain.walk().sites())
                .ok_or_else(|| Error::Internal("chain visited a walk missing from the enumeration".into()))?;
            bc[j] += 1;
        }
    }
    let counts: Vec<u64> = (0..k).map(|j| batch_counts.iter().map(|bc| bc[j]).sum()).collect();

    let expected = 1.0 / k as f64;
    let m = UNIFORMITY_BATCHES as f64;
    let mut chi_square = 0.0;
    for j in 0..k {
        let freqs: Vec<f64> = batch_counts.iter().zip(&lens).map(|(bc, &len)| bc[j] as f64 / len as f64).collect();
        let mean = freqs.iter().sum::<f64>() / m;
        let var = freqs.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (m - 1.0);
        let se2 = var / m;
        if se2 <= 0.0 {
            return Err(Error::InsufficientData(format!("walk {j} has zero batch variance")));
        }
        let f = counts[j] as f64 / n_steps as f64;
        chi_square += (f - expected).powi(2) / se2;
    }
    let dof = k - 1;
    Ok(UniformityReport {
        n_walks: k,
        samples: n_steps,
        all_visited: counts.iter().all(|&c| c > 0),
        counts,
        chi_square,
        degrees_of_freedom: dof,
        threshold: dof as f64 + 4.0 * (2.0 * dof as f64).sqrt(),
    })
}
