//! Seeded simulation of `Z = XY` and the order-statistic estimators used to
//! check the tail approximations.
//!
//! Sample `i` always consumes words `4i .. 4i + 4` of a single ChaCha8
//! keystream, so a run is a pure function of the seed and the sample count:
//! chunk boundaries only decide which thread produces which samples. Chunks
//! keep the largest and smallest `K` values they see plus moment accumulators,
//! and are merged in chunk order.

mod normal;

pub use normal::inverse_normal_cdf;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::exact::ProductParams;

/// Slack added to the block size on top of the largest `k` requested.
pub const BLOCK_SLACK: usize = 64;
const WORDS_PER_SAMPLE: u128 = 4;

/// Description of a simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_samples: u64,
    pub seed: u64,
    pub n_chunks: usize,
    /// Levels `p` whose upper-tail estimators must be available.
    pub upper_levels: Vec<f64>,
    /// Levels `p` whose lower-tail order statistics must be available.
    pub lower_levels: Vec<f64>,
    /// Points `x` at which `P(Z > x)` is counted over the full stream.
    pub thresholds: Vec<f64>,
    /// Cap on the bytes held in order-statistic blocks across chunks.
    pub memory_budget: usize,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        Self {
            n_samples: 10_000_000,
            seed: 0,
            n_chunks: std::thread::available_parallelism().map_or(1, |n| n.get()),
            upper_levels: Vec::new(),
            lower_levels: Vec::new(),
            thresholds: Vec::new(),
            memory_budget: 1 << 30,
        }
    }
}

impl SimulationConfig {
    pub fn new(n_samples: u64, seed: u64) -> Self {
        Self {
            n_samples,
            seed,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples == 0 {
            return Err(Error::InvalidParameter("n_samples must be >= 1".into()));
        }
        if self.n_chunks == 0 {
            return Err(Error::InvalidParameter("n_chunks must be >= 1".into()));
        }
        for &p in self.upper_levels.iter().chain(&self.lower_levels) {
            if !(p > 0.0 && p < 1.0) {
                return Err(Error::Domain(format!("level must lie in (0, 1), got {p}")));
            }
        }
        if self.thresholds.iter().any(|x| x.is_nan()) {
            return Err(Error::Domain("thresholds must not be NaN".into()));
        }
        Ok(())
    }

    /// `ceil(N (1 - p_min)) + slack` for the upper block.
    pub fn top_block_size(&self) -> usize {
        let tail = self
            .upper_levels
            .iter()
            .map(|p| 1.0 - p)
            .fold(0.0, f64::max);
        block_size(self.n_samples, tail)
    }

    /// `ceil(N p_max) + slack` for the lower block.
    pub fn bottom_block_size(&self) -> usize {
        let tail = self.lower_levels.iter().copied().fold(0.0, f64::max);
        block_size(self.n_samples, tail)
    }
}

fn block_size(n: u64, tail: f64) -> usize {
    // shave rounding noise so that 1e6 * (1 - 0.99) counts as 10000
    let k = (n as f64 * tail * (1.0 - 1e-12)).ceil() as usize + BLOCK_SLACK;
    k.min(n as usize)
}

/// Order statistics and moments of a simulated sample.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSummary {
    pub n: u64,
    /// Largest values, in decreasing order.
    pub sorted_top_block: Vec<f64>,
    /// Smallest values, in increasing order.
    pub sorted_bottom_block: Vec<f64>,
    pub mean: f64,
    /// Sum of squared deviations from the mean.
    pub m2: f64,
    /// `(x, number of samples > x)` for each configured threshold.
    pub exceedances: Vec<(f64, u64)>,
}

impl EmpiricalSummary {
    /// Summary of an in-memory sample, with blocks of the given sizes.
    pub fn from_samples(samples: &[f64], top: usize, bottom: usize, thresholds: &[f64]) -> Self {
        let mut acc = ChunkAccumulator::new(top, bottom, thresholds);
        for &x in samples {
            acc.push(x);
        }
        acc.finish().into_summary()
    }

    pub fn variance(&self) -> f64 {
        if self.n < 2 {
            0.0
        } else {
            self.m2 / (self.n - 1) as f64
        }
    }

    /// Standard error of the sample mean.
    pub fn mean_standard_error(&self) -> f64 {
        (self.variance() / self.n as f64).sqrt()
    }
}

/// Per-chunk state: bounded buffers for the extremes, Welford moments and
/// threshold counters.
struct ChunkAccumulator {
    top_k: usize,
    bottom_k: usize,
    top: Vec<f64>,
    bottom: Vec<f64>,
    n: u64,
    mean: f64,
    m2: f64,
    thresholds: Vec<f64>,
    counts: Vec<u64>,
}

impl ChunkAccumulator {
    fn new(top_k: usize, bottom_k: usize, thresholds: &[f64]) -> Self {
        Self {
            top_k,
            bottom_k,
            top: Vec::with_capacity(2 * top_k),
            bottom: Vec::with_capacity(2 * bottom_k),
            n: 0,
            mean: 0.0,
            m2: 0.0,
            thresholds: thresholds.to_vec(),
            counts: vec![0; thresholds.len()],
        }
    }

    #[inline]
    fn push(&mut self, x: f64) {
        self.n += 1;
        let d = x - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (x - self.mean);
        for (t, c) in self.thresholds.iter().zip(self.counts.iter_mut()) {
            if x > *t {
                *c += 1;
            }
        }
        if self.top_k > 0 {
            self.top.push(x);
            if self.top.len() == 2 * self.top_k {
                keep_largest(&mut self.top, self.top_k);
            }
        }
        if self.bottom_k > 0 {
            self.bottom.push(x);
            if self.bottom.len() == 2 * self.bottom_k {
                keep_smallest(&mut self.bottom, self.bottom_k);
            }
        }
    }

    fn finish(mut self) -> Self {
        keep_largest(&mut self.top, self.top_k);
        keep_smallest(&mut self.bottom, self.bottom_k);
        self
    }

    /// Chan et al. pairwise combination; `other` follows `self`.
    fn merge(mut self, other: Self) -> Self {
        let n = self.n + other.n;
        if n > 0 {
            let d = other.mean - self.mean;
            let (na, nb) = (self.n as f64, other.n as f64);
            self.mean += d * nb / n as f64;
            self.m2 += other.m2 + d * d * na * nb / n as f64;
        }
        self.n = n;
        for (c, o) in self.counts.iter_mut().zip(&other.counts) {
            *c += o;
        }
        self.top.extend_from_slice(&other.top);
        self.bottom.extend_from_slice(&other.bottom);
        keep_largest(&mut self.top, self.top_k);
        keep_smallest(&mut self.bottom, self.bottom_k);
        self
    }

    fn into_summary(mut self) -> EmpiricalSummary {
        self.top.sort_unstable_by(|a, b| b.total_cmp(a));
        self.bottom.sort_unstable_by(|a, b| a.total_cmp(b));
        EmpiricalSummary {
            n: self.n,
            sorted_top_block: self.top,
            sorted_bottom_block: self.bottom,
            mean: self.mean,
            m2: self.m2,
            exceedances: self.thresholds.into_iter().zip(self.counts).collect(),
        }
    }
}

fn keep_largest(v: &mut Vec<f64>, k: usize) {
    if v.len() > k {
        v.select_nth_unstable_by(k, |a, b| b.total_cmp(a));
        v.truncate(k);
    }
}

fn keep_smallest(v: &mut Vec<f64>, k: usize) {
    if v.len() > k {
        v.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
        v.truncate(k);
    }
}

/// `X Y` for the standard normal deviates `u`, `v`:
/// `X = mu_x + sigma_x u`, `Y = mu_y + sigma_y (rho u + sqrt(1 - rho^2) v)`.
#[inline]
pub fn sample_product(params: &ProductParams, u: f64, v: f64) -> f64 {
    let rho = params.rho();
    let x = params.mu_x() + params.sigma_x() * u;
    let y = params.mu_y() + params.sigma_y() * (rho * u + (1.0 - rho * rho).sqrt() * v);
    x * y
}

/// Uniform on the open interval `(0, 1)` from the top 53 bits.
#[inline]
fn open_uniform(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Runs `sampler` on the uniform pairs of the configured stream and summarises
/// the results.
pub fn simulate_with<F>(config: &SimulationConfig, sampler: F) -> Result<EmpiricalSummary>
where
    F: Fn(f64, f64) -> f64 + Sync,
{
    config.validate()?;
    let top_k = config.top_block_size();
    let bottom_k = config.bottom_block_size();
    let chunks = config.n_chunks.min(config.n_samples as usize).max(1);
    let bytes = (top_k + bottom_k)
        .saturating_mul(2 * std::mem::size_of::<f64>())
        .saturating_mul(chunks.saturating_add(1));
    if bytes > config.memory_budget {
        return Err(Error::Resource(format!(
            "order-statistic blocks need {bytes} bytes, budget is {}",
            config.memory_budget
        )));
    }
    let n = config.n_samples;
    let bounds: Vec<(u64, u64)> = (0..chunks as u64)
        .map(|c| {
            let lo = (n as u128 * c as u128 / chunks as u128) as u64;
            let hi = (n as u128 * (c + 1) as u128 / chunks as u128) as u64;
            (lo, hi)
        })
        .collect();
    let parts: Vec<ChunkAccumulator> = bounds
        .par_iter()
        .map(|&(lo, hi)| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            rng.set_word_pos(WORDS_PER_SAMPLE * lo as u128);
            let mut acc = ChunkAccumulator::new(top_k, bottom_k, &config.thresholds);
            for _ in lo..hi {
                let u = open_uniform(rng.next_u64());
                let v = open_uniform(rng.next_u64());
                acc.push(sampler(u, v));
            }
            acc.finish()
        })
        .collect();
    let merged = parts
        .into_iter()
        .reduce(ChunkAccumulator::merge)
        .expect("at least one chunk");
    Ok(merged.into_summary())
}

/// Simulates `n_samples` draws of `Z` with normals by inversion.
pub fn simulate(params: &ProductParams, config: &SimulationConfig) -> Result<EmpiricalSummary> {
    simulate_with(config, |u1, u2| {
        sample_product(params, inverse_normal_cdf(u1), inverse_normal_cdf(u2))
    })
}

/// `k = floor(N (1 - p)) + 1`.
pub fn order_index(n: u64, p: f64) -> u64 {
    (n as f64 * (1.0 - p)).floor() as u64 + 1
}

fn check_level(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("level must lie in (0, 1), got {p}")))
    }
}

/// The `k`-th largest sample with `k = floor(N (1 - p)) + 1`.
pub fn empirical_quantile(summary: &EmpiricalSummary, p: f64) -> Result<f64> {
    check_level(p)?;
    let k = order_index(summary.n, p);
    let top = &summary.sorted_top_block;
    if k as usize <= top.len() {
        return Ok(top[k as usize - 1]);
    }
    // the k-th largest is the (N - k + 1)-th smallest
    let j = summary.n - k + 1;
    let bottom = &summary.sorted_bottom_block;
    if j as usize <= bottom.len() {
        return Ok(bottom[j as usize - 1]);
    }
    Err(Error::InsufficientBlock {
        needed: k as usize,
        available: top.len(),
    })
}

/// Mean of the `k` largest samples, same `k` rule as [`empirical_quantile`].
///
/// When the upper block is too short, the top sum is recovered as the total
/// `N * mean` minus the `N - k` smallest samples.
pub fn empirical_tvar(summary: &EmpiricalSummary, p: f64) -> Result<f64> {
    check_level(p)?;
    let k = order_index(summary.n, p) as usize;
    let top = &summary.sorted_top_block;
    if k <= top.len() {
        let sum: f64 = crate::summation::sum(top[..k].iter().copied());
        return Ok(sum / k as f64);
    }
    let rest = summary.n as usize - k;
    let bottom = &summary.sorted_bottom_block;
    if rest <= bottom.len() {
        let below: f64 = crate::summation::sum(bottom[..rest].iter().copied());
        return Ok((summary.n as f64 * summary.mean - below) / k as f64);
    }
    Err(Error::InsufficientBlock {
        needed: k,
        available: top.len(),
    })
}

/// Fraction of samples above `x`.
///
/// Exact for configured thresholds, for infinite `x` and for `x` above the
/// smallest retained value of the upper block; anything else needs a rerun
/// with `x` among the thresholds.
pub fn empirical_tail_prob(summary: &EmpiricalSummary, x: f64) -> Result<f64> {
    if x.is_nan() {
        return Err(Error::Domain("tail probability at NaN".into()));
    }
    let n = summary.n as f64;
    if x == f64::NEG_INFINITY {
        return Ok(1.0);
    }
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if let Some((_, count)) = summary.exceedances.iter().find(|(t, _)| *t == x) {
        return Ok(*count as f64 / n);
    }
    let top = &summary.sorted_top_block;
    let complete = top.len() as u64 == summary.n;
    match top.last() {
        Some(&smallest) if complete || x >= smallest => {
            Ok(top.iter().filter(|v| **v > x).count() as f64 / n)
        }
        _ => Err(Error::Precondition(format!(
            "x = {x} is neither a streamed threshold nor inside the retained upper block"
        ))),
    }
}

/// Standard error of the empirical TVaR at level `p`, from the retained block:
/// `sqrt((Var(Z | Z > Q) + p (TVaR - Q)^2) / (N (1 - p)))`.
pub fn empirical_tvar_standard_error(summary: &EmpiricalSummary, p: f64) -> Result<f64> {
    let k = order_index(summary.n, p) as usize;
    let q = empirical_quantile(summary, p)?;
    let t = empirical_tvar(summary, p)?;
    let var = if k <= 1 {
        0.0
    } else if k <= summary.sorted_top_block.len() {
        let top = &summary.sorted_top_block[..k];
        top.iter().map(|v| (v - t) * (v - t)).sum::<f64>() / (k - 1) as f64
    } else {
        // squares of the top k from the total minus those of the rest
        let rest = &summary.sorted_bottom_block[..summary.n as usize - k];
        let total = summary.m2 + summary.n as f64 * summary.mean * summary.mean;
        let top_sq = total - rest.iter().map(|v| v * v).sum::<f64>();
        ((top_sq - k as f64 * t * t) / (k - 1) as f64).max(0.0)
    };
    Ok(((var + p * (t - q) * (t - q)) / (summary.n as f64 * (1.0 - p))).sqrt())
}
