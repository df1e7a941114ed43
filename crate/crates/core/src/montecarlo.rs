//! Monte Carlo estimates of `I(X; Z)` by sampling channel uses.
//!
//! Each sample draws a uniform input, a channel phase and noise, quantizes,
//! then scores `log2 P(z | x) - log2 P(z)` with both probabilities computed
//! exactly from the likelihood table. Works for dithered constellations.
//!
//! Samples are split into fixed batches. Batch `b` runs a ChaCha20 generator
//! seeded from the user seed with stream `b`, and batch statistics are merged
//! in batch order, so a run is reproducible from `(seed, samples)` alone.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Serialize;

use crate::capacity::{
    block_conditional_prob, output_prob_factorized, CapacityPoint, PointMetadata, SamplingInfo,
};
use crate::channel::{sample_block, ChannelConfig, Constellation};
use crate::error::{Error, Result};
use crate::likelihood::SectorLikelihoodTable;
use crate::symmetry::{pack, MAX_ORBIT_BLOCK};

/// Sample count used when none is given.
pub const DEFAULT_SAMPLES: u64 = 200_000;

/// Smallest accepted sample count.
pub const MIN_SAMPLES: u64 = 10_000;

/// Samples per generator stream.
pub const BATCH_SIZE: u64 = 10_000;

/// Generator recorded in output metadata.
pub const RNG_ALGORITHM: &str = "ChaCha20 (rand_chacha), seed_from_u64(seed), stream = batch index";

/// Floor on reported standard errors: the rounding level of a log-ratio.
pub const MIN_STD_ERROR: f64 = f64::EPSILON;

/// Count, mean and sum of squared deviations, mergeable across batches.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct RunningStats {
    count: u64,
    mean: f64,
    m2: f64,
}

impl RunningStats {
    pub fn push(&mut self, value: f64) {
        self.count += 1;
        let delta = value - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (value - self.mean);
    }

    /// Count-weighted merge of two partial results.
    pub fn merge(&mut self, other: &RunningStats) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        self.mean += delta * other.count as f64 / n;
        self.m2 += other.m2 + delta * delta * self.count as f64 * other.count as f64 / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    pub fn variance(&self) -> f64 {
        if self.count < 2 {
            0.0
        } else {
            self.m2 / (self.count - 1) as f64
        }
    }

    /// Standard error of the mean.
    pub fn std_error(&self) -> f64 {
        if self.count == 0 {
            return f64::INFINITY;
        }
        (self.variance() / self.count as f64).sqrt()
    }
}

fn check_samples(samples: u64) -> Result<()> {
    if samples < MIN_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "Monte Carlo needs at least {MIN_SAMPLES} samples, got {samples}"
        )));
    }
    Ok(())
}

/// Runs `draw` once per sample against its batch accumulator and merges
/// batches in order.
pub fn run_batches<A, D>(samples: u64, seed: u64, mut draw: D) -> A
where
    A: Default + Merge,
    D: FnMut(&mut ChaCha20Rng, &mut A),
{
    let mut total = A::default();
    let batches = samples.div_ceil(BATCH_SIZE);
    for b in 0..batches {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        rng.set_stream(b);
        let n = BATCH_SIZE.min(samples - b * BATCH_SIZE);
        let mut acc = A::default();
        for _ in 0..n {
            draw(&mut rng, &mut acc);
        }
        total.merge_from(&acc);
    }
    total
}

/// Batch accumulators.
pub trait Merge {
    fn merge_from(&mut self, other: &Self);
}

impl Merge for RunningStats {
    fn merge_from(&mut self, other: &Self) {
        self.merge(other);
    }
}

/// Exact block probabilities with memoization.
///
/// `P(z | x)` depends only on `z - a x` up to a constant; `P(z)` only on
/// `z mod a` up to a constant. Both reductions use grid shifts by whole
/// sectors and the per-slot offset `a x_l`, so they hold under dither too.
#[derive(Debug)]
pub struct ProbabilityCache<'t> {
    table: &'t SectorLikelihoodTable,
    conditional: HashMap<u64, f64>,
    output: HashMap<u64, f64>,
}

impl<'t> ProbabilityCache<'t> {
    pub fn new(table: &'t SectorLikelihoodTable) -> Self {
        Self {
            table,
            conditional: HashMap::new(),
            output: HashMap::new(),
        }
    }

    fn normalized(v: &mut [u8], modulus: usize) {
        let base = v[0] as usize;
        for e in v.iter_mut() {
            *e = ((*e as usize + modulus - base) % modulus) as u8;
        }
    }

    /// `P(z | x)`.
    pub fn conditional(&mut self, z: &[u8], x: &[u8]) -> f64 {
        let t = self.table;
        let mut w = [0u8; MAX_ORBIT_BLOCK];
        let w = &mut w[..z.len()];
        for (i, (&zl, &xl)) in z.iter().zip(x).enumerate() {
            w[i] = t.shifted_index(zl as usize, xl as usize) as u8;
        }
        Self::normalized(w, t.k());
        let x0 = [0u8; MAX_ORBIT_BLOCK];
        *self
            .conditional
            .entry(pack(w))
            .or_insert_with(|| block_conditional_prob(w, &x0[..z.len()], t))
    }

    /// `P(z)`.
    pub fn output(&mut self, z: &[u8]) -> f64 {
        let t = self.table;
        let a = t.a();
        let mut r = [0u8; MAX_ORBIT_BLOCK];
        let r = &mut r[..z.len()];
        for (d, &zl) in r.iter_mut().zip(z) {
            *d = zl % a as u8;
        }
        Self::normalized(r, a);
        *self
            .output
            .entry(pack(r))
            .or_insert_with(|| output_prob_factorized(r, t))
    }

    pub fn len(&self) -> (usize, usize) {
        (self.conditional.len(), self.output.len())
    }

    pub fn is_empty(&self) -> bool {
        self.conditional.is_empty() && self.output.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct TripleStats {
    log_ratio: RunningStats,
    neg_log_out: RunningStats,
    neg_log_cond: RunningStats,
}

impl Merge for TripleStats {
    fn merge_from(&mut self, other: &Self) {
        self.log_ratio.merge(&other.log_ratio);
        self.neg_log_out.merge(&other.neg_log_out);
        self.neg_log_cond.merge(&other.neg_log_cond);
    }
}

fn sample_stats(
    table: &SectorLikelihoodTable,
    cons: &Constellation,
    samples: u64,
    seed: u64,
) -> Result<TripleStats> {
    check_samples(samples)?;
    let cfg = *table.config();
    if cons.is_dithered() != table.is_dithered() || cons.dither_offsets().len() != cfg.l() {
        return Err(Error::InvalidConfig(
            "constellation does not match the likelihood table".into(),
        ));
    }
    let m = cfg.m();
    let mut cache = ProbabilityCache::new(table);
    let mut x = vec![0u8; cfg.l()];
    Ok(run_batches(samples, seed, |rng, acc: &mut TripleStats| {
        for xl in x.iter_mut() {
            *xl = rng.random_range(0..m) as u8;
        }
        let z = sample_block(&x, &cfg, cons, rng);
        let pc = cache.conditional(&z, &x);
        let po = cache.output(&z);
        let (lc, lo) = (pc.log2(), po.log2());
        acc.log_ratio.push(lc - lo);
        acc.neg_log_out.push(-lo);
        acc.neg_log_cond.push(-lc);
    }))
}

/// Monte Carlo mutual information, reported per channel use.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct McEstimate {
    /// `I(X; Z) / (L - 1)` in bits per channel use.
    pub value: f64,
    pub std_error: f64,
    /// `I(X; Z)` per block.
    pub block_value: f64,
    pub block_std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

impl McEstimate {
    /// Whether `value` (bits per channel use) lies within `n_sigma` errors.
    pub fn agrees_with(&self, value: f64, n_sigma: f64) -> bool {
        (self.value - value).abs() <= n_sigma * self.std_error
    }

    /// The estimate as a capacity row. Entropy columns come from the same
    /// sample stream.
    pub fn to_point(&self, entropies: &EntropyEstimates, table: &SectorLikelihoodTable) -> CapacityPoint {
        CapacityPoint {
            snr_db: table.config().snr_db(),
            h_out: entropies.h_out.value,
            h_cond: entropies.h_cond.value,
            mi: self.block_value,
            cap_per_symbol: self.value,
            metadata: PointMetadata::of(table),
            sampling: Some(SamplingInfo {
                std_error: self.std_error,
                samples: self.samples,
                seed: self.seed,
            }),
        }
    }
}

/// A plug-in estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScalarEstimate {
    pub value: f64,
    pub std_error: f64,
}

impl ScalarEstimate {
    fn of(stats: &RunningStats, scale: f64) -> Self {
        Self {
            value: stats.mean() * scale,
            std_error: (stats.std_error() * scale).max(MIN_STD_ERROR),
        }
    }

    pub fn agrees_with(&self, value: f64, n_sigma: f64) -> bool {
        (self.value - value).abs() <= n_sigma * self.std_error
    }
}

/// Plug-in block entropies in bits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EntropyEstimates {
    pub h_out: ScalarEstimate,
    pub h_cond: ScalarEstimate,
    pub samples: u64,
    pub seed: u64,
}

fn estimate_of(stats: &TripleStats, l: usize, samples: u64, seed: u64) -> McEstimate {
    let block = ScalarEstimate::of(&stats.log_ratio, 1.0);
    let per_use = ScalarEstimate::of(&stats.log_ratio, 1.0 / (l - 1) as f64);
    McEstimate {
        value: per_use.value,
        std_error: per_use.std_error,
        block_value: block.value,
        block_std_error: block.std_error,
        samples,
        seed,
    }
}

fn entropies_of(stats: &TripleStats, samples: u64, seed: u64) -> EntropyEstimates {
    EntropyEstimates {
        h_out: ScalarEstimate::of(&stats.neg_log_out, 1.0),
        h_cond: ScalarEstimate::of(&stats.neg_log_cond, 1.0),
        samples,
        seed,
    }
}

/// `I(X; Z)` by simulation against a prebuilt table.
pub fn mc_mutual_information_with(
    table: &SectorLikelihoodTable,
    cons: &Constellation,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    let stats = sample_stats(table, cons, samples, seed)?;
    Ok(estimate_of(&stats, table.block_length(), samples, seed))
}

/// `I(X; Z)` by simulation; builds the per-slot tables for `cons`.
pub fn mc_mutual_information(
    cfg: &ChannelConfig,
    cons: &Constellation,
    n_phi: usize,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    let table = SectorLikelihoodTable::build(cfg, cons, n_phi)?;
    mc_mutual_information_with(&table, cons, samples, seed)
}

/// Plug-in `H(Z)` and `H(Z | X)` from one sample stream.
pub fn mc_entropy_check(
    table: &SectorLikelihoodTable,
    cons: &Constellation,
    samples: u64,
    seed: u64,
) -> Result<EntropyEstimates> {
    let stats = sample_stats(table, cons, samples, seed)?;
    Ok(entropies_of(&stats, samples, seed))
}

/// Mutual information and entropies from one sample stream.
pub fn mc_full(
    table: &SectorLikelihoodTable,
    cons: &Constellation,
    samples: u64,
    seed: u64,
) -> Result<(McEstimate, EntropyEstimates)> {
    let stats = sample_stats(table, cons, samples, seed)?;
    Ok((
        estimate_of(&stats, table.block_length(), samples, seed),
        entropies_of(&stats, samples, seed),
    ))
}

/// A Monte Carlo capacity row.
pub fn mc_capacity_point(
    table: &SectorLikelihoodTable,
    cons: &Constellation,
    samples: u64,
    seed: u64,
) -> Result<CapacityPoint> {
    let (mi, h) = mc_full(table, cons, samples, seed)?;
    Ok(mi.to_point(&h, table))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::capacity::capacity_point;

    #[test]
    fn merge_matches_single_pass() {
        let values: Vec<f64> = (0..1000).map(|i| ((i * 37) % 101) as f64 * 0.1).collect();
        let mut whole = RunningStats::default();
        values.iter().for_each(|&v| whole.push(v));
        let mut merged = RunningStats::default();
        for chunk in values.chunks(333) {
            let mut part = RunningStats::default();
            chunk.iter().for_each(|&v| part.push(v));
            merged.merge(&part);
        }
        assert_eq!(merged.count(), 1000);
        assert!((merged.mean() - whole.mean()).abs() < 1e-12);
        assert!((merged.variance() - whole.variance()).abs() < 1e-9);
    }

    #[test]
    fn rejects_small_sample_counts() {
        let cfg = ChannelConfig::from_db(4, 8, 3, 5.0).unwrap();
        let cons = Constellation::standard(&cfg);
        assert!(mc_mutual_information(&cfg, &cons, 64, 100, 1).is_err());
    }

    #[test]
    fn seeded_runs_repeat() {
        let cfg = ChannelConfig::from_db(4, 8, 3, 5.0).unwrap();
        let cons = Constellation::standard(&cfg);
        let a = mc_mutual_information(&cfg, &cons, 64, 20_000, 9).unwrap();
        let b = mc_mutual_information(&cfg, &cons, 64, 20_000, 9).unwrap();
        let c = mc_mutual_information(&cfg, &cons, 64, 20_000, 10).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.value, c.value);
    }

    #[test]
    fn agrees_with_analytic_small_block() {
        let cfg = ChannelConfig::from_db(4, 8, 3, 5.0).unwrap();
        let cons = Constellation::standard(&cfg);
        let exact = capacity_point(&cfg, &cons, 256).unwrap();
        let est = mc_mutual_information(&cfg, &cons, 256, 50_000, 3).unwrap();
        assert!(est.agrees_with(exact.cap_per_symbol, 4.0), "{est:?} vs {exact:?}");
    }

    #[test]
    fn cache_matches_direct_probabilities() {
        let cfg = ChannelConfig::from_db(4, 8, 4, 5.0).unwrap();
        for dither in [false, true] {
            let cons = Constellation::new(&cfg, dither);
            let t = SectorLikelihoodTable::build(&cfg, &cons, 128).unwrap();
            let mut cache = ProbabilityCache::new(&t);
            let z = [5u8, 7, 2, 4];
            let x = [1u8, 3, 0, 2];
            assert!((cache.conditional(&z, &x) - block_conditional_prob(&z, &x, &t)).abs() < 1e-15);
            assert!((cache.output(&z) - output_prob_factorized(&z, &t)).abs() < 1e-15);
        }
    }
}
