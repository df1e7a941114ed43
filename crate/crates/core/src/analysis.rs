//! Joint ML estimation of `(x, phi)` with tie detection, the mass of
//! ambiguous outputs, and reference curves: coherent MPSK and a fine
//! quantization stand-in for the unquantized receiver.
//!
//! The ML search runs over grid phases in `[0, 2 pi / M)`. Rotating every
//! input by one constellation step while turning the phase back by `2 pi / M`
//! leaves the likelihood unchanged, so phases outside that range only repeat
//! the same solutions with relabelled inputs.

use std::f64::consts::TAU;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::capacity::{output_prob_factorized, CapacityEngine, CapacityPoint};
use crate::channel::{format_symbols, ChannelConfig, InputVector};
use crate::error::{Error, Result};
use crate::likelihood::SectorLikelihoodTable;
use crate::montecarlo::{run_batches, RunningStats, ScalarEstimate};

/// Default relative tolerance for likelihood ties.
pub const DEFAULT_TIE_TOL: f64 = 1e-9;

/// Largest `K^L` accepted by [`ambiguous_output_mass`].
pub const MAX_AMBIGUITY_OUTCOMES: u64 = 1_000_000;

/// Largest `M^L * (grid phases searched)` for the exhaustive estimator.
pub const MAX_EXHAUSTIVE_ML: u64 = 50_000_000;

/// Maximizers of `P(z | x, phi_n)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MlResult {
    /// `(x, grid index)` pairs within tolerance of the maximum, sorted.
    pub argmax: Vec<(InputVector, usize)>,
    /// Natural log of the maximum likelihood.
    pub max_log_likelihood: f64,
    /// At least two distinct inputs among the maximizers.
    pub ambiguous: bool,
}

impl MlResult {
    /// Distinct inputs among the maximizers, sorted.
    pub fn tied_inputs(&self) -> Vec<&InputVector> {
        let mut xs: Vec<&InputVector> = self.argmax.iter().map(|(x, _)| x).collect();
        xs.dedup();
        xs
    }

    pub fn contains_input(&self, x: &[u8]) -> bool {
        self.argmax.iter().any(|(v, _)| &v[..] == x)
    }

    fn from_pairs(mut pairs: Vec<(Vec<u8>, usize)>, max_ll: f64) -> Self {
        pairs.sort();
        let argmax: Vec<(InputVector, usize)> =
            pairs.into_iter().map(|(x, n)| (InputVector(x), n)).collect();
        let ambiguous = argmax.windows(2).any(|w| w[0].0 != w[1].0);
        Self {
            argmax,
            max_log_likelihood: max_ll,
            ambiguous,
        }
    }
}

fn phase_range(table: &SectorLikelihoodTable) -> usize {
    table.n_phi() / table.m()
}

fn check_outcome(z: &[u8], table: &SectorLikelihoodTable) -> Result<()> {
    if z.len() != table.block_length() || z.iter().any(|&v| v as usize >= table.k()) {
        return Err(Error::InvalidVector(format!(
            "{} is not an outcome vector for K={}, L={}",
            format_symbols(z),
            table.k(),
            table.block_length()
        )));
    }
    Ok(())
}

fn check_tol(tie_tol: f64) -> Result<()> {
    if !(0.0..1.0).contains(&tie_tol) {
        return Err(Error::InvalidConfig(format!(
            "tie tolerance must lie in [0, 1), got {tie_tol}"
        )));
    }
    Ok(())
}

/// ML estimate of `(x, phi)` given `z`.
///
/// For a fixed grid phase the likelihood factorizes over slots, so each slot
/// is maximized on its own and ties are collected by a bounded search.
pub fn ml_estimate(z: &[u8], table: &SectorLikelihoodTable, tie_tol: f64) -> Result<MlResult> {
    check_outcome(z, table)?;
    check_tol(tie_tol)?;
    let (m, l) = (table.m(), table.block_length());
    let nodes = phase_range(table);
    // slot_logs[n][slot][x]
    let mut slot_logs = vec![vec![vec![0.0f64; m]; l]; nodes];
    let mut node_best = vec![0.0f64; nodes];
    for n in 0..nodes {
        let mut total = 0.0;
        for (slot, &zl) in z.iter().enumerate() {
            let logs = &mut slot_logs[n][slot];
            for (x, v) in logs.iter_mut().enumerate() {
                *v = table.prob(slot, n, zl as usize, x).ln();
            }
            total += logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        }
        node_best[n] = total;
    }
    let max_ll = node_best.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let budget = -(1.0 - tie_tol).ln();
    let mut pairs = Vec::new();
    let mut x = vec![0u8; l];
    for n in 0..nodes {
        let slack = budget - (max_ll - node_best[n]);
        if slack < 0.0 {
            continue;
        }
        let bests: Vec<f64> = slot_logs[n]
            .iter()
            .map(|logs| logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max))
            .collect();
        collect_ties(&slot_logs[n], &bests, 0, slack, &mut x, n, &mut pairs);
    }
    Ok(MlResult::from_pairs(pairs, max_ll))
}

fn collect_ties(
    logs: &[Vec<f64>],
    bests: &[f64],
    slot: usize,
    slack: f64,
    x: &mut Vec<u8>,
    n: usize,
    out: &mut Vec<(Vec<u8>, usize)>,
) {
    if slot == logs.len() {
        out.push((x.clone(), n));
        return;
    }
    for (v, &ll) in logs[slot].iter().enumerate() {
        let deficit = bests[slot] - ll;
        if deficit <= slack {
            x[slot] = v as u8;
            collect_ties(logs, bests, slot + 1, slack - deficit, x, n, out);
        }
    }
}

/// Reference ML estimate by scanning every input vector at every searched
/// grid phase.
pub fn ml_estimate_exhaustive(
    z: &[u8],
    table: &SectorLikelihoodTable,
    tie_tol: f64,
) -> Result<MlResult> {
    check_outcome(z, table)?;
    check_tol(tie_tol)?;
    let (m, l) = (table.m(), table.block_length());
    let nodes = phase_range(table);
    let inputs = (m as u64).pow(l as u32);
    if inputs.saturating_mul(nodes as u64) > MAX_EXHAUSTIVE_ML {
        return Err(Error::ResourceGuard(format!(
            "exhaustive ML over {inputs} inputs and {nodes} phases exceeds {MAX_EXHAUSTIVE_ML}"
        )));
    }
    let mut scores = Vec::with_capacity((inputs as usize) * nodes);
    let mut x = vec![0u8; l];
    for idx in 0..inputs {
        let mut r = idx;
        for slot in x.iter_mut().rev() {
            *slot = (r % m as u64) as u8;
            r /= m as u64;
        }
        for n in 0..nodes {
            let ll: f64 = z
                .iter()
                .zip(&x)
                .enumerate()
                .map(|(slot, (&zl, &xl))| table.prob(slot, n, zl as usize, xl as usize).ln())
                .sum();
            scores.push((x.clone(), n, ll));
        }
    }
    let max_ll = scores.iter().map(|s| s.2).fold(f64::NEG_INFINITY, f64::max);
    let budget = -(1.0 - tie_tol).ln();
    let pairs = scores
        .into_iter()
        .filter(|s| max_ll - s.2 <= budget)
        .map(|(x, n, _)| (x, n))
        .collect();
    Ok(MlResult::from_pairs(pairs, max_ll))
}

/// One line of an ambiguity report.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbiguityRow {
    pub z: Vec<u8>,
    pub result: MlResult,
    pub p_z: f64,
}

/// Every outcome vector with its ML result and probability.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbiguityReport {
    pub rows: Vec<AmbiguityRow>,
    /// Total `P(z)` over ambiguous outputs.
    pub ambiguous_mass: f64,
}

impl AmbiguityReport {
    pub fn ambiguous_rows(&self) -> impl Iterator<Item = &AmbiguityRow> {
        self.rows.iter().filter(|r| r.result.ambiguous)
    }

    pub fn ambiguous_count(&self) -> usize {
        self.ambiguous_rows().count()
    }
}

/// Runs [`ml_estimate`] on all `K^L` outcome vectors.
pub fn ambiguity_report(table: &SectorLikelihoodTable, tie_tol: f64) -> Result<AmbiguityReport> {
    let (k, l) = (table.k(), table.block_length());
    let total = match (k as u64).checked_pow(l as u32) {
        Some(n) if n <= MAX_AMBIGUITY_OUTCOMES => n,
        _ => {
            return Err(Error::ResourceGuard(format!(
                "{k}^{l} outcome vectors exceed the ambiguity limit {MAX_AMBIGUITY_OUTCOMES}"
            )))
        }
    };
    let mut rows = Vec::with_capacity(total as usize);
    let mut mass = 0.0;
    let mut z = vec![0u8; l];
    for idx in 0..total {
        let mut r = idx;
        for slot in z.iter_mut().rev() {
            *slot = (r % k as u64) as u8;
            r /= k as u64;
        }
        let result = ml_estimate(&z, table, tie_tol)?;
        let p_z = output_prob_factorized(&z, table);
        if result.ambiguous {
            mass += p_z;
        }
        rows.push(AmbiguityRow {
            z: z.clone(),
            result,
            p_z,
        });
    }
    Ok(AmbiguityReport {
        rows,
        ambiguous_mass: mass,
    })
}

/// Probability that the channel output has more than one ML input.
pub fn ambiguous_output_mass(table: &SectorLikelihoodTable, tie_tol: f64) -> Result<f64> {
    Ok(ambiguity_report(table, tie_tol)?.ambiguous_mass)
}

/// Smallest sample count accepted by [`coherent_capacity`].
pub const MIN_COHERENT_SAMPLES: u64 = 100_000;

/// `I(X; Y)` in bits for unquantized MPSK with known phase, by simulation.
pub fn coherent_capacity(m: usize, snr: f64, samples: u64, seed: u64) -> Result<ScalarEstimate> {
    if m == 0 {
        return Err(Error::InvalidConfig("M must be positive".into()));
    }
    if !snr.is_finite() || snr < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "SNR must be finite and non-negative (snr={snr})"
        )));
    }
    if samples < MIN_COHERENT_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "coherent estimate needs at least {MIN_COHERENT_SAMPLES} samples, got {samples}"
        )));
    }
    let log_m = (m as f64).log2();
    if snr == 0.0 {
        return Ok(ScalarEstimate {
            value: 0.0,
            std_error: crate::montecarlo::MIN_STD_ERROR,
        });
    }
    let sigma = (1.0 / (2.0 * snr)).sqrt();
    let points: Vec<(f64, f64)> = (0..m)
        .map(|i| {
            let t = TAU * i as f64 / m as f64;
            (t.cos(), t.sin())
        })
        .collect();
    let two_var = 2.0 * sigma * sigma;
    let stats: RunningStats = run_batches(samples, seed, |rng, acc: &mut RunningStats| {
        let x = rng.random_range(0..m);
        let nr: f64 = rng.sample(StandardNormal);
        let ni: f64 = rng.sample(StandardNormal);
        let (yr, yi) = (points[x].0 + sigma * nr, points[x].1 + sigma * ni);
        let d_true = (yr - points[x].0).powi(2) + (yi - points[x].1).powi(2);
        let sum: f64 = points
            .iter()
            .map(|&(pr, pi)| ((d_true - (yr - pr).powi(2) - (yi - pi).powi(2)) / two_var).exp())
            .sum();
        acc.push(log_m - sum.log2());
    });
    Ok(ScalarEstimate {
        value: stats.mean(),
        std_error: stats.std_error().max(crate::montecarlo::MIN_STD_ERROR),
    })
}

/// Sector count standing in for an unquantized receiver.
pub const PROXY_SECTORS: usize = 64;

/// Longest block accepted at [`PROXY_SECTORS`].
pub const PROXY_MAX_BLOCK: usize = 6;

/// Grid nodes per sector for proxy runs.
pub const PROXY_NODES_PER_SECTOR: usize = 16;

/// Capacity engine at 64 sectors, reused across SNR values.
#[derive(Debug, Clone)]
pub struct UnquantizedProxy {
    engine: CapacityEngine,
    m: usize,
    l: usize,
}

impl UnquantizedProxy {
    pub fn new(m: usize, l: usize) -> Result<Self> {
        if l > PROXY_MAX_BLOCK {
            return Err(Error::ResourceGuard(format!(
                "the {PROXY_SECTORS}-sector proxy supports L <= {PROXY_MAX_BLOCK}, got {l}"
            )));
        }
        ChannelConfig::new(m, PROXY_SECTORS, l, 1.0)?;
        Ok(Self {
            engine: CapacityEngine::new(PROXY_SECTORS, m, l)?,
            m,
            l,
        })
    }

    pub fn default_n_phi() -> usize {
        PROXY_NODES_PER_SECTOR * PROXY_SECTORS
    }

    pub fn point(&self, snr_db: f64, n_phi: usize) -> Result<CapacityPoint> {
        let cfg = ChannelConfig::from_db(self.m, PROXY_SECTORS, self.l, snr_db)?;
        self.engine.point(&cfg, n_phi)
    }
}

/// Capacity at [`PROXY_SECTORS`] sectors, a stand-in for the unquantized
/// noncoherent receiver. Its distance from the true unquantized value is not
/// quantified.
pub fn unquantized_proxy_capacity(m: usize, l: usize, snr_db: f64, n_phi: usize) -> Result<CapacityPoint> {
    UnquantizedProxy::new(m, l)?.point(snr_db, n_phi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::Constellation;

    fn table(l: usize, snr_db: f64, dither: bool) -> SectorLikelihoodTable {
        let cfg = ChannelConfig::from_db(4, 8, l, snr_db).unwrap();
        SectorLikelihoodTable::build(&cfg, &Constellation::new(&cfg, dither), 256).unwrap()
    }

    #[test]
    fn boundary_output_is_ambiguous() {
        let t = table(2, 20.0, false);
        let r = ml_estimate(&[0, 1], &t, DEFAULT_TIE_TOL).unwrap();
        assert!(r.ambiguous);
        assert!(r.contains_input(&[0, 0]));
        assert!(r.contains_input(&[0, 1]));
    }

    #[test]
    fn consistent_output_recovers_input() {
        let t = table(3, 20.0, false);
        let r = ml_estimate(&[2, 6, 0], &t, DEFAULT_TIE_TOL).unwrap();
        assert!(r.contains_input(&[1, 3, 0]));
        assert!(!r.ambiguous);
    }

    #[test]
    fn factorized_search_matches_exhaustive() {
        for dither in [false, true] {
            let t = table(3, 10.0, dither);
            for z in [[0u8, 1, 3], [0, 0, 1], [0, 4, 7], [5, 7, 2]] {
                let fast = ml_estimate(&z, &t, DEFAULT_TIE_TOL).unwrap();
                let slow = ml_estimate_exhaustive(&z, &t, DEFAULT_TIE_TOL).unwrap();
                assert_eq!(fast.argmax, slow.argmax);
                assert!((fast.max_log_likelihood - slow.max_log_likelihood).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = table(3, 10.0, false);
        assert!(ml_estimate(&[0, 1], &t, DEFAULT_TIE_TOL).is_err());
        assert!(ml_estimate(&[0, 1, 8], &t, DEFAULT_TIE_TOL).is_err());
        assert!(ml_estimate(&[0, 1, 2], &t, 1.5).is_err());
    }

    #[test]
    fn coherent_limits() {
        assert_eq!(coherent_capacity(4, 0.0, 100_000, 1).unwrap().value, 0.0);
        let high = coherent_capacity(4, 100.0, 100_000, 1).unwrap();
        assert!((high.value - 2.0).abs() < 0.01);
        assert!(coherent_capacity(4, 1.0, 10, 1).is_err());
    }

    #[test]
    fn proxy_guard() {
        assert!(matches!(
            UnquantizedProxy::new(4, 7),
            Err(Error::ResourceGuard(_))
        ));
    }
}
