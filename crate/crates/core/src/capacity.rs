//! Block probabilities, entropies and mutual information.
//!
//! `P(z | x)` is the channel-phase average of a product of slot likelihoods,
//! evaluated as the uniform-node mean over the table grid (the periodic
//! trapezoid rule). The orbit-reduced route needs `P(z | x_0)` only on `S_Z`
//! and `P(z)` only on `S~_Z`; the brute-force route enumerates everything and
//! is kept for validation.

use serde::Serialize;

use crate::channel::{ChannelConfig, Constellation};
use crate::error::{Error, Result};
use crate::likelihood::SectorLikelihoodTable;
use crate::symmetry::{
    canonical_key, pack, reduce_inputs, ConditionalOrbitTable, OutputOrbitTable,
};

/// Probabilities below this are treated as zero in entropy sums.
pub const ENTROPY_FLOOR: f64 = 1e-300;

/// `-p log2 p` with the `0 log 0 = 0` convention.
pub fn neg_p_log2_p(p: f64) -> f64 {
    if p < ENTROPY_FLOOR {
        0.0
    } else {
        -p * p.log2()
    }
}

/// Channel and numerics behind one capacity value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PointMetadata {
    pub k: usize,
    pub m: usize,
    pub l: usize,
    pub n_phi: usize,
    pub dithered: bool,
}

impl PointMetadata {
    pub fn of(table: &SectorLikelihoodTable) -> Self {
        Self {
            k: table.k(),
            m: table.m(),
            l: table.block_length(),
            n_phi: table.n_phi(),
            dithered: table.is_dithered(),
        }
    }
}

/// Sampling details attached to Monte Carlo rows.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SamplingInfo {
    pub std_error: f64,
    pub samples: u64,
    pub seed: u64,
}

/// Entropies (bits) and mutual information at one SNR.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CapacityPoint {
    pub snr_db: f64,
    /// `H(Z)`
    pub h_out: f64,
    /// `H(Z | X)`
    pub h_cond: f64,
    /// `I(X; Z)` per block
    pub mi: f64,
    /// `I(X; Z) / (L - 1)`
    pub cap_per_symbol: f64,
    pub metadata: PointMetadata,
    pub sampling: Option<SamplingInfo>,
}

impl CapacityPoint {
    pub fn from_entropies(snr_db: f64, h_out: f64, h_cond: f64, metadata: PointMetadata) -> Self {
        let mi = h_out - h_cond;
        Self {
            snr_db,
            h_out,
            h_cond,
            mi,
            cap_per_symbol: mi / (metadata.l - 1) as f64,
            metadata,
            sampling: None,
        }
    }
}

/// Mean over grid nodes of the product of the given columns.
fn mean_product(cols: &[&[f64]], buf: &mut Vec<f64>) -> f64 {
    let n = cols[0].len();
    match cols.len() {
        1 => cols[0].iter().sum::<f64>() / n as f64,
        _ => {
            buf.clear();
            buf.extend(cols[0].iter().zip(cols[1]).map(|(a, b)| a * b));
            for c in &cols[2..] {
                buf.iter_mut().zip(c.iter()).for_each(|(acc, v)| *acc *= v);
            }
            buf.iter().sum::<f64>() / n as f64
        }
    }
}

/// `P(z | x)` averaged over the grid phases.
pub fn block_conditional_prob(z: &[u8], x: &[u8], table: &SectorLikelihoodTable) -> f64 {
    let cols: Vec<&[f64]> = z
        .iter()
        .zip(x)
        .enumerate()
        .map(|(l, (&zl, &xl))| table.conditional_column(l, zl as usize, xl as usize))
        .collect();
    mean_product(&cols, &mut Vec::new())
}

/// `P(z)` from the per-slot input mixtures. Exact for i.i.d. uniform inputs,
/// dithered or not, since slots are independent given the channel phase.
pub fn output_prob_factorized(z: &[u8], table: &SectorLikelihoodTable) -> f64 {
    let cols: Vec<&[f64]> = z
        .iter()
        .enumerate()
        .map(|(l, &zl)| table.mixture_column(l, zl as usize))
        .collect();
    mean_product(&cols, &mut Vec::new())
}

fn require_undithered(table: &SectorLikelihoodTable, what: &'static str) -> Result<()> {
    if table.is_dithered() {
        Err(Error::Dithered(what))
    } else {
        Ok(())
    }
}

fn require_matching(table: &SectorLikelihoodTable, k: usize, l: usize) -> Result<()> {
    if table.k() != k || table.block_length() != l {
        return Err(Error::InvalidConfig(format!(
            "orbit table (K={k}, L={l}) does not match the likelihood table (K={}, L={})",
            table.k(),
            table.block_length()
        )));
    }
    Ok(())
}

/// `P(z | x_0)` on every representative of `S_Z`.
#[derive(Debug, Clone)]
pub struct ConditionalProbs {
    k: usize,
    keys: Vec<u64>,
    probs: Vec<f64>,
}

impl ConditionalProbs {
    /// Evaluates every representative. Representatives arrive in
    /// lexicographic order, so partial products over shared prefixes are
    /// reused from one representative to the next.
    pub fn compute(table: &SectorLikelihoodTable, orbits: &ConditionalOrbitTable) -> Result<Self> {
        require_undithered(table, "the S_Z reduction")?;
        require_matching(table, orbits.k(), orbits.block_length())?;
        let l = orbits.block_length();
        let n = table.n_phi();
        // prefix[t] = prod_{j <= t} column(z_j), for t < l - 1
        let mut prefix: Vec<Vec<f64>> = vec![vec![0.0; n]; l.saturating_sub(1)];
        let mut prev: Option<&[u8]> = None;
        let mut probs = Vec::with_capacity(orbits.len());
        for rep in orbits.reps().iter() {
            let common = prev.map_or(0, |p| p.iter().zip(rep).take_while(|(a, b)| a == b).count());
            for t in common.min(l - 1)..l - 1 {
                let col = table.column(t, rep[t] as usize);
                if t == 0 {
                    prefix[0].copy_from_slice(col);
                } else {
                    let (done, rest) = prefix.split_at_mut(t);
                    rest[0]
                        .iter_mut()
                        .zip(done[t - 1].iter().zip(col))
                        .for_each(|(d, (a, b))| *d = a * b);
                }
            }
            let last = table.column(l - 1, rep[l - 1] as usize);
            let sum: f64 = prefix[l - 2].iter().zip(last).map(|(a, b)| a * b).sum();
            probs.push(sum / n as f64);
            prev = Some(rep);
        }
        let keys = orbits.reps().iter().map(pack).collect();
        Ok(Self {
            k: orbits.k(),
            keys,
            probs,
        })
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    /// `P(z | x_0)` for any `z`, via its orbit.
    pub fn get(&self, z: &[u8]) -> f64 {
        let key = canonical_key(z, self.k);
        let i = self
            .keys
            .binary_search(&key)
            .expect("every vector belongs to an enumerated orbit");
        self.probs[i]
    }

    /// `P(z | x) = P(z - a x | x_0)`.
    pub fn get_given(&self, z: &[u8], x: &[u8], a: usize) -> f64 {
        let mut shifted = [0u8; crate::symmetry::MAX_ORBIT_BLOCK];
        for (i, (&zl, &xl)) in z.iter().zip(x).enumerate() {
            shifted[i] = ((zl as usize + self.k - (a * xl as usize) % self.k) % self.k) as u8;
        }
        self.get(&shifted[..z.len()])
    }

    /// `-sum n(z) P(z | x_0) log2 P(z | x_0)` over `S_Z`.
    pub fn entropy(&self, orbits: &ConditionalOrbitTable) -> f64 {
        self.probs
            .iter()
            .zip(orbits.counts())
            .map(|(&p, &c)| c as f64 * neg_p_log2_p(p))
            .sum()
    }
}

/// `H(Z | X)` through the `S_Z` reduction.
pub fn conditional_entropy(
    table: &SectorLikelihoodTable,
    orbits: &ConditionalOrbitTable,
) -> Result<f64> {
    Ok(ConditionalProbs::compute(table, orbits)?.entropy(orbits))
}

/// `H(Z | x)` by summing over all `K^L` outcomes for one input (validation).
pub fn conditional_entropy_given(x: &[u8], table: &SectorLikelihoodTable) -> Result<f64> {
    let (k, l) = (table.k(), table.block_length());
    guard_count(k, l, MAX_BRUTE_OUTCOMES, "outcome vectors")?;
    let mut z = vec![0u8; l];
    let mut h = 0.0;
    for idx in 0..(k as u64).pow(l as u32) {
        decode(idx, k, &mut z);
        h += neg_p_log2_p(block_conditional_prob(&z, x, table));
    }
    Ok(h)
}

/// `P(z)` for an output representative by the input reduction `S_X`, with
/// every conditional probability read from the `S_Z` values.
pub fn output_prob(z_rep: &[u8], table: &SectorLikelihoodTable, cond: &ConditionalProbs) -> f64 {
    let (m, a) = (table.m(), table.a());
    let reduction = reduce_inputs(z_rep, m);
    let total: f64 = reduction
        .iter()
        .map(|(x, mult)| mult as f64 * cond.get_given(z_rep, x, a))
        .sum();
    total / (m as f64).powi(z_rep.len() as i32)
}

/// `H(Z)` through the `S~_Z` reduction.
pub fn output_entropy(
    table: &SectorLikelihoodTable,
    orbits: &OutputOrbitTable,
    cond: &ConditionalProbs,
) -> Result<f64> {
    require_undithered(table, "the S~_Z reduction")?;
    require_matching(table, orbits.k(), orbits.block_length())?;
    Ok(orbits
        .reps()
        .iter()
        .zip(orbits.counts())
        .map(|(rep, &c)| c as f64 * neg_p_log2_p(output_prob(rep, table, cond)))
        .sum())
}

/// Orbit tables for one `(K, M, L)`, reusable across SNR values.
#[derive(Debug, Clone)]
pub struct CapacityEngine {
    conditional: ConditionalOrbitTable,
    output: OutputOrbitTable,
}

impl CapacityEngine {
    pub fn new(k: usize, m: usize, l: usize) -> Result<Self> {
        Ok(Self {
            conditional: ConditionalOrbitTable::enumerate(k, l)?,
            output: OutputOrbitTable::enumerate(k, m, l)?,
        })
    }

    pub fn from_tables(conditional: ConditionalOrbitTable, output: OutputOrbitTable) -> Result<Self> {
        if conditional.k() != output.k() || conditional.block_length() != output.block_length() {
            return Err(Error::InvalidConfig("orbit tables disagree on K or L".into()));
        }
        Ok(Self {
            conditional,
            output,
        })
    }

    pub fn conditional_orbits(&self) -> &ConditionalOrbitTable {
        &self.conditional
    }

    pub fn output_orbits(&self) -> &OutputOrbitTable {
        &self.output
    }

    /// Capacity at the SNR the table was built for.
    pub fn evaluate(&self, table: &SectorLikelihoodTable) -> Result<CapacityPoint> {
        let cond = ConditionalProbs::compute(table, &self.conditional)?;
        let h_cond = cond.entropy(&self.conditional);
        let h_out = output_entropy(table, &self.output, &cond)?;
        Ok(CapacityPoint::from_entropies(
            table.config().snr_db(),
            h_out,
            h_cond,
            PointMetadata::of(table),
        ))
    }

    pub fn point(&self, cfg: &ChannelConfig, n_phi: usize) -> Result<CapacityPoint> {
        let cons = Constellation::standard(cfg);
        self.evaluate(&SectorLikelihoodTable::build(cfg, &cons, n_phi)?)
    }
}

/// Orbit-reduced capacity for an undithered constellation.
pub fn capacity_point(
    cfg: &ChannelConfig,
    cons: &Constellation,
    n_phi: usize,
) -> Result<CapacityPoint> {
    if cons.is_dithered() {
        return Err(Error::Dithered("the analytic capacity path"));
    }
    let table = SectorLikelihoodTable::build(cfg, cons, n_phi)?;
    CapacityEngine::new(cfg.k(), cfg.m(), cfg.l())?.evaluate(&table)
}

/// Result of a sweep: per-point outcomes in input order plus monotonicity
/// warnings.
#[derive(Debug)]
pub struct SweepReport {
    pub points: Vec<Result<CapacityPoint>>,
    pub warnings: Vec<String>,
}

/// Per-symbol capacity decreases larger than this are reported as warnings.
pub const MONOTONICITY_SLACK: f64 = 1e-6;

/// Orbit-reduced capacity over an SNR grid (dB). Orbit tables are built once.
pub fn snr_sweep(
    template: &ChannelConfig,
    snr_db: &[f64],
    cons: &Constellation,
    n_phi: usize,
) -> Result<SweepReport> {
    if snr_db.is_empty() {
        return Err(Error::InvalidConfig("empty SNR grid".into()));
    }
    if cons.is_dithered() {
        return Err(Error::Dithered("the analytic capacity path"));
    }
    let engine = CapacityEngine::new(template.k(), template.m(), template.l())?;
    Ok(sweep_with(&engine, template, snr_db, n_phi))
}

pub fn sweep_with(
    engine: &CapacityEngine,
    template: &ChannelConfig,
    snr_db: &[f64],
    n_phi: usize,
) -> SweepReport {
    let points: Vec<Result<CapacityPoint>> = snr_db
        .iter()
        .map(|&db| {
            let cfg = template.with_snr(crate::channel::db_to_linear(db))?;
            engine.point(&cfg, n_phi)
        })
        .collect();
    let warnings = monotonicity_warnings(&points);
    SweepReport { points, warnings }
}

fn monotonicity_warnings(points: &[Result<CapacityPoint>]) -> Vec<String> {
    let ok: Vec<&CapacityPoint> = points.iter().filter_map(|p| p.as_ref().ok()).collect();
    ok.windows(2)
        .filter(|w| w[1].snr_db > w[0].snr_db)
        .filter(|w| w[1].cap_per_symbol < w[0].cap_per_symbol - MONOTONICITY_SLACK)
        .map(|w| {
            format!(
                "capacity drops from {:.9} at {} dB to {:.9} at {} dB; consider a finer phase grid",
                w[0].cap_per_symbol, w[0].snr_db, w[1].cap_per_symbol, w[1].snr_db
            )
        })
        .collect()
}

/// Limits for the brute-force paths.
pub const MAX_BRUTE_OUTCOMES: u64 = 1_000_000;
pub const MAX_BRUTE_INPUTS: u64 = 100_000;

fn guard_count(base: usize, l: usize, limit: u64, what: &str) -> Result<u64> {
    match (base as u64).checked_pow(l as u32) {
        Some(n) if n <= limit => Ok(n),
        _ => Err(Error::ResourceGuard(format!(
            "{base}^{l} {what} exceeds the brute-force limit {limit}"
        ))),
    }
}

fn decode(mut idx: u64, base: usize, out: &mut [u8]) {
    for slot in out.iter_mut().rev() {
        *slot = (idx % base as u64) as u8;
        idx /= base as u64;
    }
}

/// Entropies from enumerating every `(z, x)` pair.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BruteForceInformation {
    pub h_out: f64,
    pub h_cond: f64,
    pub mi: f64,
}

/// `H(Z)`, `H(Z | X)` and `I(X; Z)` with no symmetry reduction. Also valid for
/// dithered tables.
pub fn brute_force_mutual_information(table: &SectorLikelihoodTable) -> Result<BruteForceInformation> {
    let (k, m, l) = (table.k(), table.m(), table.block_length());
    let outcomes = guard_count(k, l, MAX_BRUTE_OUTCOMES, "outcome vectors")?;
    let inputs = guard_count(m, l, MAX_BRUTE_INPUTS, "input vectors")?;
    let mut p_z = vec![0.0; outcomes as usize];
    let mut h_cond = 0.0;
    let (mut x, mut z) = (vec![0u8; l], vec![0u8; l]);
    let px = 1.0 / inputs as f64;
    for xi in 0..inputs {
        decode(xi, m, &mut x);
        let mut h_x = 0.0;
        for (zi, pz) in p_z.iter_mut().enumerate() {
            decode(zi as u64, k, &mut z);
            let p = block_conditional_prob(&z, &x, table);
            h_x += neg_p_log2_p(p);
            *pz += px * p;
        }
        h_cond += px * h_x;
    }
    let h_out: f64 = p_z.iter().map(|&p| neg_p_log2_p(p)).sum();
    Ok(BruteForceInformation {
        h_out,
        h_cond,
        mi: h_out - h_cond,
    })
}

/// Largest `K^(L-1)` accepted by [`shift_reduced_capacity`].
pub const MAX_SHIFT_REDUCED: u64 = 10_000_000;

/// Capacity using only the reductions that survive transmit dither:
/// constant addition, `P(z | x) = P(z - a x | x_0)` and `P(z) = P(z mod a)`.
/// Costs `K^(L-1)` conditional evaluations instead of `|S_Z|`.
pub fn shift_reduced_capacity(table: &SectorLikelihoodTable) -> Result<CapacityPoint> {
    let (k, m, l, a) = (table.k(), table.m(), table.block_length(), table.a());
    let tail = guard_count(k, l - 1, MAX_SHIFT_REDUCED, "shift classes")?;
    let x0 = vec![0u8; l];
    let mut z = vec![0u8; l];
    let mut h_cond = 0.0;
    for idx in 0..tail {
        decode(idx, k, &mut z[1..]);
        h_cond += neg_p_log2_p(block_conditional_prob(&z, &x0, table));
    }
    h_cond *= k as f64;
    let lift = a as f64 * (m as f64).powi(l as i32);
    let mut h_out = 0.0;
    let mut r = vec![0u8; l];
    for idx in 0..(a as u64).pow(l as u32 - 1) {
        decode(idx, a, &mut r[1..]);
        h_out += neg_p_log2_p(output_prob_factorized(&r, table));
    }
    h_out *= lift;
    Ok(CapacityPoint::from_entropies(
        table.config().snr_db(),
        h_out,
        h_cond,
        PointMetadata::of(table),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(m: usize, k: usize, l: usize, snr_db: f64, n_phi: usize) -> SectorLikelihoodTable {
        let cfg = ChannelConfig::from_db(m, k, l, snr_db).unwrap();
        SectorLikelihoodTable::build(&cfg, &Constellation::standard(&cfg), n_phi).unwrap()
    }

    #[test]
    fn total_probability() {
        for l in [2, 3] {
            let t = table(4, 8, l, 5.0, 256);
            let x: Vec<u8> = (0..l as u8).map(|i| i % 4).collect();
            let mut z = vec![0u8; l];
            let total: f64 = (0..8u64.pow(l as u32))
                .map(|i| {
                    decode(i, 8, &mut z);
                    block_conditional_prob(&z, &x, &t)
                })
                .sum();
            assert!((total - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn zero_snr_is_uniform() {
        let cfg = ChannelConfig::new(4, 8, 3, 0.0).unwrap();
        let t = SectorLikelihoodTable::build(&cfg, &Constellation::standard(&cfg), 64).unwrap();
        let p = block_conditional_prob(&[1, 5, 2], &[3, 0, 1], &t);
        assert!((p - 1.0 / 512.0).abs() < 1e-15);
        let point = capacity_point(&cfg, &Constellation::standard(&cfg), 64).unwrap();
        assert!((point.h_cond - 9.0).abs() < 1e-9);
        assert!((point.h_out - 9.0).abs() < 1e-9);
        assert!(point.mi.abs() < 1e-8);
    }

    #[test]
    fn dithered_tables_rejected_by_orbit_path() {
        let cfg = ChannelConfig::from_db(4, 8, 3, 5.0).unwrap();
        let cons = Constellation::dithered(&cfg);
        let t = SectorLikelihoodTable::build(&cfg, &cons, 64).unwrap();
        let orbits = ConditionalOrbitTable::enumerate(8, 3).unwrap();
        assert!(matches!(
            conditional_entropy(&t, &orbits),
            Err(Error::Dithered(_))
        ));
        assert!(capacity_point(&cfg, &cons, 64).is_err());
    }

    #[test]
    fn prefix_sharing_matches_direct_products() {
        let t = table(4, 8, 4, 5.0, 128);
        let orbits = ConditionalOrbitTable::enumerate(8, 4).unwrap();
        let cond = ConditionalProbs::compute(&t, &orbits).unwrap();
        let x0 = [0u8; 4];
        for (rep, &p) in orbits.reps().iter().zip(cond.probs()) {
            let direct = block_conditional_prob(rep, &x0, &t);
            assert!((p - direct).abs() < 1e-15 * direct.max(1e-300) + 1e-18);
        }
    }

    #[test]
    fn mismatched_tables_rejected() {
        let t = table(4, 8, 3, 5.0, 64);
        let orbits = ConditionalOrbitTable::enumerate(8, 4).unwrap();
        assert!(matches!(
            ConditionalProbs::compute(&t, &orbits),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn brute_force_guard() {
        let t = table(4, 8, 7, 5.0, 8);
        assert!(matches!(
            brute_force_mutual_information(&t),
            Err(Error::ResourceGuard(_))
        ));
    }

    #[test]
    fn empty_sweep_rejected() {
        let cfg = ChannelConfig::from_db(4, 8, 3, 5.0).unwrap();
        assert!(snr_sweep(&cfg, &[], &Constellation::standard(&cfg), 64).is_err());
    }
}
