//! Canonical forms and orbit tables for outcome vectors.
//!
//! Two vectors are equivalent when one is obtained from the other by a
//! coordinate permutation followed by adding a constant to every entry
//! (modulo `K` for the conditional reduction, modulo `a` after reducing the
//! entries mod `a` for the output reduction). The canonical representative is
//! the lexicographically smallest sorted vector over all constant additions.
//!
//! A sorted vector starting at 0 is described by its cyclic gap sequence
//! `g_i = z_{i+1} - z_i`, `g_{L-1} = modulus - z_{L-1}`. Constant additions that
//! bring another entry to 0 rotate that sequence, and comparing sorted vectors
//! lexicographically is the same as comparing gap sequences. Canonical
//! representatives are therefore exactly the necklaces (rotation-minimal
//! sequences) of `L` non-negative gaps summing to the modulus; they are
//! generated directly in lexicographic order.

use std::collections::BTreeMap;

use crate::error::{Error, Result};

/// Longest block supported by the orbit machinery (keys pack into a `u64`).
pub const MAX_ORBIT_BLOCK: usize = 8;

/// Upper bound on `C(modulus + L - 2, L - 1)` (sorted vectors starting at 0)
/// accepted by the enumerators.
pub const MAX_ENUMERATED: u64 = 20_000_000;

/// Largest `modulus^L` the brute-force orbit path will visit.
pub const MAX_BRUTE_FORCE: u64 = 1 << 24;

/// The group element mapping a vector to its canonical form:
/// `canonical[i] = (z[permutation[i]] + shift) mod modulus`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Transform {
    pub shift: usize,
    pub permutation: Vec<usize>,
}

impl Transform {
    pub fn apply(&self, z: &[u8], modulus: usize) -> Vec<u8> {
        self.permutation
            .iter()
            .map(|&i| ((z[i] as usize + self.shift) % modulus) as u8)
            .collect()
    }
}

/// Canonical form of `z` under permutation and constant addition mod `modulus`,
/// together with the transform that reaches it.
pub fn canonical_under_shift(z: &[u8], modulus: usize) -> (Vec<u8>, Transform) {
    let l = z.len();
    if l == 0 {
        return (
            Vec::new(),
            Transform {
                shift: 0,
                permutation: Vec::new(),
            },
        );
    }
    let mut order: Vec<usize> = (0..l).collect();
    order.sort_by_key(|&i| z[i]);
    let sorted: Vec<usize> = order.iter().map(|&i| z[i] as usize % modulus).collect();
    let gaps = gaps_of(&sorted, modulus);
    let start = min_rotation(&gaps);
    let shift = (modulus - sorted[start]) % modulus;
    let permutation: Vec<usize> = (0..l).map(|i| order[(start + i) % l]).collect();
    let mut canonical = Vec::with_capacity(l);
    let mut acc = 0usize;
    for i in 0..l {
        canonical.push(acc as u8);
        acc += gaps[(start + i) % l];
    }
    (canonical, Transform { shift, permutation })
}

/// Canonical form for the conditional reduction (`S_Z`).
pub fn canonical_conditional(z: &[u8], k: usize) -> (Vec<u8>, Transform) {
    canonical_under_shift(z, k)
}

/// Canonical form for the output reduction (`S~_Z`): entries reduced mod `a`,
/// then canonicalized mod `a`.
pub fn canonical_output(z: &[u8], k: usize, a: usize) -> Vec<u8> {
    debug_assert!(a > 0 && k.is_multiple_of(a));
    let reduced: Vec<u8> = z.iter().map(|&v| (v as usize % a) as u8).collect();
    canonical_under_shift(&reduced, a).0
}

/// Packed canonical form under constant addition mod `modulus`, without heap
/// allocation. `z` must have at most [`MAX_ORBIT_BLOCK`] entries below `modulus`.
pub(crate) fn canonical_key(z: &[u8], modulus: usize) -> u64 {
    let l = z.len();
    debug_assert!(l <= MAX_ORBIT_BLOCK);
    let mut sorted = [0u16; MAX_ORBIT_BLOCK];
    for (d, &s) in sorted.iter_mut().zip(z) {
        *d = s as u16;
    }
    sorted[..l].sort_unstable();
    let mut gaps = [0usize; MAX_ORBIT_BLOCK];
    for i in 0..l {
        gaps[i] = if i + 1 < l {
            (sorted[i + 1] - sorted[i]) as usize
        } else {
            sorted[0] as usize + modulus - sorted[l - 1] as usize
        };
    }
    let start = min_rotation(&gaps[..l]);
    let mut key = 0u64;
    let mut acc = 0usize;
    for i in 0..l {
        key = (key << 8) | acc as u64;
        acc += gaps[(start + i) % l];
    }
    key
}

/// Cyclic gaps of a sorted vector.
fn gaps_of(sorted: &[usize], modulus: usize) -> Vec<usize> {
    let l = sorted.len();
    (0..l)
        .map(|i| {
            if i + 1 < l {
                sorted[i + 1] - sorted[i]
            } else {
                sorted[0] + modulus - sorted[l - 1]
            }
        })
        .collect()
}

/// Start index of the lexicographically smallest rotation (first on ties).
fn min_rotation(seq: &[usize]) -> usize {
    let l = seq.len();
    let mut best = 0;
    for cand in 1..l {
        for i in 0..l {
            let (c, b) = (seq[(cand + i) % l], seq[(best + i) % l]);
            if c != b {
                if c < b {
                    best = cand;
                }
                break;
            }
        }
    }
    best
}

/// `L! / prod(c_v!)` where `c_v` counts the entries equal to `v`.
pub fn multinomial_of(z: &[u8]) -> u64 {
    let mut counts = [0usize; 256];
    for &v in z {
        counts[v as usize] += 1;
    }
    let mut out = factorial(z.len());
    for &c in counts.iter().filter(|&&c| c > 1) {
        out /= factorial(c);
    }
    out
}

fn factorial(n: usize) -> u64 {
    (1..=n as u64).product()
}

fn binomial(n: u64, r: u64) -> u64 {
    let r = r.min(n.saturating_sub(r));
    let mut acc: u128 = 1;
    for i in 0..r {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc.min(u64::MAX as u128) as u64
}

/// Packs a vector of at most eight symbols into a `u64`, preserving
/// lexicographic order among vectors of equal length.
pub(crate) fn pack(v: &[u8]) -> u64 {
    v.iter().fold(0u64, |acc, &s| (acc << 8) | s as u64)
}

/// Representatives stored as one flat buffer, sorted lexicographically.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RepSet {
    len: usize,
    flat: Vec<u8>,
}

impl RepSet {
    fn new(len: usize) -> Self {
        Self {
            len,
            flat: Vec::new(),
        }
    }

    /// Number of representatives.
    pub fn count(&self) -> usize {
        self.flat.len().checked_div(self.len).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.flat.is_empty()
    }

    pub fn vector_len(&self) -> usize {
        self.len
    }

    pub fn get(&self, i: usize) -> &[u8] {
        &self.flat[i * self.len..(i + 1) * self.len]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, u8> {
        self.flat.chunks_exact(self.len.max(1))
    }

    /// Index of `rep` by binary search.
    pub fn position(&self, rep: &[u8]) -> Option<usize> {
        let (mut lo, mut hi) = (0, self.count());
        while lo < hi {
            let mid = (lo + hi) / 2;
            match self.get(mid).cmp(rep) {
                std::cmp::Ordering::Less => lo = mid + 1,
                std::cmp::Ordering::Greater => hi = mid,
                std::cmp::Ordering::Equal => return Some(mid),
            }
        }
        None
    }

    fn push(&mut self, v: &[u8]) {
        self.flat.extend_from_slice(v);
    }
}

fn check_orbit_size(modulus: usize, l: usize) -> Result<u64> {
    if l == 0 || l > MAX_ORBIT_BLOCK {
        return Err(Error::ResourceGuard(format!(
            "orbit tables support block lengths 1..={MAX_ORBIT_BLOCK}, got L={l}"
        )));
    }
    if modulus == 0 || modulus > 256 {
        return Err(Error::InvalidConfig(format!("modulus {modulus} outside 1..=256")));
    }
    let total = (modulus as u64)
        .checked_pow(l as u32)
        .filter(|&t| t <= 1 << 62)
        .ok_or_else(|| Error::ResourceGuard(format!("{modulus}^{l} overflows the orbit counts")))?;
    let sorted = binomial((modulus + l - 2) as u64, (l - 1) as u64);
    if sorted > MAX_ENUMERATED {
        return Err(Error::ResourceGuard(format!(
            "modulus {modulus}, L={l}: {sorted} sorted candidates exceeds the limit {MAX_ENUMERATED}"
        )));
    }
    Ok(total)
}

/// Visits every canonical representative (in lexicographic order) with the
/// period of its gap sequence.
fn for_each_necklace(modulus: usize, l: usize, mut visit: impl FnMut(&[u8], usize)) {
    // FKM prenecklace generation over gaps in 0..=modulus, pruned by sum
    let mut gaps = vec![0usize; l + 1];
    let mut z = vec![0u8; l];
    fkm(1, 1, 0, modulus, l, &mut gaps, &mut z, &mut visit);
}

#[allow(clippy::too_many_arguments)]
fn fkm(
    t: usize,
    p: usize,
    sum: usize,
    modulus: usize,
    l: usize,
    gaps: &mut [usize],
    z: &mut [u8],
    visit: &mut impl FnMut(&[u8], usize),
) {
    if t > l {
        if sum == modulus && l.is_multiple_of(p) {
            visit(z, p);
        }
        return;
    }
    // gaps[t] is g_{t-1} in 0-based terms; entry z[t] = z[t-1] + gaps[t]
    let floor = gaps[t - p];
    if t == l {
        let last = modulus - sum;
        if last < floor {
            return;
        }
        gaps[t] = last;
        let np = if last == floor { p } else { t };
        fkm(t + 1, np, modulus, modulus, l, gaps, z, visit);
        return;
    }
    // the closing gap of a necklace is never zero, so keep sum < modulus
    for v in floor..(modulus - sum) {
        gaps[t] = v;
        z[t] = (sum + v) as u8;
        let np = if v == floor { p } else { t };
        fkm(t + 1, np, sum + v, modulus, l, gaps, z, visit);
    }
}

fn shift_orbit_table(modulus: usize, l: usize) -> (RepSet, Vec<u64>) {
    let mut reps = RepSet::new(l);
    let mut counts = Vec::new();
    for_each_necklace(modulus, l, |z, period| {
        reps.push(z);
        // distinct multisets in the shift orbit times distinct orderings
        let shifts = (modulus * period / l) as u64;
        counts.push(shifts * multinomial_of(z));
    });
    (reps, counts)
}

/// Orbit sizes by exhaustive enumeration of all `modulus^L` vectors, each
/// canonicalized by trying every constant addition. Independent of the
/// necklace enumeration; meant for validation at small sizes.
pub fn brute_force_orbits(modulus: usize, l: usize) -> Result<BTreeMap<Vec<u8>, u64>> {
    let total = (modulus as u64).saturating_pow(l as u32);
    if total > MAX_BRUTE_FORCE {
        return Err(Error::ResourceGuard(format!(
            "brute force over {modulus}^{l} = {total} vectors exceeds {MAX_BRUTE_FORCE}"
        )));
    }
    let mut out = BTreeMap::new();
    let mut z = vec![0u8; l];
    for idx in 0..total {
        let mut rest = idx;
        for slot in z.iter_mut().rev() {
            *slot = (rest % modulus as u64) as u8;
            rest /= modulus as u64;
        }
        *out.entry(canonical_by_search(&z, modulus)).or_insert(0) += 1;
    }
    Ok(out)
}

/// Smallest sorted vector over all `modulus` constant additions.
pub fn canonical_by_search(z: &[u8], modulus: usize) -> Vec<u8> {
    (0..modulus)
        .map(|i| {
            let mut v: Vec<u8> = z
                .iter()
                .map(|&s| ((s as usize + i) % modulus) as u8)
                .collect();
            v.sort_unstable();
            v
        })
        .min()
        .unwrap_or_default()
}

/// `S_Z`: representatives of `{0..K}^L` under permutation and constant addition
/// mod `K`, with orbit sizes `n(z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalOrbitTable {
    k: usize,
    l: usize,
    reps: RepSet,
    counts: Vec<u64>,
}

impl ConditionalOrbitTable {
    pub fn enumerate(k: usize, l: usize) -> Result<Self> {
        check_orbit_size(k, l)?;
        let (reps, counts) = shift_orbit_table(k, l);
        Ok(Self { k, l, reps, counts })
    }

    /// Same table built by exhaustive enumeration (small sizes only).
    pub fn brute_force(k: usize, l: usize) -> Result<Self> {
        let orbits = brute_force_orbits(k, l)?;
        Ok(Self::from_parts(k, l, orbits.into_iter()))
    }

    pub(crate) fn from_parts(k: usize, l: usize, it: impl Iterator<Item = (Vec<u8>, u64)>) -> Self {
        let mut reps = RepSet::new(l);
        let mut counts = Vec::new();
        for (r, c) in it {
            reps.push(&r);
            counts.push(c);
        }
        Self { k, l, reps, counts }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn block_length(&self) -> usize {
        self.l
    }

    pub fn reps(&self) -> &RepSet {
        &self.reps
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Index of the orbit containing `z`.
    pub fn orbit_of(&self, z: &[u8]) -> Option<usize> {
        self.reps.position(&canonical_conditional(z, self.k).0)
    }
}

/// `S~_Z`: representatives over `{0..a}^L` under permutation and constant
/// addition mod `a`. `counts[i]` is the number of vectors in `{0..K}^L` that
/// reduce to representative `i`, i.e. `m(rep) M^L`.
#[derive(Debug, Clone, PartialEq)]
pub struct OutputOrbitTable {
    k: usize,
    m: usize,
    l: usize,
    reps: RepSet,
    counts: Vec<u64>,
}

impl OutputOrbitTable {
    pub fn enumerate(k: usize, m: usize, l: usize) -> Result<Self> {
        if m == 0 || !k.is_multiple_of(m) {
            return Err(Error::InvalidConfig(format!("K={k} is not a multiple of M={m}")));
        }
        let a = k / m;
        check_orbit_size(k, l)?;
        let lift = (m as u64).pow(l as u32);
        let (reps, small) = shift_orbit_table(a, l);
        let counts = small.into_iter().map(|c| c * lift).collect();
        Ok(Self { k, m, l, reps, counts })
    }

    /// Orbit sizes by running [`canonical_output`] over all `K^L` vectors.
    pub fn brute_force(k: usize, m: usize, l: usize) -> Result<Self> {
        let total = (k as u64).saturating_pow(l as u32);
        if total > MAX_BRUTE_FORCE {
            return Err(Error::ResourceGuard(format!(
                "brute force over {k}^{l} vectors exceeds {MAX_BRUTE_FORCE}"
            )));
        }
        let a = k / m;
        let mut orbits: BTreeMap<Vec<u8>, u64> = BTreeMap::new();
        let mut z = vec![0u8; l];
        for idx in 0..total {
            let mut rest = idx;
            for slot in z.iter_mut().rev() {
                *slot = (rest % k as u64) as u8;
                rest /= k as u64;
            }
            let reduced: Vec<u8> = z.iter().map(|&v| (v as usize % a) as u8).collect();
            *orbits.entry(canonical_by_search(&reduced, a)).or_insert(0) += 1;
        }
        Ok(Self::from_parts(k, m, l, orbits.into_iter()))
    }

    pub(crate) fn from_parts(
        k: usize,
        m: usize,
        l: usize,
        it: impl Iterator<Item = (Vec<u8>, u64)>,
    ) -> Self {
        let mut reps = RepSet::new(l);
        let mut counts = Vec::new();
        for (r, c) in it {
            reps.push(&r);
            counts.push(c);
        }
        Self { k, m, l, reps, counts }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn a(&self) -> usize {
        self.k / self.m
    }

    pub fn block_length(&self) -> usize {
        self.l
    }

    pub fn reps(&self) -> &RepSet {
        &self.reps
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn orbit_of(&self, z: &[u8]) -> Option<usize> {
        self.reps.position(&canonical_output(z, self.k, self.a()))
    }
}

/// `S_X` for one outcome vector: input vectors up to reordering within the
/// positions where `z` repeats a value.
#[derive(Debug, Clone, PartialEq)]
pub struct InputReduction {
    reps: RepSet,
    multiplicities: Vec<u64>,
}

impl InputReduction {
    pub fn reps(&self) -> &RepSet {
        &self.reps
    }

    pub fn multiplicities(&self) -> &[u64] {
        &self.multiplicities
    }

    pub fn len(&self) -> usize {
        self.multiplicities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.multiplicities.is_empty()
    }

    pub fn total(&self) -> u64 {
        self.multiplicities.iter().sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&[u8], u64)> + '_ {
        self.reps.iter().zip(self.multiplicities.iter().copied())
    }
}

/// Builds `S_X` for `z` with `m` input symbols. Within each group of positions
/// sharing a `z` value the representative input is non-decreasing; its
/// multiplicity is the number of distinct rearrangements within the groups.
pub fn reduce_inputs(z: &[u8], m: usize) -> InputReduction {
    let l = z.len();
    let mut groups: BTreeMap<u8, Vec<usize>> = BTreeMap::new();
    for (pos, &v) in z.iter().enumerate() {
        groups.entry(v).or_default().push(pos);
    }
    let groups: Vec<Vec<usize>> = groups.into_values().collect();
    let mut reps = RepSet::new(l);
    let mut multiplicities = Vec::new();
    let mut x = vec![0u8; l];
    fill_groups(&groups, 0, m, &mut x, 1, &mut reps, &mut multiplicities);
    InputReduction {
        reps,
        multiplicities,
    }
}

fn fill_groups(
    groups: &[Vec<usize>],
    g: usize,
    m: usize,
    x: &mut [u8],
    mult: u64,
    reps: &mut RepSet,
    mults: &mut Vec<u64>,
) {
    if g == groups.len() {
        reps.push(x);
        mults.push(mult);
        return;
    }
    let positions = &groups[g];
    let mut values = vec![0u8; positions.len()];
    loop {
        for (&p, &v) in positions.iter().zip(&values) {
            x[p] = v;
        }
        let here = multinomial_of(&values);
        fill_groups(groups, g + 1, m, x, mult * here, reps, mults);
        if !next_multiset(&mut values, m) {
            break;
        }
    }
}

/// Advances a non-decreasing sequence over `0..m`; false after the last one.
fn next_multiset(values: &mut [u8], m: usize) -> bool {
    let Some(i) = values.iter().rposition(|&v| (v as usize) + 1 < m) else {
        return false;
    };
    let next = values[i] + 1;
    values[i..].iter_mut().for_each(|v| *v = next);
    true
}
