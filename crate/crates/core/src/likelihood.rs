//! Tabulated sector likelihoods on a uniform channel-phase grid.
//!
//! Only `x = 0` is stored: `P(z | x, phi) = P((z - a x) mod K | 0, phi)` holds
//! slot by slot, dithered or not, because every constellation point sits at a
//! multiple of the sector width.

use std::f64::consts::TAU;

use crate::channel::{phase_error_mass, ChannelConfig, Constellation};
use crate::error::{Error, Result};

/// Grid points per sector used when no explicit `n_phi` is requested.
pub const DEFAULT_NODES_PER_SECTOR: usize = 128;

/// `P(z | x = 0, phi_n)` for every grid node `phi_n = 2 pi n / n_phi`, one
/// table per slot when the constellation is dithered.
#[derive(Debug, Clone)]
pub struct SectorLikelihoodTable {
    cfg: ChannelConfig,
    n_phi: usize,
    dithered: bool,
    // per slot, column-major: values[z * n_phi + n]
    slots: Vec<Vec<f64>>,
    // per slot, (1/M) sum_x P(z | x, phi_n), same layout
    mixtures: Vec<Vec<f64>>,
}

impl SectorLikelihoodTable {
    pub fn default_n_phi(k: usize) -> usize {
        DEFAULT_NODES_PER_SECTOR * k
    }

    /// Tabulates the sector likelihoods. `n_phi` must be a positive multiple
    /// of `K` so the grid is closed under phase shifts of one sector.
    pub fn build(cfg: &ChannelConfig, cons: &Constellation, n_phi: usize) -> Result<Self> {
        let k = cfg.k();
        if n_phi == 0 || !n_phi.is_multiple_of(k) {
            return Err(Error::InvalidConfig(format!(
                "n_phi={n_phi} must be a positive multiple of K={k}"
            )));
        }
        if cons.dither_offsets().len() != cfg.l() || cons.base_phases().len() != cfg.m() {
            return Err(Error::InvalidConfig(
                "constellation does not match the channel configuration".into(),
            ));
        }
        let dithered = cons.is_dithered();
        let slot_count = if dithered { cfg.l() } else { 1 };
        let slots: Vec<Vec<f64>> = (0..slot_count)
            .map(|l| tabulate(cfg, n_phi, cons.offset(Some(l))))
            .collect();
        let mixtures = slots.iter().map(|s| mixture(cfg, n_phi, s)).collect();
        Ok(Self {
            cfg: *cfg,
            n_phi,
            dithered,
            slots,
            mixtures,
        })
    }

    pub fn config(&self) -> &ChannelConfig {
        &self.cfg
    }

    pub fn n_phi(&self) -> usize {
        self.n_phi
    }

    pub fn k(&self) -> usize {
        self.cfg.k()
    }

    pub fn m(&self) -> usize {
        self.cfg.m()
    }

    pub fn a(&self) -> usize {
        self.cfg.a()
    }

    pub fn block_length(&self) -> usize {
        self.cfg.l()
    }

    pub fn is_dithered(&self) -> bool {
        self.dithered
    }

    pub fn phi(&self, n: usize) -> f64 {
        TAU * n as f64 / self.n_phi as f64
    }

    fn slot_index(&self, slot: usize) -> usize {
        if self.dithered {
            slot
        } else {
            0
        }
    }

    /// `P(z | 0, phi_n)` over all `n`, for `slot`.
    pub fn column(&self, slot: usize, z: usize) -> &[f64] {
        let s = &self.slots[self.slot_index(slot)];
        &s[z * self.n_phi..(z + 1) * self.n_phi]
    }

    /// `P(z | x, phi_n)` over all `n`, for `slot`.
    pub fn conditional_column(&self, slot: usize, z: usize, x: usize) -> &[f64] {
        self.column(slot, self.shifted_index(z, x))
    }

    /// `(1/M) sum_x P(z | x, phi_n)` over all `n`, for `slot`.
    pub fn mixture_column(&self, slot: usize, z: usize) -> &[f64] {
        let s = &self.mixtures[self.slot_index(slot)];
        &s[z * self.n_phi..(z + 1) * self.n_phi]
    }

    /// `(z - a x) mod K`.
    pub fn shifted_index(&self, z: usize, x: usize) -> usize {
        let k = self.k();
        (z + k - (self.a() * x) % k) % k
    }

    pub fn value(&self, slot: usize, n: usize, z: usize) -> f64 {
        self.column(slot, z)[n]
    }

    pub fn prob(&self, slot: usize, n: usize, z: usize, x: usize) -> f64 {
        self.value(slot, n, self.shifted_index(z, x))
    }

    /// Row `n` of the slot table: `P(. | 0, phi_n)`.
    pub fn row(&self, slot: usize, n: usize) -> Vec<f64> {
        (0..self.k()).map(|z| self.value(slot, n, z)).collect()
    }
}

/// Sector masses assembled from `n_phi` elementary segments of width
/// `2 pi / n_phi`. Every sector boundary seen by a grid phase is a segment
/// boundary, so each entry is a plain sum of `n_phi / K` segment integrals.
fn tabulate(cfg: &ChannelConfig, n_phi: usize, offset: f64) -> Vec<f64> {
    let k = cfg.k();
    let per_sector = n_phi / k;
    let h = TAU / n_phi as f64;
    let segments: Vec<f64> = (0..n_phi)
        .map(|j| {
            let lo = j as f64 * h - offset;
            phase_error_mass(lo, lo + h, cfg.snr()).max(0.0)
        })
        .collect();
    let mut values = vec![0.0; k * n_phi];
    for z in 0..k {
        for n in 0..n_phi {
            // interval [2 pi z / K - offset - phi_n, ...) starts at segment z r - n
            let start = (z * per_sector + n_phi - n) % n_phi;
            let mut acc = 0.0;
            for i in 0..per_sector {
                acc += segments[(start + i) % n_phi];
            }
            values[z * n_phi + n] = acc;
        }
    }
    values
}

fn mixture(cfg: &ChannelConfig, n_phi: usize, values: &[f64]) -> Vec<f64> {
    let (k, m, a) = (cfg.k(), cfg.m(), cfg.a());
    let mut out = vec![0.0; k * n_phi];
    for z in 0..k {
        let dst = &mut out[z * n_phi..(z + 1) * n_phi];
        for x in 0..m {
            let src_z = (z + k - (a * x) % k) % k;
            let src = &values[src_z * n_phi..(src_z + 1) * n_phi];
            for (d, s) in dst.iter_mut().zip(src) {
                *d += s;
            }
        }
        dst.iter_mut().for_each(|d| *d /= m as f64);
    }
    out
}
