//! Channel model: parameters, the K-sector phase quantizer, the MPSK
//! constellation (optionally dithered) and the scalar sector likelihood
//! `P(z | x, phi)`.
//!
//! Received symbols are `r_l = exp(j(theta_{x_l} + delta_l + phi)) + n_l` with
//! unit symbol energy and circular Gaussian noise of variance `sigma^2` per
//! dimension. The SNR is `Es/N0 = 1 / (2 sigma^2)`.

use std::f64::consts::{PI, TAU};
use std::fmt;
use std::ops::Deref;
use std::sync::OnceLock;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Largest constellation / sector count. Symbols are stored as `u8`.
pub const MAX_ALPHABET: usize = 256;

/// Order of the Gauss-Legendre rule used on every integration panel.
pub const GAUSS_LEGENDRE_ORDER: usize = 32;

/// dB to linear power ratio.
pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(linear: f64) -> f64 {
    10.0 * linear.log10()
}

/// Parameters of one phase-quantized block-noncoherent channel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelConfig {
    m: usize,
    k: usize,
    l: usize,
    snr: f64,
}

impl ChannelConfig {
    /// `m`-PSK input, `k` quantization sectors, block length `l`, linear SNR
    /// `Es/N0`. An SNR of exactly zero is accepted as the pure-noise limit.
    pub fn new(m: usize, k: usize, l: usize, snr: f64) -> Result<Self> {
        if m == 0 || k == 0 {
            return Err(Error::InvalidConfig(format!(
                "M and K must be positive (M={m}, K={k})"
            )));
        }
        if !k.is_multiple_of(m) {
            return Err(Error::InvalidConfig(format!(
                "K must be a multiple of M (M={m}, K={k})"
            )));
        }
        if k > MAX_ALPHABET {
            return Err(Error::InvalidConfig(format!(
                "K={k} exceeds the supported maximum of {MAX_ALPHABET}"
            )));
        }
        if l < 2 {
            return Err(Error::InvalidConfig(format!(
                "block length must be at least 2 (L={l})"
            )));
        }
        if !snr.is_finite() || snr < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "SNR must be finite and non-negative (snr={snr})"
            )));
        }
        Ok(Self { m, k, l, snr })
    }

    pub fn from_db(m: usize, k: usize, l: usize, snr_db: f64) -> Result<Self> {
        Self::new(m, k, l, db_to_linear(snr_db))
    }

    /// Same channel at a different linear SNR.
    pub fn with_snr(&self, snr: f64) -> Result<Self> {
        Self::new(self.m, self.k, self.l, snr)
    }

    pub fn with_block_length(&self, l: usize) -> Result<Self> {
        Self::new(self.m, self.k, l, self.snr)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn l(&self) -> usize {
        self.l
    }

    pub fn snr(&self) -> f64 {
        self.snr
    }

    pub fn snr_db(&self) -> f64 {
        linear_to_db(self.snr)
    }

    /// Sectors per constellation step, `K / M`.
    pub fn a(&self) -> usize {
        self.k / self.m
    }

    /// Per-dimension noise variance `N0 / 2`; infinite at zero SNR.
    pub fn sigma_sq(&self) -> f64 {
        0.5 / self.snr
    }

    pub fn sector_width(&self) -> f64 {
        TAU / self.k as f64
    }
}

/// Uniform MPSK with an optional per-slot rotation.
#[derive(Debug, Clone, PartialEq)]
pub struct Constellation {
    base_phases: Vec<f64>,
    dither_offsets: Vec<f64>,
}

impl Constellation {
    /// Standard MPSK, `theta_m = 2 pi m / M`, identical in every slot.
    pub fn standard(cfg: &ChannelConfig) -> Self {
        Self {
            base_phases: Self::psk_phases(cfg.m()),
            dither_offsets: vec![0.0; cfg.l()],
        }
    }

    /// Transmit dither: slot `l` is rotated by `l (2 pi / K) / L`.
    pub fn dithered(cfg: &ChannelConfig) -> Self {
        let step = TAU / (cfg.k() * cfg.l()) as f64;
        Self {
            base_phases: Self::psk_phases(cfg.m()),
            dither_offsets: (0..cfg.l()).map(|l| l as f64 * step).collect(),
        }
    }

    pub fn new(cfg: &ChannelConfig, dither: bool) -> Self {
        if dither {
            Self::dithered(cfg)
        } else {
            Self::standard(cfg)
        }
    }

    fn psk_phases(m: usize) -> Vec<f64> {
        (0..m).map(|i| TAU * i as f64 / m as f64).collect()
    }

    pub fn base_phases(&self) -> &[f64] {
        &self.base_phases
    }

    pub fn dither_offsets(&self) -> &[f64] {
        &self.dither_offsets
    }

    pub fn is_dithered(&self) -> bool {
        self.dither_offsets.iter().any(|&d| d != 0.0)
    }

    /// Dither angle of `slot`; zero when `slot` is `None`.
    pub fn offset(&self, slot: Option<usize>) -> f64 {
        slot.map_or(0.0, |l| self.dither_offsets[l])
    }

    /// Transmitted phase of symbol `x` in `slot`.
    pub fn phase(&self, x: usize, slot: Option<usize>) -> f64 {
        self.base_phases[x] + self.offset(slot)
    }

    /// Phase of symbol `x` in `slot`, including the channel phase `phi`.
    pub fn point(&self, x: usize, slot: Option<usize>, phi: f64) -> Complex64 {
        Complex64::from_polar(1.0, self.phase(x, slot) + phi)
    }
}

macro_rules! symbol_vector {
    ($(#[$meta:meta])* $name:ident, $what:literal) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize)]
        #[serde(transparent)]
        pub struct $name(pub(crate) Vec<u8>);

        impl $name {
            /// Validates that every entry lies in `0..alphabet`.
            pub fn new(values: Vec<u8>, alphabet: usize) -> Result<Self> {
                if let Some(bad) = values.iter().find(|&&v| v as usize >= alphabet) {
                    return Err(Error::InvalidVector(format!(
                        concat!($what, " entry {} outside 0..{}"),
                        bad, alphabet
                    )));
                }
                Ok(Self(values))
            }

            /// Like `new` but also checks the block length.
            pub fn with_length(values: Vec<u8>, alphabet: usize, len: usize) -> Result<Self> {
                if values.len() != len {
                    return Err(Error::InvalidVector(format!(
                        concat!($what, " has length {}, expected {}"),
                        values.len(),
                        len
                    )));
                }
                Self::new(values, alphabet)
            }

            pub fn into_inner(self) -> Vec<u8> {
                self.0
            }
        }

        impl Deref for $name {
            type Target = [u8];

            fn deref(&self) -> &[u8] {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                write_symbols(f, &self.0)
            }
        }
    };
}

symbol_vector!(
    /// Quantized outputs `z`, entries in `0..K`.
    OutcomeVector,
    "outcome"
);
symbol_vector!(
    /// Channel inputs `x`, entries in `0..M`.
    InputVector,
    "input"
);

/// Writes `[a b c]`.
pub(crate) fn write_symbols(f: &mut impl fmt::Write, v: &[u8]) -> fmt::Result {
    f.write_char('[')?;
    for (i, s) in v.iter().enumerate() {
        if i > 0 {
            f.write_char(' ')?;
        }
        write!(f, "{s}")?;
    }
    f.write_char(']')
}

pub(crate) fn format_symbols(v: &[u8]) -> String {
    let mut s = String::new();
    write_symbols(&mut s, v).expect("writing to a String");
    s
}

/// K-sector phase quantizer, `floor(arg(c) K / 2 pi)` with `arg` in `[0, 2 pi)`.
///
/// Boundary points go to the higher-indexed sector; the origin maps to 0.
pub fn sector_of(point: Complex64, k: usize) -> usize {
    if point.re == 0.0 && point.im == 0.0 {
        return 0;
    }
    let mut arg = point.im.atan2(point.re);
    if arg < 0.0 {
        arg += TAU;
    }
    ((arg * k as f64 / TAU).floor() as usize).min(k - 1)
}

/// Density of `arg(1 + n)` for circular Gaussian `n` at SNR `snr = 1 / (2 sigma^2)`.
///
/// The expression is 2 pi periodic in `psi`, so any real argument is accepted.
pub fn phase_error_pdf(psi: f64, snr: f64) -> f64 {
    let uniform = (-snr).exp() / TAU;
    if snr == 0.0 {
        return uniform;
    }
    let (s, c) = psi.sin_cos();
    let root = snr.sqrt();
    uniform + 0.5 * (snr / PI).sqrt() * c * (-snr * s * s).exp() * libm::erfc(-root * c)
}

fn gauss_legendre() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| {
        GaussLegendre::new(GAUSS_LEGENDRE_ORDER.try_into().expect("nonzero order"))
    })
}

/// Integral of the phase-error density over `[lo, hi]`.
///
/// Composite Gauss-Legendre: the interval is split into panels no wider than
/// about one noise standard deviation so that high-SNR peaks stay resolved.
pub fn phase_error_mass(lo: f64, hi: f64, snr: f64) -> f64 {
    let width = hi - lo;
    if width == 0.0 {
        return 0.0;
    }
    if snr == 0.0 {
        return width / TAU;
    }
    let panels = (width.abs() * snr.max(1.0).sqrt()).ceil().max(1.0) as usize;
    let step = width / panels as f64;
    let rule = gauss_legendre();
    (0..panels)
        .map(|p| {
            let a = lo + p as f64 * step;
            rule.integrate(a, a + step, |psi| phase_error_pdf(psi, snr))
        })
        .sum()
}

/// `P(z | x, phi)` for one slot: the chance that noise carries the point at
/// angle `theta_x + delta_slot + phi` into sector `z`.
pub fn sector_prob(
    z: usize,
    x: usize,
    phi: f64,
    slot: Option<usize>,
    cfg: &ChannelConfig,
    cons: &Constellation,
) -> f64 {
    let width = cfg.sector_width();
    let lo = z as f64 * width - (cons.phase(x, slot) + phi);
    phase_error_mass(lo, lo + width, cfg.snr()).clamp(0.0, 1.0)
}

fn complex_noise<R: Rng + ?Sized>(rng: &mut R, sigma: f64) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(sigma * re, sigma * im)
}

fn quantize_one<R: Rng + ?Sized>(
    x: usize,
    slot: usize,
    phi: f64,
    cfg: &ChannelConfig,
    cons: &Constellation,
    rng: &mut R,
) -> usize {
    if cfg.snr() == 0.0 {
        // signal is negligible against unbounded noise
        return sector_of(complex_noise(rng, 1.0), cfg.k());
    }
    let r = cons.point(x, Some(slot), phi) + complex_noise(rng, cfg.sigma_sq().sqrt());
    sector_of(r, cfg.k())
}

/// Quantized outputs for input `x` with the channel phase held at `phi`.
pub fn sample_block_at_phase<R: Rng + ?Sized>(
    x: &[u8],
    phi: f64,
    cfg: &ChannelConfig,
    cons: &Constellation,
    rng: &mut R,
) -> OutcomeVector {
    let z = x
        .iter()
        .enumerate()
        .map(|(l, &xl)| quantize_one(xl as usize, l, phi, cfg, cons, rng) as u8)
        .collect();
    OutcomeVector(z)
}

/// One channel use: `phi` uniform on `[0, 2 pi)`, fresh noise on every symbol.
pub fn sample_block<R: Rng + ?Sized>(
    x: &[u8],
    cfg: &ChannelConfig,
    cons: &Constellation,
    rng: &mut R,
) -> OutcomeVector {
    let phi = rng.random::<f64>() * TAU;
    sample_block_at_phase(x, phi, cfg, cons, rng)
}

/// Monte Carlo probability estimate with its binomial standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbabilityEstimate {
    pub estimate: f64,
    pub std_error: f64,
    pub samples: u64,
}

impl ProbabilityEstimate {
    /// Whether `value` lies within `n_sigma` standard errors.
    pub fn agrees_with(&self, value: f64, n_sigma: f64) -> bool {
        (self.estimate - value).abs() <= n_sigma * self.std_error
    }
}

/// Minimum sample count accepted by [`mc_sector_oracle`].
pub const MIN_ORACLE_SAMPLES: u64 = 10_000;

/// Brute-force estimate of [`sector_prob`] by quantizing noisy points.
#[allow(clippy::too_many_arguments)]
pub fn mc_sector_oracle<R: Rng + ?Sized>(
    z: usize,
    x: usize,
    phi: f64,
    slot: Option<usize>,
    cfg: &ChannelConfig,
    cons: &Constellation,
    samples: u64,
    rng: &mut R,
) -> Result<ProbabilityEstimate> {
    if samples < MIN_ORACLE_SAMPLES {
        return Err(Error::InvalidConfig(format!(
            "oracle needs at least {MIN_ORACLE_SAMPLES} samples, got {samples}"
        )));
    }
    let point = cons.point(x, slot, phi);
    let sigma = if cfg.snr() == 0.0 {
        1.0
    } else {
        cfg.sigma_sq().sqrt()
    };
    let signal = if cfg.snr() == 0.0 {
        Complex64::new(0.0, 0.0)
    } else {
        point
    };
    let hits = (0..samples)
        .filter(|_| sector_of(signal + complex_noise(rng, sigma), cfg.k()) == z)
        .count() as f64;
    let n = samples as f64;
    let p = hits / n;
    Ok(ProbabilityEstimate {
        estimate: p,
        std_error: (p * (1.0 - p) / n).sqrt().max(0.5 / n),
        samples,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn cfg(snr_db: f64) -> ChannelConfig {
        ChannelConfig::from_db(4, 8, 3, snr_db).unwrap()
    }

    #[test]
    fn config_validation() {
        assert!(ChannelConfig::new(4, 8, 3, 1.0).is_ok());
        assert!(ChannelConfig::new(4, 6, 3, 1.0).is_err());
        assert!(ChannelConfig::new(4, 8, 1, 1.0).is_err());
        assert!(ChannelConfig::new(4, 8, 3, -1.0).is_err());
        assert!(ChannelConfig::new(4, 8, 3, f64::NAN).is_err());
        assert!(ChannelConfig::new(0, 8, 3, 1.0).is_err());
        let c = ChannelConfig::new(4, 12, 3, 2.0).unwrap();
        assert_eq!(c.a(), 3);
        assert!((c.sigma_sq() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn quantizer_examples() {
        assert_eq!(sector_of(Complex64::new(1.0, 0.0), 8), 0);
        assert_eq!(sector_of(Complex64::new(0.0, 1.0), 8), 2);
        assert_eq!(sector_of(Complex64::new(-1.0, -1e-9), 8), 4);
        assert_eq!(sector_of(Complex64::new(0.0, 0.0), 8), 0);
        assert_eq!(sector_of(Complex64::new(1.0, -1e-300), 8), 7);
        // boundary at pi/4 goes to the upper sector
        assert_eq!(sector_of(Complex64::new(1.0, 1.0), 8), 1);
    }

    #[test]
    fn pdf_zero_snr_and_symmetry() {
        for &psi in &[-3.0, -1.0, 0.0, 0.4, 2.9] {
            assert!((phase_error_pdf(psi, 0.0) - 1.0 / TAU).abs() < 1e-15);
            let s = 3.7;
            assert!((phase_error_pdf(psi, s) - phase_error_pdf(-psi, s)).abs() < 1e-14);
        }
    }

    #[test]
    fn sector_prob_zero_snr_uniform() {
        let c = ChannelConfig::new(4, 8, 3, 0.0).unwrap();
        let cons = Constellation::standard(&c);
        for z in 0..8 {
            for x in 0..4 {
                let p = sector_prob(z, x, 0.77, None, &c, &cons);
                assert!((p - 0.125).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn sector_probs_sum_to_one() {
        for &db in &[-5.0, 5.0, 20.0, 40.0] {
            let c = cfg(db);
            let cons = Constellation::standard(&c);
            let total: f64 = (0..8).map(|z| sector_prob(z, 1, 0.3, None, &c, &cons)).sum();
            assert!((total - 1.0).abs() < 1e-12, "{db} dB: {total}");
        }
    }

    #[test]
    fn dither_schedule() {
        let c = ChannelConfig::new(4, 8, 3, 1.0).unwrap();
        let d = Constellation::dithered(&c);
        assert!(d.is_dithered());
        assert!(!Constellation::standard(&c).is_dithered());
        assert!((d.dither_offsets()[1] - PI / 12.0).abs() < 1e-15);
        assert!((d.dither_offsets()[2] - PI / 6.0).abs() < 1e-15);
        assert!((d.base_phases()[3] - 1.5 * PI).abs() < 1e-15);
    }

    #[test]
    fn noiseless_sampling_hits_sector_midpoints() {
        let c = ChannelConfig::from_db(4, 8, 4, 60.0).unwrap();
        let cons = Constellation::standard(&c);
        let mut rng = ChaCha20Rng::seed_from_u64(1);
        let x = [0u8, 1, 3, 2];
        for _ in 0..100 {
            let z = sample_block_at_phase(&x, PI / 8.0, &c, &cons, &mut rng);
            let expect: Vec<u8> = x.iter().map(|&v| 2 * v).collect();
            assert_eq!(&*z, &expect[..]);
        }
    }

    #[test]
    fn oracle_rejects_small_sample_counts() {
        let c = cfg(5.0);
        let cons = Constellation::standard(&c);
        let mut rng = ChaCha20Rng::seed_from_u64(0);
        assert!(mc_sector_oracle(0, 0, 0.0, None, &c, &cons, 100, &mut rng).is_err());
    }

    #[test]
    fn vector_validation() {
        assert!(OutcomeVector::new(vec![0, 7, 3], 8).is_ok());
        assert!(OutcomeVector::new(vec![0, 8], 8).is_err());
        assert!(InputVector::with_length(vec![0, 1], 4, 3).is_err());
        assert_eq!(OutcomeVector::new(vec![5, 7, 2, 4], 8).unwrap().to_string(), "[5 7 2 4]");
    }
}
