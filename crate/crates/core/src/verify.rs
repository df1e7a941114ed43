//! Invariant suite: likelihood symmetries, block and output symmetries,
//! orbit bookkeeping and agreement between the reduced and brute-force
//! capacity routes.
//!
//! Scalar checks compare absolute differences of sector probabilities. Block
//! checks compare relative differences, since block probabilities span many
//! orders of magnitude. Under dither the permutation symmetries are expected
//! to break and are reported as such.

use std::f64::consts::{PI, TAU};
use std::fmt;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::capacity::{
    block_conditional_prob, brute_force_mutual_information, conditional_entropy_given,
    output_prob, output_prob_factorized, shift_reduced_capacity, CapacityEngine,
    ConditionalProbs,
};
use crate::channel::{phase_error_mass, sector_prob, ChannelConfig, Constellation};
use crate::error::Result;
use crate::likelihood::SectorLikelihoodTable;
use crate::symmetry::{ConditionalOrbitTable, OutputOrbitTable};

/// Expected outcome of a check.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Expectation {
    Holds,
    /// The identity should fail by more than the tolerance.
    Breaks,
}

#[derive(Debug, Clone, PartialEq)]
pub enum CheckStatus {
    Pass,
    Fail,
    Skipped(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyCheck {
    pub name: &'static str,
    pub description: &'static str,
    pub expectation: Expectation,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub trials: usize,
    pub status: CheckStatus,
}

impl fmt::Display for PropertyCheck {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = match &self.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::Skipped(_) => "skip",
        };
        write!(f, "{status:<5} {:<32}", self.name)?;
        match &self.status {
            CheckStatus::Skipped(why) => write!(f, " {why}"),
            _ => {
                let rel = match self.expectation {
                    Expectation::Holds => "<=",
                    Expectation::Breaks => "> ",
                };
                write!(
                    f,
                    " max_dev={:.3e} {rel} tol={:.0e} trials={}",
                    self.max_deviation, self.tolerance, self.trials
                )?;
                if self.expectation == Expectation::Breaks {
                    write!(f, " (expected to break)")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyOptions {
    /// Random draws per symmetry check.
    pub trials: usize,
    pub seed: u64,
    pub scalar_tol: f64,
    pub block_tol: f64,
    pub entropy_tol: f64,
    /// Largest `K^L * M^L` for the brute-force capacity comparison.
    pub max_brute_pairs: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            trials: 200,
            seed: 0,
            scalar_tol: 1e-12,
            block_tol: 1e-10,
            entropy_tol: 1e-9,
            max_brute_pairs: 2_000_000,
        }
    }
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub cfg: ChannelConfig,
    pub n_phi: usize,
    pub dithered: bool,
    pub checks: Vec<PropertyCheck>,
}

impl VerifyReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn first_failure(&self) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.status == CheckStatus::Fail)
    }

    pub fn get(&self, name: &str) -> Option<&PropertyCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

fn relative(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale < 1e-300 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}

struct Ctx<'a> {
    cfg: ChannelConfig,
    cons: Constellation,
    table: &'a SectorLikelihoodTable,
    opts: &'a VerifyOptions,
    rng: ChaCha20Rng,
    checks: Vec<PropertyCheck>,
}

impl Ctx<'_> {
    fn record(
        &mut self,
        name: &'static str,
        description: &'static str,
        expectation: Expectation,
        tolerance: f64,
        deviations: impl IntoIterator<Item = f64>,
    ) {
        let (mut max, mut trials) = (0.0f64, 0usize);
        for d in deviations {
            max = if d.is_nan() { f64::INFINITY } else { max.max(d) };
            trials += 1;
        }
        let ok = match expectation {
            Expectation::Holds => max <= tolerance,
            Expectation::Breaks => max > tolerance,
        };
        self.checks.push(PropertyCheck {
            name,
            description,
            expectation,
            max_deviation: max,
            tolerance,
            trials,
            status: if ok { CheckStatus::Pass } else { CheckStatus::Fail },
        });
    }

    fn skip(&mut self, name: &'static str, description: &'static str, why: String) {
        self.checks.push(PropertyCheck {
            name,
            description,
            expectation: Expectation::Holds,
            max_deviation: 0.0,
            tolerance: 0.0,
            trials: 0,
            status: CheckStatus::Skipped(why),
        });
    }

    fn permutation_expectation(&self) -> Expectation {
        if self.cons.is_dithered() {
            Expectation::Breaks
        } else {
            Expectation::Holds
        }
    }

    fn draw_z(&mut self) -> Vec<u8> {
        let k = self.cfg.k();
        (0..self.cfg.l()).map(|_| self.rng.random_range(0..k) as u8).collect()
    }

    fn draw_x(&mut self) -> Vec<u8> {
        let m = self.cfg.m();
        (0..self.cfg.l()).map(|_| self.rng.random_range(0..m) as u8).collect()
    }

    fn draw_slot(&mut self) -> Option<usize> {
        Some(self.rng.random_range(0..self.cfg.l()))
    }

    fn scalar_checks(&mut self) {
        let (k, m, a) = (self.cfg.k(), self.cfg.m(), self.cfg.a());
        let tol = self.opts.scalar_tol;
        let n = self.opts.trials;
        let (cfg, cons) = (self.cfg, self.cons.clone());

        let mass = phase_error_mass(-PI, PI, cfg.snr());
        self.record(
            "phase-density-normalization",
            "the phase-error density integrates to one",
            Expectation::Holds,
            1e-9,
            [(mass - 1.0).abs()],
        );

        let devs: Vec<f64> = (0..n)
            .map(|_| {
                let (z, x, i) = (
                    self.rng.random_range(0..k),
                    self.rng.random_range(0..m),
                    self.rng.random_range(0..k),
                );
                let (phi, slot) = (self.rng.random::<f64>() * TAU, self.draw_slot());
                let lhs = sector_prob(z, x, phi, slot, &cfg, &cons);
                let rhs = sector_prob((z + i) % k, x, phi + i as f64 * TAU / k as f64, slot, &cfg, &cons);
                (lhs - rhs).abs()
            })
            .collect();
        self.record(
            "sector-shift",
            "shifting the output by i sectors and the phase by i sector widths",
            Expectation::Holds,
            tol,
            devs,
        );

        let devs: Vec<f64> = (0..n)
            .map(|_| {
                let (z, x, i) = (
                    self.rng.random_range(0..k),
                    self.rng.random_range(0..m),
                    self.rng.random_range(0..m),
                );
                let (phi, slot) = (self.rng.random::<f64>() * TAU, self.draw_slot());
                let lhs = sector_prob(z, x, phi, slot, &cfg, &cons);
                let rhs = sector_prob((z + i * a) % k, (x + i) % m, phi, slot, &cfg, &cons);
                (lhs - rhs).abs()
            })
            .collect();
        self.record(
            "constellation-step",
            "one constellation step equals a sectors",
            Expectation::Holds,
            tol,
            devs,
        );

        let devs: Vec<f64> = (0..n)
            .map(|_| {
                let (z, x) = (self.rng.random_range(0..k), self.rng.random_range(0..m));
                let (phi, slot) = (self.rng.random::<f64>() * TAU, self.draw_slot());
                let lhs = sector_prob(z, x, phi, slot, &cfg, &cons);
                let rhs = sector_prob((z + k - a * x) % k, 0, phi, slot, &cfg, &cons);
                (lhs - rhs).abs()
            })
            .collect();
        self.record(
            "zero-input-reduction",
            "P(z | x) = P(z - a x | 0) per symbol",
            Expectation::Holds,
            tol,
            devs,
        );

        let devs: Vec<f64> = (0..n)
            .map(|_| {
                let (z, x) = (self.rng.random_range(0..k), self.rng.random_range(0..m));
                let (phi, slot) = (self.rng.random::<f64>() * TAU, self.draw_slot());
                let (q, r) = (z / a, z % a);
                let lhs = sector_prob(z, x, phi, slot, &cfg, &cons);
                let rhs = sector_prob(r, (x + m - q % m) % m, phi, slot, &cfg, &cons);
                (lhs - rhs).abs()
            })
            .collect();
        self.record(
            "quotient-remainder",
            "P(z | x) = P(z mod a | x - floor(z / a)) per symbol",
            Expectation::Holds,
            tol,
            devs,
        );
    }

    fn table_checks(&mut self) {
        let t = self.table;
        let rows = (0..self.cfg.l()).flat_map(|slot| {
            (0..t.n_phi()).map(move |n| (t.row(slot, n).iter().sum::<f64>() - 1.0).abs())
        });
        let devs: Vec<f64> = rows.collect();
        self.record(
            "table-rows-stochastic",
            "every likelihood-table row sums to one",
            Expectation::Holds,
            1e-10,
            devs,
        );
        let (k, m) = (self.cfg.k(), self.cfg.m());
        let (cfg, cons) = (self.cfg, self.cons.clone());
        let devs: Vec<f64> = (0..self.opts.trials)
            .map(|_| {
                let slot = self.rng.random_range(0..cfg.l());
                let n = self.rng.random_range(0..t.n_phi());
                let (z, x) = (self.rng.random_range(0..k), self.rng.random_range(0..m));
                (t.prob(slot, n, z, x) - sector_prob(z, x, t.phi(n), Some(slot), &cfg, &cons)).abs()
            })
            .collect();
        self.record(
            "table-matches-quadrature",
            "table entries equal direct sector integrals",
            Expectation::Holds,
            self.opts.scalar_tol,
            devs,
        );
    }

    fn block_checks(&mut self) {
        let t = self.table;
        let (k, m, a, l) = (self.cfg.k(), self.cfg.m(), self.cfg.a(), self.cfg.l());
        let tol = self.opts.block_tol;
        let n = self.opts.trials;
        let perm = self.permutation_expectation();

        let devs: Vec<f64> = (0..n)
            .map(|_| {
                let (z, x, i) = (self.draw_z(), self.draw_x(), self.rng.random_range(0..k));
                let shifted: Vec<u8> = z.iter().map(|&v| ((v as usize + i) % k) as u8).collect();
                relative(block_conditional_prob(&z, &x, t), block_conditional_prob(&shifted, &x, t))
            })
            .collect();
        self.record(
            "block-constant-addition",
            "P(z | x) = P(z + i 1 | x)",
            Expectation::Holds,
            tol,
            devs,
        );

        let devs: Vec<f64> = (0..n)
            .map(|_| {
                let (z, x) = (self.draw_z(), self.draw_x());
                let mut order: Vec<usize> = (0..l).collect();
                order.shuffle(&mut self.rng);
                if order.iter().enumerate().all(|(i, &j)| i == j) {
                    order.swap(0, 1);
                }
                let pz: Vec<u8> = order.iter().map(|&j| z[j]).collect();
                let px: Vec<u8> = order.iter().map(|&j| x[j]).collect();
                relative(block_conditional_prob(&z, &x, t), block_conditional_prob(&pz, &px, t))
            })
            .collect();
        self.record(
            "block-permutation",
            "P(z | x) = P(pi z | pi x)",
            perm,
            tol,
            devs,
        );

        let x0 = vec![0u8; l];
        let devs: Vec<f64> = (0..n)
            .map(|_| {
                let (z, x) = (self.draw_z(), self.draw_x());
                let w: Vec<u8> = z
                    .iter()
                    .zip(&x)
                    .map(|(&zl, &xl)| ((zl as usize + k - a * xl as usize) % k) as u8)
                    .collect();
                relative(block_conditional_prob(&z, &x, t), block_conditional_prob(&w, &x0, t))
            })
            .collect();
        self.record(
            "block-zero-input",
            "P(z | x) = P(z - a x | 0)",
            Expectation::Holds,
            tol,
            devs,
        );

        let devs: Vec<f64> = (0..n)
            .map(|_| {
                let (z, x) = (self.draw_z(), self.draw_x());
                let r: Vec<u8> = z.iter().map(|&v| v % a as u8).collect();
                let xq: Vec<u8> = z
                    .iter()
                    .zip(&x)
                    .map(|(&zl, &xl)| ((xl as usize + m - (zl as usize / a) % m) % m) as u8)
                    .collect();
                relative(block_conditional_prob(&z, &x, t), block_conditional_prob(&r, &xq, t))
            })
            .collect();
        self.record(
            "block-quotient-remainder",
            "P(z | x) = P(z mod a | x - q)",
            Expectation::Holds,
            tol,
            devs,
        );

        let devs: Vec<f64> = (0..n)
            .map(|_| {
                let (z, i) = (self.draw_z(), self.rng.random_range(0..k));
                let shifted: Vec<u8> = z.iter().map(|&v| ((v as usize + i) % k) as u8).collect();
                relative(output_prob_factorized(&z, t), output_prob_factorized(&shifted, t))
            })
            .collect();
        self.record(
            "output-constant-addition",
            "P(z) = P(z + i 1)",
            Expectation::Holds,
            tol,
            devs,
        );

        let devs: Vec<f64> = (0..n)
            .map(|_| {
                let mut z = self.draw_z();
                let before = output_prob_factorized(&z, t);
                let orig = z.clone();
                while z == orig && orig.iter().any(|&v| v != orig[0]) {
                    z.shuffle(&mut self.rng);
                }
                relative(before, output_prob_factorized(&z, t))
            })
            .collect();
        self.record("output-permutation", "P(z) = P(pi z)", perm, tol, devs);

        let devs: Vec<f64> = (0..n)
            .map(|_| {
                let z = self.draw_z();
                let r: Vec<u8> = z.iter().map(|&v| v % a as u8).collect();
                relative(output_prob_factorized(&z, t), output_prob_factorized(&r, t))
            })
            .collect();
        self.record(
            "output-mod-a",
            "P(z) = P(z mod a)",
            Expectation::Holds,
            tol,
            devs,
        );
    }

    fn entropy_checks(&mut self) {
        let t = self.table;
        let x0 = vec![0u8; self.cfg.l()];
        match conditional_entropy_given(&x0, t) {
            Ok(h0) => {
                let mut devs = Vec::new();
                for _ in 0..5 {
                    let x = self.draw_x();
                    match conditional_entropy_given(&x, t) {
                        Ok(h) => devs.push((h - h0).abs()),
                        Err(_) => devs.push(f64::INFINITY),
                    }
                }
                self.record(
                    "conditional-entropy-constant",
                    "H(Z | x) does not depend on x",
                    Expectation::Holds,
                    self.opts.block_tol,
                    devs,
                );
            }
            Err(e) => self.skip(
                "conditional-entropy-constant",
                "H(Z | x) does not depend on x",
                e.to_string(),
            ),
        }
    }

    fn reduction_checks(&mut self) -> Result<()> {
        let (k, m, l) = (self.cfg.k(), self.cfg.m(), self.cfg.l());
        let t = self.table;
        let kl = (k as u64).pow(l as u32);
        let cond = ConditionalOrbitTable::enumerate(k, l)?;
        let out = OutputOrbitTable::enumerate(k, m, l)?;
        self.record(
            "orbit-totals",
            "orbit sizes add up to K^L for both tables",
            Expectation::Holds,
            0.0,
            [
                (cond.total() as f64 - kl as f64).abs(),
                (out.total() as f64 - kl as f64).abs(),
            ],
        );
        match (
            ConditionalOrbitTable::brute_force(k, l),
            OutputOrbitTable::brute_force(k, m, l),
        ) {
            (Ok(bc), Ok(bo)) => {
                let same = bc.reps().iter().eq(cond.reps().iter())
                    && bc.counts() == cond.counts()
                    && bo.reps().iter().eq(out.reps().iter())
                    && bo.counts() == out.counts();
                self.record(
                    "orbit-tables-vs-brute-force",
                    "enumerated orbits equal those found by canonicalizing every vector",
                    Expectation::Holds,
                    0.0,
                    [if same { 0.0 } else { 1.0 }],
                );
            }
            (Err(e), _) | (_, Err(e)) => self.skip(
                "orbit-tables-vs-brute-force",
                "enumerated orbits equal those found by canonicalizing every vector",
                e.to_string(),
            ),
        }

        let pairs = kl.saturating_mul((m as u64).saturating_pow(l as u32));
        if self.cons.is_dithered() {
            for name in ["conditional-orbit-constancy", "output-two-routes", "output-normalization"] {
                self.skip(name, "orbit-reduced route", "needs an undithered constellation".into());
            }
            let shift = shift_reduced_capacity(t)?;
            self.bounds(shift.h_out, shift.h_cond)?;
            if pairs <= self.opts.max_brute_pairs {
                let brute = brute_force_mutual_information(t)?;
                self.record(
                    "shift-reduced-vs-brute-force",
                    "shift-only reduction matches full enumeration",
                    Expectation::Holds,
                    self.opts.entropy_tol,
                    [
                        (shift.h_out - brute.h_out).abs(),
                        (shift.h_cond - brute.h_cond).abs(),
                        (shift.mi - brute.mi).abs(),
                    ],
                );
            } else {
                self.skip(
                    "shift-reduced-vs-brute-force",
                    "shift-only reduction matches full enumeration",
                    format!("{pairs} (z, x) pairs exceed {}", self.opts.max_brute_pairs),
                );
            }
            return Ok(());
        }

        let probs = ConditionalProbs::compute(t, &cond)?;
        let x0 = vec![0u8; l];
        let devs: Vec<f64> = (0..self.opts.trials)
            .map(|_| {
                let z = self.draw_z();
                relative(probs.get(&z), block_conditional_prob(&z, &x0, t))
            })
            .collect();
        self.record(
            "conditional-orbit-constancy",
            "P(z | 0) read through the orbit table equals direct evaluation",
            Expectation::Holds,
            self.opts.block_tol,
            devs,
        );
        let devs: Vec<f64> = out
            .reps()
            .iter()
            .map(|rep| relative(output_prob(rep, t, &probs), output_prob_factorized(rep, t)))
            .collect();
        self.record(
            "output-two-routes",
            "P(z) by input grouping equals the per-slot mixture product",
            Expectation::Holds,
            self.opts.block_tol,
            devs,
        );
        let total: f64 = out
            .reps()
            .iter()
            .zip(out.counts())
            .map(|(rep, &c)| c as f64 * output_prob(rep, t, &probs))
            .sum();
        self.record(
            "output-normalization",
            "orbit-weighted output probabilities sum to one",
            Expectation::Holds,
            1e-10,
            [(total - 1.0).abs()],
        );

        let engine = CapacityEngine::from_tables(cond, out)?;
        let point = engine.evaluate(t)?;
        self.bounds(point.h_out, point.h_cond)?;
        if pairs <= self.opts.max_brute_pairs {
            let brute = brute_force_mutual_information(t)?;
            self.record(
                "reduced-vs-brute-force",
                "orbit-reduced entropies match full enumeration",
                Expectation::Holds,
                self.opts.entropy_tol,
                [
                    (point.h_out - brute.h_out).abs(),
                    (point.h_cond - brute.h_cond).abs(),
                    (point.mi - brute.mi).abs(),
                ],
            );
        } else {
            self.skip(
                "reduced-vs-brute-force",
                "orbit-reduced entropies match full enumeration",
                format!("{pairs} (z, x) pairs exceed {}", self.opts.max_brute_pairs),
            );
        }
        Ok(())
    }

    fn bounds(&mut self, h_out: f64, h_cond: f64) -> Result<()> {
        let (k, m, l) = (self.cfg.k() as f64, self.cfg.m() as f64, self.cfg.l() as f64);
        let h_max = l * k.log2();
        let mi = h_out - h_cond;
        let excess = |v: f64, lo: f64, hi: f64| (lo - v).max(v - hi).max(0.0);
        self.record(
            "entropy-bounds",
            "0 <= H(Z|X) <= H(Z) <= L log2 K and I <= L log2 M",
            Expectation::Holds,
            self.opts.entropy_tol,
            [
                excess(h_out, 0.0, h_max),
                excess(h_cond, 0.0, h_max),
                excess(mi, 0.0, l * m.log2()),
            ],
        );
        Ok(())
    }
}

/// Runs every check for one configuration.
pub fn run_suite(
    cfg: &ChannelConfig,
    n_phi: usize,
    dither: bool,
    opts: &VerifyOptions,
) -> Result<VerifyReport> {
    let cons = Constellation::new(cfg, dither);
    let table = SectorLikelihoodTable::build(cfg, &cons, n_phi)?;
    let mut ctx = Ctx {
        cfg: *cfg,
        cons,
        table: &table,
        opts,
        rng: ChaCha20Rng::seed_from_u64(opts.seed),
        checks: Vec::new(),
    };
    ctx.scalar_checks();
    ctx.table_checks();
    ctx.block_checks();
    ctx.entropy_checks();
    ctx.reduction_checks()?;
    Ok(VerifyReport {
        cfg: *cfg,
        n_phi,
        dithered: dither,
        checks: ctx.checks,
    })
}
