//! Acceptance criteria 1 to 8. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

use std::collections::BTreeMap;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use phasequant::analysis::{
    ambiguity_report, coherent_capacity, UnquantizedProxy, DEFAULT_TIE_TOL,
};
use phasequant::capacity::{brute_force_mutual_information, shift_reduced_capacity};
use phasequant::channel::db_to_linear;
use phasequant::montecarlo::mc_mutual_information_with;
use phasequant::symmetry::ConditionalOrbitTable;
use phasequant::verify::{run_suite, CheckStatus, VerifyOptions};
use phasequant::{CapacityEngine, ChannelConfig, Constellation, SectorLikelihoodTable};

const GRID_DB: [f64; 6] = [-5.0, 0.0, 5.0, 10.0, 15.0, 20.0];
const MC_SAMPLES: u64 = 200_000;
const SEED: u64 = 0;

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn within(elapsed: Duration, limit_s: f64) -> bool {
    elapsed.as_secs_f64() < limit_s
}

fn table(m: usize, k: usize, l: usize, db: f64, dither: bool) -> SectorLikelihoodTable {
    let cfg = ChannelConfig::from_db(m, k, l, db).unwrap();
    let cons = Constellation::new(&cfg, dither);
    SectorLikelihoodTable::build(&cfg, &cons, SectorLikelihoodTable::default_n_phi(k)).unwrap()
}

/// Proxy values at `GRID_DB`, with the change on doubling the phase grid.
struct ProxyCurve {
    cap: BTreeMap<i64, f64>,
    doubling: BTreeMap<i64, f64>,
}

impl ProxyCurve {
    fn compute() -> Self {
        let proxy = UnquantizedProxy::new(4, 6).unwrap();
        let n = UnquantizedProxy::default_n_phi();
        let mut cap = BTreeMap::new();
        let mut doubling = BTreeMap::new();
        for db in GRID_DB {
            let p = proxy.point(db, n).unwrap();
            let fine = proxy.point(db, 2 * n).unwrap();
            cap.insert(db as i64, p.cap_per_symbol);
            doubling.insert(db as i64, (p.mi - fine.mi).abs());
        }
        Self { cap, doubling }
    }
}

fn criterion_1() -> Verdict {
    let start = Instant::now();
    let want = [(3, 15, 512u64), (4, 43, 4096), (5, 99, 32768), (6, 217, 262144), (7, 429, 2097152)];
    let mut ok = true;
    let mut got = Vec::new();
    for (l, n, total) in want {
        let t = ConditionalOrbitTable::enumerate(8, l).unwrap();
        ok &= t.len() == n && t.total() == total;
        got.push(format!("L={l}:{}/{}", t.len(), t.total()));
    }
    let el = start.elapsed();
    ok &= within(el, 10.0);
    Verdict::new(ok, format!("{} in {:.1} ms (limit 10 s)", got.join(" "), el.as_secs_f64() * 1e3))
}

fn criterion_2() -> Verdict {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for (k, m, l) in [(8, 4, 2), (8, 4, 3), (4, 4, 2)] {
        let engine = CapacityEngine::new(k, m, l).unwrap();
        for db in [0.0, 5.0, 20.0] {
            let t = table(m, k, l, db, false);
            let fast = engine.evaluate(&t).unwrap();
            let brute = brute_force_mutual_information(&t).unwrap();
            worst = worst
                .max((fast.h_cond - brute.h_cond).abs())
                .max((fast.h_out - brute.h_out).abs())
                .max((fast.mi - brute.mi).abs());
        }
    }
    let el = start.elapsed();
    Verdict::new(
        worst < 1e-9 && within(el, 60.0),
        format!("max |reduced - brute| = {worst:.2e} bits (tol 1e-9) in {:.2} s", el.as_secs_f64()),
    )
}

fn criterion_3() -> Verdict {
    let start = Instant::now();
    let opts = VerifyOptions::default();
    let mut runs = Vec::new();
    for l in [3, 4] {
        for db in [0.0, 5.0, 20.0] {
            runs.push((ChannelConfig::from_db(4, 8, l, db).unwrap(), false));
        }
    }
    runs.push((ChannelConfig::from_db(4, 4, 2, 5.0).unwrap(), false));
    runs.push((ChannelConfig::from_db(4, 8, 3, 10.0).unwrap(), true));
    let mut failures = Vec::new();
    let mut checks = 0;
    for (cfg, dither) in &runs {
        let n_phi = SectorLikelihoodTable::default_n_phi(cfg.k());
        let report = run_suite(cfg, n_phi, *dither, &opts).unwrap();
        checks += report.checks.len();
        for c in &report.checks {
            let skipped_ok = *dither && matches!(c.status, CheckStatus::Skipped(_));
            if c.status != CheckStatus::Pass && !skipped_ok {
                failures.push(format!("K={} L={} {} dB dither={dither}: {c}", cfg.k(), cfg.l(), cfg.snr_db()));
            }
        }
    }
    let cli = Command::new(env!("CARGO_BIN_EXE_phasequant"))
        .args(["verify", "--K", "8", "--L", "4"])
        .output()
        .unwrap();
    let cli_ok = cli.status.code() == Some(0);
    let el = start.elapsed();
    let pass = failures.is_empty() && cli_ok && within(el, 120.0);
    let mut detail = format!(
        "{checks} checks over {} configurations (scalar tol {:.0e}, block tol {:.0e}), verify CLI exit {:?}, {:.2} s",
        runs.len(),
        opts.scalar_tol,
        opts.block_tol,
        cli.status.code(),
        el.as_secs_f64()
    );
    if let Some(f) = failures.first() {
        detail.push_str(&format!("; first failure {f}"));
    }
    Verdict::new(pass, detail)
}

fn quantized_cap(k: usize, l: usize, db: f64) -> (f64, f64) {
    let cfg = ChannelConfig::from_db(4, k, l, db).unwrap();
    let engine = CapacityEngine::new(k, 4, l).unwrap();
    let n = SectorLikelihoodTable::default_n_phi(k);
    let p = engine.point(&cfg, n).unwrap();
    let fine = engine.point(&cfg, 2 * n).unwrap();
    (p.cap_per_symbol, (p.mi - fine.mi).abs())
}

fn criterion_4(proxy: &ProxyCurve, proxy_time: Duration) -> Verdict {
    let start = Instant::now();
    let c64 = proxy.cap[&5];
    let (c8, _) = quantized_cap(8, 6, 5.0);
    let (c12, _) = quantized_cap(12, 6, 5.0);
    let (r8, r12) = (c8 / c64, c12 / c64);
    let el = start.elapsed() + proxy_time;
    Verdict::new(
        r8 >= 0.80 && r12 >= 0.90 && within(el, 900.0),
        format!(
            "5 dB L=6: cap K8={c8:.5} K12={c12:.5} K64={c64:.5}; K8/K64={r8:.4} (>= 0.80), K12/K64={r12:.4} (>= 0.90), {:.1} s",
            el.as_secs_f64()
        ),
    )
}

fn criterion_5(proxy: &ProxyCurve) -> Verdict {
    let mut problems = Vec::new();
    let mut worst_doubling: f64 = proxy.doubling.values().cloned().fold(0.0, f64::max);
    for db in GRID_DB {
        let (c8, d8) = quantized_cap(8, 6, db);
        let (c12, d12) = quantized_cap(12, 6, db);
        worst_doubling = worst_doubling.max(d8).max(d12);
        let c64 = proxy.cap[&(db as i64)];
        let coh = coherent_capacity(4, db_to_linear(db), MC_SAMPLES, SEED).unwrap();
        if !(c8 <= c12 && c12 <= c64 && c64 <= coh.value + 3.0 * coh.std_error) {
            problems.push(format!(
                "{db} dB: K8={c8:.5} K12={c12:.5} K64={c64:.5} coherent={:.5}+-{:.1e}",
                coh.value, coh.std_error
            ));
        }
    }
    let mut not_increasing = Vec::new();
    let mut zero_snr: f64 = 0.0;
    for k in [8, 12] {
        for db in GRID_DB {
            let caps: Vec<f64> = (2..=8)
                .map(|l| {
                    let cfg = ChannelConfig::from_db(4, k, l, db).unwrap();
                    CapacityEngine::new(k, 4, l)
                        .unwrap()
                        .point(&cfg, SectorLikelihoodTable::default_n_phi(k))
                        .unwrap()
                        .cap_per_symbol
                })
                .collect();
            if !caps.windows(2).all(|w| w[1] > w[0]) {
                not_increasing.push(format!("K={k} {db} dB {caps:?}"));
            }
        }
        for l in 2..=8 {
            let cfg = ChannelConfig::new(4, k, l, 0.0).unwrap();
            let p = CapacityEngine::new(k, 4, l).unwrap().point(&cfg, 64 * k).unwrap();
            zero_snr = zero_snr.max(p.mi.abs());
        }
    }
    let pass = problems.is_empty() && not_increasing.is_empty() && zero_snr <= 1e-8 && worst_doubling < 1e-7;
    let mut detail = format!(
        "ordering K8<=K12<=K64<=coherent(+3 sigma) at {} grid points, increasing in L=2..8 for K=8,12 at every grid point, |I(snr=0)|={zero_snr:.1e} (tol 1e-8), max grid-doubling change {worst_doubling:.1e} (tol 1e-7)",
        GRID_DB.len()
    );
    for p in problems.iter().chain(&not_increasing) {
        detail.push_str(&format!("; violated {p}"));
    }
    Verdict::new(pass, detail)
}

fn criterion_6() -> Verdict {
    let cfg = ChannelConfig::from_db(4, 8, 4, 5.0).unwrap();
    let cons = Constellation::standard(&cfg);
    let t = table(4, 8, 4, 5.0, false);
    let exact = CapacityEngine::new(8, 4, 4).unwrap().evaluate(&t).unwrap();
    let est = mc_mutual_information_with(&t, &cons, MC_SAMPLES, SEED).unwrap();
    let quarter = mc_mutual_information_with(&t, &cons, MC_SAMPLES / 4, SEED).unwrap();
    let z = (est.value - exact.cap_per_symbol) / est.std_error;
    let ratio = quarter.std_error / est.std_error;
    Verdict::new(
        z.abs() <= 3.0 && (1.8..=2.2).contains(&ratio),
        format!(
            "K=8 L=4 5 dB: MC {:.5} +- {:.5} vs analytic {:.5} ({z:+.2} sigma, limit 3); sigma(n/4)/sigma(n) = {ratio:.3} (in [1.8, 2.2])",
            est.value, est.std_error, exact.cap_per_symbol
        ),
    )
}

fn criterion_7() -> Verdict {
    let cfg = ChannelConfig::from_db(4, 8, 6, 10.0).unwrap();
    let dithered = table(4, 8, 6, 10.0, true);
    let est = mc_mutual_information_with(&dithered, &Constellation::dithered(&cfg), MC_SAMPLES, SEED).unwrap();
    let plain = CapacityEngine::new(8, 4, 6)
        .unwrap()
        .evaluate(&table(4, 8, 6, 10.0, false))
        .unwrap();
    let exact = shift_reduced_capacity(&dithered).unwrap();
    let gain = est.value - plain.cap_per_symbol;
    let mut low = Vec::new();
    for db in [-5.0, 0.0] {
        let c = ChannelConfig::from_db(4, 8, 6, db).unwrap();
        let d = mc_mutual_information_with(&table(4, 8, 6, db, true), &Constellation::dithered(&c), MC_SAMPLES, SEED)
            .unwrap();
        let u = CapacityEngine::new(8, 4, 6).unwrap().evaluate(&table(4, 8, 6, db, false)).unwrap();
        low.push(format!("{db} dB gain {:+.4} +- {:.4}", d.value - u.cap_per_symbol, d.std_error));
    }
    Verdict::new(
        gain > 3.0 * est.std_error,
        format!(
            "10 dB L=6 K=8: dithered MC {:.5} +- {:.5} (exact {:.5}) vs undithered {:.5}, gain {:.1} sigma (> 3); {} (not required)",
            est.value,
            est.std_error,
            exact.cap_per_symbol,
            plain.cap_per_symbol,
            gain / est.std_error,
            low.join(", ")
        ),
    )
}

fn criterion_8() -> Verdict {
    let start = Instant::now();
    let mut masses = Vec::new();
    let mut counts = Vec::new();
    let mut dithered = Vec::new();
    for db in [5.0, 10.0, 20.0] {
        let r = ambiguity_report(&table(4, 8, 3, db, false), DEFAULT_TIE_TOL).unwrap();
        masses.push(r.ambiguous_mass);
        counts.push(r.ambiguous_count());
        let d = ambiguity_report(&table(4, 8, 3, db, true), DEFAULT_TIE_TOL).unwrap();
        dithered.push(d.ambiguous_count());
    }
    let el = start.elapsed();
    let pass = counts[2] > 0
        && masses.iter().all(|&m| m > 0.0)
        && masses.windows(2).all(|w| w[1] < w[0])
        && dithered.iter().all(|&c| c == 0)
        && within(el, 120.0);
    Verdict::new(
        pass,
        format!(
            "K=8 L=3: ambiguous outputs {counts:?} of 512 at 5/10/20 dB, mass {:.4} > {:.4} > {:.4}, dithered ambiguous {dithered:?}, {:.2} s",
            masses[0],
            masses[1],
            masses[2],
            el.as_secs_f64()
        ),
    )
}

fn main() -> ExitCode {
    let names = [
        "orbit cardinalities",
        "oracle equivalence",
        "symmetry suite",
        "capacity ratios",
        "ordering",
        "Monte Carlo cross-check",
        "dither gain",
        "ambiguity",
    ];
    let mut verdicts = Vec::new();
    verdicts.push(criterion_1());
    verdicts.push(criterion_2());
    verdicts.push(criterion_3());
    let start = Instant::now();
    let proxy = ProxyCurve::compute();
    let proxy_time = start.elapsed();
    verdicts.push(criterion_4(&proxy, proxy_time));
    verdicts.push(criterion_5(&proxy));
    verdicts.push(criterion_6());
    verdicts.push(criterion_7());
    verdicts.push(criterion_8());

    let mut failed = 0;
    for (i, (name, v)) in names.iter().zip(&verdicts).enumerate() {
        let tag = if v.pass { "PASS" } else { "FAIL" };
        println!("criterion {} ({name}): {tag}: {}", i + 1, v.detail);
        failed += usize::from(!v.pass);
    }
    println!("acceptance: {} of {} criteria passed", verdicts.len() - failed, verdicts.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
