use phasequant::capacity::{
    block_conditional_prob, brute_force_mutual_information, conditional_entropy_given,
    output_prob, output_prob_factorized, shift_reduced_capacity, snr_sweep, ConditionalProbs,
};
use phasequant::symmetry::{canonical_output, ConditionalOrbitTable, OutputOrbitTable};
use phasequant::{capacity_point, CapacityEngine, ChannelConfig, Constellation, SectorLikelihoodTable};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

fn table(m: usize, k: usize, l: usize, db: f64, dither: bool) -> SectorLikelihoodTable {
    let cfg = ChannelConfig::from_db(m, k, l, db).unwrap();
    let cons = Constellation::new(&cfg, dither);
    SectorLikelihoodTable::build(&cfg, &cons, SectorLikelihoodTable::default_n_phi(k)).unwrap()
}

#[test]
fn reduced_matches_brute_force() {
    for (k, m, l) in [(8, 4, 2), (8, 4, 3), (4, 4, 2)] {
        let engine = CapacityEngine::new(k, m, l).unwrap();
        for db in [0.0, 5.0, 20.0] {
            let t = table(m, k, l, db, false);
            let fast = engine.evaluate(&t).unwrap();
            let brute = brute_force_mutual_information(&t).unwrap();
            assert!((fast.mi - brute.mi).abs() < 1e-9, "K={k} L={l} {db} dB");
            assert!((fast.h_out - brute.h_out).abs() < 1e-9);
            assert!((fast.h_cond - brute.h_cond).abs() < 1e-9);
        }
    }
}

#[test]
fn shift_reduced_matches_brute_force_under_dither() {
    for (k, m, l) in [(8, 4, 2), (8, 4, 3), (4, 4, 3)] {
        for db in [0.0, 10.0] {
            let t = table(m, k, l, db, true);
            let fast = shift_reduced_capacity(&t).unwrap();
            let brute = brute_force_mutual_information(&t).unwrap();
            assert!((fast.mi - brute.mi).abs() < 1e-9, "K={k} L={l} {db} dB");
        }
    }
}

#[test]
fn zero_snr_carries_nothing() {
    for l in [2, 4, 6] {
        let cfg = ChannelConfig::new(4, 8, l, 0.0).unwrap();
        let p = capacity_point(&cfg, &Constellation::standard(&cfg), 1024).unwrap();
        assert!(p.mi.abs() < 1e-8);
        assert!((p.h_out - l as f64 * 3.0).abs() < 1e-8);
    }
}

#[test]
fn block_reduction_worked_case() {
    let t = table(4, 8, 4, 5.0, false);
    let z = [5u8, 7, 2, 4];
    let mut rng = ChaCha20Rng::seed_from_u64(1);
    for _ in 0..10 {
        let x: Vec<u8> = (0..4).map(|_| rng.random_range(0..4)).collect();
        // z = 2 q + r with r = [1, 1, 0, 0], q = [2, 3, 1, 2]
        let shifted: Vec<u8> = x.iter().zip([2u8, 3, 1, 2]).map(|(&xi, q)| (xi + 4 - q) % 4).collect();
        let a = block_conditional_prob(&z, &x, &t);
        let b = block_conditional_prob(&[1, 1, 0, 0], &shifted, &t);
        assert!((a - b).abs() <= 1e-12 * a.max(b));
    }
    let a = output_prob_factorized(&z, &t);
    let b = output_prob_factorized(&[1, 1, 0, 0], &t);
    assert!((a - b).abs() <= 1e-12 * a);
}

#[test]
fn output_routes_agree_on_every_representative() {
    let t = table(4, 8, 4, 5.0, false);
    let cond_orbits = ConditionalOrbitTable::enumerate(8, 4).unwrap();
    let out_orbits = OutputOrbitTable::enumerate(8, 4, 4).unwrap();
    let cond = ConditionalProbs::compute(&t, &cond_orbits).unwrap();
    let mut total = 0.0;
    for (rep, &n) in out_orbits.reps().iter().zip(out_orbits.counts()) {
        let a = output_prob(rep, &t, &cond);
        let b = output_prob_factorized(rep, &t);
        assert!((a - b).abs() <= 1e-10 * b, "{rep:?}");
        total += n as f64 * a;
    }
    assert!((total - 1.0).abs() < 1e-12);
    let mut conditional_total = 0.0;
    for (rep, &n) in cond_orbits.reps().iter().zip(cond_orbits.counts()) {
        conditional_total += n as f64 * cond.get(rep);
    }
    assert!((conditional_total - 1.0).abs() < 1e-12);
}

#[test]
fn output_probability_is_constant_on_orbits() {
    let t = table(4, 8, 3, 5.0, false);
    let mut rng = ChaCha20Rng::seed_from_u64(2);
    for _ in 0..50 {
        let z: Vec<u8> = (0..3).map(|_| rng.random_range(0..8)).collect();
        let base = output_prob_factorized(&z, &t);
        let c = rng.random_range(0..8u8);
        let mut w: Vec<u8> = z.iter().map(|&v| (v + c) % 8).collect();
        w.swap(0, 2);
        w[1] = (w[1] + 2 * rng.random_range(0..4u8)) % 8;
        assert!((output_prob_factorized(&w, &t) - base).abs() <= 1e-12 * base);
        assert_eq!(canonical_output(&z, 8, 2), canonical_output(&w, 8, 2));
    }
}

#[test]
fn conditional_entropy_does_not_depend_on_the_input() {
    let t = table(4, 8, 4, 5.0, false);
    let base = conditional_entropy_given(&[0, 0, 0, 0], &t).unwrap();
    let mut rng = ChaCha20Rng::seed_from_u64(3);
    for _ in 0..5 {
        let x: Vec<u8> = (0..4).map(|_| rng.random_range(0..4)).collect();
        assert!((conditional_entropy_given(&x, &t).unwrap() - base).abs() < 1e-10);
    }
    let td = table(4, 8, 4, 5.0, true);
    let base = conditional_entropy_given(&[0, 0, 0, 0], &td).unwrap();
    for _ in 0..5 {
        let x: Vec<u8> = (0..4).map(|_| rng.random_range(0..4)).collect();
        assert!((conditional_entropy_given(&x, &td).unwrap() - base).abs() < 1e-10);
    }
}

#[test]
fn entropies_respect_bounds() {
    for db in [-5.0, 5.0, 20.0] {
        let p = capacity_point(
            &ChannelConfig::from_db(4, 8, 5, db).unwrap(),
            &Constellation::standard(&ChannelConfig::from_db(4, 8, 5, db).unwrap()),
            1024,
        )
        .unwrap();
        assert!(p.h_cond >= 0.0 && p.h_cond <= p.h_out + 1e-12);
        assert!(p.h_out <= 5.0 * 3.0 + 1e-12);
        assert!(p.mi >= -1e-12 && p.mi <= 4.0 * 2.0 + 1e-12);
        assert!((p.cap_per_symbol - p.mi / 4.0).abs() < 1e-15);
    }
}

#[test]
fn grid_doubling_is_converged() {
    let cfg = ChannelConfig::from_db(4, 8, 3, 5.0).unwrap();
    let cons = Constellation::standard(&cfg);
    let engine = CapacityEngine::new(8, 4, 3).unwrap();
    let n = SectorLikelihoodTable::default_n_phi(8);
    let a = engine.point(&cfg, n).unwrap();
    let b = engine.evaluate(&SectorLikelihoodTable::build(&cfg, &cons, 2 * n).unwrap()).unwrap();
    assert!((a.mi - b.mi).abs() < 1e-8);
}

#[test]
fn finer_quantizer_long_block_nears_two_bits() {
    let cfg = ChannelConfig::from_db(4, 12, 8, 20.0).unwrap();
    let p = capacity_point(&cfg, &Constellation::standard(&cfg), 1536).unwrap();
    assert!((p.cap_per_symbol - 2.0).abs() < 0.15 * 2.0, "{}", p.cap_per_symbol);
}

#[test]
fn longer_blocks_help() {
    for k in [8, 12] {
        let mut last = 0.0;
        for l in [2, 4, 6, 8] {
            let cfg = ChannelConfig::from_db(4, k, l, 5.0).unwrap();
            let p = capacity_point(&cfg, &Constellation::standard(&cfg), 64 * k).unwrap();
            assert!(p.cap_per_symbol > last, "K={k} L={l}");
            last = p.cap_per_symbol;
        }
    }
}

#[test]
fn default_sweep_is_monotone() {
    let cfg = ChannelConfig::from_db(4, 8, 6, 0.0).unwrap();
    let grid: Vec<f64> = (-5..=20).map(f64::from).collect();
    let report = snr_sweep(&cfg, &grid, &Constellation::standard(&cfg), 1024).unwrap();
    assert!(report.warnings.is_empty(), "{:?}", report.warnings);
    let mis: Vec<f64> = report.points.iter().map(|p| p.as_ref().unwrap().mi).collect();
    assert!(mis.windows(2).all(|w| w[1] >= w[0] - 1e-9));
}

#[test]
fn reports_dither_as_unsupported_by_orbit_engine() {
    let cfg = ChannelConfig::from_db(4, 8, 3, 5.0).unwrap();
    assert!(capacity_point(&cfg, &Constellation::dithered(&cfg), 1024).is_err());
}
