//! Outputs whose joint ML estimate of (x, phi) is not unique, and how much
//! probability they carry (K = 8, QPSK, L = 3), with and without dither.
//!
//! cargo run --release --example ml_ambiguity

use phasequant::analysis::{ambiguity_report, ml_estimate, DEFAULT_TIE_TOL};
use phasequant::{ChannelConfig, Constellation, SectorLikelihoodTable};

fn main() -> phasequant::Result<()> {
    let cfg = ChannelConfig::from_db(4, 8, 2, 20.0)?;
    let table = SectorLikelihoodTable::build(&cfg, &Constellation::standard(&cfg), 1024)?;
    let r = ml_estimate(&[0, 1], &table, DEFAULT_TIE_TOL)?;
    println!("z=[0 1] at 20 dB, L=2:");
    for (x, n) in &r.argmax {
        println!("  x={x} phi={:.4}", table.phi(*n));
    }

    println!("\nK=8 M=4 L=3");
    for dither in [false, true] {
        for db in [0.0, 5.0, 10.0, 20.0, 30.0] {
            let cfg = ChannelConfig::from_db(4, 8, 3, db)?;
            let table = SectorLikelihoodTable::build(&cfg, &Constellation::new(&cfg, dither), 1024)?;
            let report = ambiguity_report(&table, DEFAULT_TIE_TOL)?;
            println!(
                "  dither={dither:<5} snr={db:>4} dB: {:>3} ambiguous outputs, mass {:.4e}",
                report.ambiguous_count(),
                report.ambiguous_mass
            );
        }
    }
    Ok(())
}
