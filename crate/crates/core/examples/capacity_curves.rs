//! Per-symbol capacity against SNR for 8 and 12 sectors and several block
//! lengths, with the coherent QPSK curve for reference.
//!
//! cargo run --release --example capacity_curves

use phasequant::analysis::coherent_capacity;
use phasequant::capacity::snr_sweep;
use phasequant::channel::db_to_linear;
use phasequant::{ChannelConfig, Constellation, SectorLikelihoodTable};

fn main() -> phasequant::Result<()> {
    let grid: Vec<f64> = (-5..=20).step_by(5).map(f64::from).collect();
    print!("{:>14}", "snr_db");
    for db in &grid {
        print!("{db:>8}");
    }
    println!();
    for (k, l) in [(8, 2), (8, 4), (8, 6), (12, 2), (12, 4), (12, 6), (12, 8)] {
        let template = ChannelConfig::from_db(4, k, l, 0.0)?;
        let cons = Constellation::standard(&template);
        let report = snr_sweep(&template, &grid, &cons, SectorLikelihoodTable::default_n_phi(k))?;
        print!("{:>14}", format!("K={k} L={l}"));
        for p in &report.points {
            match p {
                Ok(p) => print!("{:>8.4}", p.cap_per_symbol),
                Err(e) => print!("{:>8}", format!("err {e}")),
            }
        }
        println!();
        for w in &report.warnings {
            eprintln!("warning: {w}");
        }
    }
    print!("{:>14}", "coherent");
    for &db in &grid {
        print!("{:>8.4}", coherent_capacity(4, db_to_linear(db), 200_000, 7)?.value);
    }
    println!();
    Ok(())
}
