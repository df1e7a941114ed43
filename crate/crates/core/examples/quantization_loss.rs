//! Fraction of the fine-quantization capacity kept by 8 and 12 sectors, with
//! 64 sectors standing in for an unquantized receiver (QPSK, L = 6).
//!
//! cargo run --release --example quantization_loss

use phasequant::analysis::UnquantizedProxy;
use phasequant::CapacityEngine;
use phasequant::ChannelConfig;

fn main() -> phasequant::Result<()> {
    let (m, l) = (4, 6);
    let proxy = UnquantizedProxy::new(m, l)?;
    let k8 = CapacityEngine::new(8, m, l)?;
    let k12 = CapacityEngine::new(12, m, l)?;
    println!("{:>7} {:>9} {:>9} {:>9} {:>7} {:>7}", "snr_db", "K=8", "K=12", "K=64", "8/64", "12/64");
    for db in [0.0, 5.0, 10.0] {
        let c8 = k8.point(&ChannelConfig::from_db(m, 8, l, db)?, 1024)?.cap_per_symbol;
        let c12 = k12.point(&ChannelConfig::from_db(m, 12, l, db)?, 1536)?.cap_per_symbol;
        let c64 = proxy.point(db, UnquantizedProxy::default_n_phi())?.cap_per_symbol;
        println!(
            "{db:>7} {c8:>9.5} {c12:>9.5} {c64:>9.5} {:>7.3} {:>7.3}",
            c8 / c64,
            c12 / c64
        );
    }
    Ok(())
}
