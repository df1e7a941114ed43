//! Simulation estimates of I(X; Z), H(Z) and H(Z | X) next to the exact
//! orbit-reduced values.
//!
//! cargo run --release --example monte_carlo_check

use phasequant::montecarlo::mc_full;
use phasequant::{capacity_point, ChannelConfig, Constellation, SectorLikelihoodTable};

fn main() -> phasequant::Result<()> {
    for (l, db) in [(3, 5.0), (4, 5.0), (4, 15.0)] {
        let cfg = ChannelConfig::from_db(4, 8, l, db)?;
        let cons = Constellation::standard(&cfg);
        let exact = capacity_point(&cfg, &cons, 1024)?;
        let table = SectorLikelihoodTable::build(&cfg, &cons, 1024)?;
        let (mi, h) = mc_full(&table, &cons, 200_000, 5)?;
        println!("L={l} snr={db} dB");
        println!("  capacity  {:.5}  mc {:.5} +- {:.5}", exact.cap_per_symbol, mi.value, mi.std_error);
        println!("  H(Z)      {:.5}  mc {:.5} +- {:.5}", exact.h_out, h.h_out.value, h.h_out.std_error);
        println!("  H(Z|X)    {:.5}  mc {:.5} +- {:.5}", exact.h_cond, h.h_cond.value, h.h_cond.std_error);
    }
    Ok(())
}
