//! Orbit tables: representatives of outcome vectors under constant addition
//! and permutation, their sizes, and the input grouping used for P(z).
//!
//! cargo run --release --example orbit_tables

use phasequant::symmetry::{
    canonical_conditional, canonical_output, reduce_inputs, ConditionalOrbitTable,
    OutputOrbitTable,
};

fn main() -> phasequant::Result<()> {
    println!("K=8 conditional orbits");
    for l in 3..=7 {
        let t = ConditionalOrbitTable::enumerate(8, l)?;
        println!("  L={l}: {:>4} representatives covering {} vectors", t.len(), t.total());
    }

    let (rep, tf) = canonical_conditional(&[5, 7, 2, 4], 8);
    println!("\n[5 7 2 4] -> {rep:?} (shift {}, permutation {:?})", tf.shift, tf.permutation);
    println!("[6 0 3 5] -> {:?}", canonical_conditional(&[6, 0, 3, 5], 8).0);
    println!("output class of [5 7 2 4] with a=2: {:?}", canonical_output(&[5, 7, 2, 4], 8, 2));

    let out = OutputOrbitTable::enumerate(8, 4, 2)?;
    println!("\nK=8 M=4 L=2 output orbits");
    for (rep, n) in out.reps().iter().zip(out.counts()) {
        println!("  {rep:?}: {n}");
    }
    for (k, l) in [(8, 6), (12, 8), (64, 4)] {
        let o = OutputOrbitTable::enumerate(k, 4, l)?;
        println!("K={k} M=4 L={l}: {} output representatives", o.len());
    }

    for z in [[0u8, 0], [0, 1]] {
        let r = reduce_inputs(&z, 4);
        println!("\ninputs for z={z:?}: {} representatives, multiplicity total {}", r.len(), r.total());
    }
    println!("inputs for z=[0 0 1 1]: total {}", reduce_inputs(&[0, 0, 1, 1], 4).total());
    Ok(())
}
