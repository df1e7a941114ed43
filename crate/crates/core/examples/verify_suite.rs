//! The invariant suite run from code, for a plain and a dithered
//! constellation. Under dither the permutation identities are expected to
//! fail and are reported that way.
//!
//! cargo run --release --example verify_suite

use phasequant::verify::{run_suite, VerifyOptions};
use phasequant::ChannelConfig;

fn main() -> phasequant::Result<()> {
    let cfg = ChannelConfig::from_db(4, 8, 3, 10.0)?;
    for dither in [false, true] {
        let report = run_suite(&cfg, 1024, dither, &VerifyOptions::default())?;
        println!("dither={dither}");
        for check in &report.checks {
            println!("  {check}");
        }
        println!("  passed: {}\n", report.passed());
    }
    Ok(())
}
