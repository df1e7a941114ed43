//! Scalar channel: the phase-error density, sector probabilities and the
//! tabulated likelihoods, checked against direct simulation.
//!
//! cargo run --release --example sector_likelihood

use std::f64::consts::PI;

use phasequant::channel::{mc_sector_oracle, phase_error_mass, phase_error_pdf, sector_prob};
use phasequant::{ChannelConfig, Constellation, SectorLikelihoodTable};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn main() -> phasequant::Result<()> {
    let cfg = ChannelConfig::from_db(4, 8, 3, 10.0)?;
    let cons = Constellation::standard(&cfg);

    println!("phase-error density at 10 dB");
    for psi in [0.0, PI / 8.0, PI / 4.0, PI / 2.0, PI] {
        println!("  f({psi:.4}) = {:.6}", phase_error_pdf(psi, cfg.snr()));
    }
    println!("  total mass = {:.15}", phase_error_mass(-PI, PI, cfg.snr()));

    let mut rng = ChaCha20Rng::seed_from_u64(1);
    println!("\nP(z | x=0, phi=pi/8): exact vs simulated (10^6 draws)");
    for z in 0..cfg.k() {
        let exact = sector_prob(z, 0, PI / 8.0, None, &cfg, &cons);
        let mc = mc_sector_oracle(z, 0, PI / 8.0, None, &cfg, &cons, 1_000_000, &mut rng)?;
        println!(
            "  z={z}: {exact:.6}  {:.6} +- {:.6}  {}",
            mc.estimate,
            mc.std_error,
            if mc.agrees_with(exact, 3.0) { "ok" } else { "off" }
        );
    }

    let table = SectorLikelihoodTable::build(&cfg, &cons, 64)?;
    println!("\nlikelihood table rows (n_phi = 64), P(z | 0, phi_n)");
    for n in [0, 4, 8] {
        let row: Vec<String> = table.row(0, n).iter().map(|p| format!("{p:.4}")).collect();
        println!("  phi={:.4}: {}", table.phi(n), row.join(" "));
    }
    println!(
        "\nP(z=2 | x=1) reads entry z={} of the x=0 table",
        table.shifted_index(2, 1)
    );
    Ok(())
}
