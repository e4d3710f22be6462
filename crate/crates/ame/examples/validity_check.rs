//! Timescale-inequality report for the reference configuration: adiabaticity,
//! weak coupling, Markovianity, basis drift, and the Ohmic cutoff condition.
//!
//! Run with: cargo run --release -p ame --example validity_check

use ame::analysis::validity_report;
use ame::config::RunConfig;

fn main() -> ame::Result<()> {
    let cfg = RunConfig::default();
    for t_f in [1e3, 1e4, 1e2] {
        let rep = validity_report(&cfg.chain, &cfg.schedule, &cfg.bath, t_f)?;
        println!("t_f = {t_f:.0} ns:");
        print!("{}", rep.render());
        println!();
    }
    Ok(())
}
