//! Final fidelity against the system-bath coupling strength for both master
//! equations, showing the Lindblad-form saturation and the positivity
//! breakdown of the double-sided equation at strong coupling.
//!
//! Run with: cargo run --release -p ame --example coupling_sweep

use ame::config::{RunConfig, SweepKey, SweepSpec};
use ame::generators::Equation;
use ame::runner::sweep;

fn main() -> ame::Result<()> {
    let mut cfg = RunConfig::default();
    cfg.chain = ame::model::SpinChainSpec::ferromagnetic_pinned(4);
    cfg.bath = ame::bath::BathSpec::new(cfg.bath.eta_g2, cfg.bath.beta, cfg.bath.omega_c, 4)?;
    cfg.evolution.t_f = 200.0;
    cfg.evolution.dt_max = 4.0;
    cfg.evolution.truncation = 8;
    cfg.evolution.record_points = 101;
    cfg.evolution.allow_positivity_violation = true;
    let base_eta = cfg.bath.eta_g2;
    cfg.sweep = Some(SweepSpec {
        key: SweepKey::EtaG2,
        values: vec![0.0, base_eta, 10.0 * base_eta, 100.0 * base_eta, 1000.0 * base_eta],
    });

    for eq in [Equation::Rwa, Equation::NonRwa] {
        cfg.evolution.equation = eq;
        println!("{eq}:");
        println!("    eta g^2        final fidelity   min eig(rho)");
        let points = sweep(&cfg, 2)?;
        for p in &points {
            println!(
                "  {:>12.4e}   {:>12.6}   {:>12.3e}{}",
                p.value,
                p.final_fidelity,
                p.global_min_eig,
                if p.global_min_eig < -1e-4 { "  <- positivity lost" } else { "" }
            );
        }
        println!();
    }
    Ok(())
}
