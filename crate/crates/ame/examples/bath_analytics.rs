//! Ohmic-bath analytics at the reference parameters: spectral rates,
//! Lamb-shift integrals, the closed-form correlation function, the fitted
//! decay timescales, and the detailed-balance report.
//!
//! Run with: cargo run --release -p ame --example bath_analytics

use ame::bath::{
    bath_timescales, correlation_fn, gamma_scalar, kms_report, s_scalar, BathSpec,
};
use std::f64::consts::PI;

fn main() -> ame::Result<()> {
    let bath = BathSpec::new(1.2e-4 / (2.0 * PI), 1.0 / 2.6, 8.0 * PI, 1)?;
    println!(
        "Ohmic bath: eta g^2 = {:.4e}, T = 2.6 GHz (beta = {:.4} ns), cutoff = 8 pi GHz",
        bath.eta_g2, bath.beta
    );

    let ts = bath_timescales(&bath)?;
    println!("\ntimescales:");
    println!("  tau_B  (fitted exponential decay) = {:.4} ns", ts.tau_b);
    println!("  tau_M  (power-law onset)          = {:.4} ns", ts.tau_m);
    println!("  tau_tr (crossover)                = {:.4} ns", ts.tau_tr);
    println!("  fit residual                      = {:.3e}", ts.fit_residual);
    println!("  beta / 2 pi                       = {:.4} ns", bath.beta / (2.0 * PI));

    println!("\n  omega [GHz]    gamma [1/ns]        S [1/ns]");
    for w in [-20.0, -5.0, -1.0, 0.0, 1.0, 5.0, 20.0, 50.0] {
        println!(
            "  {w:>8.2}    {:>12.5e}    {:>12.5e}",
            gamma_scalar(&bath, w),
            s_scalar(&bath, w)?
        );
    }

    println!("\n  tau [ns]      |B(tau)|        arg B(tau)");
    for k in 0..=12 {
        let tau = 0.05 * k as f64 + 0.01;
        let b = correlation_fn(&bath, tau);
        println!("  {tau:>7.3}    {:>12.5e}    {:>8.4}", b.norm(), b.arg());
    }

    let grid: Vec<f64> = (1..=100).flat_map(|k| [0.5 * k as f64, -0.5 * k as f64]).collect();
    let kms = kms_report(&bath, &grid);
    println!("\ndetailed balance:");
    println!("  max relative violation   = {:.3e}", kms.max_violation);
    println!("  derivative-rule residual = {:.3e}", kms.derivative_residual);
    Ok(())
}
