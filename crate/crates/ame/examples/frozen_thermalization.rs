//! A frozen (time-independent) generator drives any initial state to the
//! Gibbs state of its spectrum: the detailed-balance fixed point of the
//! Lindblad-form equation.
//!
//! Run with: cargo run --release -p ame --example frozen_thermalization

use ame::bath::{BathSpec, SPolicy, SpectralCache};
use ame::generators::{frozen_generator, Equation, GeneratorContext};
use ame::integrator::{gibbs_populations, trbdf2_step};
use ame::model::{build_hamiltonian_at, coupling_operators, SpinChainSpec};
use ame::operators::{eig_hermitian, trace_norm, CMatrix};
use num_complex::Complex64;

fn main() -> ame::Result<()> {
    let chain = SpinChainSpec::ferromagnetic_pinned(2);
    let h = build_hamiltonian_at(&chain, 4.0, 2.0)?;
    let frame = eig_hermitian(&h)?;
    let bath = BathSpec::new(0.03, 0.4, 12.0, 2)?;
    let cache = SpectralCache::new(&bath, SPolicy::Exact);
    let energies = frame.energies.clone();
    let ctx = GeneratorContext::build(
        frame,
        &coupling_operators(&chain)?,
        &bath,
        &cache,
        true,
        None,
    )?;
    let gen = frozen_generator(ctx, Equation::Rwa);

    // start in the highest level
    let mut rho = CMatrix::zeros(4, 4);
    rho[(3, 3)] = Complex64::new(1.0, 0.0);
    let pops = gibbs_populations(energies.as_slice(), bath.beta);
    let mut gibbs = CMatrix::zeros(4, 4);
    for k in 0..4 {
        gibbs[(k, k)] = Complex64::new(pops[k], 0.0);
    }

    println!("   t [ns]   distance to Gibbs    populations");
    let mut t = 0.0;
    for step in 0..=40 {
        if step % 4 == 0 {
            let d = 0.5 * trace_norm(&(rho.clone() - gibbs.clone()));
            let p: Vec<String> = (0..4).map(|k| format!("{:.4}", rho[(k, k)].re)).collect();
            println!("  {t:>7.1}   {d:>12.6e}   [{}]", p.join(", "));
        }
        let (next, _) = trbdf2_step(&gen, &rho, 5.0)?;
        rho = next;
        t += 5.0;
    }
    println!("\nGibbs populations: {:?}", pops.iter().map(|p| (p * 1e4).round() / 1e4).collect::<Vec<_>>());
    Ok(())
}
