//! Gapped-phase excited-state populations: the full Lindblad-form evolution
//! against the reduced rate equations over the early anneal.
//!
//! Run with: cargo run --release -p ame --example rate_vs_lindblad

use ame::analysis::{rate_model, RateModelInput};
use ame::bath::bath_timescales;
use ame::config::RunConfig;
use ame::integrator::evolve;
use ame::model::build_system_hamiltonian;
use ame::operators::eig_hermitian;

fn main() -> ame::Result<()> {
    let base = RunConfig::default();
    let mut cfg = base.evolution.clone();
    cfg.t_f = 10_000.0;
    cfg.s_end = 0.1;
    cfg.abs_tol = 1e-11;
    cfg.rel_tol = 1e-6;
    cfg.dt_init = 1.0;
    cfg.dt_max = 50.0;
    cfg.record_points = 51;
    println!("integrating the first 10% of a 10 us anneal (N = 8) ...");
    let traj = evolve(&base.chain, &base.schedule, &base.bath, &cfg)?;

    // per-level Bohr frequencies of the single-excitation manifold
    let m = 51;
    let mut times = Vec::new();
    let mut gaps = Vec::new();
    for k in 0..m {
        let s = 0.1 * k as f64 / (m - 1) as f64;
        let frame = eig_hermitian(&build_system_hamiltonian(&base.chain, &base.schedule, s)?)?;
        times.push(s * cfg.t_f);
        gaps.push((1..=8).map(|i| frame.energies[i] - frame.energies[0]).collect());
    }
    let ts = bath_timescales(&base.bath)?;
    let rates = rate_model(&RateModelInput { times, gaps }, &base.bath, 1000.0, ts.tau_b / 10.0, 400)?;

    println!("\n    s     total excited (Lindblad)   total excited (rate model)");
    for k in (0..m).step_by(5) {
        let lind: f64 = traj.populations[k][1..=8].iter().sum();
        let t = traj.t_ns[k];
        let pos = rates
            .t
            .binary_search_by(|v| v.partial_cmp(&t).unwrap())
            .unwrap_or_else(|e| e.min(rates.t.len() - 1));
        let rm: f64 = rates.excited[pos].iter().sum();
        println!("  {:>5.3}   {:>14.6e}              {:>14.6e}", traj.s[k], lind, rm);
    }
    Ok(())
}
