//! One anneal of the pinned ferromagnetic chain: fidelity trace, phase
//! segmentation, and run diagnostics at a desk-friendly anneal time.
//!
//! Run with: cargo run --release -p ame --example anneal_run

use ame::analysis::segment_phases;
use ame::config::RunConfig;
use ame::integrator::evolve;

fn main() -> ame::Result<()> {
    let base = RunConfig::default();
    let mut cfg = base.evolution.clone();
    cfg.t_f = 300.0; // ns; the reference run uses 10 us
    cfg.dt_max = cfg.t_f / 50.0;
    cfg.record_points = 61;

    println!(
        "annealing N = {} chain for {} ns, {} retained levels, {} + Lamb shift",
        base.chain.n_sites(),
        cfg.t_f,
        cfg.truncation,
        cfg.equation
    );
    let traj = evolve(&base.chain, &base.schedule, &base.bath, &cfg)?;

    println!("\n    s      fidelity   gibbs-dist   gap [GHz]   ground-coupling");
    for k in (0..61).step_by(5) {
        println!(
            "  {:>5.2}   {:>8.5}   {:>9.5}   {:>8.3}      {:>8.5}",
            traj.s[k], traj.fidelity[k], traj.gibbs_distance[k], traj.gap[k], traj.ground_coupling[k]
        );
    }

    let seg = segment_phases(&traj, &base.bath);
    println!("\nphase boundaries at s = {:.3}, {:.3}, {:.3}", seg.boundaries[0], seg.boundaries[1], seg.boundaries[2]);
    println!("phases: {}", seg.labels.join(" -> "));
    for w in &seg.warnings {
        println!("  note: {w}");
    }
    println!(
        "\n{} accepted steps ({} rejected), leakage {:.2e}, min eigenvalue {:.2e}",
        traj.steps_accepted,
        traj.steps_rejected,
        traj.leakage.last().unwrap(),
        traj.global_min_eig
    );
    Ok(())
}
