use ame::config::RunConfig;
use ame::integrator::evolve;
use std::time::Instant;

fn main() {
    let base = RunConfig::default();
    for (mult, rel, abs) in [(1.0f64, 1e-6, 1e-9), (10.0, 1e-6, 1e-9), (1000.0, 1e-6, 1e-9)] {
        let mut cfg = base.evolution.clone();
        cfg.t_f = 300.0;
        cfg.dt_max = 6.0;
        cfg.dt_init = 0.3;
        cfg.rel_tol = rel;
        cfg.abs_tol = abs;
        let mut bath = base.bath.clone();
        bath.eta_g2 *= mult;
        let t0 = Instant::now();
        match evolve(&base.chain, &base.schedule, &bath, &cfg) {
            Ok(t) => println!(
                "x{mult}: fid {:.4} steps {}+{} lu {} mineig {:.2e} ({:?})",
                t.final_fidelity(), t.steps_accepted, t.steps_rejected, t.lu_fallbacks,
                t.global_min_eig, t0.elapsed()
            ),
            Err(e) => println!("x{mult}: ERR {e}"),
        }
    }
}
