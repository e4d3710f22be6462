//! Trajectory-level checks: the rotating truncated integration against a
//! fixed-basis reference integrator, truncation self-convergence, the
//! closed-system adiabatic limit, and monotone thermalization of a frozen
//! generator.

mod common;

use ame::bath::{BathSpec, SPolicy, SpectralCache};
use ame::generators::{frozen_generator, Equation, GeneratorContext};
use ame::integrator::{evolve, gibbs_from_frame, trbdf2_step, EvolutionConfig};
use ame::model::{build_system_hamiltonian, coupling_operators, ScheduleSpec, SpinChainSpec};
use ame::operators::{eig_hermitian, eig_hermitian_at, trace_norm, CMatrix};
use common::C64;
use std::f64::consts::PI;

/// Reference integrator: classical RK4 on the same master equation in the
/// fixed computational basis, re-diagonalizing at every stage time, with no
/// truncation and no frame rotation.
fn reference_rk4(
    chain: &SpinChainSpec,
    sched: &ScheduleSpec,
    bath: &BathSpec,
    equation: Equation,
    lamb: bool,
    t_f: f64,
    steps: usize,
) -> CMatrix {
    let dim = 1 << chain.n_sites();
    let couplings = coupling_operators(chain).unwrap();
    let cache = SpectralCache::new(bath, SPolicy::Exact);
    let deriv = |t: f64, rho: &CMatrix| -> CMatrix {
        let h = build_system_hamiltonian(chain, sched, (t / t_f).min(1.0)).unwrap();
        let frame = eig_hermitian_at(&h, t).unwrap();
        let v = frame.vectors.clone();
        let ctx = GeneratorContext::build(frame, &couplings, bath, &cache, lamb, None).unwrap();
        let rho_eig = v.adjoint() * rho * &v;
        let d_eig = ctx.apply(equation, &rho_eig).unwrap();
        &v * d_eig * v.adjoint()
    };
    let h0 = build_system_hamiltonian(chain, sched, 0.0).unwrap();
    let mut rho = ame::integrator::gibbs_state(&h0, bath.beta).unwrap();
    let dt = t_f / steps as f64;
    let mut t = 0.0;
    for _ in 0..steps {
        let k1 = deriv(t, &rho);
        let k2 = deriv(t + 0.5 * dt, &(rho.clone() + k1.map(|z| z * (0.5 * dt))));
        let k3 = deriv(t + 0.5 * dt, &(rho.clone() + k2.map(|z| z * (0.5 * dt))));
        let k4 = deriv(t + dt, &(rho.clone() + k3.map(|z| z * dt)));
        rho += (k1 + k2.map(|z| z * 2.0) + k3.map(|z| z * 2.0) + k4).map(|z| z * (dt / 6.0));
        t += dt;
    }
    let _ = dim;
    rho
}

#[test]
fn rotating_integration_matches_fixed_basis_reference() {
    // untruncated N=3: the rotating scheme must agree with a plain
    // computational-basis integration of the same equation
    let chain = SpinChainSpec::ferromagnetic_pinned(3);
    let sched = ScheduleSpec::default_anneal();
    let bath = BathSpec::new(2e-3, 1.0 / 2.6, 8.0 * PI, 3).unwrap();
    let t_f = 40.0;

    let mut cfg = EvolutionConfig::new(t_f, 8, Equation::Rwa, true);
    cfg.rel_tol = 1e-7;
    cfg.abs_tol = 1e-10;
    cfg.s_policy = SPolicy::Exact;
    cfg.record_points = 11;
    let traj = evolve(&chain, &sched, &bath, &cfg).unwrap();

    let rho_ref = reference_rk4(&chain, &sched, &bath, Equation::Rwa, true, t_f, 4000);
    // compare in the final eigenbasis: populations carry the physics
    let h1 = build_system_hamiltonian(&chain, &sched, 1.0).unwrap();
    let frame1 = eig_hermitian(&h1).unwrap();
    let ref_eig = frame1.vectors.adjoint() * rho_ref * &frame1.vectors;
    let final_pops = &traj.populations[10];
    let mut worst: f64 = 0.0;
    for k in 0..8 {
        worst = worst.max((final_pops[k] - ref_eig[(k, k)].re).abs());
    }
    assert!(
        worst <= 1e-6,
        "rotating vs reference population mismatch {worst:.3e}"
    );
    assert!((traj.leakage.last().unwrap()).abs() < 1e-12, "full basis must not leak");
}

#[test]
fn truncation_self_convergence() {
    // the retained-level count must not matter once the kept set covers the
    // populated spectrum: n = 18 vs n = 24 on a short anneal
    let base = ame::config::RunConfig::default();
    let t_f = 120.0;
    let run = |n: usize| {
        let mut cfg = base.evolution.clone();
        cfg.t_f = t_f;
        cfg.dt_max = t_f / 50.0;
        cfg.truncation = n;
        cfg.record_points = 121;
        evolve(&base.chain, &base.schedule, &base.bath, &cfg).unwrap()
    };
    let t18 = run(18);
    let t24 = run(24);
    let mut worst: f64 = 0.0;
    for k in 0..121 {
        worst = worst.max((t18.fidelity[k] - t24.fidelity[k]).abs());
    }
    assert!(worst <= 1e-3, "fidelity(n=18) vs fidelity(n=24): {worst:.3e}");
}

#[test]
fn closed_system_adiabatic_limit() {
    // decoupled bath and slow anneal: the final fidelity is essentially 1
    let chain = SpinChainSpec::ferromagnetic_pinned(2);
    let sched = ScheduleSpec::default_anneal();
    let bath = BathSpec::new(0.0, 1.0 / 2.6, 8.0 * PI, 2).unwrap();
    let rep = ame::analysis::validity_report(&chain, &sched, &bath, 4e5).unwrap();
    assert!(
        rep.adiabatic_ratio <= 1e-4,
        "configuration not deep in the adiabatic regime: {}",
        rep.adiabatic_ratio
    );
    let mut cfg = EvolutionConfig::new(4e5, 4, Equation::Rwa, true);
    cfg.record_points = 101;
    let traj = evolve(&chain, &sched, &bath, &cfg).unwrap();
    assert!(
        traj.final_fidelity() >= 0.999,
        "adiabatic fidelity {}",
        traj.final_fidelity()
    );
    for f in &traj.fidelity {
        assert!(*f <= 1.0 + 1e-9);
    }
}

#[test]
fn frozen_generator_thermalizes_monotonically() {
    // time-independent generator: the trace distance to its Gibbs state
    // decreases monotonically (within tolerance) after initial transients
    let chain = SpinChainSpec::ferromagnetic_pinned(2);
    let h = ame::model::build_hamiltonian_at(&chain, 4.0, 2.5).unwrap();
    let frame = eig_hermitian(&h).unwrap();
    let energies = frame.energies.clone();
    let bath = BathSpec::new(0.03, 0.4, 12.0, 2).unwrap();
    let cache = SpectralCache::new(&bath, SPolicy::Exact);
    let ctx = GeneratorContext::build(
        frame,
        &coupling_operators(&chain).unwrap(),
        &bath,
        &cache,
        true,
        None,
    )
    .unwrap();
    let gen = frozen_generator(ctx, Equation::Rwa);
    let gibbs = gibbs_from_frame(
        &ame::operators::EigenFrame {
            t: 0.0,
            energies,
            vectors: CMatrix::identity(4, 4),
            gauge_anchor: vec![0; 4],
        },
        bath.beta,
    );
    // start from a non-equilibrium mixed state
    let mut rho = CMatrix::zeros(4, 4);
    rho[(2, 2)] = C64::new(0.6, 0.0);
    rho[(0, 0)] = C64::new(0.4, 0.0);
    let mut last = 0.5 * trace_norm(&(rho.clone() - gibbs.clone()));
    let mut decreasing_violation: f64 = 0.0;
    for step in 0..500 {
        let dt = if step < 200 { 2.0 } else { 10.0 };
        let (next, _) = trbdf2_step(&gen, &rho, dt).unwrap();
        rho = next;
        let d = 0.5 * trace_norm(&(rho.clone() - gibbs.clone()));
        if step > 5 {
            decreasing_violation = decreasing_violation.max(d - last);
        }
        last = d;
    }
    assert!(last < 1e-7, "did not reach Gibbs: distance {last:.3e}");
    assert!(
        decreasing_violation <= 1e-6,
        "distance increased by {decreasing_violation:.3e} on a step"
    );
}

#[test]
fn trace_stays_unit_and_positivity_holds() {
    let base = ame::config::RunConfig::default();
    let mut cfg = base.evolution.clone();
    cfg.t_f = 120.0;
    cfg.dt_max = 2.4;
    cfg.record_points = 101;
    let traj = evolve(&base.chain, &base.schedule, &base.bath, &cfg).unwrap();
    for k in 0..101 {
        let tr: f64 = traj.populations[k].iter().sum();
        assert!((tr - 1.0).abs() <= 1e-9, "trace drift {:.2e} at k={k}", tr - 1.0);
        assert!(traj.min_eig[k] >= -1e-8, "min eig {:.2e} at k={k}", traj.min_eig[k]);
        assert!(traj.fidelity[k] >= 0.0 && traj.fidelity[k] <= 1.0 + 1e-9);
    }
    assert!(traj.s.windows(2).all(|w| w[1] > w[0]));
}
