//! Independent-oracle cross-checks: principal-value integrals against an
//! epsilon-excision rule, the closed-form correlation function against
//! direct Fourier quadrature, trigamma against its defining integral,
//! eigensolves and trace norms against a Jacobi solver, Bohr binning
//! against transitive brute-force grouping, and the secular part of the
//! double-sided generator against the Lindblad-form generator.

mod common;

use ame::bath::{
    correlation_fn, gamma_scalar, s_scalar, spectral_gamma, trigamma_complex, BathSpec,
};
use ame::generators::{bin_bohr_frequencies, Equation, GeneratorContext};
use ame::model::{build_hamiltonian_at, coupling_operators, ScheduleSpec, SpinChainSpec};
use ame::operators::{align_frame, eig_hermitian, trace_norm, CMatrix};
use common::{
    hilbert_of_gamma_oracle, jacobi_eigh, pv_excision_oracle, random_hermitian, simpson_complex,
    simpson_real, singular_values_oracle, SplitMix, C64,
};
use std::f64::consts::PI;

fn paper_bath(n: usize) -> BathSpec {
    BathSpec::new(1.2e-4 / (2.0 * PI), 1.0 / 2.6, 8.0 * PI, n).unwrap()
}

#[test]
fn lamb_shift_integral_vs_excision_oracle() {
    let bath = paper_bath(1);
    let wmax = (50.0 / bath.beta).max(20.0 * bath.omega_c);
    for omega in [5.0, 30.0] {
        let lib = s_scalar(&bath, omega).unwrap();
        // term 1: pole inside the window
        let f1 = |w: f64| gamma_scalar(&bath, w) / (2.0 * PI);
        let t1 = pv_excision_oracle(&f1, omega, 0.0, wmax, 1e-2);
        // term 2: no pole for positive omega
        let f2 = |w: f64| f1(w) * (-bath.beta * w).exp() / (omega + w);
        let t2 = simpson_real(&f2, 0.0, wmax, 1e-14, 44);
        let oracle = t1 + t2;
        assert!(
            (lib - oracle).abs() <= 1e-6 * oracle.abs(),
            "omega={omega}: lib {lib:.9e} vs oracle {oracle:.9e}"
        );
    }
    // omega = 0: the two principal values cancel analytically
    let lib = s_scalar(&bath, 0.0).unwrap();
    let oracle = simpson_real(
        &|w: f64| -bath.eta_g2 * (-w / bath.omega_c).exp(),
        0.0,
        wmax,
        1e-16,
        44,
    );
    assert!(
        (lib - oracle).abs() <= 1e-6 * oracle.abs(),
        "omega=0: {lib:.9e} vs {oracle:.9e}"
    );
}

#[test]
fn lamb_shift_negative_frequency_vs_oracle() {
    let bath = paper_bath(1);
    let wmax = (50.0 / bath.beta).max(20.0 * bath.omega_c);
    let omega = -7.0;
    let lib = s_scalar(&bath, omega).unwrap();
    // term 1 has no pole; term 2's pole sits at -omega inside the window
    let f1 = |w: f64| gamma_scalar(&bath, w) / (2.0 * PI) / (omega - w);
    let t1 = simpson_real(&f1, 0.0, wmax, 1e-15, 44);
    let f2 = |w: f64| gamma_scalar(&bath, w) / (2.0 * PI) * (-bath.beta * w).exp();
    // P int f2/(omega + w) dw = -P int f2/((-omega) - w) dw
    let t2 = -pv_excision_oracle(&f2, -omega, 0.0, wmax, 1e-2);
    let oracle = t1 + t2;
    assert!(
        (lib - oracle).abs() <= 1e-6 * oracle.abs(),
        "omega={omega}: lib {lib:.9e} vs oracle {oracle:.9e}"
    );
}

#[test]
fn kramers_kronig_consistency() {
    // S(omega) equals the Hilbert transform of gamma/(2 pi) evaluated by an
    // FFT-free composite rule on a fixed grid
    let bath = paper_bath(1);
    let g = |w: f64| gamma_scalar(&bath, w);
    for omega in [-20.0, -11.0, -3.0, 1.0, 7.5, 14.0, 20.0] {
        let lib = s_scalar(&bath, omega).unwrap();
        let oracle = hilbert_of_gamma_oracle(&g, omega, 1500.0, 1_200_001);
        assert!(
            (lib - oracle).abs() <= 1e-5 * oracle.abs().max(bath.eta_g2),
            "omega={omega}: lib {lib:.8e} vs hilbert {oracle:.8e}"
        );
    }
}

#[test]
fn trigamma_matches_defining_integral() {
    let z = C64::new(0.01, 0.5);
    let lib = trigamma_complex(z).unwrap();
    let integrand = move |x: f64| -> C64 {
        if x < 1e-12 {
            return C64::new(1.0, 0.0);
        }
        let damp = (-z * x).exp();
        damp * x / (1.0 - (-x).exp())
    };
    let oracle = simpson_complex(&integrand, 0.0, 6000.0, 1e-13, 48);
    assert!(
        (lib - oracle).norm() <= 1e-10 * oracle.norm(),
        "psi1({z}) = {lib} vs integral {oracle}"
    );
}

#[test]
fn correlation_matches_fourier_transform_of_gamma() {
    // B(tau) = (1/2pi) int gamma(w) e^{-i w tau} dw
    let bath = paper_bath(1);
    for tau in [0.01, 0.05, 0.2, 0.7, 1.3, 2.0] {
        let lib = correlation_fn(&bath, tau);
        let b = bath.clone();
        let f = move |w: f64| -> C64 {
            C64::from_polar(gamma_scalar(&b, w), -w * tau) / (2.0 * PI)
        };
        let oracle = simpson_complex(&f, -200.0, 1300.0, 5e-15, 44);
        assert!(
            (lib - oracle).norm() <= 1e-6 * oracle.norm(),
            "tau={tau}: {lib} vs {oracle}, rel {:.2e}",
            (lib - oracle).norm() / oracle.norm()
        );
    }
}

#[test]
fn eigensolver_against_jacobi() {
    for (n, seed) in [(6usize, 11u64), (12, 12), (24, 13)] {
        let h = random_hermitian(n, seed);
        let lib = eig_hermitian(&h).unwrap();
        let (vals, _) = jacobi_eigh(&h);
        for k in 0..n {
            assert!(
                (lib.energies[k] - vals[k]).abs() <= 1e-10 * (1.0 + vals[k].abs()),
                "eigenvalue {k}: {} vs jacobi {}",
                lib.energies[k],
                vals[k]
            );
        }
    }
}

#[test]
fn n2_chain_spectrum_against_jacobi() {
    let chain = SpinChainSpec::new(vec![0.0, 0.0], nalgebra::DMatrix::zeros(2, 2)).unwrap();
    let sched = ScheduleSpec::default_anneal();
    let h = ame::model::build_system_hamiltonian(&chain, &sched, 0.0).unwrap();
    let lib = eig_hermitian(&h).unwrap();
    let (vals, _) = jacobi_eigh(&h);
    let expect = [-67.4, 0.0, 0.0, 67.4];
    for k in 0..4 {
        assert!((vals[k] - expect[k]).abs() < 1e-9, "jacobi {k}: {}", vals[k]);
        assert!((lib.energies[k] - vals[k]).abs() < 1e-9);
    }
}

#[test]
fn trace_norm_against_jacobi_svd() {
    let mut rng = SplitMix(99);
    for n in [3usize, 5, 8] {
        let a = CMatrix::from_fn(n, n, |_, _| rng.complex());
        let lib = trace_norm(&a);
        let oracle: f64 = singular_values_oracle(&a).iter().sum();
        assert!(
            (lib - oracle).abs() <= 1e-12 * oracle,
            "n={n}: {lib} vs {oracle}"
        );
    }
    // difference of two random density matrices
    let d1 = common::random_density(6, 5);
    let d2 = common::random_density(6, 6);
    let diff = d1 - d2;
    let lib = trace_norm(&diff);
    let oracle: f64 = singular_values_oracle(&diff).iter().sum();
    assert!((lib - oracle).abs() <= 1e-12 * oracle.max(1.0));
}

#[test]
fn binning_against_transitive_grouping() {
    let mut rng = SplitMix(7);
    for trial in 0..5 {
        let n = 6;
        let mut energies: Vec<f64> = (0..n).map(|_| 10.0 * rng.next_f64()).collect();
        // inject a近-degenerate pair below the tolerance
        energies[3] = energies[2] + 1e-9 * rng.next_f64().abs();
        energies.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let delta = 1e-6;
        let bins = bin_bohr_frequencies(&energies, delta);

        // oracle: union-find over all ordered pairs by |w_i - w_j| <= delta
        let mut pairs: Vec<(usize, usize, f64)> = vec![];
        for a in 0..n {
            for b in 0..n {
                pairs.push((a, b, energies[b] - energies[a]));
            }
        }
        let m = pairs.len();
        let mut parent: Vec<usize> = (0..m).collect();
        fn find(p: &mut Vec<usize>, i: usize) -> usize {
            if p[i] != i {
                let r = find(p, p[i]);
                p[i] = r;
            }
            p[i]
        }
        for i in 0..m {
            for j in 0..m {
                if (pairs[i].2 - pairs[j].2).abs() <= delta {
                    let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                    if ri != rj {
                        parent[ri] = rj;
                    }
                }
            }
        }
        let mut groups = std::collections::HashMap::<usize, Vec<(usize, usize)>>::new();
        for i in 0..m {
            let r = find(&mut parent, i);
            groups.entry(r).or_default().push((pairs[i].0, pairs[i].1));
        }
        assert_eq!(
            bins.len(),
            groups.len(),
            "trial {trial}: bin count {} vs oracle {}",
            bins.len(),
            groups.len()
        );
        let total: usize = bins.iter().map(|b| b.pairs.len()).sum();
        assert_eq!(total, m);
        // every library bin must be exactly one oracle group
        for bin in &bins {
            let mut sorted = bin.pairs.clone();
            sorted.sort_unstable();
            let hit = groups.values().any(|g| {
                let mut gs = g.clone();
                gs.sort_unstable();
                gs == sorted
            });
            assert!(hit, "trial {trial}: bin at {} not an oracle group", bin.omega);
        }
    }
}

#[test]
fn alignment_consistent_with_fine_eigenpath() {
    // coarse alignment across one step agrees with walking the same interval
    // in ten sub-steps
    let chain = SpinChainSpec::ferromagnetic_pinned(4);
    let sched = ScheduleSpec::default_anneal();
    let s0 = 0.35;
    let s1 = 0.36;
    let h0 = ame::model::build_system_hamiltonian(&chain, &sched, s0).unwrap();
    let start = eig_hermitian(&h0).unwrap();

    let h1 = ame::model::build_system_hamiltonian(&chain, &sched, s1).unwrap();
    let coarse = align_frame(&start, eig_hermitian(&h1).unwrap()).unwrap().0;

    let mut walker = start.clone();
    for k in 1..=10 {
        let s = s0 + (s1 - s0) * k as f64 / 10.0;
        let h = ame::model::build_system_hamiltonian(&chain, &sched, s).unwrap();
        walker = align_frame(&walker, eig_hermitian(&h).unwrap()).unwrap().0;
    }
    for j in 0..16 {
        let z = walker.vectors.column(j).dotc(&coarse.vectors.column(j));
        assert!(
            z.re > 0.999,
            "column {j}: fine-path overlap {z} not aligned with coarse step"
        );
    }
}

#[test]
fn secular_entries_match_between_equations() {
    // with the Lamb shift off and a non-degenerate spectrum, the double-sided
    // generator agrees with the Lindblad-form generator on every secular
    // superoperator entry (e_i - e_j = e_k - e_l)
    let chain = SpinChainSpec::ferromagnetic_pinned(2);
    let h = build_hamiltonian_at(&chain, 3.0, 1.7).unwrap();
    let frame = eig_hermitian(&h).unwrap();
    let energies = frame.energies.clone();
    let bath = BathSpec::new(0.05, 0.4, 10.0, 2).unwrap();
    let cache = ame::bath::SpectralCache::new(&bath, ame::bath::SPolicy::Exact);
    let ctx = GeneratorContext::build(
        frame,
        &coupling_operators(&chain).unwrap(),
        &bath,
        &cache,
        false,
        None,
    )
    .unwrap();
    let s_rwa = ctx.superop(Equation::Rwa);
    let s_non = ctx.superop(Equation::NonRwa);
    let n = 4;
    let scale = s_rwa.iter().fold(0.0f64, |m, z| m.max(z.norm()));
    let mut secular_checked = 0;
    for i in 0..n {
        for j in 0..n {
            for k in 0..n {
                for l in 0..n {
                    let lhs = energies[i] - energies[j];
                    let rhs = energies[k] - energies[l];
                    if (lhs - rhs).abs() < 1e-9 {
                        let a = s_rwa[(i * n + j, k * n + l)];
                        let b = s_non[(i * n + j, k * n + l)];
                        assert!(
                            (a - b).norm() <= 1e-12 * scale,
                            "secular entry (({i},{j}),({k},{l})): rwa {a} vs nonrwa {b}"
                        );
                        secular_checked += 1;
                    }
                }
            }
        }
    }
    assert!(secular_checked >= n * n, "too few secular entries checked");
    // and the equations do differ somewhere off the secular set
    let diff = (&s_non - &s_rwa).iter().fold(0.0f64, |m, z| m.max(z.norm()));
    assert!(diff > 1e-10 * scale, "equations identical; test vacuous");
}

#[test]
fn gamma_matrices_psd_along_grid() {
    let mut bath = paper_bath(3);
    bath.g_profile = vec![1.0, 0.7, 1.3];
    for k in 0..100 {
        let w = -30.0 + 60.0 * k as f64 / 99.0;
        let g = spectral_gamma(&bath, w);
        let gc = CMatrix::from_fn(3, 3, |i, j| C64::new(g[(i, j)], 0.0));
        let (vals, _) = jacobi_eigh(&gc);
        assert!(vals[0] >= -1e-12, "gamma(w={w}) min eig {}", vals[0]);
    }
}
