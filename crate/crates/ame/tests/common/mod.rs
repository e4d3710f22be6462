//! Shared test oracles, all independent of the library's numerical paths:
//! a cyclic Jacobi Hermitian eigensolver, complex adaptive Simpson
//! quadrature, an epsilon-excision principal-value rule, and a tiny
//! deterministic RNG.

#![allow(dead_code)]

use nalgebra::DMatrix;
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;

pub struct SplitMix(pub u64);

impl SplitMix {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
        let mut z = self.0;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
        z = z ^ (z >> 31);
        (z as f64 / u64::MAX as f64) * 2.0 - 1.0
    }

    pub fn complex(&mut self) -> C64 {
        C64::new(self.next_f64(), self.next_f64())
    }
}

pub fn random_hermitian(n: usize, seed: u64) -> CMat {
    let mut rng = SplitMix(seed);
    let mut h = CMat::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let z = if i == j {
                C64::new(rng.next_f64(), 0.0)
            } else {
                rng.complex()
            };
            h[(i, j)] = z;
            h[(j, i)] = z.conj();
        }
    }
    h
}

pub fn random_density(n: usize, seed: u64) -> CMat {
    let mut rng = SplitMix(seed);
    let m = CMat::from_fn(n, n, |_, _| rng.complex());
    let rho = &m * m.adjoint();
    let tr = rho.trace().re;
    rho.map(|z| z / tr)
}

/// Cyclic Jacobi eigensolver for Hermitian matrices: an implementation
/// deliberately unrelated to the library's solver. Returns ascending
/// eigenvalues and the corresponding eigenvector columns.
pub fn jacobi_eigh(a: &CMat) -> (Vec<f64>, CMat) {
    let n = a.nrows();
    let mut m = a.clone();
    let mut v = CMat::identity(n, n);
    for _sweep in 0..60 {
        let mut off = 0.0f64;
        for p in 0..n {
            for q in p + 1..n {
                off += m[(p, q)].norm_sqr();
            }
        }
        if off.sqrt() < 1e-14 * (1.0 + m.iter().map(|z| z.norm()).fold(0.0, f64::max)) {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.norm() < 1e-300 {
                    continue;
                }
                let app = m[(p, p)].re;
                let aqq = m[(q, q)].re;
                // unitary 2x2 rotation annihilating the (p, q) element
                let phase = apq / apq.norm();
                let theta = 0.5 * (2.0 * apq.norm()).atan2(aqq - app);
                let (c, s) = (theta.cos(), theta.sin());
                let s_c = phase * s;
                // columns p and q of M and V updated as M <- J^H M J
                for k in 0..n {
                    let mkp = m[(k, p)];
                    let mkq = m[(k, q)];
                    m[(k, p)] = mkp * c - mkq * s_c.conj();
                    m[(k, q)] = mkp * s_c + mkq * c;
                }
                for k in 0..n {
                    let mpk = m[(p, k)];
                    let mqk = m[(q, k)];
                    m[(p, k)] = mpk * c - mqk * s_c;
                    m[(q, k)] = mpk * s_c.conj() + mqk * c;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = vkp * c - vkq * s_c.conj();
                    v[(k, q)] = vkp * s_c + vkq * c;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, usize)> = (0..n).map(|k| (m[(k, k)].re, k)).collect();
    pairs.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let mut vecs = CMat::zeros(n, n);
    for (newk, (_, oldk)) in pairs.iter().enumerate() {
        vecs.set_column(newk, &v.column(*oldk));
    }
    (vals, vecs)
}

/// Singular values by the Jacobi route: sqrt of the eigenvalues of A^H A.
pub fn singular_values_oracle(a: &CMat) -> Vec<f64> {
    let ata = a.adjoint() * a;
    let (vals, _) = jacobi_eigh(&ata);
    let mut sv: Vec<f64> = vals.iter().map(|x| x.max(0.0).sqrt()).collect();
    sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
    sv
}

/// Adaptive Simpson quadrature for complex integrands; an independent rule
/// from the library's Gauss-Kronrod scheme.
pub fn simpson_complex(
    f: &dyn Fn(f64) -> C64,
    a: f64,
    b: f64,
    tol: f64,
    max_depth: usize,
) -> C64 {
    fn simp(a: f64, b: f64, fa: C64, fm: C64, fb: C64) -> C64 {
        (fa + 4.0 * fm + fb) * ((b - a) / 6.0)
    }
    fn rec(
        f: &dyn Fn(f64) -> C64,
        a: f64,
        b: f64,
        fa: C64,
        fm: C64,
        fb: C64,
        whole: C64,
        tol: f64,
        depth: usize,
    ) -> C64 {
        let m = 0.5 * (a + b);
        let lm = 0.5 * (a + m);
        let rm = 0.5 * (m + b);
        let flm = f(lm);
        let frm = f(rm);
        let left = simp(a, m, fa, flm, fm);
        let right = simp(m, b, fm, frm, fb);
        let delta = left + right - whole;
        // the relative floor stops refinement once a panel has converged to
        // machine precision of its own magnitude
        if depth == 0
            || delta.norm() <= 15.0 * tol
            || delta.norm() <= 1e-15 * (left + right).norm()
        {
            return left + right + delta / 15.0;
        }
        rec(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
            + rec(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
    }
    let m = 0.5 * (a + b);
    let fa = f(a);
    let fm = f(m);
    let fb = f(b);
    let whole = simp(a, b, fa, fm, fb);
    rec(f, a, b, fa, fm, fb, whole, tol, max_depth)
}

pub fn simpson_real(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, max_depth: usize) -> f64 {
    simpson_complex(&|x| C64::new(f(x), 0.0), a, b, tol, max_depth).re
}

/// Epsilon-excision principal value with Richardson extrapolation:
/// P int_a^b num(w)/(pole - w) dw = lim 2 I(eps/2) - I(eps).
pub fn pv_excision_oracle(
    num: &dyn Fn(f64) -> f64,
    pole: f64,
    a: f64,
    b: f64,
    eps: f64,
) -> f64 {
    let excised = |e: f64| -> f64 {
        let left = simpson_real(&|w| num(w) / (pole - w), a, pole - e, 1e-11, 40);
        let right = simpson_real(&|w| num(w) / (pole - w), pole + e, b, 1e-11, 40);
        left + right
    };
    let i1 = excised(eps);
    let i2 = excised(0.5 * eps);
    2.0 * i2 - i1
}

/// Composite-Simpson Hilbert transform of gamma with pole subtraction over a
/// fixed uniform grid: the Kramers-Kronig oracle.
pub fn hilbert_of_gamma_oracle(
    gamma: &dyn Fn(f64) -> f64,
    omega: f64,
    window: f64,
    points: usize,
) -> f64 {
    // P int gamma(w')/(omega - w') dw'/(2 pi) over [-window, window]
    let gp = gamma(omega);
    let n = if points % 2 == 0 { points + 1 } else { points };
    let h = 2.0 * window / (n - 1) as f64;
    let f = |w: f64| -> f64 {
        if (w - omega).abs() < 1e-9 * window {
            // derivative limit of (gamma(w) - gamma(omega))/(omega - w)
            let d = 1e-6 * window;
            -(gamma(omega + d) - gamma(omega - d)) / (2.0 * d)
        } else {
            (gamma(w) - gp) / (omega - w)
        }
    };
    let mut acc = f(-window) + f(window);
    for k in 1..n - 1 {
        let w = -window + k as f64 * h;
        acc += f(w) * if k % 2 == 1 { 4.0 } else { 2.0 };
    }
    let smooth = acc * h / 3.0;
    let log_term = gp * ((omega + window) / (window - omega)).ln();
    (smooth + log_term) / (2.0 * std::f64::consts::PI)
}
