//! Right-hand-side generators in the instantaneous eigenbasis: Lindblad
//! operator data, Bohr-frequency binning, the Lindblad-form generator with
//! its Lamb shift, the double-sided generator without the rotating-wave
//! approximation, and the frozen-time reduction.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::bath::{gamma_scalar, BathSpec, SpectralCache};
use crate::error::{Error, Result};
use crate::operators::{CMatrix, EigenFrame};

type C64 = Complex64;

const ZI: C64 = C64 { re: 0.0, im: 1.0 };

/// Default Bohr-frequency binning tolerance as a fraction of max |omega|.
pub const DEFAULT_BIN_DELTA_FACTOR: f64 = 1e-6;

/// Which master equation a generator realizes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Equation {
    /// Rotating-wave (secular) approximation; Lindblad form.
    Rwa,
    /// Double-sided adiabatic equation; not of Lindblad form.
    NonRwa,
}

impl std::fmt::Display for Equation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Equation::Rwa => write!(f, "rwa"),
            Equation::NonRwa => write!(f, "nonrwa"),
        }
    }
}

/// One group of ordered level pairs sharing a Bohr frequency within the
/// binning tolerance. Pair (a, b) carries omega = e_b - e_a.
#[derive(Debug, Clone)]
pub struct BohrBin {
    pub omega: f64,
    pub pairs: Vec<(usize, usize)>,
}

/// Group all ordered pairs by Bohr frequency within absolute tolerance
/// `delta`. The representative is the member mean; bins come in exact
/// +/- partners and every ordered pair appears exactly once.
pub fn bin_bohr_frequencies(energies: &[f64], delta: f64) -> Vec<BohrBin> {
    assert!(delta > 0.0, "binning tolerance must be positive");
    let n = energies.len();
    let mut ups: Vec<(f64, usize, usize)> = Vec::with_capacity(n * (n + 1) / 2);
    for a in 0..n {
        for b in a..n {
            ups.push((energies[b] - energies[a], a, b));
        }
    }
    ups.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());

    let mut bins = Vec::new();
    let mut start = 0usize;
    while start < ups.len() {
        let mut end = start + 1;
        while end < ups.len() && ups[end].0 - ups[end - 1].0 <= delta {
            end += 1;
        }
        let members = &ups[start..end];
        let contains_zero = members.iter().any(|m| m.1 == m.2);
        if contains_zero {
            // self-symmetric zero bin: diagonals once, both orientations of
            // near-degenerate pairs; the symmetric member mean is exactly 0
            let mut pairs = Vec::new();
            for &(_, a, b) in members {
                if a == b {
                    pairs.push((a, b));
                } else {
                    pairs.push((a, b));
                    pairs.push((b, a));
                }
            }
            bins.push(BohrBin { omega: 0.0, pairs });
        } else {
            let mean = members.iter().map(|m| m.0).sum::<f64>() / members.len() as f64;
            let up: Vec<(usize, usize)> = members.iter().map(|m| (m.1, m.2)).collect();
            let down: Vec<(usize, usize)> = members.iter().map(|m| (m.2, m.1)).collect();
            bins.push(BohrBin {
                omega: -mean,
                pairs: down,
            });
            bins.push(BohrBin { omega: mean, pairs: up });
        }
        start = end;
    }
    bins.sort_by(|x, y| x.omega.partial_cmp(&y.omega).unwrap());
    bins
}

/// Coupling operators rotated into the frame's eigenbasis, with the
/// conjugate-transpose symmetry A[a][b] = conj(A[b][a]) enforced exactly.
///
/// Couplings that are diagonal in the computational basis (sigma_z strings)
/// take an O(dim n^2) contraction instead of dense triple products.
pub fn lindblad_ops(frame: &EigenFrame, couplings: &[CMatrix]) -> Result<Vec<CMatrix>> {
    let dim_full = frame.vectors.nrows();
    let n = frame.dim();
    let mut out = Vec::with_capacity(couplings.len());
    for op in couplings {
        if op.nrows() != dim_full || op.ncols() != dim_full {
            return Err(Error::DimensionMismatch(op.nrows(), dim_full));
        }
        let diagonal = (0..dim_full)
            .all(|i| (0..dim_full).all(|j| i == j || op[(i, j)] == C64::new(0.0, 0.0)));
        let rotated = if diagonal {
            let d: Vec<C64> = (0..dim_full).map(|k| op[(k, k)]).collect();
            let v = &frame.vectors;
            CMatrix::from_fn(n, n, |a, b| {
                let mut acc = C64::new(0.0, 0.0);
                for k in 0..dim_full {
                    acc += v[(k, a)].conj() * d[k] * v[(k, b)];
                }
                acc
            })
        } else {
            frame.vectors.adjoint() * op * &frame.vectors
        };
        let mut sym = CMatrix::zeros(n, n);
        for a in 0..n {
            sym[(a, a)] = C64::new(rotated[(a, a)].re, 0.0);
            for b in 0..a {
                let v = 0.5 * (rotated[(a, b)] + rotated[(b, a)].conj());
                sym[(a, b)] = v;
                sym[(b, a)] = v.conj();
            }
        }
        out.push(sym);
    }
    Ok(out)
}

/// Lindblad operator data at one instant: the frame, the eigenbasis
/// coupling matrices, and the Bohr-frequency bins.
#[derive(Debug, Clone)]
pub struct LindbladSet {
    pub frame: EigenFrame,
    pub site_ops: Vec<CMatrix>,
    pub bins: Vec<BohrBin>,
}

/// Everything needed to evaluate either master equation at one instant.
pub struct GeneratorContext {
    pub lindblads: LindbladSet,
    /// gamma matrix per bin frequency.
    pub gamma_at: Vec<DMatrix<f64>>,
    /// S matrix per bin frequency (empty when the Lamb shift is disabled).
    pub s_at: Vec<DMatrix<f64>>,
    pub lamb_shift_enabled: bool,
    /// System Hamiltonian in this frame; diagonal of the frame energies.
    pub h_sys: CMatrix,
    /// Lamb-shift Hamiltonian (zeros when disabled).
    pub h_ls: CMatrix,
    // bin-resolved pair contraction K[q, p] = v_q^dag gamma(omega) v_p
    k_mats: Vec<DMatrix<C64>>,
    // sum over bins of gamma-weighted L^dag L (the anticommutator kernel)
    g_total: CMatrix,
    // per-site W_alpha[a][b] = sum_beta Gamma_ab(omega_ba) A_beta[a][b]
    w_ops: Vec<CMatrix>,
}

impl GeneratorContext {
    /// Assemble the context from couplings in the computational basis.
    ///
    /// `delta` is the absolute binning tolerance; `None` uses
    /// DEFAULT_BIN_DELTA_FACTOR times the spectral span.
    pub fn build(
        frame: EigenFrame,
        couplings: &[CMatrix],
        bath: &BathSpec,
        cache: &SpectralCache,
        lamb_shift: bool,
        delta: Option<f64>,
    ) -> Result<Self> {
        let site_ops = lindblad_ops(&frame, couplings)?;
        Self::from_eigenbasis(frame, site_ops, bath, cache, lamb_shift, delta)
    }

    /// Assemble from coupling matrices already expressed in the eigenbasis.
    pub fn from_eigenbasis(
        frame: EigenFrame,
        site_ops: Vec<CMatrix>,
        bath: &BathSpec,
        cache: &SpectralCache,
        lamb_shift: bool,
        delta: Option<f64>,
    ) -> Result<Self> {
        let energies: Vec<f64> = frame.energies.iter().copied().collect();
        let span = energies
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &e| {
                (lo.min(e), hi.max(e))
            });
        let max_omega = (span.1 - span.0).abs().max(1e-12);
        let delta = delta.unwrap_or(DEFAULT_BIN_DELTA_FACTOR * max_omega);
        let bins = bin_bohr_frequencies(&energies, delta);
        Self::from_eigenbasis_binned(frame, site_ops, bath, cache, lamb_shift, bins)
    }

    /// Assemble with an externally imposed bin membership: each group keeps
    /// its pair set while the representative frequency is recomputed as the
    /// member mean in this frame. Sharing one membership across the stage
    /// frames of a step keeps the generator continuous while two Bohr
    /// frequencies drift through the binning tolerance.
    pub fn from_eigenbasis_grouped(
        frame: EigenFrame,
        site_ops: Vec<CMatrix>,
        bath: &BathSpec,
        cache: &SpectralCache,
        lamb_shift: bool,
        membership: &[Vec<(usize, usize)>],
    ) -> Result<Self> {
        let energies: Vec<f64> = frame.energies.iter().copied().collect();
        let bins: Vec<BohrBin> = membership
            .iter()
            .map(|pairs| {
                let mean = pairs
                    .iter()
                    .map(|&(a, b)| energies[b] - energies[a])
                    .sum::<f64>()
                    / pairs.len() as f64;
                BohrBin {
                    // a self-symmetric group has an exactly zero mean up to
                    // roundoff; pin it so gamma(0) limits stay exact
                    omega: if mean.abs() < 1e-12 { 0.0 } else { mean },
                    pairs: pairs.clone(),
                }
            })
            .collect();
        Self::from_eigenbasis_binned(frame, site_ops, bath, cache, lamb_shift, bins)
    }

    fn from_eigenbasis_binned(
        frame: EigenFrame,
        site_ops: Vec<CMatrix>,
        bath: &BathSpec,
        cache: &SpectralCache,
        lamb_shift: bool,
        bins: Vec<BohrBin>,
    ) -> Result<Self> {
        let n = frame.dim();
        let n_sites = site_ops.len();
        if bath.n_sites() != n_sites {
            return Err(Error::InvalidBath(format!(
                "bath g_profile has {} sites, chain couplings {}",
                bath.n_sites(),
                n_sites
            )));
        }
        let energies: Vec<f64> = frame.energies.iter().copied().collect();

        // spectral samples per bin
        let mut gamma_at = Vec::with_capacity(bins.len());
        let mut s_at = Vec::with_capacity(bins.len());
        for bin in &bins {
            gamma_at.push(crate::bath::spectral_gamma(bath, bin.omega));
            if lamb_shift {
                let s_sc = cache.s_at(bin.omega)?;
                s_at.push(DMatrix::from_fn(n_sites, n_sites, |i, j| {
                    s_sc * bath.g_profile[i] * bath.g_profile[j]
                }));
            }
        }

        // pair contraction kernels, anticommutator total, Lamb shift
        let mut k_mats = Vec::with_capacity(bins.len());
        let mut g_total = CMatrix::zeros(n, n);
        let mut h_ls = CMatrix::zeros(n, n);
        for (bi, bin) in bins.iter().enumerate() {
            let m = bin.pairs.len();
            // v_p[alpha] = A_alpha[a_p, b_p]
            let vs: Vec<DVector<C64>> = bin
                .pairs
                .iter()
                .map(|&(a, b)| DVector::from_fn(n_sites, |al, _| site_ops[al][(a, b)]))
                .collect();
            let gamma = &gamma_at[bi];
            let mut k = DMatrix::<C64>::zeros(m, m);
            for q in 0..m {
                for p in 0..m {
                    let mut acc = C64::new(0.0, 0.0);
                    for al in 0..n_sites {
                        let mut row = C64::new(0.0, 0.0);
                        for be in 0..n_sites {
                            row += gamma[(al, be)] * vs[p][be];
                        }
                        acc += vs[q][al].conj() * row;
                    }
                    k[(q, p)] = acc;
                }
            }
            // anticommutator kernel and Lamb shift need pairs sharing the
            // first index: q=(a, d), p=(a, b) -> accumulate at (d, b)
            for (qi, &(aq, dq)) in bin.pairs.iter().enumerate() {
                for (pi, &(ap, bp)) in bin.pairs.iter().enumerate() {
                    if aq != ap {
                        continue;
                    }
                    g_total[(dq, bp)] += k[(qi, pi)];
                    if lamb_shift {
                        let s = &s_at[bi];
                        let mut acc = C64::new(0.0, 0.0);
                        for al in 0..n_sites {
                            let mut row = C64::new(0.0, 0.0);
                            for be in 0..n_sites {
                                row += s[(al, be)] * vs[pi][be];
                            }
                            acc += vs[qi][al].conj() * row;
                        }
                        h_ls[(dq, bp)] += acc;
                    }
                }
            }
            k_mats.push(k);
        }

        // per-site non-RWA kernels at pair-exact frequencies
        let half = C64::new(0.5, 0.0);
        let mut w_ops = vec![CMatrix::zeros(n, n); n_sites];
        for a in 0..n {
            for b in 0..n {
                let omega = energies[b] - energies[a];
                let g_sc = gamma_scalar(bath, omega);
                let s_sc = if lamb_shift { cache.s_at(omega)? } else { 0.0 };
                let zeta = half * g_sc + ZI * s_sc;
                for al in 0..n_sites {
                    let mut acc = C64::new(0.0, 0.0);
                    for be in 0..n_sites {
                        let gam_ab = bath.g_profile[al] * bath.g_profile[be];
                        acc += zeta * gam_ab * site_ops[be][(a, b)];
                    }
                    w_ops[al][(a, b)] = acc;
                }
            }
        }

        let h_sys = CMatrix::from_fn(n, n, |i, j| {
            if i == j {
                C64::new(energies[i], 0.0)
            } else {
                C64::new(0.0, 0.0)
            }
        });

        Ok(Self {
            lindblads: LindbladSet {
                frame,
                site_ops,
                bins,
            },
            gamma_at,
            s_at,
            lamb_shift_enabled: lamb_shift,
            h_sys,
            h_ls,
            k_mats,
            g_total,
            w_ops,
        })
    }

    pub fn dim(&self) -> usize {
        self.lindblads.frame.dim()
    }

    /// Pair groups of the current bins, usable to constrain another frame's
    /// assembly to the same secular structure.
    pub fn membership(&self) -> Vec<Vec<(usize, usize)>> {
        self.lindblads.bins.iter().map(|b| b.pairs.clone()).collect()
    }

    pub fn n_sites(&self) -> usize {
        self.lindblads.site_ops.len()
    }

    /// Largest gamma value over the sampled bin frequencies.
    pub fn max_gamma(&self) -> f64 {
        self.gamma_at
            .iter()
            .flat_map(|g| g.iter())
            .fold(0.0f64, |m, &v| m.max(v.abs()))
    }

    /// Largest coupling element connecting the ground cluster to the rest of
    /// the spectrum: max |<e_g| A_alpha |e_b>| over ground-cluster rows g and
    /// levels b outside the cluster. This is the freeze diagnostic: the bath
    /// stops moving ground-state population exactly when these elements die
    /// out. Couplings between excited levels (including the O(1) elements
    /// inside hybridized degenerate multiplets) do not enter.
    pub fn max_ground_coupling(&self) -> f64 {
        let clusters = self.lindblads.frame.degeneracy_clusters();
        let ground = clusters.first().cloned().unwrap_or(0..0);
        let n = self.dim();
        let mut m = 0.0f64;
        for op in &self.lindblads.site_ops {
            for g in ground.clone() {
                for b in 0..n {
                    if !ground.contains(&b) {
                        m = m.max(op[(g, b)].norm());
                    }
                }
            }
        }
        m
    }

    /// Effective commutator Hamiltonian for an equation.
    fn h_eff(&self, eq: Equation) -> CMatrix {
        match eq {
            // the Lamb shift enters the RWA commutator explicitly
            Equation::Rwa if self.lamb_shift_enabled => &self.h_sys + &self.h_ls,
            // in the double-sided equation the S terms live inside Gamma
            _ => self.h_sys.clone(),
        }
    }

    /// Matrix-free action d(rho)/dt.
    pub fn apply(&self, eq: Equation, rho: &CMatrix) -> Result<CMatrix> {
        let n = self.dim();
        if rho.nrows() != n || rho.ncols() != n {
            return Err(Error::DimensionMismatch(rho.nrows(), n));
        }
        let h = self.h_eff(eq);
        let mut out = (&h * rho - rho * &h).map(|z| -ZI * z);
        match eq {
            Equation::Rwa => {
                // sandwich part, scattered at the pair level
                for (bi, bin) in self.lindblads.bins.iter().enumerate() {
                    let k = &self.k_mats[bi];
                    for (qi, &(cq, dq)) in bin.pairs.iter().enumerate() {
                        for (pi, &(ap, bp)) in bin.pairs.iter().enumerate() {
                            out[(ap, cq)] += k[(qi, pi)] * rho[(bp, dq)];
                        }
                    }
                }
                // -1/2 {G, rho}
                let g_rho = &self.g_total * rho;
                let rho_g = rho * &self.g_total;
                out -= (g_rho + rho_g).map(|z| z * 0.5);
            }
            Equation::NonRwa => {
                for (w, a_op) in self.w_ops.iter().zip(self.lindblads.site_ops.iter()) {
                    // [W rho, A] + [A, rho W^dag]
                    let wr = w * rho;
                    let rwd = rho * w.adjoint();
                    out += &wr * a_op - a_op * &wr;
                    out += a_op * &rwd - &rwd * a_op;
                }
            }
        }
        Ok(out)
    }

    fn assemble(&self, eq: Equation, sink: &mut dyn FnMut(usize, usize, C64)) {
        let n = self.dim();
        let idx = |i: usize, j: usize| i * n + j;
        let h = self.h_eff(eq);
        // -i (H rho - rho H)
        for i in 0..n {
            for k in 0..n {
                let v = -ZI * h[(i, k)];
                if v != C64::new(0.0, 0.0) {
                    for j in 0..n {
                        sink(idx(i, j), idx(k, j), v);
                    }
                }
            }
        }
        for l in 0..n {
            for j in 0..n {
                let v = ZI * h[(l, j)];
                if v != C64::new(0.0, 0.0) {
                    for i in 0..n {
                        sink(idx(i, j), idx(i, l), v);
                    }
                }
            }
        }
        match eq {
            Equation::Rwa => {
                for (bi, bin) in self.lindblads.bins.iter().enumerate() {
                    let k = &self.k_mats[bi];
                    for (qi, &(cq, dq)) in bin.pairs.iter().enumerate() {
                        for (pi, &(ap, bp)) in bin.pairs.iter().enumerate() {
                            sink(idx(ap, cq), idx(bp, dq), k[(qi, pi)]);
                        }
                    }
                }
                for i in 0..n {
                    for k in 0..n {
                        let v = -0.5 * self.g_total[(i, k)];
                        for j in 0..n {
                            sink(idx(i, j), idx(k, j), v);
                        }
                    }
                }
                for l in 0..n {
                    for j in 0..n {
                        let v = -0.5 * self.g_total[(l, j)];
                        for i in 0..n {
                            sink(idx(i, j), idx(i, l), v);
                        }
                    }
                }
            }
            Equation::NonRwa => {
                for (w, a_op) in self.w_ops.iter().zip(self.lindblads.site_ops.iter()) {
                    let aw = a_op * w;
                    let wda = w.adjoint() * a_op;
                    for i in 0..n {
                        for k in 0..n {
                            for j in 0..n {
                                for l in 0..n {
                                    // W rho A + A rho W^dag
                                    let v = w[(i, k)] * a_op[(l, j)]
                                        + a_op[(i, k)] * w[(j, l)].conj();
                                    sink(idx(i, j), idx(k, l), v);
                                }
                            }
                        }
                    }
                    // - (A W) rho  and  - rho (W^dag A)
                    for i in 0..n {
                        for k in 0..n {
                            let v = -aw[(i, k)];
                            for j in 0..n {
                                sink(idx(i, j), idx(k, j), v);
                            }
                        }
                    }
                    for l in 0..n {
                        for j in 0..n {
                            let v = -wda[(l, j)];
                            for i in 0..n {
                                sink(idx(i, j), idx(i, l), v);
                            }
                        }
                    }
                }
            }
        }
    }

    /// Dense n^2 x n^2 superoperator acting on row-major vec(rho).
    pub fn superop(&self, eq: Equation) -> CMatrix {
        let n2 = self.dim() * self.dim();
        let mut s = CMatrix::zeros(n2, n2);
        self.assemble(eq, &mut |r, c, v| s[(r, c)] += v);
        s
    }

    /// Diagonal of the superoperator, used by the iterative stage solver.
    pub fn superop_diagonal(&self, eq: Equation) -> DVector<C64> {
        let n2 = self.dim() * self.dim();
        let mut d = DVector::from_element(n2, C64::new(0.0, 0.0));
        self.assemble(eq, &mut |r, c, v| {
            if r == c {
                d[r] += v;
            }
        });
        d
    }

    /// Jump (sandwich) part of the RWA dissipator only; its Choi matrix is
    /// positive semidefinite whenever the gamma matrices are.
    pub fn rwa_jump_superop(&self) -> CMatrix {
        let n = self.dim();
        let idx = |i: usize, j: usize| i * n + j;
        let mut s = CMatrix::zeros(n * n, n * n);
        for (bi, bin) in self.lindblads.bins.iter().enumerate() {
            let k = &self.k_mats[bi];
            for (qi, &(cq, dq)) in bin.pairs.iter().enumerate() {
                for (pi, &(ap, bp)) in bin.pairs.iter().enumerate() {
                    s[(idx(ap, cq), idx(bp, dq))] += k[(qi, pi)];
                }
            }
        }
        s
    }

    /// Project every stored operator onto the lowest `n` levels.
    pub fn truncate(&self, n: usize, bath: &BathSpec, cache: &SpectralCache) -> Result<Self> {
        let cur = self.dim();
        if n < 2 || n > cur {
            return Err(Error::InvalidEvolution(format!(
                "truncation {n} outside [2, {cur}]"
            )));
        }
        if n == cur {
            return Self::from_eigenbasis(
                self.lindblads.frame.clone(),
                self.lindblads.site_ops.clone(),
                bath,
                cache,
                self.lamb_shift_enabled,
                None,
            );
        }
        let frame = self.lindblads.frame.truncated(n);
        let ops: Vec<CMatrix> = self
            .lindblads
            .site_ops
            .iter()
            .map(|op| op.view((0, 0), (n, n)).into_owned())
            .collect();
        Self::from_eigenbasis(frame, ops, bath, cache, self.lamb_shift_enabled, None)
    }
}

/// d(rho)/dt under the Lindblad-form equation.
pub fn assemble_rwa(ctx: &GeneratorContext, rho: &CMatrix) -> Result<CMatrix> {
    ctx.apply(Equation::Rwa, rho)
}

/// d(rho)/dt under the double-sided equation (positivity not guaranteed).
pub fn assemble_nonrwa(ctx: &GeneratorContext, rho: &CMatrix) -> Result<CMatrix> {
    ctx.apply(Equation::NonRwa, rho)
}

/// The Hermitian Lamb-shift Hamiltonian of the context (zeros when the
/// Lamb shift is disabled).
pub fn lamb_shift_hamiltonian(ctx: &GeneratorContext) -> CMatrix {
    ctx.h_ls.clone()
}

pub fn truncate_context(
    ctx: &GeneratorContext,
    n: usize,
    bath: &BathSpec,
    cache: &SpectralCache,
) -> Result<GeneratorContext> {
    ctx.truncate(n, bath, cache)
}

/// Time-independent generator obtained by freezing a context; its action is
/// the textbook time-independent master equation built from the frozen
/// spectrum.
pub struct FrozenGenerator {
    pub ctx: GeneratorContext,
    pub equation: Equation,
}

impl FrozenGenerator {
    pub fn apply(&self, rho: &CMatrix) -> Result<CMatrix> {
        self.ctx.apply(self.equation, rho)
    }

    pub fn superop(&self) -> CMatrix {
        self.ctx.superop(self.equation)
    }
}

pub fn frozen_generator(ctx: GeneratorContext, equation: Equation) -> FrozenGenerator {
    FrozenGenerator { ctx, equation }
}
