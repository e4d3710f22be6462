//! Dense complex-matrix substrate: Pauli-chain embeddings, Hermitian
//! eigendecomposition with a deterministic continuity gauge, and matrix norms.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type CMatrix = DMatrix<Complex64>;

/// Hard cap on chain length for the dense representation (2^12 = 4096).
pub const MAX_SITES: usize = 12;

/// Relative level spacing below which adjacent levels form one degenerate
/// cluster, shared by frame alignment and Bohr-frequency binning.
pub const DEGENERACY_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Pauli {
    X,
    Y,
    Z,
}

const Z0: Complex64 = Complex64 { re: 0.0, im: 0.0 };
const Z1: Complex64 = Complex64 { re: 1.0, im: 0.0 };

/// Single-site Pauli matrix in the computational (sigma-z) basis.
pub fn pauli_matrix(which: Pauli) -> CMatrix {
    let i = Complex64::new(0.0, 1.0);
    match which {
        Pauli::X => CMatrix::from_row_slice(2, 2, &[Z0, Z1, Z1, Z0]),
        Pauli::Y => CMatrix::from_row_slice(2, 2, &[Z0, -i, i, Z0]),
        Pauli::Z => CMatrix::from_row_slice(2, 2, &[Z1, Z0, Z0, -Z1]),
    }
}

/// Kronecker product, left factor on the most significant qubits.
pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    let mut out = CMatrix::zeros(ar * br, ac * bc);
    for i in 0..ar {
        for j in 0..ac {
            let aij = a[(i, j)];
            if aij == Z0 {
                continue;
            }
            for k in 0..br {
                for l in 0..bc {
                    out[(i * br + k, j * bc + l)] = aij * b[(k, l)];
                }
            }
        }
    }
    out
}

/// I x ... x sigma x ... x I with the Pauli at `site` (site 0 leftmost).
pub fn pauli_embed(which: Pauli, site: usize, n_sites: usize) -> Result<CMatrix> {
    if n_sites > MAX_SITES {
        return Err(Error::TooManySites {
            n_sites,
            max: MAX_SITES,
        });
    }
    if site >= n_sites {
        return Err(Error::SiteOutOfRange { site, n_sites });
    }
    let sigma = pauli_matrix(which);
    let left = 1usize << site;
    let right = 1usize << (n_sites - site - 1);
    // Explicit index arithmetic instead of repeated kron calls.
    let dim = left * 2 * right;
    let mut out = CMatrix::zeros(dim, dim);
    for a in 0..left {
        for s in 0..2 {
            for sp in 0..2 {
                let v = sigma[(s, sp)];
                if v == Z0 {
                    continue;
                }
                for b in 0..right {
                    let row = (a * 2 + s) * right + b;
                    let col = (a * 2 + sp) * right + b;
                    out[(row, col)] = v;
                }
            }
        }
    }
    Ok(out)
}

pub fn dagger(m: &CMatrix) -> CMatrix {
    m.adjoint()
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

pub fn anticommutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b + b * a
}

/// (m + m^dagger)/2
pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).map(|z| z * 0.5)
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// max_i sum_j |m_ij|; cheap upper bound for the operator sup norm.
pub fn inf_norm(m: &CMatrix) -> f64 {
    let (r, c) = m.shape();
    let mut best = 0.0f64;
    for i in 0..r {
        let mut s = 0.0;
        for j in 0..c {
            s += m[(i, j)].norm();
        }
        best = best.max(s);
    }
    best
}

fn hermiticity_deviation(m: &CMatrix) -> f64 {
    let (r, c) = m.shape();
    debug_assert_eq!(r, c);
    let mut dev = 0.0f64;
    for i in 0..r {
        for j in 0..=i {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Instantaneous spectrum and eigenbasis of a Hermitian matrix, energies
/// ascending, columns carrying a deterministic phase gauge.
#[derive(Debug, Clone)]
pub struct EigenFrame {
    /// Time label in ns; 0 for frames produced outside a trajectory.
    pub t: f64,
    /// Ascending eigenvalues in GHz.
    pub energies: DVector<f64>,
    /// Columns are the corresponding eigenvectors.
    pub vectors: CMatrix,
    /// Per column, the component index pinned real-positive by the gauge.
    pub gauge_anchor: Vec<usize>,
}

impl EigenFrame {
    pub fn dim(&self) -> usize {
        self.energies.len()
    }

    /// Keep only the lowest `n` levels (columns stay full-height).
    pub fn truncated(&self, n: usize) -> EigenFrame {
        assert!(n <= self.dim());
        EigenFrame {
            t: self.t,
            energies: DVector::from_iterator(n, self.energies.iter().take(n).copied()),
            vectors: self.vectors.columns(0, n).into_owned(),
            gauge_anchor: self.gauge_anchor[..n].to_vec(),
        }
    }

    /// Degeneracy clusters: maximal runs of levels whose consecutive spacing
    /// is below DEGENERACY_RTOL relative to the spectral span.
    pub fn degeneracy_clusters(&self) -> Vec<std::ops::Range<usize>> {
        let n = self.energies.len();
        if n == 0 {
            return vec![];
        }
        let span = (self.energies[n - 1] - self.energies[0]).abs();
        let scale = span
            .max(self.energies.iter().fold(0.0f64, |a, e| a.max(e.abs())))
            .max(1e-300);
        let tol = DEGENERACY_RTOL * scale;
        let mut clusters = Vec::new();
        let mut start = 0;
        for i in 1..n {
            if self.energies[i] - self.energies[i - 1] > tol {
                clusters.push(start..i);
                start = i;
            }
        }
        clusters.push(start..n);
        clusters
    }

    /// True when the ground level belongs to a cluster of size > 1.
    pub fn ground_degenerate(&self) -> bool {
        self.degeneracy_clusters()
            .first()
            .map(|c| c.len() > 1)
            .unwrap_or(false)
    }
}

/// Fix the phase of each column: largest-magnitude component made real
/// positive, ties broken by lowest index. Returns the anchor indices.
fn fix_gauge(vectors: &mut CMatrix) -> Vec<usize> {
    let (rows, cols) = vectors.shape();
    let mut anchors = Vec::with_capacity(cols);
    for j in 0..cols {
        let mut best = 0usize;
        let mut best_norm = -1.0f64;
        for i in 0..rows {
            let n = vectors[(i, j)].norm();
            if n > best_norm + 1e-15 * best_norm.max(1.0) {
                best = i;
                best_norm = n;
            }
        }
        let z = vectors[(best, j)];
        if z.norm() > 0.0 {
            let phase = z.conj() / z.norm();
            for i in 0..rows {
                vectors[(i, j)] *= phase;
            }
        }
        anchors.push(best);
    }
    anchors
}

/// Hermitian eigendecomposition with ascending energies and the t=0 gauge.
///
/// A real-symmetric input (the usual case for transverse-field Ising chains)
/// is routed through the real solver, which is considerably faster.
pub fn eig_hermitian(h: &CMatrix) -> Result<EigenFrame> {
    eig_hermitian_at(h, 0.0)
}

pub fn eig_hermitian_at(h: &CMatrix, t: f64) -> Result<EigenFrame> {
    let (r, c) = h.shape();
    if r != c {
        return Err(Error::DimensionMismatch(r, c));
    }
    if h.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite);
    }
    let scale = inf_norm(h).max(1e-300);
    let dev = hermiticity_deviation(h);
    if dev > 1e-10 * scale {
        return Err(Error::NotHermitian {
            dev,
            tol: 1e-10 * scale,
        });
    }

    let max_im = h.iter().fold(0.0f64, |a, z| a.max(z.im.abs()));
    let (mut vals, mut vecs): (Vec<f64>, CMatrix) = if max_im <= 1e-14 * scale {
        // Real-symmetric fast path.
        let hr = DMatrix::<f64>::from_fn(r, r, |i, j| 0.5 * (h[(i, j)].re + h[(j, i)].re));
        let eig = hr
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or(Error::EigenConvergence { dim: r })?;
        let vecs = CMatrix::from_fn(r, r, |i, j| Complex64::new(eig.eigenvectors[(i, j)], 0.0));
        (eig.eigenvalues.iter().copied().collect(), vecs)
    } else {
        let hh = hermitize(h);
        let eig = hh
            .try_symmetric_eigen(f64::EPSILON, 0)
            .ok_or(Error::EigenConvergence { dim: r })?;
        (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors)
    };

    // Ascending order, stable under exact ties.
    let mut order: Vec<usize> = (0..r).collect();
    order.sort_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap().then(a.cmp(&b)));
    let sorted_vals: Vec<f64> = order.iter().map(|&k| vals[k]).collect();
    let mut sorted_vecs = CMatrix::zeros(r, r);
    for (newj, &oldj) in order.iter().enumerate() {
        sorted_vecs.set_column(newj, &vecs.column(oldj));
    }
    vals = sorted_vals;
    vecs = sorted_vecs;

    let anchors = fix_gauge(&mut vecs);
    let frame = EigenFrame {
        t,
        energies: DVector::from_vec(vals),
        vectors: vecs,
        gauge_anchor: anchors,
    };

    // Cheap convergence probe: residual on the accumulated column sum.
    debug_assert!({
        let ones = DVector::<Complex64>::from_element(r, Z1);
        let x = &frame.vectors * &ones;
        let mut ex = DVector::<Complex64>::zeros(r);
        for j in 0..r {
            ex += frame.vectors.column(j) * Complex64::new(frame.energies[j], 0.0);
        }
        (h * x - ex).norm() <= 1e-8 * scale * (r as f64)
    });
    Ok(frame)
}

/// Alignment diagnostics; `ties` counts ambiguous overlap matches resolved
/// by the lowest-index rule.
#[derive(Debug, Clone, Copy, Default)]
pub struct AlignInfo {
    pub ties: usize,
    pub worst_overlap: f64,
}

/// Continuity gauge across steps: within each near-degenerate cluster of
/// `cur`, permute columns to maximize the overlap with the matching columns
/// of `prev`, then rotate every column phase so the diagonal overlap is real
/// positive. Energies are untouched.
pub fn align_frame(prev: &EigenFrame, mut cur: EigenFrame) -> Result<(EigenFrame, AlignInfo)> {
    if prev.dim() != cur.dim() || prev.vectors.nrows() != cur.vectors.nrows() {
        return Err(Error::DimensionMismatch(prev.dim(), cur.dim()));
    }
    let mut info = AlignInfo {
        ties: 0,
        worst_overlap: f64::INFINITY,
    };
    let clusters = cur.degeneracy_clusters();
    for cluster in clusters {
        let idx: Vec<usize> = cluster.clone().collect();
        let m = idx.len();
        if m > 1 {
            // Overlap magnitudes |<prev_a | cur_b>| for the cluster block.
            let mut overlaps = DMatrix::<f64>::zeros(m, m);
            let mut raw = DMatrix::<Complex64>::zeros(m, m);
            for (bi, &b) in idx.iter().enumerate() {
                let col = cur.vectors.column(b);
                for (ai, &a) in idx.iter().enumerate() {
                    let z = prev.vectors.column(a).dotc(&col);
                    raw[(ai, bi)] = z;
                    overlaps[(ai, bi)] = z.norm();
                }
            }
            // Greedy assignment in ascending row order, deterministic
            // lowest-index tie-break at 1e-12.
            let mut taken = vec![false; m];
            let mut perm = vec![0usize; m];
            for ai in 0..m {
                let mut best = usize::MAX;
                let mut best_val = -1.0f64;
                for bi in 0..m {
                    if taken[bi] {
                        continue;
                    }
                    if overlaps[(ai, bi)] > best_val {
                        best = bi;
                        best_val = overlaps[(ai, bi)];
                    }
                }
                let tied = (0..m)
                    .filter(|&bi| !taken[bi] && bi != best)
                    .any(|bi| (best_val - overlaps[(ai, bi)]).abs() <= 1e-12);
                if tied {
                    info.ties += 1;
                    // lowest index among the tied candidates wins
                    for bi in 0..m {
                        if !taken[bi] && (best_val - overlaps[(ai, bi)]).abs() <= 1e-12 {
                            best = bi;
                            break;
                        }
                    }
                }
                taken[best] = true;
                perm[ai] = best;
                let _ = raw;
            }
            if perm.iter().enumerate().any(|(a, &b)| a != b) {
                let block: Vec<_> = idx.iter().map(|&b| cur.vectors.column(b).into_owned()).collect();
                let anchors: Vec<_> = idx.iter().map(|&b| cur.gauge_anchor[b]).collect();
                for ai in 0..m {
                    cur.vectors.set_column(idx[ai], &block[perm[ai]]);
                    cur.gauge_anchor[idx[ai]] = anchors[perm[ai]];
                }
            }
        }
        // Phase rotation: diagonal overlap real positive. A column whose
        // overlap is already real positive to roundoff is left untouched,
        // which makes alignment exactly idempotent.
        for &j in &idx {
            let z = prev.vectors.column(j).dotc(&cur.vectors.column(j));
            let n = z.norm();
            info.worst_overlap = info.worst_overlap.min(n);
            if n > 0.0 && !(z.re > 0.0 && z.im.abs() <= 1e-12 * z.re) {
                let phase = z.conj() / n;
                for i in 0..cur.vectors.nrows() {
                    cur.vectors[(i, j)] *= phase;
                }
            }
        }
    }
    Ok((cur, info))
}

/// Trace norm: sum of singular values, equal to Tr|A|.
pub fn trace_norm(a: &CMatrix) -> f64 {
    assert!(
        a.iter().all(|z| z.re.is_finite() && z.im.is_finite()),
        "trace_norm: non-finite entries"
    );
    if hermiticity_deviation(a) <= 1e-13 * max_abs(a).max(1e-300) {
        // Hermitian shortcut: singular values are |eigenvalues|.
        if let Ok(frame) = eig_hermitian(a) {
            return frame.energies.iter().map(|e| e.abs()).sum();
        }
    }
    let svd = a.clone().svd(false, false);
    svd.singular_values.iter().sum()
}
