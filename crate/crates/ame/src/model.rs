//! Annealing schedule and the system Hamiltonian
//! H_S(s) = A(s) sum_i sigma_i^x + B(s) (-sum_i h_i sigma_i^z
//!          + sum_{i<j} J_ij sigma_i^z sigma_j^z),
//! together with the sigma_z coupling operators to the bath.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::operators::{pauli_embed, CMatrix, Pauli, MAX_SITES};
use crate::util::{self, MonotoneCubic};

/// Ising chain in a transverse field: per-site longitudinal fields `h`
/// (dimensionless, multiplied by B(s)) and a symmetric coupling table `j`
/// with zero diagonal. Each i<j pair contributes once.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinChainSpec {
    pub h: Vec<f64>,
    pub j: DMatrix<f64>,
}

impl SpinChainSpec {
    pub fn new(h: Vec<f64>, j: DMatrix<f64>) -> Result<Self> {
        let n = h.len();
        if n == 0 {
            return Err(Error::InvalidChain("need at least one site".into()));
        }
        if j.nrows() != n || j.ncols() != n {
            return Err(Error::InvalidChain(format!(
                "coupling table is {}x{}, expected {n}x{n}",
                j.nrows(),
                j.ncols()
            )));
        }
        for i in 0..n {
            if j[(i, i)] != 0.0 {
                return Err(Error::InvalidChain(format!("J[{i}][{i}] must be zero")));
            }
            for k in 0..i {
                if j[(i, k)] != j[(k, i)] {
                    return Err(Error::InvalidChain(format!(
                        "coupling table not symmetric at ({i},{k})"
                    )));
                }
            }
        }
        if h.iter().any(|v| !v.is_finite()) || j.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidChain("non-finite entries".into()));
        }
        Ok(Self { h, j })
    }

    /// Ferromagnetic nearest-neighbour chain with the first spin pinned:
    /// h_0 = 1/4, h_{i>0} = 0, J_{i,i+1} = -1.
    pub fn ferromagnetic_pinned(n: usize) -> Self {
        let mut h = vec![0.0; n];
        h[0] = 0.25;
        let mut j = DMatrix::zeros(n, n);
        for i in 0..n.saturating_sub(1) {
            j[(i, i + 1)] = -1.0;
            j[(i + 1, i)] = -1.0;
        }
        Self { h, j }
    }

    pub fn n_sites(&self) -> usize {
        self.h.len()
    }

    /// Classical Ising energy of a computational basis state; bit = 1 means
    /// sigma_z eigenvalue -1 (site 0 on the most significant bit).
    pub fn classical_energy(&self, basis_state: usize) -> f64 {
        let n = self.n_sites();
        let spin = |i: usize| {
            if basis_state >> (n - 1 - i) & 1 == 0 {
                1.0
            } else {
                -1.0
            }
        };
        let mut e = 0.0;
        for i in 0..n {
            e -= self.h[i] * spin(i);
            for k in i + 1..n {
                e += self.j[(i, k)] * spin(i) * spin(k);
            }
        }
        e
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ScheduleKind {
    /// A(s) = a0 (1-s), B(s) = b_max s.
    Linear,
    /// Exponential transverse decay through A(0) = a0 and
    /// A(s_c) = B(s_c) = v_c, with B(0) = 0 and B(1) = b_end.
    CalibratedAnneal,
    /// Monotone-cubic interpolation of user-supplied (s, A, B) rows.
    UserTable,
}

/// Annealing schedule (A(s), B(s)) in GHz over dimensionless s in [0, 1].
#[derive(Debug, Clone)]
pub struct ScheduleSpec {
    pub kind: ScheduleKind,
    pub a0: f64,
    pub b_max: f64,
    pub crossing_s: f64,
    pub crossing_value: f64,
    /// Endpoint of the calibrated B(s); the transverse anchors do not pin it.
    pub b_end: f64,
    pub table: Vec<(f64, f64, f64)>,
    // cached interpolants / solved growth rate
    k_b: f64,
    table_a: Option<MonotoneCubic>,
    table_b: Option<MonotoneCubic>,
}

pub const DEFAULT_A0: f64 = 33.7;
pub const DEFAULT_CROSSING_S: f64 = 0.35;
pub const DEFAULT_CROSSING_VALUE: f64 = 5.0;

impl ScheduleSpec {
    pub fn linear(a0: f64, b_max: f64) -> Result<Self> {
        if !(a0 > 0.0) || !(b_max > 0.0) {
            return Err(Error::InvalidSchedule("linear schedule needs positive endpoints".into()));
        }
        Ok(Self {
            kind: ScheduleKind::Linear,
            a0,
            b_max,
            crossing_s: 0.5,
            crossing_value: 0.5 * a0,
            b_end: b_max,
            table: vec![],
            k_b: 0.0,
            table_a: None,
            table_b: None,
        })
    }

    /// Calibrated anneal through the published anchors: A(0) = a0,
    /// A(s_c) = B(s_c) = v_c with A(1) <= 0.01 a0 and B(1) = b_end.
    pub fn calibrated(a0: f64, crossing_s: f64, crossing_value: f64, b_end: f64) -> Result<Self> {
        if !(a0 > 0.0) {
            return Err(Error::InvalidSchedule("A(0) must be positive".into()));
        }
        if crossing_value >= a0 || crossing_value <= 0.0 {
            return Err(Error::InvalidSchedule(format!(
                "crossing value {crossing_value} must lie in (0, A0)"
            )));
        }
        if !(crossing_s > 0.0 && crossing_s < 1.0) {
            return Err(Error::InvalidSchedule("crossing_s must lie in (0, 1)".into()));
        }
        if b_end <= crossing_value {
            return Err(Error::InvalidSchedule("b_end must exceed the crossing value".into()));
        }
        // A(1) = a0 (v_c/a0)^{1/s_c} must be negligible
        let a1 = a0 * (crossing_value / a0).powf(1.0 / crossing_s);
        if a1 > 0.01 * a0 {
            return Err(Error::InvalidSchedule(format!(
                "anchors leave A(1) = {a1:.3} GHz, above 1% of A(0)"
            )));
        }
        // growth rate of B(s) = b_end (e^{k s} - 1)/(e^k - 1) through the
        // crossing anchor; the ratio is monotone decreasing in k
        let ratio = crossing_value / b_end;
        let f = |k: f64| {
            if k.abs() < 1e-9 {
                crossing_s - ratio
            } else {
                (k * crossing_s).exp_m1() / k.exp_m1() - ratio
            }
        };
        let k_b = util::bisect(f, -200.0, 200.0, "calibrated B growth rate")?;
        Ok(Self {
            kind: ScheduleKind::CalibratedAnneal,
            a0,
            b_max: b_end,
            crossing_s,
            crossing_value,
            b_end,
            table: vec![],
            k_b,
            table_a: None,
            table_b: None,
        })
    }

    /// Paper-style default: A(0) = 33.7 GHz, crossing at s = 0.35 with
    /// A = B = 5 GHz, B(1) = 2 A(0).
    pub fn default_anneal() -> Self {
        Self::calibrated(
            DEFAULT_A0,
            DEFAULT_CROSSING_S,
            DEFAULT_CROSSING_VALUE,
            2.0 * DEFAULT_A0,
        )
        .expect("default anchors are consistent")
    }

    pub fn from_table(mut rows: Vec<(f64, f64, f64)>) -> Result<Self> {
        rows.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        if rows.len() < 2 {
            return Err(Error::InvalidSchedule("schedule table needs at least two rows".into()));
        }
        let xs: Vec<f64> = rows.iter().map(|r| r.0).collect();
        let a_s: Vec<f64> = rows.iter().map(|r| r.1).collect();
        let b_s: Vec<f64> = rows.iter().map(|r| r.2).collect();
        let table_a = MonotoneCubic::new(xs.clone(), a_s.clone())?;
        let table_b = MonotoneCubic::new(xs, b_s.clone())?;
        Ok(Self {
            kind: ScheduleKind::UserTable,
            a0: a_s[0],
            b_max: *b_s.last().unwrap(),
            crossing_s: 0.0,
            crossing_value: 0.0,
            b_end: *b_s.last().unwrap(),
            table: rows,
            k_b: 0.0,
            table_a: Some(table_a),
            table_b: Some(table_b),
        })
    }

    /// (A(s), B(s)) in GHz.
    pub fn eval(&self, s: f64) -> Result<(f64, f64)> {
        if !(0.0..=1.0).contains(&s) {
            return Err(Error::ScheduleArg(s));
        }
        Ok(match self.kind {
            ScheduleKind::Linear => (self.a0 * (1.0 - s), self.b_max * s),
            ScheduleKind::CalibratedAnneal => {
                let a = self.a0 * (self.crossing_value / self.a0).powf(s / self.crossing_s);
                let b = self.b_end * (self.k_b * s).exp_m1() / self.k_b.exp_m1();
                (a, b)
            }
            ScheduleKind::UserTable => (
                self.table_a.as_ref().unwrap().eval(s),
                self.table_b.as_ref().unwrap().eval(s),
            ),
        })
    }
}

pub fn schedule_eval(spec: &ScheduleSpec, s: f64) -> Result<(f64, f64)> {
    spec.eval(s)
}

/// H_S(s) = A(s) H^X + B(s) H^Z; real symmetric in the computational basis.
pub fn build_system_hamiltonian(
    chain: &SpinChainSpec,
    sched: &ScheduleSpec,
    s: f64,
) -> Result<CMatrix> {
    let (a, b) = sched.eval(s)?;
    build_hamiltonian_at(chain, a, b)
}

/// H = a H^X + b H^Z at explicit schedule values.
pub fn build_hamiltonian_at(chain: &SpinChainSpec, a: f64, b: f64) -> Result<CMatrix> {
    let n = chain.n_sites();
    if n > MAX_SITES {
        return Err(Error::TooManySites {
            n_sites: n,
            max: MAX_SITES,
        });
    }
    let dim = 1usize << n;
    let mut ham = CMatrix::zeros(dim, dim);
    // transverse part: sigma_i^x flips bit i (site 0 on the top bit)
    let ac = Complex64::new(a, 0.0);
    for state in 0..dim {
        for i in 0..n {
            let flipped = state ^ (1usize << (n - 1 - i));
            ham[(state, flipped)] += ac;
        }
    }
    // Ising part: diagonal in the computational basis
    for state in 0..dim {
        ham[(state, state)] += Complex64::new(b * chain.classical_energy(state), 0.0);
    }
    Ok(ham)
}

/// Bath coupling operators A_alpha = sigma_alpha^z, one per site, each with
/// unit operator norm.
pub fn coupling_operators(chain: &SpinChainSpec) -> Result<Vec<CMatrix>> {
    (0..chain.n_sites())
        .map(|i| pauli_embed(Pauli::Z, i, chain.n_sites()))
        .collect()
}
