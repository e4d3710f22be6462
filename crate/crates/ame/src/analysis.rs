//! Observables and diagnostics: ground-state fidelity, trace-norm distance
//! to the instantaneous Gibbs state, the gapped-phase rate-equation reference
//! model, timescale-inequality reporting, and four-phase segmentation of a
//! recorded trajectory.

use crate::bath::{bath_timescales, gamma_scalar, BathSpec};
use crate::error::{Error, Result};
use crate::integrator::TrajectoryRecord;
use crate::model::{build_system_hamiltonian, ScheduleSpec, SpinChainSpec};
use crate::operators::{eig_hermitian, trace_norm, CMatrix, EigenFrame};

/// Overlap of rho with the instantaneous ground state. For a degenerate
/// ground cluster the projector-summed overlap is returned; use
/// [`is_ground_degenerate`] to detect that case.
pub fn fidelity_ground(rho: &CMatrix, frame: &EigenFrame) -> Result<f64> {
    let n = frame.dim();
    if rho.nrows() != n || rho.ncols() != n {
        return Err(Error::DimensionMismatch(rho.nrows(), n));
    }
    let ground = frame.degeneracy_clusters()[0].clone();
    let mut f = 0.0;
    for g in ground {
        let v = frame.vectors.column(g);
        // <e_g| rho |e_g> when rho is given in the same basis as the frame
        // columns; here rho is indexed directly in the eigenbasis, so the
        // overlap is just the diagonal entry.
        let _ = v;
        f += rho[(g, g)].re;
    }
    Ok(f.clamp(-1e-9, 1.0 + 1e-9))
}

pub fn is_ground_degenerate(frame: &EigenFrame) -> bool {
    frame.ground_degenerate()
}

/// Normalized trace distance 0.5 ||rho - e^{-beta H}/Z||_1 in [0, 1].
pub fn gibbs_distance(rho: &CMatrix, h: &CMatrix, beta: f64) -> Result<f64> {
    let gibbs = crate::integrator::gibbs_state(h, beta)?;
    if gibbs.nrows() != rho.nrows() {
        return Err(Error::DimensionMismatch(rho.nrows(), gibbs.nrows()));
    }
    Ok(0.5 * trace_norm(&(rho - gibbs)))
}

// ---------------------------------------------------------------------------
// gapped-phase rate equations

/// Inputs for the gapped-phase rate model: per-level Bohr-frequency series
/// omega_i0(t) of the lowest excitation manifold.
#[derive(Debug, Clone)]
pub struct RateModelInput {
    /// Sample times in ns, strictly increasing, starting at 0.
    pub times: Vec<f64>,
    /// gaps[k][i] = omega_i0 at times[k], one entry per excited level.
    pub gaps: Vec<Vec<f64>>,
}

/// Population series produced by the rate model.
#[derive(Debug, Clone)]
pub struct RatePopulations {
    pub t: Vec<f64>,
    /// excited[k][i]: population of excited level i at t[k].
    pub excited: Vec<Vec<f64>>,
    pub ground: Vec<f64>,
}

fn interp_row(input: &RateModelInput, t: f64) -> Vec<f64> {
    let ts = &input.times;
    let n = input.gaps[0].len();
    let k = match ts.binary_search_by(|v| v.partial_cmp(&t).unwrap()) {
        Ok(i) => return input.gaps[i].clone(),
        Err(0) => return input.gaps[0].clone(),
        Err(i) if i >= ts.len() => return input.gaps.last().unwrap().clone(),
        Err(i) => i,
    };
    let w = (t - ts[k - 1]) / (ts[k] - ts[k - 1]);
    (0..n)
        .map(|i| input.gaps[k - 1][i] + w * (input.gaps[k][i] - input.gaps[k - 1][i]))
        .collect()
}

/// Integrate the gapped-phase rate equations
/// d rho_ii/dt = gamma_ii(omega_i0) (e^{-beta omega_i0} rho_00 - rho_ii)
/// with rho_00 = 1 - sum_i rho_ii, by classical RK4 at fixed `dt`.
///
/// The initial populations are thermal over the ground plus the supplied
/// excitation manifold.
pub fn rate_model(
    input: &RateModelInput,
    bath: &BathSpec,
    horizon: f64,
    dt: f64,
    record_stride: usize,
) -> Result<RatePopulations> {
    if input.times.is_empty() || input.gaps.len() != input.times.len() {
        return Err(Error::InvalidEvolution(
            "rate model needs aligned time and gap series".into(),
        ));
    }
    let n = input.gaps[0].len();
    if n == 0 || input.gaps.iter().any(|g| g.len() != n) {
        return Err(Error::InvalidEvolution("ragged gap series".into()));
    }
    let beta = bath.beta;
    // thermal start over {ground} + manifold
    let g0 = &input.gaps[0];
    let z0: f64 = 1.0 + g0.iter().map(|w| (-beta * w).exp()).sum::<f64>();
    let mut pops: Vec<f64> = g0.iter().map(|w| (-beta * w).exp() / z0).collect();

    let deriv = |t: f64, p: &[f64]| -> Vec<f64> {
        let gaps = interp_row(input, t);
        let rho00 = 1.0 - p.iter().sum::<f64>();
        gaps.iter()
            .zip(p.iter())
            .enumerate()
            .map(|(i, (w, pi))| {
                let g_i = gamma_scalar(bath, *w) * bath.g_profile[i.min(bath.n_sites() - 1)].powi(2);
                g_i * ((-beta * w).exp() * rho00 - pi)
            })
            .collect()
    };

    let steps = (horizon / dt).ceil() as usize;
    let stride = record_stride.max(1);
    let mut out = RatePopulations {
        t: vec![0.0],
        excited: vec![pops.clone()],
        ground: vec![1.0 - pops.iter().sum::<f64>()],
    };
    let mut t = 0.0;
    for step in 1..=steps {
        let h = dt.min(horizon - t);
        if h <= 0.0 {
            break;
        }
        let k1 = deriv(t, &pops);
        let p2: Vec<f64> = pops.iter().zip(&k1).map(|(p, k)| p + 0.5 * h * k).collect();
        let k2 = deriv(t + 0.5 * h, &p2);
        let p3: Vec<f64> = pops.iter().zip(&k2).map(|(p, k)| p + 0.5 * h * k).collect();
        let k3 = deriv(t + 0.5 * h, &p3);
        let p4: Vec<f64> = pops.iter().zip(&k3).map(|(p, k)| p + h * k).collect();
        let k4 = deriv(t + h, &p4);
        for i in 0..n {
            pops[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        t += h;
        if step % stride == 0 || step == steps {
            out.t.push(t);
            out.excited.push(pops.clone());
            out.ground.push(1.0 - pops.iter().sum::<f64>());
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// validity report

#[derive(Debug, Clone)]
pub struct Verdict {
    pub name: &'static str,
    pub ratio: f64,
    pub pass: bool,
}

/// Timescale-inequality report. The much-less-than inequalities pass when
/// their ratio is below 0.1 (advisory convention); the Ohmic cutoff
/// condition passes when 1/(omega_c ln(beta omega_c)) < 2 tau_B.
#[derive(Debug, Clone)]
pub struct ValidityReport {
    /// max |<e_a| d_s H |e_b>| over the s-grid, GHz per unit s.
    pub h: f64,
    /// Minimum spectral gap over the s-grid, GHz.
    pub delta: f64,
    pub tau_b: f64,
    pub adiabatic_ratio: f64,
    pub markov_ratio: f64,
    pub dissipator_ratio: f64,
    pub basis_ratio: f64,
    pub cutoff_lhs: f64,
    pub verdicts: Vec<Verdict>,
    /// Rate-coefficient curves (s, gap, gamma(gap), exp(-beta gap)):
    /// the excitation rate scales as gamma e^{-beta gap} rho_00 and the
    /// relaxation rate as gamma rho_ii.
    pub rate_curves: Vec<(f64, f64, f64, f64)>,
}

/// Evaluate the timescale inequalities for a configured run.
pub fn validity_report(
    chain: &SpinChainSpec,
    sched: &ScheduleSpec,
    bath: &BathSpec,
    t_f: f64,
) -> Result<ValidityReport> {
    let grid = 200usize;
    let ds = 1e-4;
    let mut h_max = 0.0f64;
    let mut delta_min = f64::INFINITY;
    let mut rate_curves = Vec::with_capacity(grid);
    for k in 0..grid {
        let s = k as f64 / (grid - 1) as f64;
        let frame = eig_hermitian(&build_system_hamiltonian(chain, sched, s)?)?;
        let gap = frame.energies[1] - frame.energies[0];
        delta_min = delta_min.min(gap);
        let (lo, hi) = if s < ds {
            (0.0, 2.0 * ds)
        } else if s > 1.0 - ds {
            (1.0 - 2.0 * ds, 1.0)
        } else {
            (s - ds, s + ds)
        };
        let dh = (build_system_hamiltonian(chain, sched, hi)?
            - build_system_hamiltonian(chain, sched, lo)?)
        .map(|z| z / (hi - lo));
        let m = frame.vectors.adjoint() * dh * &frame.vectors;
        let local = m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()));
        h_max = h_max.max(local);
        let g = gamma_scalar(bath, gap);
        rate_curves.push((s, gap, g, (-bath.beta * gap).exp()));
    }

    let ts = bath_timescales(bath)?;
    let g_coupling = bath.eta_g2.sqrt();
    let adiabatic_ratio = h_max / (delta_min * delta_min * t_f);
    let markov_ratio = g_coupling * ts.tau_b;
    let dissipator_ratio = bath.eta_g2 * ts.tau_b / delta_min;
    let basis_ratio = h_max * ts.tau_b * ts.tau_b / t_f;
    let cutoff_lhs = 1.0 / (bath.omega_c * (bath.beta * bath.omega_c).ln());
    let markov_gap_ratio = if g_coupling > 0.0 {
        g_coupling * ts.tau_b / (1.0f64).min(delta_min / g_coupling)
    } else {
        0.0
    };

    let verdicts = vec![
        Verdict {
            name: "adiabatic h/(Delta^2 t_f)",
            ratio: adiabatic_ratio,
            pass: adiabatic_ratio < 0.1,
        },
        Verdict {
            name: "markov g tau_B",
            ratio: markov_ratio,
            pass: markov_ratio < 0.1,
        },
        Verdict {
            name: "dissipator g^2 tau_B / Delta",
            ratio: dissipator_ratio,
            pass: dissipator_ratio < 0.1,
        },
        Verdict {
            name: "basis-change h tau_B^2 / t_f",
            ratio: basis_ratio,
            pass: basis_ratio < 0.1,
        },
        Verdict {
            name: "markov-gap g tau_B / min(1, Delta/g)",
            ratio: markov_gap_ratio,
            pass: markov_gap_ratio < 0.1,
        },
        Verdict {
            name: "cutoff 1/(omega_c ln(beta omega_c)) < 2 tau_B",
            ratio: cutoff_lhs / (2.0 * ts.tau_b),
            pass: cutoff_lhs < 2.0 * ts.tau_b,
        },
    ];

    Ok(ValidityReport {
        h: h_max,
        delta: delta_min,
        tau_b: ts.tau_b,
        adiabatic_ratio,
        markov_ratio,
        dissipator_ratio,
        basis_ratio,
        cutoff_lhs,
        verdicts,
        rate_curves,
    })
}

impl ValidityReport {
    pub fn all_pass(&self) -> bool {
        self.verdicts.iter().all(|v| v.pass)
    }

    /// Structured text block for terminal output.
    pub fn render(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "h = {:.6e} GHz, min gap = {:.6e} GHz, tau_B = {:.6e} ns\n",
            self.h, self.delta, self.tau_b
        ));
        for v in &self.verdicts {
            s.push_str(&format!(
                "  {:<44} ratio = {:.3e}  [{}]\n",
                v.name,
                v.ratio,
                if v.pass { "pass" } else { "FAIL" }
            ));
        }
        s
    }
}

// ---------------------------------------------------------------------------
// phase segmentation

/// Heuristic four-phase segmentation of a fidelity trace. The boundaries are
/// diagnostic markers, not a published algorithm.
#[derive(Debug, Clone)]
pub struct PhaseSegmentation {
    /// s-values splitting [0, s_end] into gapped / excitation / relaxation /
    /// frozen, strictly increasing.
    pub boundaries: [f64; 3],
    pub labels: [&'static str; 4],
    pub warnings: Vec<String>,
}

/// Segment a recorded trajectory:
/// s1 = first s with beta gap < 2 (thermal activation opens),
/// s2 = fidelity minimum,
/// s3 = first s > s2 where the ground-state bath coupling falls below 0.01.
pub fn segment_phases(traj: &TrajectoryRecord, bath: &BathSpec) -> PhaseSegmentation {
    let mut warnings = Vec::new();
    let s = &traj.s;
    let m = s.len();
    let s_max = s[m - 1];
    let ds = s_max / m as f64;

    let s1 = match (0..m).find(|&k| bath.beta * traj.gap[k] < 2.0) {
        Some(k) => s[k],
        None => {
            warnings.push("gap never fell below 2 k_B T; thermal boundary defaulted".into());
            0.25 * s_max
        }
    };

    let (mut k_min, mut f_min) = (0usize, f64::INFINITY);
    for k in 0..m {
        if traj.fidelity[k] < f_min {
            f_min = traj.fidelity[k];
            k_min = k;
        }
    }
    let f_span = traj.fidelity.iter().cloned().fold(f64::NEG_INFINITY, f64::max) - f_min;
    if f_span < 1e-6 {
        warnings.push("fidelity trace is flat; excitation boundary is degenerate".into());
    }
    let s2 = s[k_min];

    let s3 = match (k_min..m).find(|&k| traj.ground_coupling[k] < 0.01) {
        Some(k) => s[k],
        None => {
            warnings.push("ground-state coupling never froze; frozen boundary defaulted".into());
            0.5 * (s2 + s_max)
        }
    };

    // clip to a strictly increasing interior sequence
    let mut b = [s1, s2, s3];
    b[0] = b[0].clamp(ds, s_max - 3.0 * ds);
    for i in 1..3 {
        if b[i] <= b[i - 1] {
            warnings.push("phase boundaries clipped to enforce ordering".into());
            b[i] = b[i - 1] + ds;
        }
    }

    PhaseSegmentation {
        boundaries: b,
        labels: ["gapped", "excitation", "relaxation", "frozen"],
        warnings,
    }
}
