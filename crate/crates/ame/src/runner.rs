//! Run orchestration: single runs, parameter sweeps on a bounded worker
//! pool, bath-analytics tables, validity reports, and re-segmentation of
//! existing trajectory files. All tabular output is CSV with fixed
//! 17-significant-digit scientific floats, so identical configurations
//! produce byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::time::Instant;

use crate::analysis::{segment_phases, validity_report, PhaseSegmentation, ValidityReport};
use crate::bath::{bath_timescales, correlation_fn, gamma_scalar, s_scalar};
use crate::config::{serialize_config, RunConfig, SweepKey};
use crate::error::{Error, Result};
use crate::generators::GeneratorContext;
use crate::integrator::{evolve, TrajectoryRecord};
use crate::model::{build_system_hamiltonian, coupling_operators};
use crate::operators::eig_hermitian;

/// Fixed-width scientific float: 17 significant digits.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn write_atomic(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let tmp = path.with_extension("tmp");
    std::fs::write(&tmp, contents)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

/// Render a trajectory as CSV with the fixed column layout
/// s, t_ns, fidelity, gibbs_distance, min_eig, leakage, pop_0..pop_{n-1},
/// dt_ns, and the phase boundaries appended as comment metadata.
pub fn trajectory_csv(traj: &TrajectoryRecord, seg: Option<&PhaseSegmentation>) -> String {
    let n = traj.truncation;
    let mut s = String::new();
    s.push_str("s,t_ns,fidelity,gibbs_distance,min_eig,leakage");
    for k in 0..n {
        let _ = write!(s, ",pop_{k}");
    }
    s.push_str(",dt_ns\n");
    for row in 0..traj.s.len() {
        let _ = write!(
            s,
            "{},{},{},{},{},{}",
            fmt_float(traj.s[row]),
            fmt_float(traj.t_ns[row]),
            fmt_float(traj.fidelity[row]),
            fmt_float(traj.gibbs_distance[row]),
            fmt_float(traj.min_eig[row]),
            fmt_float(traj.leakage[row]),
        );
        for k in 0..n {
            let _ = write!(s, ",{}", fmt_float(traj.populations[row][k]));
        }
        let _ = writeln!(s, ",{}", fmt_float(traj.dt_ns[row]));
    }
    if let Some(seg) = seg {
        let _ = writeln!(
            s,
            "# phase_boundaries_s = {} {} {}",
            fmt_float(seg.boundaries[0]),
            fmt_float(seg.boundaries[1]),
            fmt_float(seg.boundaries[2])
        );
        let _ = writeln!(s, "# phase_labels = {}", seg.labels.join(" "));
        for w in &seg.warnings {
            let _ = writeln!(s, "# phase_warning = {w}");
        }
    }
    s
}

/// Everything a single run produces.
pub struct RunArtifacts {
    pub trajectory: TrajectoryRecord,
    pub segmentation: PhaseSegmentation,
    pub validity: ValidityReport,
    pub trajectory_path: PathBuf,
    pub wall_ms: u128,
}

/// Execute a single run: evolve, segment, report, and write
/// trajectory.csv, validity.csv, validity.txt, and manifest.txt.
pub fn run(cfg: &RunConfig) -> Result<RunArtifacts> {
    let started = Instant::now();
    let traj = evolve(&cfg.chain, &cfg.schedule, &cfg.bath, &cfg.evolution)?;
    let seg = segment_phases(&traj, &cfg.bath);
    let validity = validity_report(&cfg.chain, &cfg.schedule, &cfg.bath, cfg.evolution.t_f)?;
    let wall_ms = started.elapsed().as_millis();

    let dir = &cfg.out_dir;
    let traj_path = dir.join("trajectory.csv");
    write_atomic(&traj_path, &trajectory_csv(&traj, Some(&seg)))?;
    write_atomic(&dir.join("validity.txt"), &validity.render())?;
    write_atomic(&dir.join("validity.csv"), &validity_csv(&validity))?;
    write_atomic(&dir.join("manifest.txt"), &manifest(cfg, &traj, wall_ms))?;

    Ok(RunArtifacts {
        trajectory: traj,
        segmentation: seg,
        validity,
        trajectory_path: traj_path,
        wall_ms,
    })
}

fn validity_csv(rep: &ValidityReport) -> String {
    let mut s = String::new();
    s.push_str("# name,ratio,pass\n");
    for v in &rep.verdicts {
        let _ = writeln!(s, "{},{},{}", v.name.replace(',', ";"), fmt_float(v.ratio), v.pass);
    }
    s.push_str("s,gap_ghz,gamma_at_gap,boltzmann_suppression\n");
    for (x, gap, g, supp) in &rep.rate_curves {
        let _ = writeln!(
            s,
            "{},{},{},{}",
            fmt_float(*x),
            fmt_float(*gap),
            fmt_float(*g),
            fmt_float(*supp)
        );
    }
    s
}

fn manifest(cfg: &RunConfig, traj: &TrajectoryRecord, wall_ms: u128) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# ame {} run manifest", env!("CARGO_PKG_VERSION"));
    let _ = writeln!(s, "# wall_ms = {wall_ms}");
    let _ = writeln!(s, "# steps_accepted = {}", traj.steps_accepted);
    let _ = writeln!(s, "# steps_rejected = {}", traj.steps_rejected);
    let _ = writeln!(s, "# solver_iterations = {}", traj.solver_iterations);
    let _ = writeln!(s, "# lu_fallbacks = {}", traj.lu_fallbacks);
    let _ = writeln!(s, "# projection_deficit = {}", fmt_float(traj.projection_deficit));
    let _ = writeln!(s, "# max_herm_correction = {}", fmt_float(traj.max_herm_correction));
    let _ = writeln!(s, "# global_min_eig = {}", fmt_float(traj.global_min_eig));
    let _ = writeln!(s, "# align_ties = {}", traj.align_ties);
    for w in &traj.warnings {
        let _ = writeln!(s, "# warning = {w}");
    }
    s.push_str(&serialize_config(cfg));
    s
}

/// Apply one sweep value to a copy of the base configuration.
pub fn sweep_point(base: &RunConfig, key: SweepKey, value: f64) -> RunConfig {
    let mut cfg = base.clone();
    match key {
        SweepKey::TF => {
            let ratio = value / cfg.evolution.t_f;
            cfg.evolution.t_f = value;
            cfg.evolution.dt_max *= ratio;
            cfg.evolution.dt_init = (cfg.evolution.dt_init * ratio).max(cfg.evolution.dt_min);
        }
        SweepKey::EtaG2 => cfg.bath.eta_g2 = value,
    }
    cfg.sweep = None;
    cfg
}

/// Per-point summary of a sweep.
pub struct SweepPoint {
    pub value: f64,
    pub final_fidelity: f64,
    pub global_min_eig: f64,
    pub trajectory: TrajectoryRecord,
}

/// Run every sweep point on a bounded worker pool. Results are ordered by
/// the input value list and are independent of the worker count.
pub fn sweep(cfg: &RunConfig, threads: usize) -> Result<Vec<SweepPoint>> {
    let spec = cfg
        .sweep
        .clone()
        .ok_or_else(|| Error::Config {
            line: 0,
            msg: "sweep requested but sweep.key/sweep.values missing".into(),
        })?;
    let points: Vec<RunConfig> = spec
        .values
        .iter()
        .map(|&v| sweep_point(cfg, spec.key, v))
        .collect();

    let n = points.len();
    let workers = threads.clamp(1, n.max(1));
    let next = AtomicUsize::new(0);
    let results: Vec<Mutex<Option<Result<TrajectoryRecord>>>> =
        (0..n).map(|_| Mutex::new(None)).collect();

    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::SeqCst);
                if k >= n {
                    break;
                }
                let cfg_k = &points[k];
                let out = evolve(&cfg_k.chain, &cfg_k.schedule, &cfg_k.bath, &cfg_k.evolution);
                *results[k].lock().unwrap() = Some(out);
            });
        }
    });

    let mut out = Vec::with_capacity(n);
    for (k, slot) in results.into_iter().enumerate() {
        let traj = slot
            .into_inner()
            .unwrap()
            .expect("worker wrote its slot")?;
        out.push(SweepPoint {
            value: spec.values[k],
            final_fidelity: traj.final_fidelity(),
            global_min_eig: traj.global_min_eig,
            trajectory: traj,
        });
    }
    Ok(out)
}

/// Write the per-point summary table and per-point trajectories.
pub fn write_sweep(cfg: &RunConfig, points: &[SweepPoint]) -> Result<PathBuf> {
    let key = cfg.sweep.as_ref().map(|s| s.key).unwrap_or(SweepKey::EtaG2);
    let dir = &cfg.out_dir;
    let mut table = String::from("value,final_fidelity,global_min_eig\n");
    for p in points {
        let _ = writeln!(
            table,
            "{},{},{}",
            fmt_float(p.value),
            fmt_float(p.final_fidelity),
            fmt_float(p.global_min_eig)
        );
    }
    let summary = dir.join(format!("sweep_{key}.csv"));
    write_atomic(&summary, &table)?;
    for (k, p) in points.iter().enumerate() {
        let sub = dir.join(format!("sweep_{key}_{k:03}"));
        write_atomic(&sub.join("trajectory.csv"), &trajectory_csv(&p.trajectory, None))?;
    }
    Ok(summary)
}

/// Bath analytics tables: (omega, gamma, S) and (tau, Re B, Im B, |B|),
/// with the fitted timescales in the header.
pub fn bath_tables(cfg: &RunConfig) -> Result<(String, String)> {
    let bath = &cfg.bath;
    let ts = bath_timescales(bath)?;
    let mut spec = String::new();
    let _ = writeln!(
        spec,
        "# tau_b = {}, tau_m = {}, tau_tr = {}, fit_residual = {}",
        fmt_float(ts.tau_b),
        fmt_float(ts.tau_m),
        fmt_float(ts.tau_tr),
        fmt_float(ts.fit_residual)
    );
    spec.push_str("omega_ghz,gamma,s\n");
    let w_max = 50.0f64.max(2.0 * bath.omega_c);
    let m = 501;
    for k in 0..m {
        let w = -w_max + 2.0 * w_max * k as f64 / (m - 1) as f64;
        let _ = writeln!(
            spec,
            "{},{},{}",
            fmt_float(w),
            fmt_float(gamma_scalar(bath, w)),
            fmt_float(s_scalar(bath, w)?)
        );
    }

    let mut corr = String::new();
    let _ = writeln!(
        corr,
        "# tau_b = {}, tau_m = {}, tau_tr = {}",
        fmt_float(ts.tau_b),
        fmt_float(ts.tau_m),
        fmt_float(ts.tau_tr)
    );
    corr.push_str("tau_ns,re_b,im_b,abs_b\n");
    let tau_max = 3.0 * ts.tau_tr;
    let m = 601;
    for k in 1..=m {
        let tau = tau_max * k as f64 / m as f64;
        let b = correlation_fn(bath, tau);
        let _ = writeln!(
            corr,
            "{},{},{},{}",
            fmt_float(tau),
            fmt_float(b.re),
            fmt_float(b.im),
            fmt_float(b.norm())
        );
    }
    Ok((spec, corr))
}

pub fn write_bath_tables(cfg: &RunConfig) -> Result<(PathBuf, PathBuf)> {
    let (spec, corr) = bath_tables(cfg)?;
    let p1 = cfg.out_dir.join("bath_spectral.csv");
    let p2 = cfg.out_dir.join("bath_correlation.csv");
    write_atomic(&p1, &spec)?;
    write_atomic(&p2, &corr)?;
    Ok((p1, p2))
}

/// Re-segment an existing trajectory CSV: the fidelity trace is read from
/// the file while the gap and freeze-diagnostic series are recomputed from
/// the configuration on a subsampled s-grid.
pub fn resegment_csv(cfg: &RunConfig, csv_path: &Path) -> Result<PhaseSegmentation> {
    let text = std::fs::read_to_string(csv_path)?;
    let mut s_col = vec![];
    let mut fid_col = vec![];
    for (ln, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.starts_with('s') || line.trim().is_empty() {
            continue;
        }
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() < 3 {
            return Err(Error::Config {
                line: ln + 1,
                msg: "trajectory CSV row with fewer than 3 columns".into(),
            });
        }
        let parse = |v: &str| {
            v.parse::<f64>().map_err(|_| Error::Config {
                line: ln + 1,
                msg: format!("bad float '{v}'"),
            })
        };
        s_col.push(parse(cells[0])?);
        fid_col.push(parse(cells[2])?);
    }
    if s_col.len() < 4 {
        return Err(Error::Config {
            line: 0,
            msg: "trajectory CSV holds fewer than 4 rows".into(),
        });
    }

    // recompute gap and ground-coupling on a subsampled grid
    let m = s_col.len();
    let stride = (m / 200).max(1);
    let couplings = coupling_operators(&cfg.chain)?;
    let cache = crate::bath::SpectralCache::new(&cfg.bath, crate::bath::SPolicy::Interpolated);
    let mut sub_s = vec![];
    let mut sub_gap = vec![];
    let mut sub_coupling = vec![];
    let n_levels = cfg.evolution.truncation.min(1 << cfg.chain.n_sites());
    for k in (0..m).step_by(stride) {
        let s = s_col[k];
        let h = build_system_hamiltonian(&cfg.chain, &cfg.schedule, s.min(1.0))?;
        let frame = eig_hermitian(&h)?;
        sub_gap.push(frame.energies[1] - frame.energies[0]);
        let ctx = GeneratorContext::build(
            frame.truncated(n_levels),
            &couplings,
            &cfg.bath,
            &cache,
            false,
            None,
        )?;
        sub_coupling.push(ctx.max_ground_coupling());
        sub_s.push(s);
    }
    let lerp = |xs: &[f64], ys: &[f64], x: f64| -> f64 {
        match xs.binary_search_by(|v| v.partial_cmp(&x).unwrap()) {
            Ok(i) => ys[i],
            Err(0) => ys[0],
            Err(i) if i >= xs.len() => *ys.last().unwrap(),
            Err(i) => {
                let w = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
                ys[i - 1] + w * (ys[i] - ys[i - 1])
            }
        }
    };
    let gap: Vec<f64> = s_col.iter().map(|&s| lerp(&sub_s, &sub_gap, s)).collect();
    let coupling: Vec<f64> = s_col
        .iter()
        .map(|&s| lerp(&sub_s, &sub_coupling, s))
        .collect();

    let traj = TrajectoryRecord {
        t_ns: s_col.iter().map(|s| s * cfg.evolution.t_f).collect(),
        s: s_col,
        gibbs_distance: vec![0.0; fid_col.len()],
        min_eig: vec![0.0; fid_col.len()],
        leakage: vec![0.0; fid_col.len()],
        populations: vec![vec![]; fid_col.len()],
        dt_ns: vec![0.0; fid_col.len()],
        gap,
        ground_coupling: coupling,
        fidelity: fid_col,
        truncation: 0,
        steps_accepted: 0,
        steps_rejected: 0,
        lu_fallbacks: 0,
        solver_iterations: 0,
        global_min_eig: 0.0,
        max_herm_correction: 0.0,
        projection_deficit: 0.0,
        align_ties: 0,
        ground_degenerate_seen: false,
        warnings: vec![],
    };
    Ok(segment_phases(&traj, &cfg.bath))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_format_17_digits() {
        assert_eq!(fmt_float(33.7), "3.3700000000000003e1");
        assert_eq!(fmt_float(0.0), "0.0000000000000000e0");
        assert_eq!(fmt_float(-1.5e-12), "-1.5000000000000001e-12");
        // parse round-trip is exact at 17 significant digits
        for x in [33.7f64, -1.5e-12, 0.1 + 0.2, 1.0 / 2.6] {
            assert_eq!(fmt_float(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn sweep_point_overrides() {
        let base = RunConfig::default();
        let p = sweep_point(&base, SweepKey::EtaG2, 0.5);
        assert_eq!(p.bath.eta_g2, 0.5);
        assert!(p.sweep.is_none());
        let p = sweep_point(&base, SweepKey::TF, 100.0);
        assert_eq!(p.evolution.t_f, 100.0);
        assert!(p.evolution.dt_max <= 100.0);
    }
}
