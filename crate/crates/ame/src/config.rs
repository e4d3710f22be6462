//! Run configuration: a line-oriented dotted-key text format in which every
//! field defaults to the reference simulation (8-site pinned ferromagnetic
//! chain, calibrated anneal, T = 20 mK Ohmic bath, Lindblad equation with
//! Lamb shift, 18 retained levels, t_f = 10 us).
//!
//! ```text
//! # comments start with '#'
//! bath.omega_c = 25.132741228718345
//! chain.n = 8
//! chain.bond = 0 1 -1        # repeatable: i j J
//! sweep.key = eta_g2
//! sweep.values = 1e-5 1e-4 1e-3
//! ```

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::bath::{BathSpec, SPolicy};
use crate::error::{Error, Result};
use crate::generators::Equation;
use crate::integrator::EvolutionConfig;
use crate::model::{ScheduleKind, ScheduleSpec, SpinChainSpec};

pub const DEFAULT_N_SITES: usize = 8;
pub const DEFAULT_ETA_G2: f64 = 1.2e-4 / (2.0 * PI);
pub const DEFAULT_BETA: f64 = 1.0 / 2.6;
pub const DEFAULT_OMEGA_C: f64 = 8.0 * PI;
pub const DEFAULT_T_F: f64 = 10_000.0;
pub const DEFAULT_LEVELS: usize = 18;

/// Sweep axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepKey {
    TF,
    EtaG2,
}

impl std::fmt::Display for SweepKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepKey::TF => write!(f, "t_f"),
            SweepKey::EtaG2 => write!(f, "eta_g2"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub key: SweepKey,
    pub values: Vec<f64>,
}

/// Full run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub chain: SpinChainSpec,
    pub schedule: ScheduleSpec,
    pub bath: BathSpec,
    pub evolution: EvolutionConfig,
    pub out_dir: PathBuf,
    pub sweep: Option<SweepSpec>,
}

impl PartialEq for RunConfig {
    fn eq(&self, other: &Self) -> bool {
        self.chain == other.chain
            && self.schedule.kind == other.schedule.kind
            && self.schedule.a0 == other.schedule.a0
            && self.schedule.b_max == other.schedule.b_max
            && self.schedule.crossing_s == other.schedule.crossing_s
            && self.schedule.crossing_value == other.schedule.crossing_value
            && self.schedule.b_end == other.schedule.b_end
            && self.schedule.table == other.schedule.table
            && self.bath.eta_g2 == other.bath.eta_g2
            && self.bath.beta == other.bath.beta
            && self.bath.omega_c == other.bath.omega_c
            && self.bath.g_profile == other.bath.g_profile
            && self.evolution.t_f == other.evolution.t_f
            && self.evolution.s_end == other.evolution.s_end
            && self.evolution.rel_tol == other.evolution.rel_tol
            && self.evolution.abs_tol == other.evolution.abs_tol
            && self.evolution.dt_init == other.evolution.dt_init
            && self.evolution.dt_min == other.evolution.dt_min
            && self.evolution.dt_max == other.evolution.dt_max
            && self.evolution.truncation == other.evolution.truncation
            && self.evolution.equation == other.evolution.equation
            && self.evolution.lamb_shift == other.evolution.lamb_shift
            && self.evolution.record_points == other.evolution.record_points
            && self.evolution.allow_positivity_violation
                == other.evolution.allow_positivity_violation
            && self.evolution.s_policy == other.evolution.s_policy
            && self.out_dir == other.out_dir
            && self.sweep == other.sweep
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let chain = SpinChainSpec::ferromagnetic_pinned(DEFAULT_N_SITES);
        let schedule = ScheduleSpec::default_anneal();
        let bath = BathSpec::new(DEFAULT_ETA_G2, DEFAULT_BETA, DEFAULT_OMEGA_C, DEFAULT_N_SITES)
            .expect("default bath is valid");
        let evolution = EvolutionConfig::new(DEFAULT_T_F, DEFAULT_LEVELS, Equation::Rwa, true);
        Self {
            chain,
            schedule,
            bath,
            evolution,
            out_dir: PathBuf::from("out"),
            sweep: None,
        }
    }
}

fn cfg_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Config {
        line,
        msg: msg.into(),
    }
}

fn parse_f64(line: usize, key: &str, v: &str) -> Result<f64> {
    v.parse::<f64>()
        .map_err(|_| cfg_err(line, format!("{key}: cannot parse '{v}' as a number")))
}

fn parse_usize(line: usize, key: &str, v: &str) -> Result<usize> {
    v.parse::<usize>()
        .map_err(|_| cfg_err(line, format!("{key}: cannot parse '{v}' as an integer")))
}

fn parse_list(line: usize, key: &str, v: &str) -> Result<Vec<f64>> {
    v.split_whitespace()
        .map(|tok| parse_f64(line, key, tok))
        .collect()
}

fn parse_bool(line: usize, key: &str, v: &str) -> Result<bool> {
    match v {
        "on" | "true" | "1" | "yes" => Ok(true),
        "off" | "false" | "0" | "no" => Ok(false),
        _ => Err(cfg_err(line, format!("{key}: expected on/off, got '{v}'"))),
    }
}

/// Parse configuration text. Unknown keys are fatal and all are listed.
pub fn parse_config_str(text: &str) -> Result<RunConfig> {
    // gather raw assignments; repeatable keys collect in order
    let mut scalars: BTreeMap<String, (usize, String)> = BTreeMap::new();
    let mut bonds: Vec<(usize, String)> = vec![];
    let mut rows: Vec<(usize, String)> = vec![];
    let mut unknown: Vec<String> = vec![];

    const KNOWN: &[&str] = &[
        "chain.n",
        "chain.h",
        "schedule.kind",
        "schedule.a0",
        "schedule.b_max",
        "schedule.crossing_s",
        "schedule.crossing_value",
        "schedule.b_end",
        "bath.eta_g2",
        "bath.beta",
        "bath.omega_c",
        "bath.g_profile",
        "evolution.t_f_ns",
        "evolution.s_end",
        "evolution.rel_tol",
        "evolution.abs_tol",
        "evolution.dt_init_ns",
        "evolution.dt_min_ns",
        "evolution.dt_max_ns",
        "evolution.levels",
        "evolution.equation",
        "evolution.lamb_shift",
        "evolution.record_points",
        "evolution.allow_positivity_violation",
        "evolution.s_policy",
        "outputs.dir",
        "sweep.key",
        "sweep.values",
    ];

    for (ln, raw) in text.lines().enumerate() {
        let line_no = ln + 1;
        let stripped = match raw.find('#') {
            Some(pos) => &raw[..pos],
            None => raw,
        };
        let stripped = stripped.trim();
        if stripped.is_empty() {
            continue;
        }
        let (key, value) = stripped
            .split_once('=')
            .ok_or_else(|| cfg_err(line_no, format!("expected 'key = value', got '{stripped}'")))?;
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        match key.as_str() {
            "chain.bond" => bonds.push((line_no, value)),
            "schedule.row" => rows.push((line_no, value)),
            k if KNOWN.contains(&k) => {
                scalars.insert(key, (line_no, value));
            }
            _ => unknown.push(format!("line {line_no}: {key}")),
        }
    }
    if !unknown.is_empty() {
        return Err(Error::UnknownKeys(unknown.join(", ")));
    }

    let get = |k: &str| scalars.get(k).cloned();

    // chain
    let n_sites = match get("chain.n") {
        Some((ln, v)) => {
            let n = parse_usize(ln, "chain.n", &v)?;
            if n == 0 || n > crate::operators::MAX_SITES {
                return Err(cfg_err(
                    ln,
                    format!("chain.n: {n} outside [1, {}]", crate::operators::MAX_SITES),
                ));
            }
            n
        }
        None => DEFAULT_N_SITES,
    };
    let mut h = SpinChainSpec::ferromagnetic_pinned(n_sites).h;
    let mut j = SpinChainSpec::ferromagnetic_pinned(n_sites).j;
    if let Some((ln, v)) = get("chain.h") {
        let vals = parse_list(ln, "chain.h", &v)?;
        if vals.len() != n_sites {
            return Err(cfg_err(
                ln,
                format!("chain.h: {} values for {n_sites} sites", vals.len()),
            ));
        }
        h = vals;
    }
    if !bonds.is_empty() {
        j = DMatrix::zeros(n_sites, n_sites);
        for (ln, v) in &bonds {
            let toks: Vec<&str> = v.split_whitespace().collect();
            if toks.len() != 3 {
                return Err(cfg_err(*ln, "chain.bond: expected 'i j J'"));
            }
            let i = parse_usize(*ln, "chain.bond", toks[0])?;
            let k = parse_usize(*ln, "chain.bond", toks[1])?;
            let val = parse_f64(*ln, "chain.bond", toks[2])?;
            if i >= n_sites || k >= n_sites || i == k {
                return Err(cfg_err(*ln, format!("chain.bond: invalid pair ({i}, {k})")));
            }
            j[(i, k)] = val;
            j[(k, i)] = val;
        }
    }
    let chain = SpinChainSpec::new(h, j)
        .map_err(|e| cfg_err(0, format!("chain: {e}")))?;

    // schedule
    let kind = match get("schedule.kind") {
        Some((ln, v)) => match v.as_str() {
            "linear" => ScheduleKind::Linear,
            "calibrated-anneal" => ScheduleKind::CalibratedAnneal,
            "user-table" => ScheduleKind::UserTable,
            other => {
                return Err(cfg_err(
                    ln,
                    format!("schedule.kind: unknown kind '{other}'"),
                ))
            }
        },
        None => ScheduleKind::CalibratedAnneal,
    };
    let a0 = match get("schedule.a0") {
        Some((ln, v)) => parse_f64(ln, "schedule.a0", &v)?,
        None => crate::model::DEFAULT_A0,
    };
    let schedule = match kind {
        ScheduleKind::Linear => {
            let b_max = match get("schedule.b_max") {
                Some((ln, v)) => parse_f64(ln, "schedule.b_max", &v)?,
                None => a0,
            };
            ScheduleSpec::linear(a0, b_max).map_err(|e| cfg_err(0, format!("schedule: {e}")))?
        }
        ScheduleKind::CalibratedAnneal => {
            let crossing_s = match get("schedule.crossing_s") {
                Some((ln, v)) => parse_f64(ln, "schedule.crossing_s", &v)?,
                None => crate::model::DEFAULT_CROSSING_S,
            };
            let crossing_value = match get("schedule.crossing_value") {
                Some((ln, v)) => parse_f64(ln, "schedule.crossing_value", &v)?,
                None => crate::model::DEFAULT_CROSSING_VALUE,
            };
            let b_end = match get("schedule.b_end") {
                Some((ln, v)) => parse_f64(ln, "schedule.b_end", &v)?,
                None => 2.0 * a0,
            };
            ScheduleSpec::calibrated(a0, crossing_s, crossing_value, b_end)
                .map_err(|e| cfg_err(0, format!("schedule: {e}")))?
        }
        ScheduleKind::UserTable => {
            let mut table = vec![];
            for (ln, v) in &rows {
                let vals = parse_list(*ln, "schedule.row", v)?;
                if vals.len() != 3 {
                    return Err(cfg_err(*ln, "schedule.row: expected 's A B'"));
                }
                table.push((vals[0], vals[1], vals[2]));
            }
            ScheduleSpec::from_table(table).map_err(|e| cfg_err(0, format!("schedule: {e}")))?
        }
    };
    if kind != ScheduleKind::UserTable && !rows.is_empty() {
        return Err(cfg_err(
            rows[0].0,
            "schedule.row given but schedule.kind is not user-table",
        ));
    }

    // bath
    let eta_g2 = match get("bath.eta_g2") {
        Some((ln, v)) => {
            let x = parse_f64(ln, "bath.eta_g2", &v)?;
            if x < 0.0 {
                return Err(cfg_err(ln, "bath.eta_g2: must be non-negative"));
            }
            x
        }
        None => DEFAULT_ETA_G2,
    };
    let beta = match get("bath.beta") {
        Some((ln, v)) => {
            let x = parse_f64(ln, "bath.beta", &v)?;
            if x <= 0.0 {
                return Err(cfg_err(ln, "bath.beta: must be positive"));
            }
            x
        }
        None => DEFAULT_BETA,
    };
    let omega_c = match get("bath.omega_c") {
        Some((ln, v)) => {
            let x = parse_f64(ln, "bath.omega_c", &v)?;
            if x <= 0.0 {
                return Err(cfg_err(ln, "bath.omega_c: must be positive"));
            }
            x
        }
        None => DEFAULT_OMEGA_C,
    };
    let g_profile = match get("bath.g_profile") {
        Some((ln, v)) => {
            let vals = parse_list(ln, "bath.g_profile", &v)?;
            if vals.len() != n_sites {
                return Err(cfg_err(
                    ln,
                    format!("bath.g_profile: {} values for {n_sites} sites", vals.len()),
                ));
            }
            vals
        }
        None => vec![1.0; n_sites],
    };
    let bath = BathSpec {
        eta_g2,
        beta,
        omega_c,
        g_profile,
    };
    bath.validate().map_err(|e| cfg_err(0, format!("bath: {e}")))?;

    // evolution
    let t_f = match get("evolution.t_f_ns") {
        Some((ln, v)) => {
            let x = parse_f64(ln, "evolution.t_f_ns", &v)?;
            if x <= 0.0 {
                return Err(cfg_err(ln, "evolution.t_f_ns: must be positive"));
            }
            x
        }
        None => DEFAULT_T_F,
    };
    let levels = match get("evolution.levels") {
        Some((ln, v)) => parse_usize(ln, "evolution.levels", &v)?,
        None => DEFAULT_LEVELS,
    };
    let equation = match get("evolution.equation") {
        Some((ln, v)) => match v.as_str() {
            "rwa" => Equation::Rwa,
            "nonrwa" => Equation::NonRwa,
            other => {
                return Err(cfg_err(
                    ln,
                    format!("evolution.equation: expected rwa|nonrwa, got '{other}'"),
                ))
            }
        },
        None => Equation::Rwa,
    };
    let lamb = match get("evolution.lamb_shift") {
        Some((ln, v)) => parse_bool(ln, "evolution.lamb_shift", &v)?,
        None => true,
    };
    let mut evolution = EvolutionConfig::new(t_f, levels, equation, lamb);
    if let Some((ln, v)) = get("evolution.s_end") {
        evolution.s_end = parse_f64(ln, "evolution.s_end", &v)?;
    }
    if let Some((ln, v)) = get("evolution.rel_tol") {
        evolution.rel_tol = parse_f64(ln, "evolution.rel_tol", &v)?;
    }
    if let Some((ln, v)) = get("evolution.abs_tol") {
        evolution.abs_tol = parse_f64(ln, "evolution.abs_tol", &v)?;
    }
    if let Some((ln, v)) = get("evolution.dt_init_ns") {
        evolution.dt_init = parse_f64(ln, "evolution.dt_init_ns", &v)?;
    }
    if let Some((ln, v)) = get("evolution.dt_min_ns") {
        evolution.dt_min = parse_f64(ln, "evolution.dt_min_ns", &v)?;
    }
    if let Some((ln, v)) = get("evolution.dt_max_ns") {
        evolution.dt_max = parse_f64(ln, "evolution.dt_max_ns", &v)?;
    }
    if let Some((ln, v)) = get("evolution.record_points") {
        evolution.record_points = parse_usize(ln, "evolution.record_points", &v)?;
    }
    if let Some((ln, v)) = get("evolution.allow_positivity_violation") {
        evolution.allow_positivity_violation =
            parse_bool(ln, "evolution.allow_positivity_violation", &v)?;
    }
    if let Some((ln, v)) = get("evolution.s_policy") {
        evolution.s_policy = match v.as_str() {
            "exact" => SPolicy::Exact,
            "interpolated" => SPolicy::Interpolated,
            other => {
                return Err(cfg_err(
                    ln,
                    format!("evolution.s_policy: expected exact|interpolated, got '{other}'"),
                ))
            }
        };
    }
    evolution
        .validate()
        .map_err(|e| cfg_err(0, format!("evolution: {e}")))?;

    let out_dir = match get("outputs.dir") {
        Some((_, v)) => PathBuf::from(v),
        None => PathBuf::from("out"),
    };

    // sweep
    let sweep = match (get("sweep.key"), get("sweep.values")) {
        (None, None) => None,
        (Some((ln, k)), Some((vln, v))) => {
            let key = match k.as_str() {
                "t_f" => SweepKey::TF,
                "eta_g2" => SweepKey::EtaG2,
                other => {
                    return Err(cfg_err(
                        ln,
                        format!("sweep.key: expected t_f|eta_g2, got '{other}'"),
                    ))
                }
            };
            let values = parse_list(vln, "sweep.values", &v)?;
            if values.is_empty() {
                return Err(cfg_err(vln, "sweep.values: empty list"));
            }
            if values.iter().any(|x| *x < 0.0) {
                return Err(cfg_err(vln, "sweep.values: values must be non-negative"));
            }
            if key == SweepKey::TF && values.iter().any(|x| *x <= 0.0) {
                return Err(cfg_err(vln, "sweep.values: t_f values must be positive"));
            }
            let mut sorted = values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
            if sorted.windows(2).any(|w| w[0] == w[1]) {
                return Err(cfg_err(vln, "sweep.values: duplicate values"));
            }
            Some(SweepSpec { key, values })
        }
        _ => {
            return Err(cfg_err(
                0,
                "sweep.key and sweep.values must be given together",
            ))
        }
    };

    Ok(RunConfig {
        chain,
        schedule,
        bath,
        evolution,
        out_dir,
        sweep,
    })
}

/// Parse a configuration file; an empty file yields the full default run.
pub fn parse_config(path: &Path) -> Result<RunConfig> {
    let text = std::fs::read_to_string(path)?;
    parse_config_str(&text)
}

/// Canonical textual form; `parse_config_str(serialize(c)) == c`.
pub fn serialize_config(cfg: &RunConfig) -> String {
    let mut s = String::new();
    let n = cfg.chain.n_sites();
    s.push_str(&format!("chain.n = {n}\n"));
    s.push_str("chain.h =");
    for v in &cfg.chain.h {
        s.push_str(&format!(" {v}"));
    }
    s.push('\n');
    for i in 0..n {
        for k in i + 1..n {
            if cfg.chain.j[(i, k)] != 0.0 {
                s.push_str(&format!("chain.bond = {i} {k} {}\n", cfg.chain.j[(i, k)]));
            }
        }
    }
    match cfg.schedule.kind {
        ScheduleKind::Linear => {
            s.push_str("schedule.kind = linear\n");
            s.push_str(&format!("schedule.a0 = {}\n", cfg.schedule.a0));
            s.push_str(&format!("schedule.b_max = {}\n", cfg.schedule.b_max));
        }
        ScheduleKind::CalibratedAnneal => {
            s.push_str("schedule.kind = calibrated-anneal\n");
            s.push_str(&format!("schedule.a0 = {}\n", cfg.schedule.a0));
            s.push_str(&format!("schedule.crossing_s = {}\n", cfg.schedule.crossing_s));
            s.push_str(&format!(
                "schedule.crossing_value = {}\n",
                cfg.schedule.crossing_value
            ));
            s.push_str(&format!("schedule.b_end = {}\n", cfg.schedule.b_end));
        }
        ScheduleKind::UserTable => {
            s.push_str("schedule.kind = user-table\n");
            for (x, a, b) in &cfg.schedule.table {
                s.push_str(&format!("schedule.row = {x} {a} {b}\n"));
            }
        }
    }
    s.push_str(&format!("bath.eta_g2 = {}\n", cfg.bath.eta_g2));
    s.push_str(&format!("bath.beta = {}\n", cfg.bath.beta));
    s.push_str(&format!("bath.omega_c = {}\n", cfg.bath.omega_c));
    s.push_str("bath.g_profile =");
    for v in &cfg.bath.g_profile {
        s.push_str(&format!(" {v}"));
    }
    s.push('\n');
    let e = &cfg.evolution;
    s.push_str(&format!("evolution.t_f_ns = {}\n", e.t_f));
    s.push_str(&format!("evolution.s_end = {}\n", e.s_end));
    s.push_str(&format!("evolution.rel_tol = {}\n", e.rel_tol));
    s.push_str(&format!("evolution.abs_tol = {}\n", e.abs_tol));
    s.push_str(&format!("evolution.dt_init_ns = {}\n", e.dt_init));
    s.push_str(&format!("evolution.dt_min_ns = {}\n", e.dt_min));
    s.push_str(&format!("evolution.dt_max_ns = {}\n", e.dt_max));
    s.push_str(&format!("evolution.levels = {}\n", e.truncation));
    s.push_str(&format!("evolution.equation = {}\n", e.equation));
    s.push_str(&format!(
        "evolution.lamb_shift = {}\n",
        if e.lamb_shift { "on" } else { "off" }
    ));
    s.push_str(&format!("evolution.record_points = {}\n", e.record_points));
    s.push_str(&format!(
        "evolution.allow_positivity_violation = {}\n",
        if e.allow_positivity_violation { "on" } else { "off" }
    ));
    s.push_str(&format!(
        "evolution.s_policy = {}\n",
        match e.s_policy {
            SPolicy::Exact => "exact",
            SPolicy::Interpolated => "interpolated",
        }
    ));
    s.push_str(&format!("outputs.dir = {}\n", cfg.out_dir.display()));
    if let Some(sw) = &cfg.sweep {
        s.push_str(&format!("sweep.key = {}\n", sw.key));
        s.push_str("sweep.values =");
        for v in &sw.values {
            s.push_str(&format!(" {v}"));
        }
        s.push('\n');
    }
    s
}
