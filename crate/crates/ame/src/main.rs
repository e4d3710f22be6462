//! Command-line front end: run | sweep | bath | validity | phases.

use std::path::PathBuf;
use std::process::ExitCode;

use ame::config::{parse_config, RunConfig, SweepKey, SweepSpec};
use ame::error::Error;
use ame::generators::Equation;

const USAGE: &str = "\
ame <subcommand> [flags]

Subcommands:
  run        integrate one anneal and write trajectory/validity/manifest
  sweep      run a list of t_f or eta_g2 values on a worker pool
  bath       emit (omega, gamma, S) and (tau, B) tables
  validity   evaluate the timescale inequalities only
  phases     re-segment an existing trajectory CSV

Flags:
  --config PATH          configuration file (defaults apply when omitted)
  --out DIR              output directory (overrides outputs.dir)
  --equation rwa|nonrwa  master equation selection
  --lamb-shift on|off    include the Lamb shift
  --levels N             retained instantaneous levels
  --tf-ns X              total anneal time in ns
  --eta-g2 X             system-bath coupling product
  --sweep KEY=v1,v2,...  sweep axis (t_f or eta_g2) and values
  --threads K            worker threads (or AME_SIM_THREADS)
  --csv FILE             trajectory file for 'phases'

Exit codes: 0 ok, 2 config error, 3 integration abort, 4 positivity abort.";

struct Cli {
    sub: String,
    config: Option<PathBuf>,
    out: Option<PathBuf>,
    equation: Option<Equation>,
    lamb_shift: Option<bool>,
    levels: Option<usize>,
    tf_ns: Option<f64>,
    eta_g2: Option<f64>,
    sweep: Option<SweepSpec>,
    threads: Option<usize>,
    csv: Option<PathBuf>,
}

fn parse_cli(mut args: Vec<String>) -> Result<Cli, String> {
    if args.is_empty() {
        return Err(USAGE.to_string());
    }
    let sub = args.remove(0);
    let mut cli = Cli {
        sub,
        config: None,
        out: None,
        equation: None,
        lamb_shift: None,
        levels: None,
        tf_ns: None,
        eta_g2: None,
        sweep: None,
        threads: None,
        csv: None,
    };
    let mut it = args.into_iter();
    while let Some(flag) = it.next() {
        let mut val = || it.next().ok_or(format!("{flag} needs a value"));
        match flag.as_str() {
            "--config" => cli.config = Some(PathBuf::from(val()?)),
            "--out" => cli.out = Some(PathBuf::from(val()?)),
            "--equation" => {
                cli.equation = Some(match val()?.as_str() {
                    "rwa" => Equation::Rwa,
                    "nonrwa" => Equation::NonRwa,
                    other => return Err(format!("--equation: unknown '{other}'")),
                })
            }
            "--lamb-shift" => {
                cli.lamb_shift = Some(match val()?.as_str() {
                    "on" => true,
                    "off" => false,
                    other => return Err(format!("--lamb-shift: expected on|off, got '{other}'")),
                })
            }
            "--levels" => {
                cli.levels = Some(val()?.parse().map_err(|_| "--levels: bad integer")?)
            }
            "--tf-ns" => cli.tf_ns = Some(val()?.parse().map_err(|_| "--tf-ns: bad number")?),
            "--eta-g2" => cli.eta_g2 = Some(val()?.parse().map_err(|_| "--eta-g2: bad number")?),
            "--threads" => {
                cli.threads = Some(val()?.parse().map_err(|_| "--threads: bad integer")?)
            }
            "--csv" => cli.csv = Some(PathBuf::from(val()?)),
            "--sweep" => {
                let spec = val()?;
                let (key, values) = spec
                    .split_once('=')
                    .ok_or("--sweep: expected KEY=v1,v2,...")?;
                let key = match key {
                    "t_f" => SweepKey::TF,
                    "eta_g2" => SweepKey::EtaG2,
                    other => return Err(format!("--sweep: unknown key '{other}'")),
                };
                let values: Result<Vec<f64>, _> =
                    values.split(',').map(|v| v.trim().parse::<f64>()).collect();
                cli.sweep = Some(SweepSpec {
                    key,
                    values: values.map_err(|_| "--sweep: bad value list")?,
                });
            }
            "--help" | "-h" => return Err(USAGE.to_string()),
            other => return Err(format!("unknown flag '{other}'")),
        }
    }
    Ok(cli)
}

fn load_config(cli: &Cli) -> ame::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(path) => parse_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(eq) = cli.equation {
        cfg.evolution.equation = eq;
    }
    if let Some(ls) = cli.lamb_shift {
        cfg.evolution.lamb_shift = ls;
    }
    if let Some(n) = cli.levels {
        cfg.evolution.truncation = n;
    }
    if let Some(tf) = cli.tf_ns {
        let old = cfg.evolution.t_f;
        cfg.evolution.t_f = tf;
        cfg.evolution.dt_max *= tf / old;
    }
    if let Some(eg) = cli.eta_g2 {
        cfg.bath.eta_g2 = eg;
    }
    if let Some(sw) = &cli.sweep {
        if sw.values.is_empty() {
            return Err(Error::Config {
                line: 0,
                msg: "--sweep: empty value list".into(),
            });
        }
        cfg.sweep = Some(sw.clone());
    }
    cfg.evolution.validate()?;
    cfg.bath.validate()?;
    Ok(cfg)
}

fn threads(cli: &Cli) -> usize {
    cli.threads
        .or_else(|| {
            std::env::var("AME_SIM_THREADS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(1)
        .max(1)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Config { .. }
        | Error::UnknownKeys(_)
        | Error::InvalidChain(_)
        | Error::InvalidSchedule(_)
        | Error::InvalidBath(_)
        | Error::InvalidEvolution(_)
        | Error::Io(_) => 2,
        Error::PositivityAbort { .. } => 4,
        _ => 3,
    }
}

fn dispatch(cli: &Cli) -> ame::Result<()> {
    match cli.sub.as_str() {
        "run" => {
            let cfg = load_config(cli)?;
            let art = ame::runner::run(&cfg)?;
            println!(
                "final fidelity {:.6} after {} accepted steps ({} ms)",
                art.trajectory.final_fidelity(),
                art.trajectory.steps_accepted,
                art.wall_ms
            );
            println!(
                "phases at s = {:.4}, {:.4}, {:.4} ({})",
                art.segmentation.boundaries[0],
                art.segmentation.boundaries[1],
                art.segmentation.boundaries[2],
                art.segmentation.labels.join(" | ")
            );
            println!("wrote {}", art.trajectory_path.display());
            Ok(())
        }
        "sweep" => {
            let cfg = load_config(cli)?;
            if cfg.sweep.is_none() {
                return Err(Error::Config {
                    line: 0,
                    msg: "sweep needs --sweep KEY=... or sweep.* config keys".into(),
                });
            }
            let points = ame::runner::sweep(&cfg, threads(cli))?;
            let summary = ame::runner::write_sweep(&cfg, &points)?;
            for p in &points {
                println!(
                    "value {:>12.6e}: final fidelity {:.6}, min eig {:.3e}",
                    p.value, p.final_fidelity, p.global_min_eig
                );
            }
            println!("wrote {}", summary.display());
            Ok(())
        }
        "bath" => {
            let cfg = load_config(cli)?;
            let (p1, p2) = ame::runner::write_bath_tables(&cfg)?;
            println!("wrote {} and {}", p1.display(), p2.display());
            Ok(())
        }
        "validity" => {
            let cfg = load_config(cli)?;
            let rep = ame::analysis::validity_report(
                &cfg.chain,
                &cfg.schedule,
                &cfg.bath,
                cfg.evolution.t_f,
            )?;
            print!("{}", rep.render());
            Ok(())
        }
        "phases" => {
            let cfg = load_config(cli)?;
            let csv = cli.csv.clone().ok_or(Error::Config {
                line: 0,
                msg: "phases needs --csv FILE".into(),
            })?;
            let seg = ame::runner::resegment_csv(&cfg, &csv)?;
            println!(
                "phases at s = {:.4}, {:.4}, {:.4} ({})",
                seg.boundaries[0],
                seg.boundaries[1],
                seg.boundaries[2],
                seg.labels.join(" | ")
            );
            for w in &seg.warnings {
                println!("warning: {w}");
            }
            Ok(())
        }
        other => Err(Error::Config {
            line: 0,
            msg: format!("unknown subcommand '{other}'; see --help"),
        }),
    }
}

fn main() -> ExitCode {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = match parse_cli(args) {
        Ok(cli) => cli,
        Err(msg) => {
            eprintln!("{msg}");
            return ExitCode::from(2);
        }
    };
    match dispatch(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err))
        }
    }
}
