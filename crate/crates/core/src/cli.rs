//! Command-line front end.
//!
//! Exit codes: 0 success, 1 usage, 2 runtime failure, 3 validation or
//! condition failure.

use crate::config::{load_config, Config};
use crate::diagnostics::{fit_decay, FitModel};
use crate::error::{Error, Result};
use crate::kernel::validate_hypotheses;
use crate::output::{read_series, write_run, CONFIG_FILE, SUMMARY_FILE};
use crate::presets::preset;
use crate::solver::{check_small_data_condition, run, threshold_norm};
use crate::spatial::{build_discretization, estimate_constants};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use std::io::Write;
use std::path::{Path, PathBuf};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;
pub const EXIT_VALIDATION: i32 = 3;

/// Environment variable capping sweep parallelism.
pub const THREADS_VAR: &str = "KAWAHARA_THREADS";

#[derive(Parser, Debug)]
#[command(name = "kawahara", version, about = "Kawahara equation with infinite memory: simulation and diagnostics")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Run a configuration and write series.csv, summary.txt, config.resolved.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override a key, e.g. --set sim.T=10 (repeatable).
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Check the kernel hypotheses on [0, s_max].
    ValidateKernel {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        s_max: Option<f64>,
        #[arg(long, default_value_t = 4001)]
        samples: usize,
    },
    /// Evaluate the small-data condition for the initial state.
    CheckCondition {
        #[arg(long)]
        config: PathBuf,
    },
    /// Fit a decay envelope to a series.
    Fit {
        #[arg(long)]
        series: PathBuf,
        #[arg(long, value_parser = ["exp", "xi"])]
        model: String,
        /// Config providing ξ; defaults to config.resolved beside the series.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Fit window as T0,T1 (default: last three quarters of the run).
        #[arg(long, value_name = "T0,T1")]
        window: Option<String>,
    },
    /// Run a named experiment.
    Preset {
        #[arg(long, value_parser = ["expo", "poly", "stretched"])]
        name: String,
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "set", value_name = "KEY=VALUE")]
        set: Vec<String>,
    },
    /// Run a parameter sweep in parallel, one subdirectory per run.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// KEY=V1,V2,... (repeatable; the sweep is the Cartesian product).
        #[arg(long, required = true)]
        vary: Vec<String>,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::ParameterOutOfRange { .. }
        | Error::GridTooCoarse { .. }
        | Error::TailTooFat { .. }
        | Error::ModeMismatch(_)
        | Error::NonpositiveD { .. }
        | Error::DomainError(_)
        | Error::Parse { .. }
        | Error::UnknownKey { .. }
        | Error::MissingRequired(_) => EXIT_VALIDATION,
        Error::EigSolveFailure { .. }
        | Error::DimensionMismatch { .. }
        | Error::LinearSolveFailure { .. }
        | Error::BlowupDetected { .. }
        | Error::SeriesTooShort { .. }
        | Error::AllZeroSeries
        | Error::Io(_) => EXIT_RUNTIME,
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(stderr, "{e}");
                return EXIT_USAGE;
            }
            let _ = write!(stdout, "{e}");
            return EXIT_OK;
        }
    };
    match execute(cli.command, stdout, stderr) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

fn apply_overrides(cfg: &mut Config, sets: &[String]) -> Result<()> {
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| Error::DomainError(format!("--set expects KEY=VALUE, found '{s}'")))?;
        cfg.set(k.trim(), v.trim())?;
    }
    Ok(())
}

/// Runs `cfg`, writes artifacts to `dir` and reports. Returns the exit code.
fn simulate_to(cfg: &Config, dir: &Path, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    let sim = cfg.to_sim_config()?;
    let out = run(&sim)?;
    if !out.condition.holds {
        let _ = writeln!(
            stderr,
            "warning: small-data condition violated (lhs {:e} >= rhs {:e}); decay is not guaranteed",
            out.condition.lhs, out.condition.rhs
        );
    }
    write_run(dir, cfg, &sim, &out)?;
    let _ = writeln!(stdout, "wrote {}", dir.display());
    match &out.failure {
        None => Ok(EXIT_OK),
        Some(e) => {
            let _ = writeln!(stderr, "error: {e} (partial series written)");
            Ok(exit_code(e))
        }
    }
}

fn parse_window(s: &str) -> Result<(f64, f64)> {
    let bad = || Error::DomainError(format!("--window expects T0,T1, found '{s}'"));
    let (a, b) = s.split_once(',').ok_or_else(bad)?;
    let a: f64 = a.trim().parse().map_err(|_| bad())?;
    let b: f64 = b.trim().parse().map_err(|_| bad())?;
    if !(a < b) {
        return Err(bad());
    }
    Ok((a, b))
}

fn thread_count() -> Option<usize> {
    std::env::var(THREADS_VAR).ok()?.trim().parse::<usize>().ok().filter(|&n| n > 0)
}

/// Cartesian product of `key=v1,v2` specifications.
fn expand_sweep(vary: &[String]) -> Result<Vec<Vec<(String, String)>>> {
    let mut combos: Vec<Vec<(String, String)>> = vec![Vec::new()];
    for spec in vary {
        let (key, values) = spec
            .split_once('=')
            .ok_or_else(|| Error::DomainError(format!("--vary expects KEY=V1,V2,..., found '{spec}'")))?;
        let values: Vec<&str> = values.split(',').map(str::trim).filter(|v| !v.is_empty()).collect();
        if values.is_empty() {
            return Err(Error::DomainError(format!("--vary {key}: no values")));
        }
        combos = combos
            .into_iter()
            .flat_map(|c| {
                values.iter().map(move |v| {
                    let mut c = c.clone();
                    c.push((key.trim().to_string(), v.to_string()));
                    c
                })
            })
            .collect();
    }
    Ok(combos)
}

fn execute(cmd: Command, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Simulate { config, out, set } => {
            let mut cfg = load_config(&config)?;
            apply_overrides(&mut cfg, &set)?;
            simulate_to(&cfg, &out, stdout, stderr)
        }
        Command::Preset { name, out, set } => {
            let mut cfg = preset(&name)?.config;
            apply_overrides(&mut cfg, &set)?;
            simulate_to(&cfg, &out, stdout, stderr)
        }
        Command::ValidateKernel { config, s_max, samples } => {
            let cfg = load_config(&config)?;
            let kernel = cfg.build_kernel()?;
            let s_max = s_max.or(cfg.s_max).unwrap_or_else(|| kernel.default_s_max().min(1e3));
            let report = validate_hypotheses(&kernel, s_max, samples)?;
            let _ = write!(stdout, "{report}");
            Ok(if report.all_passed() { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::CheckCondition { config } => {
            let cfg = load_config(&config)?;
            let sim = cfg.to_sim_config()?;
            let disc = build_discretization(sim.l, sim.n, sim.scheme_order)?;
            let consts = estimate_constants(&disc)?;
            let c = check_small_data_condition(&sim, &consts)?;
            let m_s = sim.m_s_override.unwrap_or(consts.m_s);
            let _ = writeln!(stdout, "holds = {}", c.holds);
            let _ = writeln!(stdout, "lhs = {:e}", c.lhs);
            let _ = writeln!(stdout, "rhs = {:e}", c.rhs);
            let _ = writeln!(stdout, "margin = {:e}", c.margin);
            let _ = writeln!(stdout, "state_norm = {:e}", c.state_norm);
            let _ = writeln!(
                stdout,
                "threshold_norm = {:e}",
                threshold_norm(sim.a0, sim.a1, sim.l, consts.m_p, m_s)
            );
            let _ = writeln!(stdout, "m_p = {:e}", consts.m_p);
            let _ = writeln!(stdout, "m_s = {:e}", m_s);
            Ok(if c.holds { EXIT_OK } else { EXIT_VALIDATION })
        }
        Command::Fit {
            series,
            model,
            config,
            window,
        } => {
            let records = read_series(&series)?;
            let model = FitModel::parse(&model).expect("clap restricts the model");
            let window = window.as_deref().map(parse_window).transpose()?;
            let t: Vec<f64> = records.iter().map(|r| r.t).collect();
            let e: Vec<f64> = records.iter().map(|r| r.e).collect();
            let fit = match model {
                FitModel::Exponential => fit_decay(&t, &e, model, window, None)?,
                FitModel::GeneralizedXi => {
                    let path = config.unwrap_or_else(|| {
                        series.parent().unwrap_or(Path::new(".")).join(CONFIG_FILE)
                    });
                    let kernel = load_config(&path)?.build_kernel()?;
                    let xi = move |s: f64| kernel.xi(s);
                    fit_decay(&t, &e, model, window, Some(&xi))?
                }
            };
            let _ = write!(stdout, "{fit}");
            Ok(EXIT_OK)
        }
        Command::Sweep { config, vary, out } => {
            let base = load_config(&config)?;
            let combos = expand_sweep(&vary)?;
            let mut runs = Vec::with_capacity(combos.len());
            for combo in &combos {
                let mut cfg = base.clone();
                let tag: Vec<String> = combo.iter().map(|(k, v)| format!("{k}={v}")).collect();
                for (k, v) in combo {
                    cfg.set(k, v)?;
                }
                cfg.label = tag.join(",");
                runs.push((out.join(tag.join("_")), cfg));
            }
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(n) = thread_count() {
                pool = pool.num_threads(n);
            }
            let pool = pool.build().map_err(|e| Error::Io(e.to_string()))?;
            let results: Vec<(PathBuf, Result<i32>)> = pool.install(|| {
                runs.par_iter()
                    .map(|(dir, cfg)| {
                        let (mut o, mut e) = (Vec::new(), Vec::new());
                        (dir.clone(), simulate_to(cfg, dir, &mut o, &mut e))
                    })
                    .collect()
            });
            let mut worst = EXIT_OK;
            for (dir, r) in results {
                let code = match r {
                    Ok(c) => c,
                    Err(e) => {
                        let _ = writeln!(stderr, "error: {}: {e}", dir.display());
                        exit_code(&e)
                    }
                };
                let _ = writeln!(stdout, "{} exit={code}", dir.join(SUMMARY_FILE).display());
                worst = worst.max(code);
            }
            Ok(worst)
        }
    }
}
