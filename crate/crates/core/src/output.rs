//! Run artifacts: `series.csv`, `summary.txt` and `config.resolved`.

use crate::config::Config;
use crate::diagnostics::{
    fit_records, generalized_envelope, identity_residual, DecayFit, EnergyRecord, FitModel, CSV_HEADER,
};
use crate::error::{Error, Result};
use crate::kernel::KernelFamily;
use crate::solver::{RunOutput, SimConfig};
use crate::spatial::build_discretization;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

pub const SERIES_FILE: &str = "series.csv";
pub const SUMMARY_FILE: &str = "summary.txt";
pub const CONFIG_FILE: &str = "config.resolved";

pub fn series_to_csv(records: &[EnergyRecord]) -> String {
    let mut s = String::with_capacity(records.len() * 220);
    s.push_str(CSV_HEADER);
    s.push('\n');
    for r in records {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    s
}

pub fn parse_series(text: &str) -> Result<Vec<EnergyRecord>> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_HEADER => {}
        _ => {
            return Err(Error::Parse {
                line: 1,
                message: format!("expected header '{CSV_HEADER}'"),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            EnergyRecord::parse_csv_row(l).ok_or_else(|| Error::Parse {
                line: i + 1,
                message: "expected nine numeric columns".into(),
            })
        })
        .collect()
}

pub fn read_series(path: &Path) -> Result<Vec<EnergyRecord>> {
    let text = fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_series(&text)
}

/// The fit model matching the kernel's decay class.
pub fn natural_model(family: KernelFamily) -> FitModel {
    match family {
        KernelFamily::Exponential => FitModel::Exponential,
        _ => FitModel::GeneralizedXi,
    }
}

/// Fits the run's energy with the model suited to its kernel.
pub fn fit_run(cfg: &SimConfig, records: &[EnergyRecord], model: FitModel) -> Result<DecayFit> {
    let kernel = cfg.kernel.clone();
    let xi = move |s: f64| kernel.xi(s);
    fit_records(records, model, None, Some(&xi))
}

/// Structured `key = value` report of a finished (or failed) run.
pub fn summary_text(cfg: &SimConfig, out: &RunOutput) -> String {
    let mut s = String::new();
    let w = &mut s;
    let _ = writeln!(w, "label = {}", cfg.label);
    let _ = match &out.failure {
        None => writeln!(w, "status = ok"),
        Some(e) => writeln!(w, "status = failed: {e}"),
    };
    let _ = writeln!(w, "kernel.family = {}", cfg.kernel.family().name());
    let _ = writeln!(w, "kernel.g0 = {:e}", cfg.kernel.g0());
    let _ = writeln!(w, "kernel.c0 = {:e}", cfg.kernel.c0());
    let _ = writeln!(
        w,
        "memory.mode = {}",
        out.history_mode.map_or("off", |m| m.name())
    );
    let _ = writeln!(w, "sim.dt = {:e}", cfg.dt);
    let _ = writeln!(w, "sim.steps = {}", cfg.steps());
    let _ = writeln!(w, "records = {}", out.records.len());
    let c = &out.condition;
    let _ = writeln!(w, "condition.holds = {}", c.holds);
    let _ = writeln!(w, "condition.lhs = {:e}", c.lhs);
    let _ = writeln!(w, "condition.rhs = {:e}", c.rhs);
    let _ = writeln!(w, "condition.margin = {:e}", c.margin);
    let _ = writeln!(w, "condition.state_norm = {:e}", c.state_norm);
    let _ = writeln!(w, "constants.m_p = {:e}", out.constants.m_p);
    let _ = writeln!(w, "constants.m_s = {:e}", cfg.m_s_override.unwrap_or(out.constants.m_s));
    match &out.lyapunov {
        Some(l) => {
            let (lo, hi) = l.equivalence_bounds();
            let _ = writeln!(w, "lyapunov.d = {:e}", l.d);
            let _ = writeln!(w, "lyapunov.c1 = {:e}", l.c1);
            let _ = writeln!(w, "lyapunov.c2 = {:e}", l.c2);
            let _ = writeln!(w, "lyapunov.mu = {:e}", l.mu);
            let _ = writeln!(w, "lyapunov.upper = {:e}", hi);
            let _ = writeln!(w, "lyapunov.lower = {:e}", lo);
            let _ = writeln!(w, "lyapunov.lambda0 = {:e}", l.lambda0);
            let _ = writeln!(w, "lyapunov.c3 = {:e}", l.c3);
            let _ = writeln!(w, "lyapunov.c1_chain = {:e}", l.c1_chain);
            let _ = writeln!(w, "lyapunov.c_tilde = {:e}", l.c_tilde);
            let worst = out
                .records
                .iter()
                .map(|r| l.equivalence_excess(r))
                .fold(f64::NEG_INFINITY, f64::max);
            let _ = writeln!(w, "lyapunov.equivalence_excess = {worst:e}");
        }
        None => {
            let _ = writeln!(w, "lyapunov = undefined (D <= 0)");
        }
    }
    if let (Some(first), Some(last)) = (out.records.first(), out.records.last()) {
        let _ = writeln!(w, "energy.initial = {:e}", first.e);
        let _ = writeln!(w, "energy.final = {:e}", last.e);
        let inc = out
            .records
            .windows(2)
            .map(|p| p[1].e - p[0].e)
            .fold(f64::NEG_INFINITY, f64::max);
        let _ = writeln!(w, "energy.max_increase = {inc:e}");
    }
    match identity_residual(&out.records) {
        Ok(r) => {
            let _ = writeln!(w, "identity.max_residual = {:e}", r.max);
            let _ = writeln!(w, "identity.l1_residual = {:e}", r.l1);
        }
        Err(e) => {
            let _ = writeln!(w, "identity = unavailable ({e})");
        }
    }
    match fit_run(cfg, &out.records, natural_model(cfg.kernel.family())) {
        Ok(f) => {
            let _ = write!(w, "{f}");
        }
        Err(e) => {
            let _ = writeln!(w, "fit = unavailable ({e})");
        }
    }
    if let (Some(l), Ok(disc)) = (&out.lyapunov, build_discretization(cfg.l, cfg.n, cfg.scheme_order)) {
        for (tag, squared) in [("unsquared", false), ("squared", true)] {
            let bound = generalized_envelope(
                &out.records,
                &cfg.kernel,
                l,
                &*cfg.u0_history,
                &disc,
                cfg.k(),
                squared,
            );
            let violations = out.records.iter().zip(&bound).filter(|(r, b)| r.e > **b).count();
            let verdict = if violations == 0 { "holds" } else { "violated" };
            let _ = writeln!(w, "envelope.{tag} = {verdict} ({violations} violations)");
        }
    }
    s
}

/// Writes the three run artifacts into `dir`, creating it if needed.
pub fn write_run(dir: &Path, config: &Config, sim: &SimConfig, out: &RunOutput) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(SERIES_FILE), series_to_csv(&out.records))?;
    fs::write(dir.join(SUMMARY_FILE), summary_text(sim, out))?;
    fs::write(dir.join(CONFIG_FILE), config.to_string())?;
    Ok(())
}
