//! Flat `section.key = value` configuration files.
//!
//! `#` starts a comment; blank lines are ignored; every key may appear at most
//! once. Optional quantities take the value `auto`.

use crate::error::{out_of_range, Error, Result};
use crate::history::{HistorySpec, ModeChoice};
use crate::kernel::{make_kernel, KernelFamily, KernelParams, MemoryKernel};
use crate::solver::{HistoryProfile, Profile, SimConfig};
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::sync::Arc;

/// Spatial shape of the initial datum, before scaling by `init.amplitude`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialProfile {
    /// sin³(πx/L).
    Sine,
    /// sin⁸(πx/L).
    Bump,
    /// 64·x³(L−x)³/L⁶ (peak value 1).
    Poly33,
    Zero,
}

impl InitialProfile {
    pub fn name(self) -> &'static str {
        match self {
            InitialProfile::Sine => "sine",
            InitialProfile::Bump => "bump",
            InitialProfile::Poly33 => "poly33",
            InitialProfile::Zero => "zero",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "sine" => Some(InitialProfile::Sine),
            "bump" => Some(InitialProfile::Bump),
            "poly33" => Some(InitialProfile::Poly33),
            "zero" => Some(InitialProfile::Zero),
            _ => None,
        }
    }

    pub fn eval(self, x: f64, l: f64) -> f64 {
        match self {
            InitialProfile::Sine => (PI * x / l).sin().powi(3),
            InitialProfile::Bump => (PI * x / l).sin().powi(8),
            InitialProfile::Poly33 => 64.0 * (x * (l - x)).powi(3) / l.powi(6),
            InitialProfile::Zero => 0.0,
        }
    }
}

/// Past values u₀(x, τ) = u(x, −τ) in terms of the initial datum u₀(x).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryPreset {
    /// u₀(x, τ) = 0: the system starts from rest.
    Zero,
    /// u₀(x, τ) = u₀(x).
    Constant,
    /// u₀(x, τ) = u₀(x)·e^{−τ}.
    Decaying,
}

impl HistoryPreset {
    pub fn name(self) -> &'static str {
        match self {
            HistoryPreset::Zero => "zero",
            HistoryPreset::Constant => "constant",
            HistoryPreset::Decaying => "decaying",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "zero" => Some(HistoryPreset::Zero),
            "constant" => Some(HistoryPreset::Constant),
            "decaying" => Some(HistoryPreset::Decaying),
            _ => None,
        }
    }
}

/// Parsed configuration with every default filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Config {
    pub kernel_family: KernelFamily,
    pub kernel: KernelParams,
    /// Nodes and values of a tabulated kernel.
    pub table_s: Vec<f64>,
    pub table_g: Vec<f64>,
    pub l: f64,
    pub n: usize,
    pub order: usize,
    pub k: usize,
    pub s_nodes: usize,
    pub s_max: Option<f64>,
    pub mode: ModeChoice,
    pub memory_enabled: bool,
    pub a0: f64,
    pub a1: f64,
    pub dt: Option<f64>,
    pub t_final: f64,
    pub nonlinear: bool,
    pub u0: InitialProfile,
    pub amplitude: f64,
    pub history: HistoryPreset,
    pub stride: usize,
    pub m_s: Option<f64>,
    pub label: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            kernel_family: KernelFamily::Exponential,
            kernel: KernelParams::default(),
            table_s: Vec::new(),
            table_g: Vec::new(),
            l: 2.0 * PI,
            n: 128,
            order: 2,
            k: 0,
            s_nodes: HistorySpec::default().s_nodes,
            s_max: None,
            mode: ModeChoice::Auto,
            memory_enabled: true,
            a0: 1.0,
            a1: 0.0,
            dt: None,
            t_final: 50.0,
            nonlinear: true,
            u0: InitialProfile::Poly33,
            amplitude: 0.04,
            history: HistoryPreset::Zero,
            stride: 10,
            m_s: None,
            label: "run".into(),
        }
    }
}

const KEYS: &[&str] = &[
    "kernel.family",
    "kernel.d1",
    "kernel.q1",
    "kernel.p1",
    "kernel.c0",
    "kernel.table_s",
    "kernel.table_g",
    "space.L",
    "space.N",
    "space.order",
    "memory.k",
    "memory.s_nodes",
    "memory.s_max",
    "memory.mode",
    "memory.enabled",
    "sim.a0",
    "sim.a1",
    "sim.dt",
    "sim.T",
    "sim.nonlinear",
    "init.u0",
    "init.amplitude",
    "init.history",
    "output.stride",
    "output.label",
    "constants.m_s",
];

struct Entry {
    line: usize,
    value: String,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        line,
        message: message.into(),
    }
}

fn real(key: &str, e: &Entry) -> Result<f64> {
    e.value
        .parse::<f64>()
        .map_err(|_| parse_err(e.line, format!("{key}: expected a number, found '{}'", e.value)))
}

fn count(key: &str, e: &Entry) -> Result<usize> {
    e.value
        .parse::<usize>()
        .map_err(|_| parse_err(e.line, format!("{key}: expected a non-negative integer, found '{}'", e.value)))
}

fn boolean(key: &str, e: &Entry) -> Result<bool> {
    match e.value.as_str() {
        "true" | "on" | "yes" => Ok(true),
        "false" | "off" | "no" => Ok(false),
        v => Err(parse_err(e.line, format!("{key}: expected true or false, found '{v}'"))),
    }
}

fn optional_real(key: &str, e: &Entry) -> Result<Option<f64>> {
    if e.value == "auto" {
        Ok(None)
    } else {
        real(key, e).map(Some)
    }
}

fn list(key: &str, e: &Entry) -> Result<Vec<f64>> {
    e.value
        .split_whitespace()
        .map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse_err(e.line, format!("{key}: expected numbers, found '{t}'")))
        })
        .collect()
}

/// Parses configuration text, fills defaults and validates the result.
pub fn parse_config(text: &str) -> Result<Config> {
    let mut entries: BTreeMap<&str, Entry> = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = raw.split('#').next().unwrap_or("").trim();
        if body.is_empty() {
            continue;
        }
        let (key, value) = body
            .split_once('=')
            .ok_or_else(|| parse_err(line, format!("expected 'section.key = value', found '{body}'")))?;
        let (key, value) = (key.trim(), value.trim());
        let Some(&known) = KEYS.iter().find(|&&k| k == key) else {
            return Err(Error::UnknownKey {
                line,
                key: key.to_string(),
            });
        };
        if value.is_empty() {
            return Err(parse_err(line, format!("{key}: missing value")));
        }
        if let Some(first) = entries.get(known) {
            return Err(parse_err(
                line,
                format!("duplicate key '{key}' (first set on line {}, again on line {line})", first.line),
            ));
        }
        entries.insert(
            known,
            Entry {
                line,
                value: value.to_string(),
            },
        );
    }

    let mut c = Config::default();
    let a0 = entries.get("sim.a0").ok_or(Error::MissingRequired("sim.a0"))?;
    c.a0 = real("sim.a0", a0)?;
    for (&key, e) in &entries {
        match key {
            "kernel.family" => {
                c.kernel_family = KernelFamily::parse(&e.value)
                    .ok_or_else(|| parse_err(e.line, format!("unknown kernel family '{}'", e.value)))?
            }
            "kernel.d1" => c.kernel.d1 = real(key, e)?,
            "kernel.q1" => c.kernel.q1 = real(key, e)?,
            "kernel.p1" => c.kernel.p1 = real(key, e)?,
            "kernel.c0" => c.kernel.c0 = optional_real(key, e)?,
            "kernel.table_s" => c.table_s = list(key, e)?,
            "kernel.table_g" => c.table_g = list(key, e)?,
            "space.L" => c.l = real(key, e)?,
            "space.N" => c.n = count(key, e)?,
            "space.order" => c.order = count(key, e)?,
            "memory.k" => c.k = count(key, e)?,
            "memory.s_nodes" => c.s_nodes = count(key, e)?,
            "memory.s_max" => c.s_max = optional_real(key, e)?,
            "memory.mode" => {
                c.mode = ModeChoice::parse(&e.value)
                    .ok_or_else(|| parse_err(e.line, format!("unknown memory mode '{}'", e.value)))?
            }
            "memory.enabled" => c.memory_enabled = boolean(key, e)?,
            "sim.a0" => {}
            "sim.a1" => c.a1 = real(key, e)?,
            "sim.dt" => c.dt = optional_real(key, e)?,
            "sim.T" => c.t_final = real(key, e)?,
            "sim.nonlinear" => c.nonlinear = boolean(key, e)?,
            "init.u0" => {
                c.u0 = InitialProfile::parse(&e.value)
                    .ok_or_else(|| parse_err(e.line, format!("unknown initial profile '{}'", e.value)))?
            }
            "init.amplitude" => c.amplitude = real(key, e)?,
            "init.history" => {
                c.history = HistoryPreset::parse(&e.value)
                    .ok_or_else(|| parse_err(e.line, format!("unknown history preset '{}'", e.value)))?
            }
            "output.stride" => c.stride = count(key, e)?,
            "output.label" => c.label = e.value.clone(),
            "constants.m_s" => c.m_s = optional_real(key, e)?,
            _ => unreachable!("key list and match arms disagree: {key}"),
        }
    }
    c.validate()?;
    Ok(c)
}

pub fn load_config(path: &Path) -> Result<Config> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    parse_config(&text)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "auto".to_string(), |x| format!("{x:?}"))
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(" ")
}

impl fmt::Display for Config {
    /// Emits every key; parsing the output reproduces `self`.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "kernel.family = {}", self.kernel_family.name())?;
        writeln!(f, "kernel.d1 = {:?}", self.kernel.d1)?;
        writeln!(f, "kernel.q1 = {:?}", self.kernel.q1)?;
        writeln!(f, "kernel.p1 = {:?}", self.kernel.p1)?;
        writeln!(f, "kernel.c0 = {}", fmt_opt(self.kernel.c0))?;
        if !self.table_s.is_empty() {
            writeln!(f, "kernel.table_s = {}", fmt_list(&self.table_s))?;
            writeln!(f, "kernel.table_g = {}", fmt_list(&self.table_g))?;
        }
        writeln!(f, "space.L = {:?}", self.l)?;
        writeln!(f, "space.N = {}", self.n)?;
        writeln!(f, "space.order = {}", self.order)?;
        writeln!(f, "memory.k = {}", self.k)?;
        writeln!(f, "memory.s_nodes = {}", self.s_nodes)?;
        writeln!(f, "memory.s_max = {}", fmt_opt(self.s_max))?;
        writeln!(f, "memory.mode = {}", self.mode.name())?;
        writeln!(f, "memory.enabled = {}", self.memory_enabled)?;
        writeln!(f, "sim.a0 = {:?}", self.a0)?;
        writeln!(f, "sim.a1 = {:?}", self.a1)?;
        writeln!(f, "sim.dt = {}", fmt_opt(self.dt))?;
        writeln!(f, "sim.T = {:?}", self.t_final)?;
        writeln!(f, "sim.nonlinear = {}", self.nonlinear)?;
        writeln!(f, "init.u0 = {}", self.u0.name())?;
        writeln!(f, "init.amplitude = {:?}", self.amplitude)?;
        writeln!(f, "init.history = {}", self.history.name())?;
        writeln!(f, "output.stride = {}", self.stride)?;
        writeln!(f, "output.label = {}", self.label)?;
        writeln!(f, "constants.m_s = {}", fmt_opt(self.m_s))
    }
}

impl Config {
    /// Range checks that do not need a discretization, plus kernel construction.
    pub fn validate(&self) -> Result<()> {
        self.build_kernel()?;
        if !(self.a0 > 0.0 && self.a0.is_finite()) {
            return Err(out_of_range("sim.a0", self.a0, "dispersion coefficient must be positive"));
        }
        if !(self.l > 0.0 && self.l.is_finite()) {
            return Err(out_of_range("space.L", self.l, "domain length must be positive"));
        }
        if self.order != 2 && self.order != 4 {
            return Err(out_of_range("space.order", self.order as f64, "scheme order must be 2 or 4"));
        }
        if self.k > 2 {
            return Err(out_of_range("memory.k", self.k as f64, "must be 0, 1 or 2"));
        }
        if self.s_nodes < 2 {
            return Err(out_of_range("memory.s_nodes", self.s_nodes as f64, "need at least 2 history cells"));
        }
        if let Some(s) = self.s_max {
            if !(s > 0.0 && s.is_finite()) {
                return Err(out_of_range("memory.s_max", s, "must be positive"));
            }
        }
        if let Some(dt) = self.dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(out_of_range("sim.dt", dt, "must be positive"));
            }
        }
        if !(self.t_final > 0.0 && self.t_final.is_finite()) {
            return Err(out_of_range("sim.T", self.t_final, "must be positive"));
        }
        if !self.amplitude.is_finite() {
            return Err(out_of_range("init.amplitude", self.amplitude, "must be finite"));
        }
        if self.stride == 0 {
            return Err(out_of_range("output.stride", 0.0, "must be at least 1"));
        }
        if let Some(m) = self.m_s {
            if !(m > 0.0 && m.is_finite()) {
                return Err(out_of_range("constants.m_s", m, "must be positive"));
            }
        }
        Ok(())
    }

    pub fn build_kernel(&self) -> Result<MemoryKernel> {
        if self.kernel_family == KernelFamily::Tabulated {
            let k = MemoryKernel::tabulated(&self.table_s, &self.table_g)?;
            return match self.kernel.c0 {
                Some(c0) => k.with_c0(c0),
                None => Ok(k),
            };
        }
        make_kernel(self.kernel_family, &self.kernel)
    }

    pub fn initial_profile(&self) -> Profile {
        let (shape, a, l) = (self.u0, self.amplitude, self.l);
        Arc::new(move |x| a * shape.eval(x, l))
    }

    pub fn history_profile(&self) -> HistoryProfile {
        let (shape, a, l) = (self.u0, self.amplitude, self.l);
        match self.history {
            HistoryPreset::Zero => Arc::new(|_, _| 0.0),
            HistoryPreset::Constant => Arc::new(move |x, _| a * shape.eval(x, l)),
            HistoryPreset::Decaying => Arc::new(move |x, tau| a * shape.eval(x, l) * (-tau).exp()),
        }
    }

    /// The step used when `sim.dt = auto`.
    pub fn resolved_dt(&self) -> f64 {
        self.dt
            .unwrap_or_else(|| SimConfig::default_dt(self.l, self.n, self.amplitude.abs() * self.u0_peak()))
    }

    fn u0_peak(&self) -> f64 {
        match self.u0 {
            InitialProfile::Zero => 0.0,
            _ => 1.0,
        }
    }

    pub fn to_sim_config(&self) -> Result<SimConfig> {
        self.validate()?;
        Ok(SimConfig {
            a0: self.a0,
            a1: self.a1,
            l: self.l,
            n: self.n,
            scheme_order: self.order,
            dt: self.resolved_dt(),
            t_final: self.t_final,
            kernel: self.build_kernel()?,
            memory: HistorySpec {
                k: self.k,
                s_nodes: self.s_nodes,
                s_max: self.s_max,
                mode: self.mode,
                first_width: None,
            },
            u0: self.initial_profile(),
            u0_history: self.history_profile(),
            nonlinear: self.nonlinear,
            memory_enabled: self.memory_enabled,
            forcing: None,
            output_stride: self.stride,
            m_s_override: self.m_s,
            label: self.label.clone(),
        })
    }

    /// Assigns `key = value` as if it appeared in a file, then revalidates.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let mut text = self.to_string();
        let prefix = format!("{key} =");
        text = text
            .lines()
            .filter(|l| !l.starts_with(&prefix))
            .collect::<Vec<_>>()
            .join("\n");
        text.push_str(&format!("\n{key} = {value}\n"));
        *self = parse_config(&text)?;
        Ok(())
    }
}
