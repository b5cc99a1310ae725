//! C ABI for the Kawahara laboratory.
//!
//! Objects are exposed as opaque handles created by `kw_*_new`/`kw_*_parse`
//! and released by the matching `kw_*_free`. Every fallible call returns a
//! [`KwStatus`]; on failure the message is kept per thread and can be read
//! with [`kw_last_error_message`]. Panics never cross the boundary: they are
//! caught and reported as [`KwStatus::Panic`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use kawahara::config::{parse_config, Config};
use kawahara::diagnostics::EnergyRecord;
use kawahara::kernel::{validate_hypotheses, MemoryKernel};
use kawahara::output::write_run;
use kawahara::presets::preset;
use kawahara::solver::{check_small_data_condition, run, Simulation};
use kawahara::spatial::{build_discretization, estimate_constants};
use kawahara::Error;
use std::cell::RefCell;
use std::ffi::{c_char, CStr};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

/// Result of every fallible call. `Ok` is zero.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KwStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    ParameterOutOfRange = 3,
    GridTooCoarse = 4,
    EigSolveFailure = 5,
    DimensionMismatch = 6,
    TailTooFat = 7,
    ModeMismatch = 8,
    LinearSolveFailure = 9,
    BlowupDetected = 10,
    NonpositiveD = 11,
    DomainError = 12,
    SeriesTooShort = 13,
    AllZeroSeries = 14,
    Parse = 15,
    UnknownKey = 16,
    MissingRequired = 17,
    Io = 18,
    /// The kernel failed a hypothesis check or the small-data condition fails.
    ValidationFailed = 19,
    BufferTooSmall = 20,
    Panic = 99,
}

impl From<&Error> for KwStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::ParameterOutOfRange { .. } => KwStatus::ParameterOutOfRange,
            Error::GridTooCoarse { .. } => KwStatus::GridTooCoarse,
            Error::EigSolveFailure { .. } => KwStatus::EigSolveFailure,
            Error::DimensionMismatch { .. } => KwStatus::DimensionMismatch,
            Error::TailTooFat { .. } => KwStatus::TailTooFat,
            Error::ModeMismatch(_) => KwStatus::ModeMismatch,
            Error::LinearSolveFailure { .. } => KwStatus::LinearSolveFailure,
            Error::BlowupDetected { .. } => KwStatus::BlowupDetected,
            Error::NonpositiveD { .. } => KwStatus::NonpositiveD,
            Error::DomainError(_) => KwStatus::DomainError,
            Error::SeriesTooShort { .. } => KwStatus::SeriesTooShort,
            Error::AllZeroSeries => KwStatus::AllZeroSeries,
            Error::Parse { .. } => KwStatus::Parse,
            Error::UnknownKey { .. } => KwStatus::UnknownKey,
            Error::MissingRequired(_) => KwStatus::MissingRequired,
            Error::Io(_) => KwStatus::Io,
        }
    }
}

/// One row of the energy series. `f` is NaN when the Lyapunov functional is
/// not available (always the case for records read off a simulation handle).
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KwEnergyRecord {
    pub t: f64,
    pub e: f64,
    pub f: f64,
    pub u_norm: f64,
    pub eta_norm_lg: f64,
    pub boundary_diss: f64,
    pub memory_diss: f64,
    pub nonlinear_leak: f64,
    pub uxx0: f64,
}

impl From<EnergyRecord> for KwEnergyRecord {
    fn from(r: EnergyRecord) -> Self {
        KwEnergyRecord {
            t: r.t,
            e: r.e,
            f: r.f,
            u_norm: r.u_norm,
            eta_norm_lg: r.eta_norm_lg,
            boundary_diss: r.boundary_diss,
            memory_diss: r.memory_diss,
            nonlinear_leak: r.nonlinear_leak,
            uxx0: r.uxx0,
        }
    }
}

/// Small-data condition verdict.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KwCondition {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    pub margin: f64,
    pub state_norm: f64,
}

/// Parsed run configuration.
pub struct KwConfig(Config);

/// Memory kernel g.
pub struct KwKernel(MemoryKernel);

/// A stepping simulation.
pub struct KwSimulation(Simulation);

thread_local! {
    static LAST_ERROR: RefCell<String> = const { RefCell::new(String::new()) };
}

fn set_error(message: String) {
    LAST_ERROR.with(|e| *e.borrow_mut() = message);
}

fn fail(status: KwStatus, message: impl Into<String>) -> KwStatus {
    set_error(message.into());
    status
}

fn fail_with(e: &Error) -> KwStatus {
    fail(KwStatus::from(e), e.to_string())
}

/// Runs `f`, converting panics into [`KwStatus::Panic`].
fn guard(f: impl FnOnce() -> KwStatus) -> KwStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => {
            if status == KwStatus::Ok {
                set_error(String::new());
            }
            status
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            fail(KwStatus::Panic, format!("panic: {msg}"))
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, KwStatus> {
    if p.is_null() {
        return Err(fail(KwStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| fail(KwStatus::InvalidUtf8, format!("{what} is not valid UTF-8")))
}

macro_rules! deref {
    ($p:expr, $what:literal) => {
        match $p.as_ref() {
            Some(v) => v,
            None => return fail(KwStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! deref_mut {
    ($p:expr, $what:literal) => {
        match $p.as_mut() {
            Some(v) => v,
            None => return fail(KwStatus::NullPointer, concat!($what, " is null")),
        }
    };
}

macro_rules! try_kw {
    ($e:expr) => {
        match $e {
            Ok(v) => v,
            Err(e) => return fail_with(&e),
        }
    };
}

unsafe fn emit<T>(out: *mut *mut T, value: T) -> KwStatus {
    if out.is_null() {
        return fail(KwStatus::NullPointer, "output handle is null");
    }
    *out = Box::into_raw(Box::new(value));
    KwStatus::Ok
}

// ── Errors ──────────────────────────────────────────────────────────

/// Copies the calling thread's last error message, NUL-terminated, into
/// `buf` (truncating to `len − 1` bytes). Returns the full message length in
/// bytes, excluding the terminator; pass `buf = NULL` to query it.
///
/// # Safety
/// `buf` must be null or valid for `len` bytes.
#[no_mangle]
pub unsafe extern "C" fn kw_last_error_message(buf: *mut c_char, len: usize) -> usize {
    LAST_ERROR.with(|e| {
        let msg = e.borrow();
        if !buf.is_null() && len > 0 {
            let n = msg.len().min(len - 1);
            ptr::copy_nonoverlapping(msg.as_ptr(), buf.cast::<u8>(), n);
            *buf.add(n) = 0;
        }
        msg.len()
    })
}

/// Static, NUL-terminated name of a status code.
#[no_mangle]
pub extern "C" fn kw_status_name(status: KwStatus) -> *const c_char {
    let s: &'static CStr = match status {
        KwStatus::Ok => c"ok",
        KwStatus::NullPointer => c"null pointer",
        KwStatus::InvalidUtf8 => c"invalid utf-8",
        KwStatus::ParameterOutOfRange => c"parameter out of range",
        KwStatus::GridTooCoarse => c"grid too coarse",
        KwStatus::EigSolveFailure => c"eigensolve failure",
        KwStatus::DimensionMismatch => c"dimension mismatch",
        KwStatus::TailTooFat => c"kernel tail too fat",
        KwStatus::ModeMismatch => c"mode mismatch",
        KwStatus::LinearSolveFailure => c"linear solve failure",
        KwStatus::BlowupDetected => c"blow-up detected",
        KwStatus::NonpositiveD => c"nonpositive D",
        KwStatus::DomainError => c"domain error",
        KwStatus::SeriesTooShort => c"series too short",
        KwStatus::AllZeroSeries => c"all-zero series",
        KwStatus::Parse => c"parse error",
        KwStatus::UnknownKey => c"unknown key",
        KwStatus::MissingRequired => c"missing required key",
        KwStatus::Io => c"i/o error",
        KwStatus::ValidationFailed => c"validation failed",
        KwStatus::BufferTooSmall => c"buffer too small",
        KwStatus::Panic => c"panic",
    };
    s.as_ptr()
}

// ── Configuration ───────────────────────────────────────────────────

/// Parses `key = value` configuration text.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kw_config_parse(text: *const c_char, out: *mut *mut KwConfig) -> KwStatus {
    guard(|| {
        let text = match str_arg(text, "text") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let cfg = try_kw!(parse_config(text));
        emit(out, KwConfig(cfg))
    })
}

/// Configuration of a named preset (`expo`, `poly`, `stretched`).
///
/// # Safety
/// `name` must be a NUL-terminated string; `out` must be valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kw_config_preset(name: *const c_char, out: *mut *mut KwConfig) -> KwStatus {
    guard(|| {
        let name = match str_arg(name, "name") {
            Ok(t) => t,
            Err(s) => return s,
        };
        let p = try_kw!(preset(name));
        emit(out, KwConfig(p.config))
    })
}

/// Overrides one key, as a `key = value` line would.
///
/// # Safety
/// `cfg` must be a live handle; `key` and `value` NUL-terminated strings.
#[no_mangle]
pub unsafe extern "C" fn kw_config_set(cfg: *mut KwConfig, key: *const c_char, value: *const c_char) -> KwStatus {
    guard(|| {
        let cfg = deref_mut!(cfg, "config");
        let (key, value) = match (str_arg(key, "key"), str_arg(value, "value")) {
            (Ok(k), Ok(v)) => (k, v),
            (Err(s), _) | (_, Err(s)) => return s,
        };
        try_kw!(cfg.0.set(key, value));
        KwStatus::Ok
    })
}

/// Writes the fully resolved configuration text into `buf`, NUL-terminated.
/// `*written` receives the text length excluding the terminator, also when
/// the buffer is too small.
///
/// # Safety
/// `cfg` must be a live handle; `buf` null or valid for `len` bytes;
/// `written` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kw_config_emit(
    cfg: *const KwConfig,
    buf: *mut c_char,
    len: usize,
    written: *mut usize,
) -> KwStatus {
    guard(|| {
        let cfg = deref!(cfg, "config");
        let written = deref_mut!(written, "written");
        let text = cfg.0.to_string();
        *written = text.len();
        if buf.is_null() || len <= text.len() {
            return fail(KwStatus::BufferTooSmall, format!("need {} bytes", text.len() + 1));
        }
        ptr::copy_nonoverlapping(text.as_ptr(), buf.cast::<u8>(), text.len());
        *buf.add(text.len()) = 0;
        KwStatus::Ok
    })
}

/// Evaluates the small-data condition for the configured initial state.
/// Returns [`KwStatus::ValidationFailed`] (with `out` filled) when it fails.
///
/// # Safety
/// `cfg` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kw_config_check_condition(cfg: *const KwConfig, out: *mut KwCondition) -> KwStatus {
    guard(|| {
        let cfg = deref!(cfg, "config");
        let out = deref_mut!(out, "out");
        let sim = try_kw!(cfg.0.to_sim_config());
        let disc = try_kw!(build_discretization(sim.l, sim.n, sim.scheme_order));
        let constants = try_kw!(estimate_constants(&disc));
        let c = try_kw!(check_small_data_condition(&sim, &constants));
        *out = KwCondition {
            holds: c.holds,
            lhs: c.lhs,
            rhs: c.rhs,
            margin: c.margin,
            state_norm: c.state_norm,
        };
        if c.holds {
            KwStatus::Ok
        } else {
            fail(KwStatus::ValidationFailed, format!("small-data condition fails (margin {:e})", c.margin))
        }
    })
}

/// Runs the configuration to completion and writes `series.csv`,
/// `summary.txt` and `config.resolved` into `dir`. A run that stops early
/// still writes its partial series and returns the stopping error.
///
/// # Safety
/// `cfg` must be a live handle; `dir` a NUL-terminated path.
#[no_mangle]
pub unsafe extern "C" fn kw_config_run(cfg: *const KwConfig, dir: *const c_char) -> KwStatus {
    guard(|| {
        let cfg = deref!(cfg, "config");
        let dir = match str_arg(dir, "dir") {
            Ok(d) => d,
            Err(s) => return s,
        };
        let sim = try_kw!(cfg.0.to_sim_config());
        let out = try_kw!(run(&sim));
        try_kw!(write_run(Path::new(dir), &cfg.0, &sim, &out));
        match &out.failure {
            Some(e) => fail_with(e),
            None => KwStatus::Ok,
        }
    })
}

/// # Safety
/// `cfg` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kw_config_free(cfg: *mut KwConfig) {
    if !cfg.is_null() {
        drop(Box::from_raw(cfg));
    }
}

// ── Kernel ──────────────────────────────────────────────────────────

/// Builds the memory kernel described by `cfg`.
///
/// # Safety
/// `cfg` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kw_kernel_from_config(cfg: *const KwConfig, out: *mut *mut KwKernel) -> KwStatus {
    guard(|| {
        let cfg = deref!(cfg, "config");
        let k = try_kw!(cfg.0.build_kernel());
        emit(out, KwKernel(k))
    })
}

/// Tabulated kernel from `len` samples (monotone cubic interpolation).
///
/// # Safety
/// `s` and `g` must be valid for `len` reads; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kw_kernel_tabulated(
    s: *const f64,
    g: *const f64,
    len: usize,
    out: *mut *mut KwKernel,
) -> KwStatus {
    guard(|| {
        if s.is_null() || g.is_null() {
            return fail(KwStatus::NullPointer, "table is null");
        }
        let s = std::slice::from_raw_parts(s, len);
        let g = std::slice::from_raw_parts(g, len);
        let k = try_kw!(MemoryKernel::tabulated(s, g));
        emit(out, KwKernel(k))
    })
}

/// g(s), g′(s) and ξ(s); any output pointer may be null.
///
/// # Safety
/// `kernel` must be a live handle; non-null outputs valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kw_kernel_eval(
    kernel: *const KwKernel,
    s: f64,
    g: *mut f64,
    dg: *mut f64,
    xi: *mut f64,
) -> KwStatus {
    guard(|| {
        let k = &deref!(kernel, "kernel").0;
        if !(s >= 0.0) {
            return fail(KwStatus::DomainError, format!("s = {s} must be nonnegative"));
        }
        if let Some(g) = g.as_mut() {
            *g = k.g(s);
        }
        if let Some(dg) = dg.as_mut() {
            *dg = k.dg(s);
        }
        if let Some(xi) = xi.as_mut() {
            *xi = k.xi(s);
        }
        KwStatus::Ok
    })
}

/// g₀ = ∫₀^∞ g(s) ds.
///
/// # Safety
/// `kernel` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kw_kernel_g0(kernel: *const KwKernel) -> f64 {
    kernel.as_ref().map_or(f64::NAN, |k| k.0.g0())
}

/// Samples the kernel hypotheses on `samples` points of [0, s_max]. Returns
/// [`KwStatus::ValidationFailed`] naming the first failing check.
///
/// # Safety
/// `kernel` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kw_kernel_validate(kernel: *const KwKernel, s_max: f64, samples: usize) -> KwStatus {
    guard(|| {
        let k = &deref!(kernel, "kernel").0;
        let report = try_kw!(validate_hypotheses(k, s_max, samples));
        let status = match report.failures().next() {
            None => KwStatus::Ok,
            Some(c) => fail(
                KwStatus::ValidationFailed,
                match c.witness {
                    Some(w) => format!("{} fails at s = {w:e}: {}", c.name, c.detail),
                    None => format!("{} fails: {}", c.name, c.detail),
                },
            ),
        };
        status
    })
}

/// # Safety
/// `kernel` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kw_kernel_free(kernel: *mut KwKernel) {
    if !kernel.is_null() {
        drop(Box::from_raw(kernel));
    }
}

// ── Simulation ──────────────────────────────────────────────────────

/// Sets up a simulation at t = 0 from `cfg`.
///
/// # Safety
/// `cfg` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kw_simulation_new(cfg: *const KwConfig, out: *mut *mut KwSimulation) -> KwStatus {
    guard(|| {
        let cfg = deref!(cfg, "config");
        let sim = try_kw!(cfg.0.to_sim_config());
        let sim = try_kw!(Simulation::new(sim));
        emit(out, KwSimulation(sim))
    })
}

/// Advances `steps` time steps. On failure the state stays at the last
/// successful step.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kw_simulation_step(sim: *mut KwSimulation, steps: usize) -> KwStatus {
    guard(|| {
        let sim = deref_mut!(sim, "simulation");
        for _ in 0..steps {
            try_kw!(sim.0.step());
        }
        KwStatus::Ok
    })
}

/// Energy record of the current state (`f` and `nonlinear_leak` are NaN).
///
/// # Safety
/// `sim` must be a live handle; `out` valid for a write.
#[no_mangle]
pub unsafe extern "C" fn kw_simulation_record(sim: *const KwSimulation, out: *mut KwEnergyRecord) -> KwStatus {
    guard(|| {
        let sim = deref!(sim, "simulation");
        let out = deref_mut!(out, "out");
        *out = sim.0.record(f64::NAN, None).into();
        KwStatus::Ok
    })
}

/// Number of interior nodes N.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kw_simulation_nodes(sim: *const KwSimulation) -> usize {
    sim.as_ref().map_or(0, |s| s.0.state().u.len())
}

/// Current time t.
///
/// # Safety
/// `sim` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn kw_simulation_time(sim: *const KwSimulation) -> f64 {
    sim.as_ref().map_or(f64::NAN, |s| s.0.state().t)
}

/// Copies u at the N interior nodes into `buf`.
///
/// # Safety
/// `sim` must be a live handle; `buf` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn kw_simulation_copy_u(sim: *const KwSimulation, buf: *mut f64, len: usize) -> KwStatus {
    guard(|| {
        let sim = deref!(sim, "simulation");
        if buf.is_null() {
            return fail(KwStatus::NullPointer, "buffer is null");
        }
        let u = &sim.0.state().u;
        if len < u.len() {
            return fail(KwStatus::BufferTooSmall, format!("need {} values", u.len()));
        }
        ptr::copy_nonoverlapping(u.as_ptr(), buf, u.len());
        KwStatus::Ok
    })
}

/// # Safety
/// `sim` must be null or a handle not yet freed.
#[no_mangle]
pub unsafe extern "C" fn kw_simulation_free(sim: *mut KwSimulation) {
    if !sim.is_null() {
        drop(Box::from_raw(sim));
    }
}
