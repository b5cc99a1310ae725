//! IMEX time stepping of the coupled (u, η) system and the small-data check.
//!
//! Per step, with A = −D3 + a0·D5 − a1·D1:
//!
//! ```text
//! (I − dt/2·A) u^{n+1} = (I + dt/2·A) u^n − dt·(N* + M*) + dt·F(t + dt/2)
//! ```
//!
//! N = ⅓·u∘D1u + ⅓·D1(u∘u) is the skew-symmetric split of u·u_x and M the
//! memory term; both are extrapolated as X* = 3/2·X^n − 1/2·X^{n−1}. The first
//! step replaces the extrapolation with the average of X^n and the value at a
//! predictor solved with frozen explicit terms.

use crate::banded::{BandLu, BandMatrix};
use crate::diagnostics::{EnergyRecord, LyapunovConstants, LyapunovInputs};
use crate::error::{out_of_range, Error, Result};
use crate::history::{init_history, HistoryField, HistoryMode, HistorySpec};
use crate::kernel::MemoryKernel;
use crate::spatial::{build_discretization, estimate_constants, EmbeddingConstants, SpatialDiscretization};
use std::fmt;
use std::sync::Arc;

pub type Profile = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
pub type HistoryProfile = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;
/// Source term F(x, t) added to the right-hand side.
pub type Forcing = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Blow-up threshold relative to ‖U₀‖.
pub const BLOWUP_FACTOR: f64 = 1e6;

#[derive(Clone)]
pub struct SimConfig {
    pub a0: f64,
    pub a1: f64,
    pub l: f64,
    pub n: usize,
    pub scheme_order: usize,
    pub dt: f64,
    pub t_final: f64,
    pub kernel: MemoryKernel,
    /// Memory options; `memory.k` is the derivative order k of the model.
    pub memory: HistorySpec,
    pub u0: Profile,
    /// u₀(x, τ) = u(x, −τ), τ ≥ 0.
    pub u0_history: HistoryProfile,
    pub nonlinear: bool,
    /// When false the memory term is switched off (g ≡ 0).
    pub memory_enabled: bool,
    pub forcing: Option<Forcing>,
    /// Record every `output_stride` steps.
    pub output_stride: usize,
    /// Sobolev constant used by the small-data check instead of coth(L).
    pub m_s_override: Option<f64>,
    pub label: String,
}

impl fmt::Debug for SimConfig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SimConfig")
            .field("label", &self.label)
            .field("a0", &self.a0)
            .field("a1", &self.a1)
            .field("L", &self.l)
            .field("N", &self.n)
            .field("order", &self.scheme_order)
            .field("dt", &self.dt)
            .field("T", &self.t_final)
            .field("kernel", &self.kernel.family())
            .field("memory", &self.memory)
            .field("nonlinear", &self.nonlinear)
            .field("memory_enabled", &self.memory_enabled)
            .finish_non_exhaustive()
    }
}

impl SimConfig {
    pub fn k(&self) -> usize {
        self.memory.k
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.a0 > 0.0 && self.a0.is_finite()) {
            return Err(out_of_range("sim.a0", self.a0, "dispersion coefficient must be positive"));
        }
        if !self.a1.is_finite() {
            return Err(out_of_range("sim.a1", self.a1, "must be finite"));
        }
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(out_of_range("sim.dt", self.dt, "must be positive"));
        }
        if !(self.t_final >= self.dt) {
            return Err(out_of_range("sim.T", self.t_final, "must be at least dt"));
        }
        if self.output_stride == 0 {
            return Err(out_of_range("output.stride", 0.0, "must be at least 1"));
        }
        if self.memory.k > 2 {
            return Err(out_of_range("memory.k", self.memory.k as f64, "must be 0, 1 or 2"));
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        ((self.t_final / self.dt).round() as usize).max(1)
    }

    /// Default step: min(h/(4·max|u₀| + 1), h²/2).
    pub fn default_dt(l: f64, n: usize, u0_max: f64) -> f64 {
        let h = l / (n + 1) as f64;
        (h / (4.0 * u0_max + 1.0)).min(0.5 * h * h)
    }
}

#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    pub u: Vec<f64>,
    pub hist: Option<HistoryField>,
}

/// Verdict of the small-data condition
/// a1·M_P² + ⅔·M_P(M_P+1)·√L·M_S·‖U₀‖ < 5·a0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionCheck {
    pub holds: bool,
    pub lhs: f64,
    pub rhs: f64,
    /// (rhs − lhs)/rhs.
    pub margin: f64,
    pub state_norm: f64,
}

pub fn small_data_condition(a0: f64, a1: f64, l: f64, m_p: f64, m_s: f64, state_norm: f64) -> ConditionCheck {
    let lhs = a1 * m_p * m_p + 2.0 / 3.0 * m_p * (m_p + 1.0) * l.sqrt() * m_s * state_norm;
    let rhs = 5.0 * a0;
    ConditionCheck {
        holds: lhs < rhs,
        lhs,
        rhs,
        margin: (rhs - lhs) / rhs,
        state_norm,
    }
}

/// ‖U₀‖ at which the condition becomes an equality (≤ 0 when a1 alone breaks it).
pub fn threshold_norm(a0: f64, a1: f64, l: f64, m_p: f64, m_s: f64) -> f64 {
    (5.0 * a0 - a1 * m_p * m_p) / (2.0 / 3.0 * m_p * (m_p + 1.0) * l.sqrt() * m_s)
}

/// Evaluates the condition for `config` with ‖U₀‖ = (‖u₀‖² + ‖η⁰‖²_{L_g})^{1/2}.
pub fn check_small_data_condition(config: &SimConfig, constants: &EmbeddingConstants) -> Result<ConditionCheck> {
    let disc = build_discretization(config.l, config.n, config.scheme_order)?;
    let u0 = disc.sample(|x| (config.u0)(x));
    let eta2 = if config.memory_enabled {
        let hist = init_history(&*config.u0_history, &disc, &config.kernel, &config.memory)?;
        hist.memory_norm_sq(&disc)
    } else {
        0.0
    };
    let norm = (disc.dot(&u0, &u0) + eta2).sqrt();
    let m_s = config.m_s_override.unwrap_or(constants.m_s);
    Ok(small_data_condition(config.a0, config.a1, config.l, constants.m_p, m_s, norm))
}

/// Stepper for one run. Owns the discretization, factorized implicit operator
/// and state.
pub struct Simulation {
    cfg: SimConfig,
    disc: SpatialDiscretization,
    explicit_op: BandMatrix,
    implicit_lu: BandLu,
    state: SimState,
    steps_taken: usize,
    previous: Option<(Vec<f64>, Vec<f64>)>,
    blowup_limit: f64,
    initial_norm: f64,
}

/// Per-step diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepInfo {
    /// −⟨ū, N*⟩: discrete energy change due to the nonlinear term.
    pub nonlinear_leak: f64,
}

impl Simulation {
    pub fn new(cfg: SimConfig) -> Result<Self> {
        cfg.validate()?;
        let disc = build_discretization(cfg.l, cfg.n, cfg.scheme_order)?;
        Self::with_discretization(cfg, disc)
    }

    pub fn with_discretization(cfg: SimConfig, disc: SpatialDiscretization) -> Result<Self> {
        cfg.validate()?;
        let a = disc.linear_operator(cfg.a0, cfg.a1);
        let id = BandMatrix::identity(disc.n());
        let explicit_op = id.combine(1.0, &a, 0.5 * cfg.dt);
        let implicit_lu = id.combine(1.0, &a, -0.5 * cfg.dt).factor()?;
        let u = disc.sample(|x| (cfg.u0)(x));
        let hist = if cfg.memory_enabled {
            Some(init_history(&*cfg.u0_history, &disc, &cfg.kernel, &cfg.memory)?)
        } else {
            None
        };
        let eta2 = hist.as_ref().map_or(0.0, |h| h.memory_norm_sq(&disc));
        let initial_norm = (disc.dot(&u, &u) + eta2).sqrt();
        let blowup_limit = if initial_norm > 0.0 {
            BLOWUP_FACTOR * initial_norm
        } else {
            f64::INFINITY
        };
        Ok(Simulation {
            cfg,
            disc,
            explicit_op,
            implicit_lu,
            state: SimState { t: 0.0, u, hist },
            steps_taken: 0,
            previous: None,
            blowup_limit,
            initial_norm,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.cfg
    }

    pub fn discretization(&self) -> &SpatialDiscretization {
        &self.disc
    }

    pub fn state(&self) -> &SimState {
        &self.state
    }

    pub fn steps_taken(&self) -> usize {
        self.steps_taken
    }

    /// ‖U₀‖ in the state space (‖u₀‖² + ‖η⁰‖²_{L_g})^{1/2}.
    pub fn initial_norm(&self) -> f64 {
        self.initial_norm
    }

    pub fn history_mode(&self) -> Option<HistoryMode> {
        self.state.hist.as_ref().map(|h| h.mode())
    }

    fn nonlinear_term(&self, u: &[f64]) -> Vec<f64> {
        if !self.cfg.nonlinear {
            return vec![0.0; u.len()];
        }
        let du = self.disc.d1.matvec(u);
        let sq: Vec<f64> = u.iter().map(|v| v * v).collect();
        let dsq = self.disc.d1.matvec(&sq);
        u.iter()
            .zip(du.iter().zip(&dsq))
            .map(|(v, (a, b))| (v * a + b) / 3.0)
            .collect()
    }

    fn memory_term(&self, hist: &Option<HistoryField>) -> Vec<f64> {
        match hist {
            Some(h) => h.memory_integral(&self.disc),
            None => vec![0.0; self.disc.n()],
        }
    }

    /// CN solve with the given explicit terms over [t, t + dt].
    fn implicit_solve(&self, u: &[f64], nl: &[f64], mem: &[f64]) -> Vec<f64> {
        let dt = self.cfg.dt;
        let mut rhs = self.explicit_op.matvec(u);
        for i in 0..rhs.len() {
            rhs[i] -= dt * (nl[i] + mem[i]);
        }
        if let Some(f) = &self.cfg.forcing {
            let tm = self.state.t + 0.5 * dt;
            for (r, &x) in rhs.iter_mut().zip(self.disc.nodes()) {
                *r += dt * f(x, tm);
            }
        }
        self.implicit_lu.solve_in_place(&mut rhs);
        rhs
    }

    pub fn step(&mut self) -> Result<StepInfo> {
        let dt = self.cfg.dt;
        let nl_n = self.nonlinear_term(&self.state.u);
        let mem_n = self.memory_term(&self.state.hist);
        let (nl_star, mem_star) = match &self.previous {
            Some((nl_p, mem_p)) => (
                nl_n.iter().zip(nl_p).map(|(a, b)| 1.5 * a - 0.5 * b).collect::<Vec<_>>(),
                mem_n.iter().zip(mem_p).map(|(a, b)| 1.5 * a - 0.5 * b).collect::<Vec<_>>(),
            ),
            None => {
                let u_pred = self.implicit_solve(&self.state.u, &nl_n, &mem_n);
                let nl_pred = self.nonlinear_term(&u_pred);
                let mut hist_pred = self.state.hist.clone();
                if let Some(h) = hist_pred.as_mut() {
                    h.advance_coupled(&self.disc, &self.cfg.kernel, &self.state.u, &u_pred, dt, Some(&mem_n))?;
                }
                let mem_pred = self.memory_term(&hist_pred);
                (
                    nl_n.iter().zip(&nl_pred).map(|(a, b)| 0.5 * (a + b)).collect(),
                    mem_n.iter().zip(&mem_pred).map(|(a, b)| 0.5 * (a + b)).collect(),
                )
            }
        };
        let u_new = self.implicit_solve(&self.state.u, &nl_star, &mem_star);

        let norm = self.disc.dot(&u_new, &u_new).sqrt();
        if !norm.is_finite() || norm > self.blowup_limit {
            return Err(Error::BlowupDetected {
                t: self.state.t + dt,
                norm,
                limit: self.blowup_limit,
            });
        }
        let u_bar: Vec<f64> = self.state.u.iter().zip(&u_new).map(|(a, b)| 0.5 * (a + b)).collect();
        let leak = -self.disc.dot(&u_bar, &nl_star);
        if let Some(h) = self.state.hist.as_mut() {
            h.advance_coupled(&self.disc, &self.cfg.kernel, &self.state.u, &u_new, dt, Some(&mem_star))?;
        }
        self.previous = Some((nl_n, mem_n));
        self.state.u = u_new;
        self.steps_taken += 1;
        self.state.t = self.steps_taken as f64 * dt;
        Ok(StepInfo { nonlinear_leak: leak })
    }

    /// Energy record of the current state; `leak` is the nonlinear leak over
    /// the interval ending here.
    pub fn record(&self, leak: f64, lyapunov: Option<&LyapunovConstants>) -> EnergyRecord {
        let u = &self.state.u;
        let u_norm = self.disc.dot(u, u).sqrt();
        let (eta, md) = match &self.state.hist {
            Some(h) => (
                h.memory_norm(&self.disc),
                h.memory_dissipation(&self.disc, &self.cfg.kernel),
            ),
            None => (0.0, 0.0),
        };
        let uxx0 = self.disc.trace_uxx0(u);
        let e = 0.5 * (u_norm * u_norm + eta * eta);
        let f = match lyapunov {
            Some(c) => c.functional(e, self.cfg.kernel.xi(self.state.t), self.disc.x_moment(u)),
            None => f64::NAN,
        };
        EnergyRecord {
            t: self.state.t,
            e,
            f,
            u_norm,
            eta_norm_lg: eta,
            boundary_diss: -0.5 * self.cfg.a0 * uxx0 * uxx0,
            memory_diss: md,
            nonlinear_leak: leak,
            uxx0,
        }
    }
}

/// Output of [`run`].
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub records: Vec<EnergyRecord>,
    pub final_state: SimState,
    /// Set when a step failed; `records` then hold the partial series.
    pub failure: Option<Error>,
    pub condition: ConditionCheck,
    pub constants: EmbeddingConstants,
    pub lyapunov: Option<LyapunovConstants>,
    pub history_mode: Option<HistoryMode>,
    pub dx: f64,
}

/// Runs `config` to T, recording every `output_stride` steps. The small-data
/// condition is evaluated first; a violation is reported, not fatal.
pub fn run(config: &SimConfig) -> Result<RunOutput> {
    let mut sim = Simulation::new(config.clone())?;
    let mut constants = estimate_constants(&sim.disc)?;
    if let Some(m_s) = config.m_s_override {
        constants.m_s = m_s;
    }
    let condition = small_data_condition(
        config.a0,
        config.a1,
        config.l,
        constants.m_p,
        constants.m_s,
        sim.initial_norm(),
    );
    let r0 = sim.record(0.0, None);
    let lyapunov = LyapunovConstants::new(&LyapunovInputs {
        a0: config.a0,
        a1: config.a1,
        l: config.l,
        k: config.k(),
        g0: if config.memory_enabled { config.kernel.g0() } else { 0.0 },
        xi0: config.kernel.xi(0.0),
        m_p: constants.m_p,
        m_s: constants.m_s,
        e0: r0.e,
        x_moment0: sim.disc.x_moment(&sim.state.u),
    })
    .ok();
    let mut records = vec![sim.record(0.0, lyapunov.as_ref())];
    let mut failure = None;
    let mut leak_sum = 0.0;
    let mut since = 0;
    for _ in 0..config.steps() {
        match sim.step() {
            Ok(info) => {
                leak_sum += info.nonlinear_leak;
                since += 1;
                if since == config.output_stride {
                    records.push(sim.record(leak_sum / since as f64, lyapunov.as_ref()));
                    leak_sum = 0.0;
                    since = 0;
                }
            }
            Err(e) => {
                failure = Some(e);
                break;
            }
        }
    }
    if since > 0 && failure.is_none() {
        records.push(sim.record(leak_sum / since as f64, lyapunov.as_ref()));
    }
    Ok(RunOutput {
        records,
        history_mode: sim.history_mode(),
        dx: sim.disc.h(),
        final_state: sim.state,
        failure,
        condition,
        constants,
        lyapunov,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::history::ModeChoice;
    use std::f64::consts::PI;

    fn base(kernel: MemoryKernel) -> SimConfig {
        let l = 2.0 * PI;
        SimConfig {
            a0: 1.0,
            a1: 0.0,
            l,
            n: 64,
            scheme_order: 2,
            dt: 2e-3,
            t_final: 0.2,
            kernel,
            memory: HistorySpec::default(),
            u0: Arc::new(move |x| 0.05 * (x * (l - x)).powi(3) * 64.0 / l.powi(6)),
            u0_history: Arc::new(|_, _| 0.0),
            nonlinear: true,
            memory_enabled: true,
            forcing: None,
            output_stride: 1,
            m_s_override: None,
            label: "test".into(),
        }
    }

    #[test]
    fn zero_is_a_fixed_point() {
        for kernel in [
            MemoryKernel::exponential(1.0, 1.0).unwrap(),
            MemoryKernel::polynomial(1.0, 2.0).unwrap(),
        ] {
            let mut cfg = base(kernel);
            cfg.u0 = Arc::new(|_| 0.0);
            let out = run(&cfg).unwrap();
            assert!(out.failure.is_none());
            assert!(out.records.iter().all(|r| r.e == 0.0));
            assert!(out.final_state.u.iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn runs_are_deterministic() {
        let cfg = base(MemoryKernel::stretched(1.0, 1.0, 0.5).unwrap());
        let a = run(&cfg).unwrap();
        let b = run(&cfg).unwrap();
        assert_eq!(a.records, b.records);
    }

    #[test]
    fn energy_decreases_in_both_memory_modes() {
        for mode in [ModeChoice::Grid, ModeChoice::ExpoOde] {
            let mut cfg = base(MemoryKernel::exponential(1.0, 1.0).unwrap());
            cfg.memory.mode = mode;
            let out = run(&cfg).unwrap();
            let e0 = out.records[0].e;
            for w in out.records.windows(2) {
                assert!(w[1].e <= w[0].e + 1e-10 * (1.0 + e0), "{mode:?} at t={}", w[1].t);
            }
        }
    }

    #[test]
    fn condition_inversion_is_consistent() {
        let (a0, a1, l, mp, ms) = (1.3, 0.2, 5.0, 2.5, 1.1);
        let t = threshold_norm(a0, a1, l, mp, ms);
        let c = small_data_condition(a0, a1, l, mp, ms, t);
        assert!((c.lhs - c.rhs).abs() < 1e-12 * c.rhs);
        assert!(small_data_condition(a0, a1, l, mp, ms, 0.999 * t).holds);
        assert!(!small_data_condition(a0, a1, l, mp, ms, 1.001 * t).holds);
        // a1 = 0: ‖U₀‖* = 15·a0 / (2·M_P(M_P+1)√L·M_S).
        let t0 = threshold_norm(a0, 0.0, l, mp, ms);
        assert!((t0 - 15.0 * a0 / (2.0 * mp * (mp + 1.0) * l.sqrt() * ms)).abs() < 1e-12 * t0);
    }

    #[test]
    fn zero_data_satisfies_condition() {
        let mut cfg = base(MemoryKernel::exponential(1.0, 1.0).unwrap());
        cfg.u0 = Arc::new(|_| 0.0);
        let disc = build_discretization(cfg.l, cfg.n, 2).unwrap();
        let c = check_small_data_condition(&cfg, &estimate_constants(&disc).unwrap()).unwrap();
        assert!(c.holds);
        assert_eq!(c.lhs, 0.0);
    }

    #[test]
    fn blowup_is_detected_with_partial_series() {
        let mut cfg = base(MemoryKernel::exponential(1.0, 1.0).unwrap());
        // Explicit advection far beyond its stability limit.
        cfg.nonlinear = true;
        cfg.dt = 0.05;
        cfg.t_final = 200.0;
        cfg.u0 = Arc::new(|x| 1e3 * (x * (2.0 * PI - x)).powi(3));
        let out = run(&cfg).unwrap();
        assert!(matches!(out.failure, Some(Error::BlowupDetected { .. })), "{:?}", out.failure);
        assert!(!out.records.is_empty());
        assert!(out.final_state.t < cfg.t_final);
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let mut cfg = base(MemoryKernel::exponential(1.0, 1.0).unwrap());
        cfg.a0 = 0.0;
        assert!(matches!(Simulation::new(cfg), Err(Error::ParameterOutOfRange { .. })));
    }
}
