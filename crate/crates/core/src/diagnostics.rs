//! Energy bookkeeping, the Lyapunov functional and decay fits.

use crate::error::{out_of_range, Error, Result};
use crate::history::HistoryField;
use crate::kernel::MemoryKernel;
use crate::quadrature::gauss8_points;
use crate::spatial::SpatialDiscretization;
use std::fmt;

/// One row of the output series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyRecord {
    pub t: f64,
    /// E = ½(‖u‖² + ‖η‖²_{L_g}).
    pub e: f64,
    /// Lyapunov functional; NaN when the construction is undefined.
    pub f: f64,
    pub u_norm: f64,
    pub eta_norm_lg: f64,
    /// −(a0/2)·u_xx(0)².
    pub boundary_diss: f64,
    /// ½∫g′‖∂ᵏη‖².
    pub memory_diss: f64,
    /// Energy change per unit time due to the discrete nonlinear term,
    /// averaged over the steps since the previous record.
    pub nonlinear_leak: f64,
    pub uxx0: f64,
}

pub const CSV_HEADER: &str = "t,E,F,u_norm,eta_norm_Lg,boundary_diss,memory_diss,nonlinear_leak,uxx0";

impl EnergyRecord {
    pub fn csv_row(&self) -> String {
        let v = [
            self.t,
            self.e,
            self.f,
            self.u_norm,
            self.eta_norm_lg,
            self.boundary_diss,
            self.memory_diss,
            self.nonlinear_leak,
            self.uxx0,
        ];
        v.iter().map(|x| format!("{x:.17e}")).collect::<Vec<_>>().join(",")
    }

    pub fn parse_csv_row(line: &str) -> Option<EnergyRecord> {
        let v: Vec<f64> = line
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .ok()?;
        if v.len() != 9 {
            return None;
        }
        Some(EnergyRecord {
            t: v[0],
            e: v[1],
            f: v[2],
            u_norm: v[3],
            eta_norm_lg: v[4],
            boundary_diss: v[5],
            memory_diss: v[6],
            nonlinear_leak: v[7],
            uxx0: v[8],
        })
    }
}

/// E = ½(‖u‖² + ‖η‖²_{L_g}).
pub fn energy(u: &[f64], hist: Option<&HistoryField>, disc: &SpatialDiscretization) -> f64 {
    let eta2 = hist.map_or(0.0, |h| h.memory_norm_sq(disc));
    0.5 * (disc.dot(u, u) + eta2)
}

// ── Dissipation identity ────────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct IdentityResidual {
    /// (E_{n+1} − E_n)/Δt minus the midpoint average of the dissipation
    /// terms and the recorded nonlinear leak.
    pub residuals: Vec<f64>,
    pub max: f64,
    /// Σ |r_n|·Δt_n.
    pub l1: f64,
}

pub fn identity_residual(series: &[EnergyRecord]) -> Result<IdentityResidual> {
    if series.len() < 3 {
        return Err(Error::SeriesTooShort {
            len: series.len(),
            min: 3,
        });
    }
    let mut residuals = Vec::with_capacity(series.len() - 1);
    let mut l1 = 0.0;
    for w in series.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let dt = b.t - a.t;
        let rhs = 0.5 * (a.boundary_diss + b.boundary_diss) + 0.5 * (a.memory_diss + b.memory_diss) + b.nonlinear_leak;
        let r = (b.e - a.e) / dt - rhs;
        l1 += r.abs() * dt;
        residuals.push(r);
    }
    let max = residuals.iter().fold(0.0_f64, |m, r| m.max(r.abs()));
    Ok(IdentityResidual { residuals, max, l1 })
}

// ── Lyapunov functional ─────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovInputs {
    pub a0: f64,
    pub a1: f64,
    pub l: f64,
    pub k: usize,
    pub g0: f64,
    pub xi0: f64,
    pub m_p: f64,
    pub m_s: f64,
    pub e0: f64,
    /// ∫ x·u₀² dx.
    pub x_moment0: f64,
}

/// Constants of F(t) = μE + C1·ξ(t)·∫x u² and the chained envelope constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovConstants {
    /// D at ε = 0 with ‖U₀‖ = √(2E(0)).
    pub d0: f64,
    pub eps: f64,
    pub d: f64,
    pub c_eps: f64,
    pub c1: f64,
    pub c2: f64,
    pub mu: f64,
    pub xi0: f64,
    pub l: f64,
    /// Per-unit-ξ contraction rate λ0 = 2/(M_P²[μ + 2L·C1·ξ(0)]).
    pub lambda0: f64,
    /// C3 = max{C1·∫x u₀², 2C2·E(0)}.
    pub c3: f64,
    /// c1 = 2·max{1, M_P^{2−k}·C3}.
    pub c1_chain: f64,
    /// c̃ = max{F(0), c1·μ/2}/μ.
    pub c_tilde: f64,
}

impl LyapunovConstants {
    pub fn new(p: &LyapunovInputs) -> Result<Self> {
        let sqrt_l = p.l.sqrt();
        let d0 = 5.0 * p.a0
            - 2.0 / 3.0 * p.m_s * sqrt_l * p.m_p * (p.m_p + 1.0) * (2.0 * p.e0).sqrt()
            - p.a1 * p.m_p * p.m_p;
        if !(d0 > 0.0) {
            return Err(Error::NonpositiveD { d: d0 });
        }
        let eps = d0 / 8.0;
        let d = d0 - 2.0 * eps;
        let c_eps = match p.k {
            0 => p.l * p.l * p.m_p * p.m_p * p.g0 / (4.0 * eps),
            1 => p.g0 * (p.m_p + p.m_p * p.m_p) / (2.0 * eps),
            2 => 2.0 * p.g0 * (p.m_p + p.l * p.l) / eps,
            _ => return Err(out_of_range("memory.k", p.k as f64, "must be 0, 1 or 2")),
        };
        let c1 = 1.0 / d;
        let c2 = 2.0 * c_eps / d;
        let mu = 2.0 * (c2 + 1.0 / (p.m_p * p.m_p));
        let lambda0 = 2.0 / (p.m_p * p.m_p * (mu + 2.0 * p.l * c1 * p.xi0));
        let c3 = (c1 * p.x_moment0).max(2.0 * c2 * p.e0);
        let c1_chain = 2.0 * (1.0_f64).max(p.m_p.powi(2 - p.k as i32) * c3);
        let f0 = mu * p.e0 + c1 * p.xi0 * p.x_moment0;
        let c_tilde = f0.max(c1_chain * mu / 2.0) / mu;
        Ok(LyapunovConstants {
            d0,
            eps,
            d,
            c_eps,
            c1,
            c2,
            mu,
            xi0: p.xi0,
            l: p.l,
            lambda0,
            c3,
            c1_chain,
            c_tilde,
        })
    }

    /// F = μE + C1·ξ(t)·∫x u².
    pub fn functional(&self, e: f64, xi_t: f64, x_moment: f64) -> f64 {
        self.mu * e + self.c1 * xi_t * x_moment
    }

    /// (μ, μ + 2L·C1·ξ(0)): F lies between these multiples of E.
    pub fn equivalence_bounds(&self) -> (f64, f64) {
        (self.mu, self.mu + 2.0 * self.l * self.c1 * self.xi0)
    }

    /// Relative amount by which F leaves [μE, (μ + 2L·C1·ξ(0))E]; ≤ 0 inside.
    pub fn equivalence_excess(&self, r: &EnergyRecord) -> f64 {
        let (lo, hi) = self.equivalence_bounds();
        if r.e == 0.0 {
            return if r.f == 0.0 { 0.0 } else { f64::INFINITY };
        }
        ((lo * r.e - r.f) / (lo * r.e)).max((r.f - hi * r.e) / (hi * r.e))
    }
}

// ── The h(t, s) correction ──────────────────────────────────────────

/// h(t, s) = t² + t + ‖∫₀^{s−t} ∂ᵏu₀(·, τ) dτ‖ (squared norm when `squared`).
///
/// The range is written ∫₀^{t−s} in the statement of the bound; it is the
/// same integral up to sign, with u₀ only evaluated on its domain τ ≥ 0.
pub fn h_correction(
    t: f64,
    s: f64,
    u0_history: &dyn Fn(f64, f64) -> f64,
    disc: &SpatialDiscretization,
    k: usize,
    squared: bool,
) -> Result<f64> {
    if t > s {
        return Err(Error::DomainError(format!("h(t, s) needs t <= s, got t = {t}, s = {s}")));
    }
    if t < 0.0 {
        return Err(Error::DomainError(format!("h(t, s) needs t >= 0, got {t}")));
    }
    let v = history_integral(u0_history, disc, s - t);
    let n2 = disc.dk_norm_sq(&v, k);
    Ok(t * t + t + if squared { n2 } else { n2.sqrt() })
}

/// ∫₀^r u₀(·, τ) dτ on the interior nodes.
fn history_integral(u0: &dyn Fn(f64, f64) -> f64, disc: &SpatialDiscretization, r: f64) -> Vec<f64> {
    let pieces = (r.ceil() as usize).clamp(1, 10_000);
    let hp = r / pieces as f64;
    disc.nodes()
        .iter()
        .map(|&x| {
            (0..pieces)
                .map(|p| {
                    gauss8_points(p as f64 * hp, (p + 1) as f64 * hp)
                        .map(|(tau, w)| w * u0(x, tau))
                        .sum::<f64>()
                })
                .sum()
        })
        .collect()
}

/// Generalized envelope c̃·e^{−cX(t)}·(1 + ∫₀^t e^{cX(σ)} ξ(σ) H(σ) dσ) with
/// X = ∫ξ, c = λ0 and H(σ) = ∫_σ^∞ g(s) h(σ, s) ds, evaluated at the record
/// times. A diagnostic bound only.
pub fn generalized_envelope(
    records: &[EnergyRecord],
    kernel: &MemoryKernel,
    lyap: &LyapunovConstants,
    u0_history: &dyn Fn(f64, f64) -> f64,
    disc: &SpatialDiscretization,
    k: usize,
    squared: bool,
) -> Vec<f64> {
    let s_max = kernel.default_s_max().min(1e7);
    // Φ(r) = ‖∫₀^r ∂ᵏu₀‖ on a geometric r-grid.
    let mut r_grid = vec![0.0];
    let mut r = 1e-3;
    while r < s_max {
        r_grid.push(r);
        r *= 1.1;
    }
    r_grid.push(s_max);
    let mut acc = vec![0.0; disc.n()];
    let mut phi = vec![0.0];
    for w in r_grid.windows(2) {
        for (i, &x) in disc.nodes().iter().enumerate() {
            acc[i] += gauss8_points(w[0], w[1]).map(|(t, wt)| wt * u0_history(x, t)).sum::<f64>();
        }
        let n2 = disc.dk_norm_sq(&acc, k);
        phi.push(if squared { n2 } else { n2.sqrt() });
    }
    let big_h = |sigma: f64| -> f64 {
        let poly = (sigma * sigma + sigma) * kernel.tail(sigma);
        let hist: f64 = r_grid
            .windows(2)
            .zip(phi.windows(2))
            .map(|(rw, pw)| {
                0.5 * (rw[1] - rw[0]) * (kernel.g(sigma + rw[0]) * pw[0] + kernel.g(sigma + rw[1]) * pw[1])
            })
            .sum();
        poly + hist
    };
    let c = lyap.lambda0;
    let mut out = Vec::with_capacity(records.len());
    let mut integral = 0.0;
    let mut prev: Option<(f64, f64)> = None;
    for rec in records {
        let x = kernel.xi_integral(rec.t);
        let integrand = (c * x).exp() * kernel.xi(rec.t) * big_h(rec.t);
        if let Some((t0, f0)) = prev {
            integral += 0.5 * (rec.t - t0) * (f0 + integrand);
        }
        prev = Some((rec.t, integrand));
        out.push(lyap.c_tilde * (-c * x).exp() * (1.0 + integral));
    }
    out
}

// ── Decay fits ──────────────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FitModel {
    /// log E ≈ log c̃ − c·t.
    Exponential,
    /// log E ≈ log c̃ − c·∫₀^t ξ.
    GeneralizedXi,
}

impl FitModel {
    pub fn name(self) -> &'static str {
        match self {
            FitModel::Exponential => "exp",
            FitModel::GeneralizedXi => "xi",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exp" | "exponential" => Some(FitModel::Exponential),
            "xi" | "generalized" => Some(FitModel::GeneralizedXi),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayFit {
    pub model: FitModel,
    /// Fitted c (∞ for an identically zero series).
    pub rate: f64,
    /// Fitted c̃.
    pub amplitude: f64,
    pub r_squared: f64,
    pub window: (f64, f64),
    /// Samples in the window with E > 1.05 × envelope.
    pub envelope_violations: usize,
    pub points: usize,
    /// Set when the series is identically zero on the window.
    pub all_zero: bool,
}

impl fmt::Display for DecayFit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "fit.model = {}", self.model.name())?;
        writeln!(f, "fit.window = {:e} {:e}", self.window.0, self.window.1)?;
        writeln!(f, "fit.points = {}", self.points)?;
        writeln!(f, "fit.c = {:e}", self.rate)?;
        writeln!(f, "fit.c_tilde = {:e}", self.amplitude)?;
        writeln!(f, "fit.r_squared = {:.12}", self.r_squared)?;
        writeln!(f, "fit.envelope_violations = {}", self.envelope_violations)?;
        writeln!(f, "fit.all_zero = {}", self.all_zero)
    }
}

/// Samples with E below this fraction of the series maximum are treated as
/// unresolved: the energy has decayed into the double-precision floor.
pub const RESOLUTION_FLOOR: f64 = 1e-13;

/// Least-squares fit of log E against t (Exponential) or ∫₀^t ξ
/// (GeneralizedXi, cumulative trapezoid over the sample times). The window
/// defaults to [T/4, T]; only the resolved prefix of E inside it is used,
/// i.e. samples up to the first with E ≤ [`RESOLUTION_FLOOR`]·max E.
pub fn fit_decay(
    t: &[f64],
    e: &[f64],
    model: FitModel,
    window: Option<(f64, f64)>,
    xi: Option<&dyn Fn(f64) -> f64>,
) -> Result<DecayFit> {
    if t.len() != e.len() {
        return Err(Error::DimensionMismatch {
            expected: t.len(),
            found: e.len(),
        });
    }
    if t.len() < 3 {
        return Err(Error::SeriesTooShort { len: t.len(), min: 3 });
    }
    let t_end = *t.last().unwrap();
    let window = window.unwrap_or((0.25 * t_end, t_end));
    let abscissa: Vec<f64> = match model {
        FitModel::Exponential => t.to_vec(),
        FitModel::GeneralizedXi => {
            let xi = xi.ok_or_else(|| Error::DomainError("the xi model needs a rate function".into()))?;
            let mut x = Vec::with_capacity(t.len());
            let mut acc = 0.0;
            let mut prev = (t[0], xi(t[0]));
            x.push(0.0);
            // The first sample sits at t[0]; integrate from 0 if it does not.
            if t[0] > 0.0 {
                acc = 0.5 * t[0] * (xi(0.0) + prev.1);
                x[0] = acc;
            }
            for &ti in &t[1..] {
                let v = xi(ti);
                acc += 0.5 * (ti - prev.0) * (v + prev.1);
                prev = (ti, v);
                x.push(acc);
            }
            x
        }
    };
    let idx: Vec<usize> = (0..t.len()).filter(|&i| t[i] >= window.0 && t[i] <= window.1).collect();
    if idx.iter().all(|&i| e[i] == 0.0) {
        return Ok(DecayFit {
            model,
            rate: f64::INFINITY,
            amplitude: 0.0,
            r_squared: 0.0,
            window,
            envelope_violations: 0,
            points: idx.len(),
            all_zero: true,
        });
    }
    let floor = RESOLUTION_FLOOR * e.iter().fold(0.0_f64, |m, &v| m.max(v));
    let used: Vec<usize> = idx.iter().copied().take_while(|&i| e[i] > floor).collect();
    if used.len() < 3 {
        return Err(Error::SeriesTooShort { len: used.len(), min: 3 });
    }
    let nf = used.len() as f64;
    let mx = used.iter().map(|&i| abscissa[i]).sum::<f64>() / nf;
    let my = used.iter().map(|&i| e[i].ln()).sum::<f64>() / nf;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for &i in &used {
        let (dx, dy) = (abscissa[i] - mx, e[i].ln() - my);
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(Error::DomainError("fit abscissa is constant on the window".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = used
        .iter()
        .map(|&i| (e[i].ln() - intercept - slope * abscissa[i]).powi(2))
        .sum();
    let r_squared = if syy > 0.0 { (1.0 - ss_res / syy).clamp(0.0, 1.0) } else { 1.0 };
    let amplitude = intercept.exp();
    let envelope_violations = used
        .iter()
        .filter(|&&i| e[i] > 1.05 * amplitude * (slope * abscissa[i]).exp())
        .count();
    Ok(DecayFit {
        model,
        rate: -slope,
        amplitude,
        r_squared,
        window,
        envelope_violations,
        points: used.len(),
        all_zero: false,
    })
}

/// [`fit_decay`] over a record series.
pub fn fit_records(
    records: &[EnergyRecord],
    model: FitModel,
    window: Option<(f64, f64)>,
    xi: Option<&dyn Fn(f64) -> f64>,
) -> Result<DecayFit> {
    let t: Vec<f64> = records.iter().map(|r| r.t).collect();
    let e: Vec<f64> = records.iter().map(|r| r.e).collect();
    fit_decay(&t, &e, model, window, xi)
}
