//! Memory kernels g = −f′, their rate functions ξ, and hypothesis checks.
//!
//! Three closed-form families are supported, plus tabulated data:
//!
//! | family      | g(s)                       | ξ(s)                     |
//! |-------------|----------------------------|--------------------------|
//! | exponential | d1·e^{−q1 s}               | q1                       |
//! | polynomial  | d1·(1+s)^{−q1}, q1 > 1     | q1/(1+s)                 |
//! | stretched   | d1·e^{−q1 (1+s)^{p1}}      | q1·p1·(1+s)^{p1−1}       |
//!
//! For each family g′ = −ξ·g holds identically. Tabulated kernels are
//! interpolated with a monotone cubic and extrapolated by a power law.

use crate::error::{out_of_range, Error, Result};
use crate::quadrature::{gauss8, geometric_panels};
use std::fmt;

/// Ratio g(S_max)/g(0) below which the kernel tail is discarded.
pub const TAIL_RATIO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    Exponential,
    Polynomial,
    StretchedExponential,
    Tabulated,
}

impl KernelFamily {
    pub fn name(self) -> &'static str {
        match self {
            KernelFamily::Exponential => "exponential",
            KernelFamily::Polynomial => "polynomial",
            KernelFamily::StretchedExponential => "stretched",
            KernelFamily::Tabulated => "tabulated",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "exponential" | "expo" => Some(KernelFamily::Exponential),
            "polynomial" | "poly" => Some(KernelFamily::Polynomial),
            "stretched" | "stretched-exponential" => Some(KernelFamily::StretchedExponential),
            "tabulated" => Some(KernelFamily::Tabulated),
            _ => None,
        }
    }
}

impl fmt::Display for KernelFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Family parameters. `c0` overrides the analytic default when set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelParams {
    pub d1: f64,
    pub q1: f64,
    pub p1: f64,
    pub c0: Option<f64>,
}

impl Default for KernelParams {
    fn default() -> Self {
        KernelParams {
            d1: 1.0,
            q1: 1.0,
            p1: 0.5,
            c0: None,
        }
    }
}

/// Declared form of ξ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiForm {
    Constant(f64),
    Reciprocal { q1: f64 },
    Stretched { q1: f64, p1: f64 },
    /// Running minimum of −g′/g over the interpolant.
    Tabulated,
}

#[derive(Debug, Clone)]
enum Shape {
    Exponential { d1: f64, q1: f64 },
    Polynomial { d1: f64, q1: f64 },
    Stretched { d1: f64, q1: f64, p1: f64 },
    Tabulated(Table),
}

#[derive(Debug, Clone)]
pub struct MemoryKernel {
    family: KernelFamily,
    shape: Shape,
    g0: f64,
    g0_reach: f64,
    c0: f64,
}

/// Builds a kernel from family parameters, enforcing the integrability
/// constraints of each family.
pub fn make_kernel(family: KernelFamily, params: &KernelParams) -> Result<MemoryKernel> {
    let KernelParams { d1, q1, p1, c0 } = *params;
    if !(d1 > 0.0 && d1.is_finite()) {
        return Err(out_of_range("kernel.d1", d1, "amplitude must be positive"));
    }
    let shape = match family {
        KernelFamily::Exponential => {
            if !(q1 > 0.0 && q1.is_finite()) {
                return Err(out_of_range("kernel.q1", q1, "exponential rate must be positive"));
            }
            Shape::Exponential { d1, q1 }
        }
        KernelFamily::Polynomial => {
            if !(q1 > 1.0 && q1.is_finite()) {
                return Err(out_of_range(
                    "kernel.q1",
                    q1,
                    "polynomial kernels need q1 > 1, otherwise g is not integrable and g0 = f(0) diverges",
                ));
            }
            Shape::Polynomial { d1, q1 }
        }
        KernelFamily::StretchedExponential => {
            if !(q1 > 0.0 && q1.is_finite()) {
                return Err(out_of_range("kernel.q1", q1, "stretched rate must be positive"));
            }
            if !(p1 > 0.0 && p1 < 1.0) {
                return Err(out_of_range("kernel.p1", p1, "stretch exponent must lie in (0, 1)"));
            }
            Shape::Stretched { d1, q1, p1 }
        }
        KernelFamily::Tabulated => {
            return Err(Error::DomainError(
                "tabulated kernels are built with MemoryKernel::tabulated".into(),
            ))
        }
    };
    let mut k = MemoryKernel::from_shape(family, shape);
    if let Some(c0) = c0 {
        k = k.with_c0(c0)?;
    }
    Ok(k)
}

impl MemoryKernel {
    pub fn exponential(d1: f64, q1: f64) -> Result<Self> {
        make_kernel(KernelFamily::Exponential, &KernelParams { d1, q1, ..Default::default() })
    }

    pub fn polynomial(d1: f64, q1: f64) -> Result<Self> {
        make_kernel(KernelFamily::Polynomial, &KernelParams { d1, q1, ..Default::default() })
    }

    pub fn stretched(d1: f64, q1: f64, p1: f64) -> Result<Self> {
        make_kernel(
            KernelFamily::StretchedExponential,
            &KernelParams { d1, q1, p1, c0: None },
        )
    }

    /// Kernel from samples of g at increasing abscissae starting at 0.
    /// Divergent or sign-changing data is accepted; `validate_hypotheses`
    /// reports the defects.
    pub fn tabulated(s: &[f64], g: &[f64]) -> Result<Self> {
        let table = Table::new(s, g)?;
        Ok(Self::from_shape(KernelFamily::Tabulated, Shape::Tabulated(table)))
    }

    fn from_shape(family: KernelFamily, shape: Shape) -> Self {
        let mut k = MemoryKernel {
            family,
            shape,
            g0: 0.0,
            g0_reach: f64::INFINITY,
            c0: 0.0,
        };
        match &k.shape {
            Shape::Exponential { d1, q1 } => {
                k.g0 = d1 / q1;
                k.c0 = *q1;
            }
            Shape::Polynomial { d1, q1 } => {
                k.g0 = d1 / (q1 - 1.0);
                k.c0 = *q1;
            }
            Shape::Stretched { q1, p1, .. } => {
                let r = geometric_panels(|s| k.g(s), 80);
                k.g0 = if r.converged { r.value } else { f64::INFINITY };
                k.g0_reach = r.reach;
                k.c0 = q1 * p1;
            }
            Shape::Tabulated(t) => {
                let r = geometric_panels(|s| t.g(s), 60);
                k.g0 = if r.converged { r.value } else { f64::INFINITY };
                k.g0_reach = r.reach;
                k.c0 = t.c0;
            }
        }
        k
    }

    /// Overrides c0 (must not be smaller than the tightest valid value).
    pub fn with_c0(mut self, c0: f64) -> Result<Self> {
        if !(c0 > 0.0 && c0.is_finite()) {
            return Err(out_of_range("kernel.c0", c0, "must be positive"));
        }
        self.c0 = c0;
        Ok(self)
    }

    pub fn family(&self) -> KernelFamily {
        self.family
    }

    /// (d1, q1, p1); zeros for tabulated kernels, p1 = 0 unless stretched.
    pub fn parameters(&self) -> (f64, f64, f64) {
        match self.shape {
            Shape::Exponential { d1, q1 } | Shape::Polynomial { d1, q1 } => (d1, q1, 0.0),
            Shape::Stretched { d1, q1, p1 } => (d1, q1, p1),
            Shape::Tabulated(_) => (0.0, 0.0, 0.0),
        }
    }

    /// g0 = ∫₀^∞ g = f(0); infinite if the quadrature does not settle.
    pub fn g0(&self) -> f64 {
        self.g0
    }

    pub fn c0(&self) -> f64 {
        self.c0
    }

    pub fn xi_form(&self) -> XiForm {
        match self.shape {
            Shape::Exponential { q1, .. } => XiForm::Constant(q1),
            Shape::Polynomial { q1, .. } => XiForm::Reciprocal { q1 },
            Shape::Stretched { q1, p1, .. } => XiForm::Stretched { q1, p1 },
            Shape::Tabulated(_) => XiForm::Tabulated,
        }
    }

    /// The rate q1 when the kernel is a pure exponential.
    pub fn exponential_rate(&self) -> Option<f64> {
        match self.shape {
            Shape::Exponential { q1, .. } => Some(q1),
            _ => None,
        }
    }

    /// ln g(s) for the closed-form families (finite wherever g > 0 analytically,
    /// even where g itself underflows).
    pub fn ln_g(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Exponential { d1, q1 } => d1.ln() - q1 * s,
            Shape::Polynomial { d1, q1 } => d1.ln() - q1 * s.ln_1p(),
            Shape::Stretched { d1, q1, p1 } => d1.ln() - q1 * (1.0 + s).powf(*p1),
            Shape::Tabulated(t) => t.g(s).ln(),
        }
    }

    pub fn g(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Exponential { d1, q1 } => d1 * (-q1 * s).exp(),
            Shape::Polynomial { d1, q1 } => d1 * (1.0 + s).powf(-q1),
            Shape::Stretched { d1, q1, p1 } => d1 * (-q1 * (1.0 + s).powf(*p1)).exp(),
            Shape::Tabulated(t) => t.g(s),
        }
    }

    /// g′(s).
    pub fn dg(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Tabulated(t) => t.dg(s),
            _ => -self.xi(s) * self.g(s),
        }
    }

    /// f(s) = ∫_s^∞ g.
    pub fn f(&self, s: f64) -> f64 {
        self.tail(s)
    }

    pub fn xi(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Exponential { q1, .. } => *q1,
            Shape::Polynomial { q1, .. } => q1 / (1.0 + s),
            Shape::Stretched { q1, p1, .. } => q1 * p1 * (1.0 + s).powf(p1 - 1.0),
            Shape::Tabulated(t) => t.xi(s),
        }
    }

    pub fn dxi(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Exponential { .. } => 0.0,
            Shape::Polynomial { q1, .. } => -q1 / ((1.0 + s) * (1.0 + s)),
            Shape::Stretched { q1, p1, .. } => q1 * p1 * (p1 - 1.0) * (1.0 + s).powf(p1 - 2.0),
            Shape::Tabulated(t) => t.dxi(s),
        }
    }

    /// ∫₀^t ξ.
    pub fn xi_integral(&self, t: f64) -> f64 {
        match &self.shape {
            Shape::Exponential { q1, .. } => q1 * t,
            Shape::Polynomial { q1, .. } => q1 * t.ln_1p(),
            Shape::Stretched { q1, p1, .. } => q1 * ((1.0 + t).powf(*p1) - 1.0),
            Shape::Tabulated(t_) => {
                let n = (t.ceil() as usize).max(1) * 4;
                let h = t / n as f64;
                (0..n)
                    .map(|i| gauss8(i as f64 * h, (i + 1) as f64 * h, |s| t_.xi(s)))
                    .sum()
            }
        }
    }

    /// ∫_s^∞ g.
    pub fn tail(&self, s: f64) -> f64 {
        match &self.shape {
            Shape::Exponential { d1, q1 } => d1 / q1 * (-q1 * s).exp(),
            Shape::Polynomial { d1, q1 } => d1 / (q1 - 1.0) * (1.0 + s).powf(1.0 - q1),
            _ => {
                if s == 0.0 {
                    return self.g0;
                }
                let r = geometric_panels(|x| self.g(s + x), 80);
                if r.converged {
                    r.value
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    /// ∫_a^b g, accurate for narrow cells far into the tail.
    pub fn cell_weight(&self, a: f64, b: f64) -> f64 {
        match &self.shape {
            Shape::Exponential { d1, q1 } => d1 / q1 * (-q1 * a).exp() * -(-q1 * (b - a)).exp_m1(),
            Shape::Polynomial { d1, q1 } => {
                let r = ((b - a) / (1.0 + a)).ln_1p();
                d1 / (q1 - 1.0) * (1.0 + a).powf(1.0 - q1) * -((1.0 - q1) * r).exp_m1()
            }
            _ => gauss8(a, b, |s| self.g(s)),
        }
    }

    /// Smallest S with g(S) ≤ 1e-12·g(0) (closed form for the three families).
    pub fn default_s_max(&self) -> f64 {
        let l = (1.0 / TAIL_RATIO).ln();
        match &self.shape {
            Shape::Exponential { q1, .. } => l / q1,
            Shape::Polynomial { q1, .. } => (l / q1).exp() - 1.0,
            Shape::Stretched { q1, p1, .. } => (1.0 + l / q1).powf(1.0 / p1) - 1.0,
            Shape::Tabulated(t) => t.tail_cutoff(self.g(0.0) * TAIL_RATIO),
        }
    }

    /// g(S_max)/g(0).
    pub fn tail_ratio(&self, s_max: f64) -> f64 {
        self.g(s_max) / self.g(0.0)
    }
}

// ── Hypothesis validation ───────────────────────────────────────────

#[derive(Debug, Clone, PartialEq)]
pub struct HypothesisCheck {
    pub name: &'static str,
    pub passed: bool,
    /// First sampled s where the check fails.
    pub witness: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub family: KernelFamily,
    pub c0: f64,
    /// Largest −g′/g observed on the samples (tightest c0 seen).
    pub c0_observed: f64,
    pub g0: f64,
    pub checks: Vec<HypothesisCheck>,
}

impl ValidationReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&HypothesisCheck> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> impl Iterator<Item = &HypothesisCheck> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "family = {}", self.family)?;
        writeln!(f, "g0 = {:e}", self.g0)?;
        writeln!(f, "c0 = {:e}", self.c0)?;
        writeln!(f, "c0_observed = {:e}", self.c0_observed)?;
        for c in &self.checks {
            let verdict = if c.passed { "pass" } else { "FAIL" };
            match c.witness {
                Some(w) => writeln!(f, "[{verdict}] {} (witness s = {w:e}) {}", c.name, c.detail)?,
                None => writeln!(f, "[{verdict}] {} {}", c.name, c.detail)?,
            }
        }
        Ok(())
    }
}

pub const CHECK_F_DECREASING: &str = "f' < 0";
pub const CHECK_F_CONVEX: &str = "0 <= f'' <= -c0 f'";
pub const CHECK_F0_POSITIVE: &str = "f(0) > 0";
pub const CHECK_G0_FINITE: &str = "g0 finite";
pub const CHECK_G_POSITIVE: &str = "g > 0";
pub const CHECK_G_SLOPE: &str = "0 <= -g' <= c0 g";
pub const CHECK_XI_RATE: &str = "g' <= -xi g";
pub const CHECK_XI_NONINCREASING: &str = "xi' <= 0";
pub const CHECK_XI_NONNEGATIVE: &str = "xi >= 0";

/// Samples the hypotheses on a uniform grid of `n_samples` points in [0, s_max].
pub fn validate_hypotheses(
    kernel: &MemoryKernel,
    s_max: f64,
    n_samples: usize,
) -> Result<ValidationReport> {
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(out_of_range("s_max", s_max, "must be positive"));
    }
    if n_samples < 16 {
        return Err(out_of_range("n_samples", n_samples as f64, "need at least 16"));
    }
    let c0 = kernel.c0();
    let samples: Vec<f64> = (0..n_samples)
        .map(|i| s_max * i as f64 / (n_samples - 1) as f64)
        .collect();

    let first = |pred: &dyn Fn(f64) -> bool| samples.iter().copied().find(|&s| !pred(s));
    let tol = 1e-12;

    let g_pos = first(&|s| kernel.g(s) > 0.0 || kernel.ln_g(s) > f64::NEG_INFINITY);
    let slope = first(&|s| {
        let (g, dg) = (kernel.g(s), kernel.dg(s));
        -dg >= -tol * (dg.abs() + g.abs()) && -dg <= c0 * g + tol * (dg.abs() + c0 * g.abs())
    });
    let xi_rate = first(&|s| {
        let (g, dg, xi) = (kernel.g(s), kernel.dg(s), kernel.xi(s));
        dg + xi * g <= tol * (1.0 + dg.abs())
    });
    let xi_mono = first(&|s| kernel.dxi(s) <= tol * (1.0 + kernel.xi(s)));
    let xi_nonneg = first(&|s| kernel.xi(s) >= 0.0);

    let c0_observed = samples
        .iter()
        .filter(|&&s| kernel.g(s) > 0.0)
        .map(|&s| match kernel.xi_form() {
            XiForm::Tabulated => -kernel.dg(s) / kernel.g(s),
            _ => kernel.xi(s),
        })
        .fold(0.0_f64, f64::max);

    let mk = |name, witness: Option<f64>, detail: String| HypothesisCheck {
        name,
        passed: witness.is_none(),
        witness,
        detail,
    };
    let g0 = kernel.g0();
    let g0_witness = if g0.is_finite() {
        None
    } else {
        Some(kernel.g0_reach)
    };
    let checks = vec![
        mk(CHECK_F_DECREASING, g_pos, String::from("(f' = -g)")),
        mk(CHECK_F_CONVEX, slope, format!("(f'' = -g', c0 = {c0:e})")),
        HypothesisCheck {
            name: CHECK_F0_POSITIVE,
            passed: g0 > 0.0,
            witness: if g0 > 0.0 { None } else { Some(0.0) },
            detail: format!("(f(0) = g0 = {g0:e})"),
        },
        mk(
            CHECK_G0_FINITE,
            g0_witness,
            if g0.is_finite() {
                String::new()
            } else {
                format!("(partial integrals over [0, 2^j] still growing at 2^j = {:e})", kernel.g0_reach)
            },
        ),
        mk(CHECK_G_POSITIVE, g_pos, String::new()),
        mk(CHECK_G_SLOPE, slope, String::new()),
        mk(CHECK_XI_RATE, xi_rate, String::new()),
        mk(CHECK_XI_NONINCREASING, xi_mono, String::new()),
        mk(CHECK_XI_NONNEGATIVE, xi_nonneg, String::new()),
    ];
    Ok(ValidationReport {
        family: kernel.family(),
        c0,
        c0_observed,
        g0,
        checks,
    })
}

// ── Tabulated kernels ───────────────────────────────────────────────

/// Monotone cubic (Fritsch–Carlson) interpolant of g with a power-law tail.
#[derive(Debug, Clone)]
struct Table {
    x: Vec<f64>,
    y: Vec<f64>,
    d: Vec<f64>,
    /// Tail exponent α in g ∝ (1+s)^{−α} beyond the last node; None = zero tail.
    alpha: Option<f64>,
    /// Running minimum of max(−g′/g, 0) at fine sample points.
    xi_s: Vec<f64>,
    xi_m: Vec<f64>,
    c0: f64,
}

impl Table {
    fn new(s: &[f64], g: &[f64]) -> Result<Self> {
        if s.len() != g.len() {
            return Err(Error::DimensionMismatch {
                expected: s.len(),
                found: g.len(),
            });
        }
        if s.len() < 2 {
            return Err(out_of_range("table length", s.len() as f64, "need at least 2 nodes"));
        }
        if s[0] != 0.0 {
            return Err(out_of_range("table s[0]", s[0], "first abscissa must be 0"));
        }
        if s.windows(2).any(|w| !(w[1] > w[0])) || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainError(
                "table abscissae must increase strictly and values be finite".into(),
            ));
        }
        let n = s.len();
        let delta: Vec<f64> = (0..n - 1).map(|i| (g[i + 1] - g[i]) / (s[i + 1] - s[i])).collect();
        let mut d = vec![0.0; n];
        d[0] = delta[0];
        d[n - 1] = delta[n - 2];
        for i in 1..n - 1 {
            if delta[i - 1] * delta[i] > 0.0 {
                let (h0, h1) = (s[i] - s[i - 1], s[i + 1] - s[i]);
                let (w1, w2) = (2.0 * h1 + h0, h1 + 2.0 * h0);
                d[i] = (w1 + w2) / (w1 / delta[i - 1] + w2 / delta[i]);
            }
        }
        let (gl, gp) = (g[n - 1], g[n - 2]);
        let alpha = if gl > 0.0 && gp > 0.0 {
            Some((gp / gl).ln() / ((1.0 + s[n - 1]) / (1.0 + s[n - 2])).ln())
        } else {
            None
        };
        let mut t = Table {
            x: s.to_vec(),
            y: g.to_vec(),
            d,
            alpha,
            xi_s: Vec::new(),
            xi_m: Vec::new(),
            c0: 0.0,
        };
        let mut running = f64::INFINITY;
        let mut c0 = 0.0_f64;
        for i in 0..n - 1 {
            for j in 0..32 {
                let x = s[i] + (s[i + 1] - s[i]) * j as f64 / 32.0;
                let r = t.rate(x);
                c0 = c0.max(r);
                running = running.min(r);
                t.xi_s.push(x);
                t.xi_m.push(running);
            }
        }
        let r_end = t.rate(s[n - 1]);
        c0 = c0.max(r_end);
        t.xi_s.push(s[n - 1]);
        t.xi_m.push(running.min(r_end));
        t.c0 = c0;
        Ok(t)
    }

    /// max(−g′/g, 0), zero where g ≤ 0.
    fn rate(&self, s: f64) -> f64 {
        let g = self.g(s);
        if g > 0.0 {
            (-self.dg(s) / g).max(0.0)
        } else {
            0.0
        }
    }

    fn locate(&self, s: f64) -> usize {
        match self.x.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
            Ok(i) => i.min(self.x.len() - 2),
            Err(i) => i.saturating_sub(1).min(self.x.len() - 2),
        }
    }

    fn g(&self, s: f64) -> f64 {
        let last = *self.x.last().unwrap();
        if s > last {
            return match self.alpha {
                Some(a) => self.y.last().unwrap() * ((1.0 + s) / (1.0 + last)).powf(-a),
                None => 0.0,
            };
        }
        let i = self.locate(s);
        let h = self.x[i + 1] - self.x[i];
        let t = (s - self.x[i]) / h;
        let (t2, t3) = (t * t, t * t * t);
        self.y[i] * (2.0 * t3 - 3.0 * t2 + 1.0)
            + self.d[i] * h * (t3 - 2.0 * t2 + t)
            + self.y[i + 1] * (-2.0 * t3 + 3.0 * t2)
            + self.d[i + 1] * h * (t3 - t2)
    }

    fn dg(&self, s: f64) -> f64 {
        let last = *self.x.last().unwrap();
        if s > last {
            return match self.alpha {
                Some(a) => -a / (1.0 + s) * self.g(s),
                None => 0.0,
            };
        }
        let i = self.locate(s);
        let h = self.x[i + 1] - self.x[i];
        let t = (s - self.x[i]) / h;
        let t2 = t * t;
        (self.y[i] * (6.0 * t2 - 6.0 * t) + self.y[i + 1] * (-6.0 * t2 + 6.0 * t)) / h
            + self.d[i] * (3.0 * t2 - 4.0 * t + 1.0)
            + self.d[i + 1] * (3.0 * t2 - 2.0 * t)
    }

    fn xi_floor(&self, s: f64) -> f64 {
        let k = match self.xi_s.binary_search_by(|v| v.partial_cmp(&s).unwrap()) {
            Ok(i) => i,
            Err(i) => i.saturating_sub(1),
        };
        self.xi_m[k.min(self.xi_m.len() - 1)]
    }

    fn xi(&self, s: f64) -> f64 {
        self.xi_floor(s).min(self.rate(s))
    }

    fn dxi(&self, s: f64) -> f64 {
        if self.rate(s) < self.xi_floor(s) {
            let e = 1e-6 * (1.0 + s);
            (self.rate(s + e) - self.rate((s - e).max(0.0))) / (s + e - (s - e).max(0.0))
        } else {
            0.0
        }
    }

    fn tail_cutoff(&self, level: f64) -> f64 {
        if let Some(i) = self.y.iter().rposition(|&v| v > level) {
            if i + 1 < self.y.len() {
                return self.x[i + 1];
            }
        } else {
            return self.x[1];
        }
        let last = *self.x.last().unwrap();
        match self.alpha {
            Some(a) if a > 0.0 => (1.0 + last) * (self.y.last().unwrap() / level).powf(1.0 / a) - 1.0,
            Some(_) => f64::INFINITY,
            None => last,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn closed_form_g0() {
        assert_relative_eq!(MemoryKernel::exponential(2.0, 4.0).unwrap().g0(), 0.5);
        assert_relative_eq!(MemoryKernel::polynomial(1.0, 2.0).unwrap().g0(), 1.0);
    }

    #[test]
    fn stretched_g0_matches_gamma_oracle() {
        // ∫₀^∞ e^{−√(1+s)} ds = ∫₁^∞ 2u e^{−u} du = 4/e.
        let k = MemoryKernel::stretched(1.0, 1.0, 0.5).unwrap();
        assert_relative_eq!(k.g0(), 4.0 / std::f64::consts::E, max_relative = 1e-10);
    }

    #[test]
    fn panel_quadrature_agrees_with_closed_forms() {
        for k in [
            MemoryKernel::exponential(1.5, 0.7).unwrap(),
            MemoryKernel::polynomial(1.0, 2.0).unwrap(),
            MemoryKernel::polynomial(0.3, 3.5).unwrap(),
        ] {
            let r = geometric_panels(|s| k.g(s), 80);
            assert!(r.converged);
            assert_relative_eq!(r.value, k.g0(), max_relative = 1e-8);
        }
    }

    #[test]
    fn point_values() {
        assert_eq!(MemoryKernel::exponential(1.0, 1.0).unwrap().g(0.0), 1.0);
        assert_relative_eq!(MemoryKernel::polynomial(1.0, 2.0).unwrap().g(1.0), 0.25);
        assert_relative_eq!(MemoryKernel::stretched(1.0, 1.0, 0.5).unwrap().xi(3.0), 0.25);
    }

    #[test]
    fn parameter_constraints() {
        let bad = [
            (KernelFamily::Polynomial, KernelParams { q1: 1.0, ..Default::default() }),
            (KernelFamily::Polynomial, KernelParams { q1: 0.5, ..Default::default() }),
            (KernelFamily::Exponential, KernelParams { q1: 0.0, ..Default::default() }),
            (KernelFamily::Exponential, KernelParams { d1: -1.0, ..Default::default() }),
            (KernelFamily::StretchedExponential, KernelParams { p1: 1.0, ..Default::default() }),
        ];
        for (fam, p) in bad {
            assert!(matches!(make_kernel(fam, &p), Err(Error::ParameterOutOfRange { .. })));
        }
    }

    #[test]
    fn default_cutoff_hits_tail_ratio() {
        for k in [
            MemoryKernel::exponential(1.0, 1.0).unwrap(),
            MemoryKernel::polynomial(1.0, 2.0).unwrap(),
            MemoryKernel::stretched(1.0, 1.0, 0.5).unwrap(),
        ] {
            let s = k.default_s_max();
            assert_relative_eq!(k.tail_ratio(s), TAIL_RATIO, max_relative = 1e-6);
        }
    }

    #[test]
    fn cell_weights_sum_to_tail_difference() {
        for k in [
            MemoryKernel::exponential(1.0, 2.0).unwrap(),
            MemoryKernel::polynomial(2.0, 2.5).unwrap(),
            MemoryKernel::stretched(1.0, 1.0, 0.5).unwrap(),
        ] {
            let edges: Vec<f64> = (0..=200).map(|i| 0.05 * i as f64).collect();
            let w: f64 = edges.windows(2).map(|e| k.cell_weight(e[0], e[1])).sum();
            assert_relative_eq!(w, k.tail(0.0) - k.tail(10.0), max_relative = 1e-11);
        }
    }

    #[test]
    fn xi_integrals_match_quadrature() {
        for k in [
            MemoryKernel::polynomial(1.0, 2.0).unwrap(),
            MemoryKernel::stretched(1.0, 1.3, 0.4).unwrap(),
        ] {
            let num: f64 = (0..100).map(|i| gauss8(0.1 * i as f64, 0.1 * (i + 1) as f64, |s| k.xi(s))).sum();
            assert_relative_eq!(k.xi_integral(10.0), num, max_relative = 1e-12);
        }
    }

    #[test]
    fn families_pass_validation() {
        for k in [
            MemoryKernel::exponential(1.0, 1.0).unwrap(),
            MemoryKernel::polynomial(1.0, 2.0).unwrap(),
            MemoryKernel::stretched(1.0, 1.0, 0.5).unwrap(),
        ] {
            for (s_max, n) in [(1.0, 16), (50.0, 1000), (1e4, 257)] {
                let r = validate_hypotheses(&k, s_max, n).unwrap();
                assert!(r.all_passed(), "{r}");
            }
        }
    }

    #[test]
    fn tabulated_exponential_passes() {
        let s: Vec<f64> = (0..=400).map(|i| 0.1 * i as f64).collect();
        let g: Vec<f64> = s.iter().map(|s| (-s).exp()).collect();
        let k = MemoryKernel::tabulated(&s, &g).unwrap();
        assert_relative_eq!(k.g0(), 1.0, max_relative = 1e-4);
        let r = validate_hypotheses(&k, 30.0, 997).unwrap();
        assert!(r.all_passed(), "{r}");
    }

    #[test]
    fn increasing_f_is_witnessed() {
        // g negative on (2, 3): f increases there.
        let s: Vec<f64> = (0..=50).map(|i| 0.2 * i as f64).collect();
        let g: Vec<f64> = s
            .iter()
            .map(|&s| if (2.0..=3.0).contains(&s) { -0.1 } else { (-s).exp() })
            .collect();
        let k = MemoryKernel::tabulated(&s, &g).unwrap();
        let r = validate_hypotheses(&k, 10.0, 101).unwrap();
        let c = r.check(CHECK_F_DECREASING).unwrap();
        assert!(!c.passed);
        let w = c.witness.unwrap();
        assert!(w > 1.8 && w <= 2.0 + 1e-12, "witness {w}");
    }

    #[test]
    fn nonintegrable_table_fails_finite_g0() {
        let s: Vec<f64> = (0..=200).map(|i| 0.5 * i as f64).collect();
        let g: Vec<f64> = s.iter().map(|s| (1.0 + s).powf(-0.5)).collect();
        let k = MemoryKernel::tabulated(&s, &g).unwrap();
        assert!(k.g0().is_infinite());
        let r = validate_hypotheses(&k, 100.0, 64).unwrap();
        let c = r.check(CHECK_G0_FINITE).unwrap();
        assert!(!c.passed);
        assert!(c.witness.unwrap() >= 2f64.powi(40));
    }
}
