//! History variable η^t(x, s) = ∫₀^s u(x, t−τ) dτ and the memory term.
//!
//! Two representations:
//!
//! - **Grid**: Lagrangian cells [a, b] in s, each carrying the g-weighted
//!   average of η over the cell. Cells ride the characteristics of
//!   η_t + η_s = u: each step shifts every cell by dt, adds ∫u dt to its value
//!   and opens a fresh cell at s = 0 (inflow η = 0). Cells are merged by
//!   g-weighted averaging as they age toward a geometric target spacing, and
//!   dropped past S_max. Merging preserves ∫gη exactly and never increases
//!   ∫g‖η‖², and for exponential kernels the shift keeps cell averages exact.
//! - **ExponentialOde**: for g = d1·e^{−q1 s} the memory m = ∫gη obeys
//!   m_t = g0·u − q1·m, integrated exactly for u linear in time; the L_g
//!   energy Q = ∫g‖∂ᵏη‖² obeys Q_t = −q1·Q + 2⟨u, (−1)ᵏ∂^{2k}m⟩ and is
//!   advanced by Crank–Nicolson with the same coupling the solver applies.

use crate::error::{out_of_range, Error, Result};
use crate::kernel::{MemoryKernel, TAIL_RATIO};
use crate::quadrature::gauss8_points;
use crate::spatial::SpatialDiscretization;
use std::collections::VecDeque;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HistoryMode {
    Grid,
    ExponentialOde,
}

impl HistoryMode {
    pub fn name(self) -> &'static str {
        match self {
            HistoryMode::Grid => "grid",
            HistoryMode::ExponentialOde => "expo-ode",
        }
    }
}

/// Mode as requested in a configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeChoice {
    Grid,
    ExpoOde,
    /// ExpoOde for exponential kernels, Grid otherwise.
    Auto,
}

impl ModeChoice {
    pub fn name(self) -> &'static str {
        match self {
            ModeChoice::Grid => "grid",
            ModeChoice::ExpoOde => "expo-ode",
            ModeChoice::Auto => "auto",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "grid" => Some(ModeChoice::Grid),
            "expo-ode" => Some(ModeChoice::ExpoOde),
            "auto" => Some(ModeChoice::Auto),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HistorySpec {
    /// Derivative order in the memory term and the L_g norm.
    pub k: usize,
    /// Number of s-cells at initialization.
    pub s_nodes: usize,
    /// Truncation point; defaults to g(S_max) = 1e-12·g(0).
    pub s_max: Option<f64>,
    pub mode: ModeChoice,
    /// Width of the first cell; defaults to min(S_max, 8/c0)/M so that the
    /// newest history is resolved more finely as M grows.
    pub first_width: Option<f64>,
}

impl Default for HistorySpec {
    fn default() -> Self {
        HistorySpec {
            k: 0,
            s_nodes: 256,
            s_max: None,
            mode: ModeChoice::Auto,
            first_width: None,
        }
    }
}

#[derive(Debug, Clone)]
struct Cell {
    a: f64,
    b: f64,
    /// ∫_a^b g.
    w: f64,
    /// g-weighted average of η over [a, b] at each interior node.
    eta: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct HistoryField {
    mode: HistoryMode,
    k: usize,
    n: usize,
    s_max: f64,
    first_width: f64,
    ratio: f64,
    cells: VecDeque<Cell>,
    m: Vec<f64>,
    q_energy: f64,
    rate: f64,
    g0: f64,
}

/// Geometric ratio r with δ·(r^M − 1)/(r − 1) = S.
fn geometric_ratio(first: f64, m: usize, s_max: f64) -> f64 {
    if first * m as f64 >= s_max {
        return 1.0;
    }
    let span = |r: f64| first * ((r.ln() * m as f64).exp_m1()) / (r - 1.0);
    let (mut lo, mut hi) = (1.0 + 1e-15, 2.0);
    while span(hi) < s_max {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if span(mid) < s_max {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Builds η⁰(x, s) = ∫₀^s u0_history(x, τ) dτ on s-cells truncated at S_max.
pub fn init_history(
    u0_history: &dyn Fn(f64, f64) -> f64,
    disc: &SpatialDiscretization,
    kernel: &MemoryKernel,
    spec: &HistorySpec,
) -> Result<HistoryField> {
    if spec.k > 2 {
        return Err(out_of_range("memory.k", spec.k as f64, "must be 0, 1 or 2"));
    }
    if spec.s_nodes < 16 {
        return Err(out_of_range("memory.s_nodes", spec.s_nodes as f64, "need at least 16"));
    }
    let mode = match (spec.mode, kernel.exponential_rate()) {
        (ModeChoice::Grid, _) | (ModeChoice::Auto, None) => HistoryMode::Grid,
        (ModeChoice::ExpoOde, Some(_)) | (ModeChoice::Auto, Some(_)) => HistoryMode::ExponentialOde,
        (ModeChoice::ExpoOde, None) => {
            return Err(Error::ModeMismatch(format!(
                "exponential-ODE memory needs an exponential kernel, got {}",
                kernel.family()
            )))
        }
    };
    let s_max = spec.s_max.unwrap_or_else(|| kernel.default_s_max());
    if !(s_max > 0.0 && s_max.is_finite()) {
        return Err(out_of_range("memory.s_max", s_max, "must be positive and finite"));
    }
    let ratio = kernel.tail_ratio(s_max);
    if !(ratio <= TAIL_RATIO * (1.0 + 1e-6)) {
        return Err(Error::TailTooFat { s_max, ratio });
    }
    let m_cells = spec.s_nodes;
    let first_width = spec
        .first_width
        .unwrap_or_else(|| s_max.min(8.0 / kernel.c0()) / m_cells as f64);
    if !(first_width > 0.0) {
        return Err(out_of_range("first_width", first_width, "must be positive"));
    }
    let r = geometric_ratio(first_width, m_cells, s_max);
    let edges: Vec<f64> = if r == 1.0 {
        (0..=m_cells).map(|j| s_max * j as f64 / m_cells as f64).collect()
    } else {
        let mut e: Vec<f64> = (0..=m_cells)
            .map(|j| first_width * ((r.ln() * j as f64).exp_m1()) / (r - 1.0))
            .collect();
        e[m_cells] = s_max;
        e
    };

    let n = disc.n();
    let x = disc.nodes();
    let mut cells = VecDeque::with_capacity(m_cells);
    let mut eta_a = vec![0.0; n];
    for e in edges.windows(2) {
        let (a, b) = (e[0], e[1]);
        let w = kernel.cell_weight(a, b);
        let mut avg = vec![0.0; n];
        let pieces = (((b - a) / 0.5).ceil() as usize).clamp(1, 64);
        let hp = (b - a) / pieces as f64;
        let mut start = eta_a.clone();
        let mut wsum = 0.0;
        for p in 0..pieces {
            let (pa, pb) = (a + p as f64 * hp, a + (p + 1) as f64 * hp);
            for (s, ws) in gauss8_points(pa, pb) {
                let gw = ws * kernel.g(s);
                wsum += gw;
                for i in 0..n {
                    let inc: f64 = gauss8_points(pa, s).map(|(t, wt)| wt * u0_history(x[i], t)).sum();
                    avg[i] += gw * (start[i] + inc);
                }
            }
            for i in 0..n {
                start[i] += gauss8_points(pa, pb)
                    .map(|(t, wt)| wt * u0_history(x[i], t))
                    .sum::<f64>();
            }
        }
        // Normalize by the quadrature weight sum so constants average exactly.
        if wsum > 0.0 {
            avg.iter_mut().for_each(|v| *v /= wsum);
        }
        eta_a = start;
        cells.push_back(Cell { a, b, w, eta: avg });
    }

    let mut field = HistoryField {
        mode,
        k: spec.k,
        n,
        s_max,
        first_width,
        ratio: r,
        cells,
        m: Vec::new(),
        q_energy: 0.0,
        rate: kernel.exponential_rate().unwrap_or(0.0),
        g0: kernel.g0(),
    };
    if mode == HistoryMode::ExponentialOde {
        field.m = field.grid_m();
        field.q_energy = field.grid_energy(disc);
        field.cells.clear();
    }
    Ok(field)
}

impl HistoryField {
    pub fn mode(&self) -> HistoryMode {
        self.mode
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn s_max(&self) -> f64 {
        self.s_max
    }

    /// Geometric growth ratio of the initial s-cells (1 = uniform).
    pub fn spacing_ratio(&self) -> f64 {
        self.ratio
    }

    pub fn cell_count(&self) -> usize {
        self.cells.len()
    }

    /// Cell edges and g-weighted cell averages (Grid mode).
    pub fn cells(&self) -> impl Iterator<Item = (f64, f64, &[f64])> {
        self.cells.iter().map(|c| (c.a, c.b, c.eta.as_slice()))
    }

    /// η(·, s) reconstructed piecewise linearly through the cell midpoints,
    /// anchored at η(·, 0) = 0. `None` in ExponentialOde mode.
    pub fn eval(&self, s: f64) -> Option<Vec<f64>> {
        if self.mode != HistoryMode::Grid {
            return None;
        }
        let mut prev_s = 0.0;
        let mut prev = vec![0.0; self.n];
        for c in &self.cells {
            let mid = 0.5 * (c.a + c.b);
            if s <= mid {
                let t = if mid > prev_s { (s - prev_s) / (mid - prev_s) } else { 1.0 };
                return Some(prev.iter().zip(&c.eta).map(|(p, q)| p + t * (q - p)).collect());
            }
            prev_s = mid;
            prev.clone_from(&c.eta);
        }
        Some(prev)
    }

    fn grid_m(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n];
        for c in &self.cells {
            for (mi, e) in m.iter_mut().zip(&c.eta) {
                *mi += c.w * e;
            }
        }
        m
    }

    fn grid_energy(&self, disc: &SpatialDiscretization) -> f64 {
        self.cells.iter().map(|c| c.w * disc.dk_norm_sq(&c.eta, self.k)).sum()
    }

    /// m = ∫₀^∞ g(s) η(·, s) ds.
    pub fn memory_moment(&self) -> Vec<f64> {
        match self.mode {
            HistoryMode::Grid => self.grid_m(),
            HistoryMode::ExponentialOde => self.m.clone(),
        }
    }

    /// (−1)ᵏ D2ᵏ ∫ g η ds — the memory term as it enters u_t + … = 0.
    pub fn memory_integral(&self, disc: &SpatialDiscretization) -> Vec<f64> {
        let mut v = disc.d2_power(&self.memory_moment(), self.k);
        if self.k % 2 == 1 {
            v.iter_mut().for_each(|x| *x = -*x);
        }
        v
    }

    /// ‖η‖_{L_g} = (∫ g ‖∂ᵏη‖² ds)^{1/2}.
    pub fn memory_norm(&self, disc: &SpatialDiscretization) -> f64 {
        self.memory_norm_sq(disc).max(0.0).sqrt()
    }

    pub fn memory_norm_sq(&self, disc: &SpatialDiscretization) -> f64 {
        match self.mode {
            HistoryMode::Grid => self.grid_energy(disc),
            HistoryMode::ExponentialOde => self.q_energy,
        }
    }

    /// ½ ∫ g′ ‖∂ᵏη‖² ds (≤ 0). On cells, ∫_a^b g′ = g(b) − g(a) exactly.
    pub fn memory_dissipation(&self, disc: &SpatialDiscretization, kernel: &MemoryKernel) -> f64 {
        match self.mode {
            HistoryMode::Grid => {
                0.5 * self
                    .cells
                    .iter()
                    .map(|c| {
                        let dg = kernel.g(c.b) - kernel.g(c.a);
                        let dg = if c.b.is_infinite() { -kernel.g(c.a) } else { dg };
                        dg * disc.dk_norm_sq(&c.eta, self.k)
                    })
                    .sum::<f64>()
            }
            HistoryMode::ExponentialOde => -0.5 * self.rate * self.q_energy,
        }
    }

    /// Advances η by dt given u at the old and new time levels, treating u as
    /// linear in between.
    pub fn advance(
        &mut self,
        disc: &SpatialDiscretization,
        kernel: &MemoryKernel,
        u_old: &[f64],
        u_new: &[f64],
        dt: f64,
    ) -> Result<()> {
        self.advance_coupled(disc, kernel, u_old, u_new, dt, None)
    }

    /// As [`advance`](Self::advance); `applied` is the memory forcing the solver
    /// used over the step. The ODE path uses it for the L_g energy exchange so
    /// the discrete energy balance closes exactly.
    pub fn advance_coupled(
        &mut self,
        disc: &SpatialDiscretization,
        kernel: &MemoryKernel,
        u_old: &[f64],
        u_new: &[f64],
        dt: f64,
        applied: Option<&[f64]>,
    ) -> Result<()> {
        if !(dt > 0.0) {
            return Err(out_of_range("dt", dt, "must be positive"));
        }
        for v in [u_old, u_new] {
            if v.len() != self.n {
                return Err(Error::DimensionMismatch {
                    expected: self.n,
                    found: v.len(),
                });
            }
        }
        match self.mode {
            HistoryMode::ExponentialOde => self.advance_ode(disc, kernel, u_old, u_new, dt, applied),
            HistoryMode::Grid => {
                self.advance_grid(kernel, u_old, u_new, dt);
                Ok(())
            }
        }
    }

    fn advance_ode(
        &mut self,
        disc: &SpatialDiscretization,
        kernel: &MemoryKernel,
        u_old: &[f64],
        u_new: &[f64],
        dt: f64,
        applied: Option<&[f64]>,
    ) -> Result<()> {
        let q = kernel.exponential_rate().ok_or_else(|| {
            Error::ModeMismatch(format!(
                "exponential-ODE memory needs an exponential kernel, got {}",
                kernel.family()
            ))
        })?;
        let g0 = kernel.g0();
        let decay = (-q * dt).exp();
        let i0 = -(-q * dt).exp_m1() / q;
        let i1 = 1.0 / q - i0 / (q * dt);
        let m_old = std::mem::take(&mut self.m);
        let m_new: Vec<f64> = m_old
            .iter()
            .zip(u_old.iter().zip(u_new))
            .map(|(m, (uo, un))| m * decay + g0 * (i0 * uo + i1 * (un - uo)))
            .collect();
        let u_bar: Vec<f64> = u_old.iter().zip(u_new).map(|(a, b)| 0.5 * (a + b)).collect();
        let coupling = match applied {
            Some(f) => disc.dot(&u_bar, f),
            None => {
                let mid: Vec<f64> = m_old.iter().zip(&m_new).map(|(a, b)| 0.5 * (a + b)).collect();
                let mut f = disc.d2_power(&mid, self.k);
                if self.k % 2 == 1 {
                    f.iter_mut().for_each(|x| *x = -*x);
                }
                disc.dot(&u_bar, &f)
            }
        };
        let half = 0.5 * q * dt;
        self.q_energy = (self.q_energy * (1.0 - half) + 2.0 * dt * coupling) / (1.0 + half);
        self.m = m_new;
        self.rate = q;
        self.g0 = g0;
        Ok(())
    }

    fn advance_grid(&mut self, kernel: &MemoryKernel, u_old: &[f64], u_new: &[f64], dt: f64) {
        let n = self.n;
        // Existing cells: shift along the characteristic and add ∫ u dt.
        let delta: Vec<f64> = u_old.iter().zip(u_new).map(|(a, b)| 0.5 * dt * (a + b)).collect();
        for c in self.cells.iter_mut() {
            c.a += dt;
            c.b += dt;
            c.w = kernel.cell_weight(c.a, c.b);
            for (e, d) in c.eta.iter_mut().zip(&delta) {
                *e += d;
            }
        }
        while self.cells.back().is_some_and(|c| c.a >= self.s_max) {
            self.cells.pop_back();
        }
        // New cells on [0, dt]: η(s) = s·u_new − s²(u_new − u_old)/(2dt).
        let pieces = ((dt / self.first_width) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
        let hp = dt / pieces as f64;
        for p in (0..pieces).rev() {
            let (a, b) = (p as f64 * hp, (p + 1) as f64 * hp);
            let (mut w, mut m1, mut m2) = (0.0, 0.0, 0.0);
            for (s, ws) in gauss8_points(a, b) {
                let g = ws * kernel.g(s);
                w += g;
                m1 += g * s;
                m2 += g * s * s;
            }
            let (c1, c2) = (m1 / w, m2 / (2.0 * dt * w));
            let eta = (0..n)
                .map(|i| c1 * u_new[i] - c2 * (u_new[i] - u_old[i]))
                .collect();
            self.cells.push_front(Cell {
                a,
                b,
                w: kernel.cell_weight(a, b),
                eta,
            });
        }
        self.merge();
    }

    /// Greedy g-weighted merge toward the target width δ + (r − 1)·a.
    fn merge(&mut self) {
        let target = |a: f64| self.first_width + (self.ratio - 1.0) * a;
        let mut out: VecDeque<Cell> = VecDeque::with_capacity(self.cells.len());
        for c in self.cells.drain(..) {
            if let Some(last) = out.back_mut() {
                if c.b - last.a <= target(last.a) * (1.0 + 1e-9) {
                    let w = last.w + c.w;
                    if w > 0.0 {
                        let (fa, fb) = (last.w / w, c.w / w);
                        for (e, f) in last.eta.iter_mut().zip(&c.eta) {
                            *e = fa * *e + fb * f;
                        }
                    }
                    last.b = c.b;
                    last.w = w;
                    continue;
                }
            }
            out.push_back(c);
        }
        self.cells = out;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spatial::build_discretization;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn setup(l: f64, n: usize) -> SpatialDiscretization {
        build_discretization(l, n, 2).unwrap()
    }

    fn grid_spec(k: usize, s_nodes: usize) -> HistorySpec {
        HistorySpec {
            k,
            s_nodes,
            mode: ModeChoice::Grid,
            ..Default::default()
        }
    }

    fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }

    #[test]
    fn zero_history_is_zero() {
        let disc = setup(1.0, 32);
        let k = MemoryKernel::exponential(1.0, 1.0).unwrap();
        for mode in [ModeChoice::Grid, ModeChoice::ExpoOde] {
            let spec = HistorySpec { mode, ..Default::default() };
            let mut h = init_history(&|_, _| 0.0, &disc, &k, &spec).unwrap();
            assert!(h.memory_integral(&disc).iter().all(|&v| v == 0.0));
            assert_eq!(h.memory_norm(&disc), 0.0);
            assert_eq!(h.memory_dissipation(&disc, &k), 0.0);
            let z = vec![0.0; 32];
            for _ in 0..5 {
                h.advance(&disc, &k, &z, &z, 0.01).unwrap();
            }
            assert!(h.memory_moment().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn constant_history_gives_linear_profile() {
        let disc = setup(1.0, 32);
        let k = MemoryKernel::exponential(1.0, 1.0).unwrap();
        let h = init_history(&|x, _| (PI * x).sin(), &disc, &k, &grid_spec(0, 64)).unwrap();
        // g-weighted average of s over [a, b] for g = e^{−s}.
        for (a, b, eta) in h.cells() {
            let avg = ((a + 1.0) * (-a).exp() - (b + 1.0) * (-b).exp()) / ((-a).exp() - (-b).exp());
            for (i, &x) in disc.nodes().iter().enumerate() {
                assert!((eta[i] - avg * (PI * x).sin()).abs() < 1e-10 * (1.0 + avg));
            }
        }
    }

    #[test]
    fn decaying_history_matches_antiderivative() {
        // η⁰ = φ(1 − e^{−s}); cell averages against g = e^{−s}.
        let disc = setup(1.0, 32);
        let k = MemoryKernel::exponential(1.0, 1.0).unwrap();
        let phi = |x: f64| (PI * x).sin();
        let h = init_history(&|x, t| phi(x) * (-t).exp(), &disc, &k, &grid_spec(0, 64)).unwrap();
        for (a, b, eta) in h.cells() {
            let w = (-a).exp() - (-b).exp();
            let w2 = 0.5 * ((-2.0 * a).exp() - (-2.0 * b).exp());
            let avg = (w - w2) / w;
            for (i, &x) in disc.nodes().iter().enumerate() {
                assert!((eta[i] - avg * phi(x)).abs() <= 1e-8);
            }
        }
    }

    #[test]
    fn memory_integral_oracles() {
        let disc = setup(1.0, 64);
        let k = MemoryKernel::exponential(1.0, 1.0).unwrap();
        let phi = disc.sample(|x| (PI * x).sin());
        // η = φ(1 − e^{−s}) → ∫e^{−s}(1 − e^{−s}) = 1/2.
        let h = init_history(&|x, t| (PI * x).sin() * (-t).exp(), &disc, &k, &grid_spec(0, 64)).unwrap();
        let expect: Vec<f64> = phi.iter().map(|v| 0.5 * v).collect();
        assert!(max_abs_diff(&h.memory_integral(&disc), &expect) <= 1e-6);
        // η = sφ → ∫ s e^{−s} = 1.
        let h = init_history(&|x, _| (PI * x).sin(), &disc, &k, &grid_spec(0, 64)).unwrap();
        assert!(max_abs_diff(&h.memory_integral(&disc), &phi) <= 1e-6);
    }

    #[test]
    fn memory_norm_of_linear_profile() {
        // η = s·sin(πx), g = e^{−s}: ‖·‖² = ½·∫s²e^{−s} = 1. Cell averages lose
        // the within-cell variance, O(width²).
        let disc = setup(1.0, 256);
        let k = MemoryKernel::exponential(1.0, 1.0).unwrap();
        let mut prev = f64::INFINITY;
        for m in [64, 128, 256, 512] {
            let h = init_history(&|x, _| (PI * x).sin(), &disc, &k, &grid_spec(0, m)).unwrap();
            let err = (h.memory_norm_sq(&disc) - 1.0).abs();
            assert!(err < prev);
            prev = err;
        }
        assert!(prev < 2e-4, "{prev}");
    }

    #[test]
    fn norm_is_even_under_sign_flip() {
        let disc = setup(1.0, 48);
        let k = MemoryKernel::polynomial(1.0, 2.0).unwrap();
        for kk in 0..=2 {
            let f = |x: f64, t: f64| (x * (1.0 - x)).powi(3) * (1.0 + t).recip();
            let a = init_history(&f, &disc, &k, &grid_spec(kk, 32)).unwrap();
            let b = init_history(&|x, t| -f(x, t), &disc, &k, &grid_spec(kk, 32)).unwrap();
            assert_eq!(a.memory_norm(&disc), b.memory_norm(&disc));
        }
    }

    #[test]
    fn exponential_dissipation_is_proportional_to_norm() {
        let disc = setup(2.0, 40);
        let k = MemoryKernel::exponential(1.0, 2.5).unwrap();
        let f = |x: f64, t: f64| (x * (2.0 - x)).powi(3) * (1.0 + t).cos();
        for mode in [ModeChoice::Grid, ModeChoice::ExpoOde] {
            for kk in 0..=2 {
                let spec = HistorySpec { k: kk, mode, s_nodes: 64, ..Default::default() };
                let h = init_history(&f, &disc, &k, &spec).unwrap();
                let norm2 = h.memory_norm_sq(&disc);
                assert_relative_eq!(h.memory_dissipation(&disc, &k), -1.25 * norm2, max_relative = 1e-10);
            }
        }
    }

    #[test]
    fn steady_state_of_constant_forcing() {
        let disc = setup(1.0, 32);
        let k = MemoryKernel::exponential(2.0, 0.5).unwrap();
        let phi = disc.sample(|x| (PI * x).sin());
        let spec = HistorySpec { mode: ModeChoice::ExpoOde, ..Default::default() };
        let mut h = init_history(&|_, _| 0.0, &disc, &k, &spec).unwrap();
        for _ in 0..2000 {
            h.advance(&disc, &k, &phi, &phi, 0.05).unwrap();
        }
        let expect: Vec<f64> = phi.iter().map(|v| k.g0() / 0.5 * v).collect();
        assert!(max_abs_diff(&h.memory_moment(), &expect) <= 1e-6);
    }

    #[test]
    fn ode_mode_rejects_other_kernels() {
        let disc = setup(1.0, 32);
        let k = MemoryKernel::polynomial(1.0, 2.0).unwrap();
        let spec = HistorySpec { mode: ModeChoice::ExpoOde, ..Default::default() };
        assert!(matches!(init_history(&|_, _| 0.0, &disc, &k, &spec), Err(Error::ModeMismatch(_))));
        let auto = HistorySpec { mode: ModeChoice::Auto, ..Default::default() };
        assert_eq!(init_history(&|_, _| 0.0, &disc, &k, &auto).unwrap().mode(), HistoryMode::Grid);
    }

    #[test]
    fn short_cutoff_is_too_fat() {
        let disc = setup(1.0, 32);
        let k = MemoryKernel::polynomial(1.0, 2.0).unwrap();
        let spec = HistorySpec { s_max: Some(500.0), ..Default::default() };
        assert!(matches!(init_history(&|_, _| 0.0, &disc, &k, &spec), Err(Error::TailTooFat { .. })));
    }

    #[test]
    fn inflow_row_stays_zero() {
        let disc = setup(1.0, 32);
        let k = MemoryKernel::stretched(1.0, 1.0, 0.5).unwrap();
        let mut h = init_history(&|x, _| x, &disc, &k, &grid_spec(0, 32)).unwrap();
        let u = disc.sample(|x| (3.0 * x).cos());
        for i in 0..50 {
            h.advance(&disc, &k, &u, &u, 0.013 * (1.0 + (i % 3) as f64)).unwrap();
            assert!(h.eval(0.0).unwrap().iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn dissipation_respects_c0_bound() {
        let disc = setup(1.0, 40);
        for k in [
            MemoryKernel::exponential(1.0, 3.0).unwrap(),
            MemoryKernel::polynomial(1.0, 2.0).unwrap(),
            MemoryKernel::stretched(1.0, 1.0, 0.5).unwrap(),
        ] {
            let mut h = init_history(&|x, t| x.sin() * (2.0 * t).cos(), &disc, &k, &grid_spec(1, 64)).unwrap();
            let u = disc.sample(|x| x * (1.0 - x));
            for _ in 0..20 {
                let md = h.memory_dissipation(&disc, &k);
                let n2 = h.memory_norm_sq(&disc);
                assert!(md <= 0.0);
                assert!(md.abs() <= 0.5 * k.c0() * n2 + 1e-12);
                h.advance(&disc, &k, &u, &u, 0.1).unwrap();
            }
        }
    }

    #[test]
    fn grid_and_ode_paths_agree_for_exponential_kernels() {
        let disc = setup(1.0, 32);
        let k = MemoryKernel::exponential(1.0, 1.0).unwrap();
        let init = |x: f64, t: f64| (PI * x).sin() * (-t).exp();
        let mut g = init_history(&init, &disc, &k, &grid_spec(0, 128)).unwrap();
        let spec = HistorySpec { mode: ModeChoice::ExpoOde, s_nodes: 128, ..Default::default() };
        let mut o = init_history(&init, &disc, &k, &spec).unwrap();
        let dt = 0.01;
        let mut u_old = disc.sample(|x| (PI * x).sin());
        for n in 1..=100 {
            let t = n as f64 * dt;
            let u_new = disc.sample(|x| (PI * x).sin() * (3.0 * t).cos());
            g.advance(&disc, &k, &u_old, &u_new, dt).unwrap();
            o.advance(&disc, &k, &u_old, &u_new, dt).unwrap();
            u_old = u_new;
        }
        let (mg, mo) = (g.memory_moment(), o.memory_moment());
        let scale = mo.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        assert!(max_abs_diff(&mg, &mo) <= 1e-10 * scale);
    }
}
