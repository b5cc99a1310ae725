//! Uniform grid on (0, L) with banded derivative operators of orders 1, 2, 3, 5.
//!
//! Unknowns live on the interior nodes x_i = i·h, i = 1..N, h = L/(N+1); the
//! Dirichlet values u(0) = u(L) = 0 are folded in by elimination. Stencils that
//! reach past a boundary use ghost values from a polynomial fit honouring the
//! remaining boundary conditions:
//!
//! - left:  p(0) = p′(0) = 0, interpolating the first `deg − 1` interior values;
//! - right: p(L) = p′(L) = p″(L) = 0, interpolating the last `deg − 2`.
//!
//! With `deg = 6` (order 2) the closure reproduces every polynomial of degree
//! ≤ 6 that satisfies the five conditions, so D5 is exact on x³(L−x)³. The
//! same left fit supplies the trace u_xx(0) = p″(0).

use crate::banded::{BandLu, BandMatrix};
use crate::error::{out_of_range, Error, Result};

pub const MIN_INTERIOR_NODES: usize = 32;

#[derive(Debug, Clone)]
pub struct SpatialDiscretization {
    l: f64,
    n: usize,
    h: f64,
    order: usize,
    x: Vec<f64>,
    pub d1: BandMatrix,
    pub d2: BandMatrix,
    pub d3: BandMatrix,
    pub d5: BandMatrix,
    /// Coefficients of the u_xx(0) functional on the first interior nodes.
    trace: Vec<f64>,
}

/// Stencil weights for offsets −r..=r (divide by h^m).
fn stencil(order: usize, m: usize) -> &'static [f64] {
    match (order, m) {
        (2, 1) => &[-0.5, 0.0, 0.5],
        (2, 2) => &[1.0, -2.0, 1.0],
        (2, 3) => &[-0.5, 1.0, 0.0, -1.0, 0.5],
        (2, 5) => &[-0.5, 2.0, -2.5, 0.0, 2.5, -2.0, 0.5],
        (4, 1) => &[1.0 / 12.0, -2.0 / 3.0, 0.0, 2.0 / 3.0, -1.0 / 12.0],
        (4, 2) => &[-1.0 / 12.0, 4.0 / 3.0, -2.5, 4.0 / 3.0, -1.0 / 12.0],
        (4, 3) => &[0.125, -1.0, 1.625, 0.0, -1.625, 1.0, -0.125],
        (4, 5) => &[
            1.0 / 6.0,
            -1.5,
            13.0 / 3.0,
            -29.0 / 6.0,
            0.0,
            29.0 / 6.0,
            -13.0 / 3.0,
            1.5,
            -1.0 / 6.0,
        ],
        _ => unreachable!("unsupported stencil"),
    }
}

/// Solves the small dense system `a·x = b` in place (partial pivoting).
fn dense_solve(mut a: Vec<Vec<f64>>, mut b: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let n = a.len();
    for k in 0..n {
        let p = (k..n)
            .max_by(|&i, &j| a[i][k].abs().total_cmp(&a[j][k].abs()))
            .unwrap();
        a.swap(k, p);
        b.swap(k, p);
        for i in k + 1..n {
            let f = a[i][k] / a[k][k];
            for j in k..n {
                a[i][j] -= f * a[k][j];
            }
            for j in 0..b[i].len() {
                b[i][j] -= f * b[k][j];
            }
        }
    }
    for k in (0..n).rev() {
        for j in 0..b[k].len() {
            let s: f64 = (k + 1..n).map(|i| a[k][i] * b[i][j]).sum();
            b[k][j] = (b[k][j] - s) / a[k][k];
        }
    }
    b
}

/// Polynomial fit in scaled coordinate ξ (one grid step = 1) with the lowest
/// `fixed` coefficients pinned to zero, interpolating at `points`.
/// Returns the map data → free coefficients (rows = powers fixed..deg).
fn fit_map(deg: usize, fixed: usize, points: &[f64]) -> Vec<Vec<f64>> {
    let free = deg + 1 - fixed;
    assert_eq!(points.len(), free);
    let v: Vec<Vec<f64>> = points
        .iter()
        .map(|&p| (fixed..=deg).map(|m| p.powi(m as i32)).collect())
        .collect();
    let id: Vec<Vec<f64>> = (0..free)
        .map(|i| (0..free).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    dense_solve(v, id)
}

/// Weights over the fit data that evaluate the fitted polynomial at ξ.
fn eval_weights(coef_map: &[Vec<f64>], fixed: usize, xi: f64) -> Vec<f64> {
    let free = coef_map.len();
    (0..free)
        .map(|j| {
            (0..free)
                .map(|r| xi.powi((r + fixed) as i32) * coef_map[r][j])
                .sum()
        })
        .collect()
}

pub fn build_discretization(l: f64, n: usize, scheme_order: usize) -> Result<SpatialDiscretization> {
    if !(l > 0.0 && l.is_finite()) {
        return Err(out_of_range("space.L", l, "domain length must be positive"));
    }
    if scheme_order != 2 && scheme_order != 4 {
        return Err(out_of_range("space.order", scheme_order as f64, "must be 2 or 4"));
    }
    if n < MIN_INTERIOR_NODES {
        return Err(Error::GridTooCoarse {
            n,
            min: MIN_INTERIOR_NODES,
        });
    }
    let h = l / (n + 1) as f64;
    let deg = if scheme_order == 2 { 6 } else { 8 };

    // Left fit: data at ξ = 1..deg−1 (nodes 1..deg−1).
    let left_pts: Vec<f64> = (1..deg).map(|i| i as f64).collect();
    let left = fit_map(deg, 2, &left_pts);
    // Right fit in ξ = (x − L)/h: data at ξ = −1..−(deg−2) (nodes N, N−1, …).
    let right_pts: Vec<f64> = (1..deg - 1).map(|i| -(i as f64)).collect();
    let right = fit_map(deg, 3, &right_pts);

    let build = |m: usize| -> BandMatrix {
        let w = stencil(scheme_order, m);
        let r = (w.len() / 2) as i64;
        let scale = h.powi(m as i32);
        let mut entries = Vec::new();
        for i in 1..=n as i64 {
            for (k, &c) in w.iter().enumerate() {
                if c == 0.0 {
                    continue;
                }
                let c = c / scale;
                let j = i + k as i64 - r;
                if j >= 1 && j <= n as i64 {
                    entries.push(((i - 1) as usize, (j - 1) as usize, c));
                } else if j < 0 {
                    for (q, wq) in eval_weights(&left, 2, j as f64).into_iter().enumerate() {
                        entries.push(((i - 1) as usize, q, c * wq));
                    }
                } else if j > n as i64 + 1 {
                    let xi = (j - n as i64 - 1) as f64;
                    for (q, wq) in eval_weights(&right, 3, xi).into_iter().enumerate() {
                        entries.push(((i - 1) as usize, n - 1 - q, c * wq));
                    }
                }
            }
        }
        BandMatrix::from_triplets(n, &entries)
    };

    let trace = left[0].iter().map(|c| 2.0 * c / (h * h)).collect();
    Ok(SpatialDiscretization {
        l,
        n,
        h,
        order: scheme_order,
        x: (1..=n).map(|i| i as f64 * h).collect(),
        d1: build(1),
        d2: build(2),
        d3: build(3),
        d5: build(5),
        trace,
    })
}

impl SpatialDiscretization {
    pub fn length(&self) -> f64 {
        self.l
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// Interior node coordinates.
    pub fn nodes(&self) -> &[f64] {
        &self.x
    }

    /// Trapezoid weights on all N+2 nodes, boundary nodes included.
    pub fn quadrature_weights(&self) -> Vec<f64> {
        let mut w = vec![self.h; self.n + 2];
        w[0] = 0.5 * self.h;
        w[self.n + 1] = 0.5 * self.h;
        w
    }

    pub fn sample(&self, f: impl Fn(f64) -> f64) -> Vec<f64> {
        self.x.iter().map(|&x| f(x)).collect()
    }

    fn check(&self, v: &[f64]) -> Result<()> {
        if v.len() == self.n {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.n,
                found: v.len(),
            })
        }
    }

    /// Discrete inner product without dimension checks (hot loops).
    pub(crate) fn dot(&self, v: &[f64], w: &[f64]) -> f64 {
        self.h * v.iter().zip(w).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn inner(&self, v: &[f64], w: &[f64]) -> Result<f64> {
        self.check(v)?;
        self.check(w)?;
        Ok(self.dot(v, w))
    }

    pub fn norm_l2(&self, v: &[f64]) -> Result<f64> {
        self.check(v)?;
        Ok(self.dot(v, v).sqrt())
    }

    /// (Σ_{j≤k} ‖D_j v‖²)^{1/2} with D1 and D2 standing in for ∂ and ∂².
    pub fn norm_hk(&self, v: &[f64], k: usize) -> Result<f64> {
        self.check(v)?;
        if k > 2 {
            return Err(out_of_range("k", k as f64, "must be 0, 1 or 2"));
        }
        let mut s = self.dot(v, v);
        if k >= 1 {
            let d = self.d1.matvec(v);
            s += self.dot(&d, &d);
        }
        if k >= 2 {
            let d = self.d2.matvec(v);
            s += self.dot(&d, &d);
        }
        Ok(s.sqrt())
    }

    /// ‖∂ᵏv‖² in the form matched to D2: k = 1 sums squared forward
    /// differences over all N+1 cells (equal to −⟨v, D2 v⟩ at order 2),
    /// k = 2 uses ‖D2 v‖².
    pub fn dk_norm_sq(&self, v: &[f64], k: usize) -> f64 {
        match k {
            0 => self.dot(v, v),
            1 => {
                let n = self.n;
                let mut s = v[0] * v[0] + v[n - 1] * v[n - 1];
                for i in 1..n {
                    let d = v[i] - v[i - 1];
                    s += d * d;
                }
                s / self.h
            }
            _ => {
                let d = self.d2.matvec(v);
                self.dot(&d, &d)
            }
        }
    }

    /// Forward differences over the N+1 cells (Dirichlet ends included).
    pub fn forward_differences(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut d = Vec::with_capacity(n + 1);
        d.push(v[0] / self.h);
        for i in 1..n {
            d.push((v[i] - v[i - 1]) / self.h);
        }
        d.push(-v[n - 1] / self.h);
        d
    }

    /// D2ᵏ v.
    pub fn d2_power(&self, v: &[f64], k: usize) -> Vec<f64> {
        let mut out = v.to_vec();
        for _ in 0..k {
            out = self.d2.matvec(&out);
        }
        out
    }

    /// One-sided approximation of u_xx(0).
    pub fn trace_uxx0(&self, u: &[f64]) -> f64 {
        self.trace.iter().zip(u).map(|(c, v)| c * v).sum()
    }

    /// ∫₀^L x·u² dx by the trapezoid rule.
    pub fn x_moment(&self, u: &[f64]) -> f64 {
        self.h * self.x.iter().zip(u).map(|(x, v)| x * v * v).sum::<f64>()
    }

    /// A = −D3 + a0·D5 − a1·D1, the linear part of u_t = A·u + ….
    pub fn linear_operator(&self, a0: f64, a1: f64) -> BandMatrix {
        self.d3
            .combine(-1.0, &self.d5, a0)
            .combine(1.0, &self.d1, -a1)
    }
}

// ── Embedding constants ─────────────────────────────────────────────

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbeddingConstants {
    /// Poincaré constant: ‖v‖² ≤ M_P‖v′‖².
    pub m_p: f64,
    /// Sobolev constant used by the small-data check: ‖v‖²_∞ ≤ M_S‖v‖²_{H¹}.
    pub m_s: f64,
    /// Largest ratio found over the probe functions (a lower bound for M_S).
    pub m_s_probe: f64,
}

/// Sharp constant for ‖v‖²_∞ ≤ M_S(‖v‖² + ‖v′‖²) on H¹(0, L): the maximum of
/// the Neumann Green's function of −v″ + v on the diagonal, coth L.
pub fn sobolev_constant(l: f64) -> f64 {
    1.0 / l.tanh()
}

pub fn estimate_constants(disc: &SpatialDiscretization) -> Result<EmbeddingConstants> {
    let m_p = poincare_constant(disc)?;
    Ok(EmbeddingConstants {
        m_p,
        m_s: sobolev_constant(disc.l),
        m_s_probe: sobolev_probe(disc),
    })
}

/// 1/λ_min(−D2) by inverse iteration.
pub fn poincare_constant(disc: &SpatialDiscretization) -> Result<f64> {
    let lu: BandLu = disc.d2.combine(-1.0, &disc.d2, 0.0).factor()?;
    let mut x = vec![1.0; disc.n];
    let mut mu_old = 0.0;
    const MAX_ITER: usize = 10_000;
    for _ in 0..MAX_ITER {
        let nx = disc.dot(&x, &x).sqrt();
        x.iter_mut().for_each(|v| *v /= nx);
        let y = lu.solve(&x);
        let mu = disc.dot(&x, &y);
        x = y;
        if (mu - mu_old).abs() <= 1e-14 * mu.abs() {
            return Ok(mu);
        }
        mu_old = mu;
    }
    Err(Error::EigSolveFailure {
        iterations: MAX_ITER,
    })
}

/// max ‖v‖²_∞/‖v‖²_{H¹} over piecewise-linear interpolants of probe
/// functions on the grid. Each interpolant is itself in H¹ (norms computed
/// exactly), so the result never exceeds the sharp constant.
fn sobolev_probe(disc: &SpatialDiscretization) -> f64 {
    let l = disc.l;
    let h = disc.h;
    let xs: Vec<f64> = (0..disc.n + 2).map(|i| i as f64 * h).collect();
    let mut probes: Vec<Vec<f64>> = Vec::new();
    for j in 0..=8 {
        let y = l * j as f64 / 8.0;
        probes.push(
            xs.iter()
                .map(|&x| (x.min(y)).cosh() * (l - x.max(y)).cosh() / l.sinh())
                .collect(),
        );
    }
    for m in 1..=4 {
        let k = m as f64 * std::f64::consts::PI / l;
        probes.push(xs.iter().map(|&x| (k * x).sin()).collect());
        probes.push(xs.iter().map(|&x| (k * x).cos()).collect());
    }
    probes
        .iter()
        .map(|v| {
            let sup = v.iter().fold(0.0_f64, |m, a| m.max(a.abs()));
            let h1: f64 = v
                .windows(2)
                .map(|e| h / 3.0 * (e[0] * e[0] + e[0] * e[1] + e[1] * e[1]) + (e[1] - e[0]).powi(2) / h)
                .sum();
            sup * sup / h1
        })
        .fold(0.0, f64::max)
}
