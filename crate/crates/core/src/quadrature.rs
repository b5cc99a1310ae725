//! Gauss–Legendre rules and the geometric-panel integrator used for kernel tails.

use std::sync::OnceLock;

/// Nodes and weights of the n-point Gauss–Legendre rule on [-1, 1].
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut z = (std::f64::consts::PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for j in 2..=n {
                let p2 = ((2 * j - 1) as f64 * z * p1 - (j - 1) as f64 * p0) / j as f64;
                p0 = p1;
                p1 = p2;
            }
            if n == 1 {
                p0 = 1.0;
                p1 = z;
            }
            dp = n as f64 * (z * p1 - p0) / (z * z - 1.0);
            let dz = p1 / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
        w[n - 1 - i] = w[i];
    }
    (x, w)
}

fn rule16() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(16))
}

fn rule8() -> &'static (Vec<f64>, Vec<f64>) {
    static R: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    R.get_or_init(|| gauss_legendre(8))
}

/// 16-point Gauss rule on [a, b].
pub fn gauss16(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    apply(rule16(), a, b, f)
}

/// 8-point Gauss rule on [a, b].
pub fn gauss8(a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    apply(rule8(), a, b, f)
}

/// The 8-point rule mapped to [a, b], as (node, weight) pairs.
pub fn gauss8_points(a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> {
    let (x, w) = rule8();
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    x.iter().zip(w).map(move |(xi, wi)| (c + r * xi, r * wi))
}

fn apply(rule: &(Vec<f64>, Vec<f64>), a: f64, b: f64, f: impl Fn(f64) -> f64) -> f64 {
    let (c, r) = (0.5 * (a + b), 0.5 * (b - a));
    rule.0
        .iter()
        .zip(&rule.1)
        .map(|(x, w)| w * f(c + r * x))
        .sum::<f64>()
        * r
}

/// Outcome of integrating a nonnegative, eventually decreasing function over [0, ∞).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailIntegral {
    pub value: f64,
    /// Right end of the last panel that was summed.
    pub reach: f64,
    pub converged: bool,
}

/// ∫₀^∞ f over panels [0,1], [1,2], [2,4], …, [2^j, 2^{j+1}], each split into
/// 4 sub-panels with a 16-point rule. Stops when a panel adds less than
/// `1e-14` of the running total; reports non-convergence after `max_panels`.
pub fn geometric_panels(f: impl Fn(f64) -> f64, max_panels: usize) -> TailIntegral {
    let mut total = gauss_sub(0.0, 1.0, &f);
    let mut a = 1.0;
    for _ in 0..max_panels {
        let b = 2.0 * a;
        let piece = gauss_sub(a, b, &f);
        total += piece;
        a = b;
        if piece.abs() <= 1e-14 * total.abs() {
            return TailIntegral {
                value: total,
                reach: a,
                converged: true,
            };
        }
    }
    TailIntegral {
        value: total,
        reach: a,
        converged: false,
    }
}

fn gauss_sub(a: f64, b: f64, f: &impl Fn(f64) -> f64) -> f64 {
    let h = (b - a) / 4.0;
    (0..4)
        .map(|i| gauss16(a + i as f64 * h, a + (i + 1) as f64 * h, f))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rules_integrate_polynomials_exactly() {
        for n in [1, 2, 5, 8, 16] {
            let (x, w) = gauss_legendre(n);
            assert!((w.iter().sum::<f64>() - 2.0).abs() < 1e-14);
            let deg = 2 * n - 1;
            let got: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32 - 1)).sum();
            let exact = if (deg - 1) % 2 == 0 { 2.0 / deg as f64 } else { 0.0 };
            assert!((got - exact).abs() < 1e-13, "n={n}");
        }
    }

    #[test]
    fn panels_recover_exponential_tail() {
        let r = geometric_panels(|s| (-s).exp(), 80);
        assert!(r.converged);
        assert!((r.value - 1.0).abs() < 1e-13);
    }

    #[test]
    fn panels_flag_divergence() {
        let r = geometric_panels(|s| (1.0 + s).powf(-0.5), 60);
        assert!(!r.converged);
        assert!(r.value > 1e8);
    }
}
