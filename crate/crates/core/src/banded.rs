//! Band matrices with an LU factorization (partial pivoting).

use crate::error::{Error, Result};

/// Square band matrix with `kl` sub- and `ku` super-diagonals, stored by rows.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix {
            n,
            kl,
            ku,
            data: vec![0.0; n * (kl + ku + 1)],
        }
    }

    /// Assembles from (row, col, value) triplets; duplicates are summed.
    pub fn from_triplets(n: usize, entries: &[(usize, usize, f64)]) -> Self {
        let kl = entries.iter().map(|&(i, j, _)| i.saturating_sub(j)).max().unwrap_or(0);
        let ku = entries.iter().map(|&(i, j, _)| j.saturating_sub(i)).max().unwrap_or(0);
        let mut m = BandMatrix::zeros(n, kl, ku);
        for &(i, j, v) in entries {
            *m.entry_mut(i, j) += v;
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        let mut m = BandMatrix::zeros(n, 0, 0);
        m.data.iter_mut().for_each(|v| *v = 1.0);
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    fn width(&self) -> usize {
        self.kl + self.ku + 1
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.kl - i]
        } else {
            0.0
        }
    }

    fn entry_mut(&mut self, i: usize, j: usize) -> &mut f64 {
        debug_assert!(self.in_band(i, j));
        let w = self.width();
        &mut self.data[i * w + j + self.kl - i]
    }

    /// Column range of row `i` inside the band.
    fn cols(&self, i: usize) -> std::ops::Range<usize> {
        i.saturating_sub(self.kl)..(i + self.ku + 1).min(self.n)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let w = self.width();
        for (i, yi) in y.iter_mut().enumerate() {
            let row = &self.data[i * w..(i + 1) * w];
            *yi = self
                .cols(i)
                .map(|j| row[j + self.kl - i] * x[j])
                .sum();
        }
    }

    /// a·self + b·other.
    pub fn combine(&self, a: f64, other: &BandMatrix, b: f64) -> BandMatrix {
        assert_eq!(self.n, other.n);
        let mut m = BandMatrix::zeros(self.n, self.kl.max(other.kl), self.ku.max(other.ku));
        for i in 0..self.n {
            for j in self.cols(i) {
                *m.entry_mut(i, j) += a * self.get(i, j);
            }
            for j in other.cols(i) {
                *m.entry_mut(i, j) += b * other.get(i, j);
            }
        }
        m
    }

    /// Matrix product (bandwidths add).
    pub fn mul(&self, other: &BandMatrix) -> BandMatrix {
        let mut m = BandMatrix::zeros(self.n, self.kl + other.kl, self.ku + other.ku);
        for i in 0..self.n {
            for k in self.cols(i) {
                let a = self.get(i, k);
                for j in other.cols(k) {
                    *m.entry_mut(i, j) += a * other.get(k, j);
                }
            }
        }
        m
    }

    pub fn transpose(&self) -> BandMatrix {
        let mut m = BandMatrix::zeros(self.n, self.ku, self.kl);
        for i in 0..self.n {
            for j in self.cols(i) {
                *m.entry_mut(j, i) = self.get(i, j);
            }
        }
        m
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        (0..self.n)
            .map(|i| (0..self.n).map(|j| self.get(i, j)).collect())
            .collect()
    }

    pub fn factor(&self) -> Result<BandLu> {
        BandLu::new(self)
    }
}

/// LU factors of a band matrix; U carries `kl + ku` super-diagonals after pivoting.
#[derive(Debug, Clone)]
pub struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    /// Rows of U, each of width ku + kl + 1 starting at the diagonal.
    u: Vec<f64>,
    /// Multipliers, kl per column.
    l: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn new(a: &BandMatrix) -> Result<Self> {
        let (n, kl) = (a.n, a.kl);
        let ku = a.ku + a.kl;
        let w = ku + 1;
        // Working rows: row i stores columns i-kl .. i+ku in a dense window.
        let ww = kl + ku + 1;
        let mut rows = vec![0.0; n * ww];
        for i in 0..n {
            for j in a.cols(i) {
                rows[i * ww + j + kl - i] = a.get(i, j);
            }
        }
        let at = |rows: &Vec<f64>, i: usize, j: usize| rows[i * ww + j + kl - i];
        let mut l = vec![0.0; n * kl.max(1)];
        let mut piv = vec![0; n];
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = at(&rows, k, k).abs();
            for i in k + 1..=last {
                let v = at(&rows, i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::LinearSolveFailure { column: k });
            }
            piv[k] = p;
            let jmax = (k + ku).min(n - 1);
            if p != k {
                for j in k..=jmax {
                    let (ip, ik) = (p * ww + j + kl - p, k * ww + j + kl - k);
                    if j + kl >= p {
                        rows.swap(ip, ik);
                    }
                }
            }
            let pivot = at(&rows, k, k);
            for i in k + 1..=last {
                let f = at(&rows, i, k) / pivot;
                l[k * kl.max(1) + (i - k - 1)] = f;
                if f != 0.0 {
                    for j in k + 1..=jmax {
                        let v = at(&rows, k, j);
                        rows[i * ww + j + kl - i] -= f * v;
                    }
                }
                rows[i * ww + k + kl - i] = 0.0;
            }
        }
        let mut u = vec![0.0; n * w];
        for i in 0..n {
            for j in i..=(i + ku).min(n - 1) {
                u[i * w + j - i] = at(&rows, i, j);
            }
        }
        Ok(BandLu { n, kl, ku, u, l, piv })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        let n = self.n;
        let kls = self.kl.max(1);
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                x.swap(p, k);
            }
            let xk = x[k];
            for i in k + 1..=(k + self.kl).min(n - 1) {
                x[i] -= self.l[k * kls + (i - k - 1)] * xk;
            }
        }
        let w = self.ku + 1;
        for i in (0..n).rev() {
            let row = &self.u[i * w..(i + 1) * w];
            let mut s = x[i];
            for j in i + 1..=(i + self.ku).min(n - 1) {
                s -= row[j - i] * x[j];
            }
            x[i] = s / row[0];
        }
    }
}
