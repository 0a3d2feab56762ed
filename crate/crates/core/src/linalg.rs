//! Small dense helpers and a banded LU factorization.

use crate::error::{Error, Result};

/// Symmetric 2×2 matrix `[[a, b], [b, c]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sym2 {
    pub a: f64,
    pub b: f64,
    pub c: f64,
}

impl Sym2 {
    pub const fn new(a: f64, b: f64, c: f64) -> Self {
        Self { a, b, c }
    }

    pub fn identity() -> Self {
        Self::new(1.0, 0.0, 1.0)
    }

    pub fn trace(&self) -> f64 {
        self.a + self.c
    }

    pub fn det(&self) -> f64 {
        self.a * self.c - self.b * self.b
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::new(self.a * s, self.b * s, self.c * s)
    }

    pub fn add(&self, o: &Self) -> Self {
        Self::new(self.a + o.a, self.b + o.b, self.c + o.c)
    }

    pub fn max_abs(&self) -> f64 {
        self.a.abs().max(self.b.abs()).max(self.c.abs())
    }

    /// `Σ_ij self_ij · other_ij`.
    pub fn contract(&self, o: &Self) -> f64 {
        self.a * o.a + 2.0 * self.b * o.b + self.c * o.c
    }

    /// `M · self · M` for symmetric `M`.
    pub fn congruence(&self, m: &Self) -> Self {
        // self * m
        let p00 = self.a * m.a + self.b * m.b;
        let p01 = self.a * m.b + self.b * m.c;
        let p10 = self.b * m.a + self.c * m.b;
        let p11 = self.b * m.b + self.c * m.c;
        Self::new(m.a * p00 + m.b * p10, m.a * p01 + m.b * p11, m.b * p01 + m.c * p11)
    }

    /// Eigenvalues in descending order with unit eigenvectors.
    pub fn eigen(&self) -> ([f64; 2], [[f64; 2]; 2]) {
        let mean = 0.5 * (self.a + self.c);
        let half = 0.5 * (self.a - self.c);
        let r = half.hypot(self.b);
        let l1 = mean + r;
        let l2 = mean - r;
        if r == 0.0 {
            return ([l1, l2], [[1.0, 0.0], [0.0, 1.0]]);
        }
        // eigenvector of l1: rotation by half the angle atan2(b, half)
        let phi = 0.5 * self.b.atan2(half);
        let (s, c) = phi.sin_cos();
        ([l1, l2], [[c, s], [-s, c]])
    }

    pub fn eigenvalues(&self) -> [f64; 2] {
        let mean = 0.5 * (self.a + self.c);
        let r = (0.5 * (self.a - self.c)).hypot(self.b);
        [mean + r, mean - r]
    }

    /// `g^{-1/2}` for symmetric positive definite `g`.
    pub fn inv_sqrt(&self) -> Result<Self> {
        let ([l1, l2], [v1, v2]) = self.eigen();
        if l2 <= 0.0 || !l2.is_finite() {
            return Err(Error::Numeric(format!("matrix {self:?} is not positive definite")));
        }
        let (s1, s2) = (1.0 / l1.sqrt(), 1.0 / l2.sqrt());
        Ok(Self::from_spectral([s1, s2], [v1, v2]))
    }

    /// `Σ_k w_k v_k v_kᵀ`.
    pub fn from_spectral(w: [f64; 2], v: [[f64; 2]; 2]) -> Self {
        Self::new(
            w[0] * v[0][0] * v[0][0] + w[1] * v[1][0] * v[1][0],
            w[0] * v[0][0] * v[0][1] + w[1] * v[1][0] * v[1][1],
            w[0] * v[0][1] * v[0][1] + w[1] * v[1][1] * v[1][1],
        )
    }
}

/// General (unsymmetric) banded matrix stored row-wise with room for the
/// fill-in created by partial pivoting.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    /// Zero matrix with `kl` sub- and `ku` super-diagonals.
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        let width = 2 * kl + ku + 1;
        Self { n, kl, ku, width, data: vec![0.0; n * width] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bandwidths(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        i * self.width + (j + self.kl - i)
    }

    fn in_band(&self, i: usize, j: usize) -> bool {
        j + self.kl >= i && j <= i + self.ku
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if self.in_band(i, j) {
            self.data[self.idx(i, j)]
        } else {
            0.0
        }
    }

    /// Adds `v` at `(i, j)`. Panics when the entry lies outside the band.
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        assert!(
            i < self.n && j < self.n && self.in_band(i, j),
            "entry ({i}, {j}) outside band (kl = {}, ku = {})",
            self.kl,
            self.ku
        );
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let lo = i.saturating_sub(self.kl);
                let hi = (i + self.ku).min(self.n - 1);
                (lo..=hi).map(|j| self.data[self.idx(i, j)] * x[j]).sum()
            })
            .collect()
    }

    /// LU factorization with partial pivoting, consuming the matrix.
    pub fn factor(mut self) -> Result<BandLu> {
        let n = self.n;
        let kl = self.kl;
        let reach = self.kl + self.ku;
        let mut pivots = vec![0usize; n];
        let scale = self.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut piv = k;
            let mut best = self.data[self.idx(k, k)].abs();
            for i in (k + 1)..=last_row {
                let v = self.data[self.idx(i, k)].abs();
                if v > best {
                    best = v;
                    piv = i;
                }
            }
            if best == 0.0 || best <= f64::EPSILON * 1e-3 * scale {
                return Err(Error::SingularMatrix(k));
            }
            pivots[k] = piv;
            let last_col = (k + reach).min(n - 1);
            if piv != k {
                for j in k..=last_col {
                    let (a, b) = (self.idx(k, j), self.idx(piv, j));
                    self.data.swap(a, b);
                }
            }
            let pivot = self.data[self.idx(k, k)];
            for i in (k + 1)..=last_row {
                let ik = self.idx(i, k);
                let l = self.data[ik] / pivot;
                self.data[ik] = l;
                if l == 0.0 {
                    continue;
                }
                for j in (k + 1)..=last_col {
                    let kj = self.idx(k, j);
                    let ij = self.idx(i, j);
                    self.data[ij] -= l * self.data[kj];
                }
            }
        }
        Ok(BandLu { m: self, pivots })
    }
}

/// Factors produced by [`BandMatrix::factor`].
#[derive(Debug, Clone)]
pub struct BandLu {
    m: BandMatrix,
    pivots: Vec<usize>,
}

impl BandLu {
    pub fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let m = &self.m;
        let n = m.n;
        let reach = m.kl + m.ku;
        let mut x = rhs.to_vec();
        for k in 0..n {
            x.swap(k, self.pivots[k]);
            let xk = x[k];
            if xk != 0.0 {
                for i in (k + 1)..=(k + m.kl).min(n - 1) {
                    x[i] -= m.data[m.idx(i, k)] * xk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut acc = x[k];
            for j in (k + 1)..=(k + reach).min(n - 1) {
                acc -= m.data[m.idx(k, j)] * x[j];
            }
            x[k] = acc / m.data[m.idx(k, k)];
        }
        x
    }
}
