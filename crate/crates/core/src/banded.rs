//! Banded LU factorization without pivoting.

use crate::error::{Error, Result};

/// Square matrix with `kl` sub- and `ku` super-diagonals, stored row by row.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    kl: usize,
    ku: usize,
    data: Vec<f64>,
}

impl BandMatrix {
    pub fn zeros(n: usize, kl: usize, ku: usize) -> Self {
        BandMatrix { n, kl, ku, data: vec![0.0; n * (kl + ku + 1)] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(j + self.kl >= i && j <= i + self.ku, "({i},{j}) outside band");
        i * (self.kl + self.ku + 1) + (j + self.kl - i)
    }

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        if j + self.kl < i || j > i + self.ku {
            0.0
        } else {
            self.data[self.idx(i, j)]
        }
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

    /// In-place LU (Doolittle, no pivoting) followed by the solve of `A x = b`.
    pub fn solve(mut self, b: &[f64]) -> Result<Vec<f64>> {
        let (n, kl, ku) = (self.n, self.kl, self.ku);
        let w = kl + ku + 1;
        for k in 0..n {
            let piv = self.data[k * w + kl];
            let row_scale = (k.saturating_sub(kl)..=(k + ku).min(n - 1)).map(|j| self.get(k, j).abs()).fold(0.0, f64::max);
            if piv.abs() <= 1e-14 * row_scale || !piv.is_finite() {
                return Err(Error::Degenerate(format!("zero pivot at row {k} of banded system")));
            }
            let jmax = (k + ku).min(n - 1);
            for i in k + 1..=(k + kl).min(n - 1) {
                let ik = i * w + (k + kl - i);
                let l = self.data[ik] / piv;
                if l == 0.0 {
                    continue;
                }
                self.data[ik] = l;
                let base_i = i * w + kl - i;
                let base_k = k * w + kl - k;
                for j in k + 1..=jmax {
                    self.data[base_i + j] -= l * self.data[base_k + j];
                }
            }
        }
        let mut x = b.to_vec();
        for i in 0..n {
            let lo = i.saturating_sub(kl);
            let base = i * w + kl - i;
            let mut s = x[i];
            for j in lo..i {
                s -= self.data[base + j] * x[j];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let hi = (i + ku).min(n - 1);
            let base = i * w + kl - i;
            let mut s = x[i];
            for j in i + 1..=hi {
                s -= self.data[base + j] * x[j];
            }
            x[i] = s / self.data[base + i];
        }
        Ok(x)
    }
}
