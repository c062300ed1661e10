//! Banded linear systems: Gaussian elimination with partial pivoting, and
//! the Thomas algorithm for tridiagonal systems.

use crate::error::{Error, Result};

/// Square matrix with nonzeros in a band, stored row by row as dense
/// segments starting at `start[i]`.
#[derive(Debug, Clone)]
pub struct BandMatrix {
    n: usize,
    start: Vec<usize>,
    rows: Vec<Vec<f64>>,
}

impl BandMatrix {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            start: (0..n).collect(),
            rows: vec![Vec::new(); n],
        }
    }

    fn ensure(&mut self, i: usize, lo: usize, hi: usize) {
        let row = &mut self.rows[i];
        if row.is_empty() {
            self.start[i] = lo;
            row.resize(hi + 1 - lo, 0.0);
            return;
        }
        let s = self.start[i];
        if lo < s {
            let mut fresh = vec![0.0; s - lo];
            fresh.extend_from_slice(row);
            *row = fresh;
            self.start[i] = lo;
        }
        let s = self.start[i];
        if hi + 1 > s + row.len() {
            row.resize(hi + 1 - s, 0.0);
        }
    }

    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        self.ensure(i, j, j);
        let s = self.start[i];
        self.rows[i][j - s] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let s = self.start[i];
        if j < s || j >= s + self.rows[i].len() {
            0.0
        } else {
            self.rows[i][j - s]
        }
    }

    pub fn mul(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let s = self.start[i];
                self.rows[i].iter().enumerate().map(|(k, a)| a * x[s + k]).sum()
            })
            .collect()
    }

    /// Largest absolute entry of each row.
    pub fn row_scales(&self) -> Vec<f64> {
        self.rows
            .iter()
            .map(|r| r.iter().fold(0.0f64, |m, v| m.max(v.abs())))
            .collect()
    }

    /// Solves A x = b in place of a copy of A.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mut a = self.clone();
        let mut x = b.to_vec();
        let lower = (0..n).map(|i| i.saturating_sub(a.start[i])).max().unwrap_or(0);
        for k in 0..n {
            let last = (k + lower).min(n - 1);
            let (mut p, mut best) = (k, a.get(k, k).abs());
            for i in k + 1..=last {
                let v = a.get(i, k).abs();
                if v > best {
                    p = i;
                    best = v;
                }
            }
            if !(best > 0.0) || !best.is_finite() {
                return Err(Error::Solver(format!("singular band matrix at column {k}")));
            }
            if p != k {
                a.rows.swap(p, k);
                a.start.swap(p, k);
                x.swap(p, k);
            }
            let end = a.start[k] + a.rows[k].len();
            let pivot = a.get(k, k);
            for i in k + 1..=last {
                let v = a.get(i, k);
                if v == 0.0 {
                    continue;
                }
                let l = v / pivot;
                a.ensure(i, k, end - 1);
                let (sk, si) = (a.start[k], a.start[i]);
                for j in k..end {
                    let akj = a.rows[k][j - sk];
                    a.rows[i][j - si] -= l * akj;
                }
                x[i] -= l * x[k];
            }
        }
        for k in (0..n).rev() {
            let s = a.start[k];
            let mut acc = x[k];
            for (off, v) in a.rows[k].iter().enumerate() {
                let j = s + off;
                if j > k {
                    acc -= v * x[j];
                }
            }
            x[k] = acc / a.get(k, k);
        }
        Ok(x)
    }
}

/// Tridiagonal matrix with sub-, main and super-diagonals.
#[derive(Debug, Clone, PartialEq)]
pub struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
}

impl Tridiagonal {
    pub fn new(n: usize) -> Self {
        Self {
            lower: vec![0.0; n],
            diag: vec![0.0; n],
            upper: vec![0.0; n],
        }
    }

    /// Thomas algorithm; `lower[0]` and `upper[n−1]` are ignored.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.diag.len();
        let mut c = vec![0.0; n];
        let mut d = vec![0.0; n];
        let mut denom = self.diag[0];
        if denom == 0.0 {
            return Err(Error::Solver("zero pivot in tridiagonal solve".into()));
        }
        c[0] = self.upper[0] / denom;
        d[0] = b[0] / denom;
        for i in 1..n {
            denom = self.diag[i] - self.lower[i] * c[i - 1];
            if denom == 0.0 || !denom.is_finite() {
                return Err(Error::Solver(format!("zero pivot in tridiagonal solve at row {i}")));
            }
            c[i] = if i + 1 < n { self.upper[i] / denom } else { 0.0 };
            d[i] = (b[i] - self.lower[i] * d[i - 1]) / denom;
        }
        for i in (0..n - 1).rev() {
            d[i] -= c[i] * d[i + 1];
        }
        Ok(d)
    }

    /// Sign pattern of an M-matrix (for −A) on rows 1..n−1: positive
    /// off-diagonals, negative diagonal, and row diagonal dominance up to a
    /// relative slack `slack`.
    pub fn is_m_matrix_pattern(&self, slack: f64) -> bool {
        let n = self.diag.len();
        (1..n - 1).all(|i| {
            let (lo, up) = (self.lower[i], self.upper[i]);
            lo > 0.0 && up > 0.0 && self.diag[i] < 0.0 && -self.diag[i] >= (lo + up) * (1.0 - slack)
        })
    }
}
