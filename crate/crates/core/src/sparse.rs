//! Compressed sparse rows and a banded LU with partial pivoting.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a square matrix from per-row `(column, value)` lists. Duplicate
    /// columns in a row are summed.
    pub fn from_rows(rows: Vec<Vec<(usize, f64)>>) -> Self {
        let n = rows.len();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut last: Option<usize> = None;
            for (c, v) in row {
                debug_assert!(c < n);
                if last == Some(c) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(c);
                    values.push(v);
                    last = Some(c);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix { n, indptr, indices, values }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.row(r).find(|&(cc, _)| cc == c).map_or(0.0, |(_, v)| v)
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for (r, out) in y.iter_mut().enumerate().take(self.n) {
            *out = self.row(r).map(|(c, v)| v * x[c]).sum();
        }
    }

    /// Lower and upper bandwidths.
    pub fn bandwidths(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for r in 0..self.n {
            for (c, _) in self.row(r) {
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for r in 0..self.n {
            for (c, v) in self.row(r) {
                m[(r, c)] += v;
            }
        }
        m
    }
}

/// LU factorization of a band matrix with row pivoting.
///
/// Row `r` of the working storage holds columns `r−kl ..= r+kl+ku`; the extra
/// `kl` upper diagonals absorb fill from row swaps.
#[derive(Debug, Clone)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    upper: Vec<f64>,
    lower: Vec<f64>,
    pivots: Vec<usize>,
}

impl BandedLu {
    /// Factorizes `A + shift·I`.
    pub fn factor(a: &CsrMatrix, shift: f64) -> Result<Self> {
        let n = a.dim();
        let (kl, ku) = a.bandwidths();
        let width = 2 * kl + ku + 1;
        let mut upper = vec![0.0; n * width];
        let mut scale = 0.0f64;
        for r in 0..n {
            for (c, v) in a.row(r) {
                upper[r * width + (c + kl - r)] += v;
            }
            upper[r * width + kl] += shift;
            for v in &upper[r * width..(r + 1) * width] {
                scale = scale.max(v.abs());
            }
        }
        let tiny = scale.max(f64::MIN_POSITIVE) * f64::EPSILON * n as f64;
        let mut lower = vec![0.0; n * kl.max(1)];
        let mut pivots = vec![0; n];

        let idx = |r: usize, c: usize| r * width + (c + kl - r);
        for k in 0..n {
            let last_row = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = upper[idx(k, k)].abs();
            for r in k + 1..=last_row {
                let v = upper[idx(r, k)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if best <= tiny {
                return Err(Error::Singular { row: k, pivot: upper[idx(p, k)] });
            }
            pivots[k] = p;
            let last_col = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=last_col {
                    upper.swap(idx(k, c), idx(p, c));
                }
            }
            let pivot = upper[idx(k, k)];
            for r in k + 1..=last_row {
                let m = upper[idx(r, k)] / pivot;
                upper[idx(r, k)] = 0.0;
                lower[k * kl + (r - k - 1)] = m;
                if m != 0.0 {
                    for c in k + 1..=last_col {
                        upper[idx(r, c)] -= m * upper[idx(k, c)];
                    }
                }
            }
        }
        Ok(BandedLu { n, kl, ku, width, upper, lower, pivots })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    /// Solves in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        let (n, kl, ku, width) = (self.n, self.kl, self.ku, self.width);
        for k in 0..n {
            let p = self.pivots[k];
            if p != k {
                b.swap(k, p);
            }
            let bk = b[k];
            if bk != 0.0 {
                for r in k + 1..=(k + kl).min(n - 1) {
                    b[r] -= self.lower[k * kl + (r - k - 1)] * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let row = &self.upper[k * width..(k + 1) * width];
            let mut s = b[k];
            for c in k + 1..=(k + kl + ku).min(n - 1) {
                s -= row[c + kl - k] * b[c];
            }
            b[k] = s / row[kl];
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tridiag(n: usize, lo: f64, d: f64, up: f64) -> CsrMatrix {
        let rows = (0..n)
            .map(|r| {
                let mut row = vec![(r, d)];
                if r > 0 {
                    row.push((r - 1, lo));
                }
                if r + 1 < n {
                    row.push((r + 1, up));
                }
                row
            })
            .collect();
        CsrMatrix::from_rows(rows)
    }

    #[test]
    fn solves_nonsymmetric_banded_system() {
        let a = tridiag(7, 2.0, -1.0, 0.5);
        let x: Vec<f64> = (0..7).map(|i| (i as f64).sin() + 0.3).collect();
        let mut b = vec![0.0; 7];
        a.mul_vec(&x, &mut b);
        let lu = BandedLu::factor(&a, 0.0).unwrap();
        lu.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn pivots_through_zero_diagonal() {
        // Zero diagonal forces row swaps.
        let a = tridiag(6, 1.0, 0.0, 1.0);
        let x: Vec<f64> = (0..6).map(|i| i as f64 - 2.5).collect();
        let mut b = vec![0.0; 6];
        a.mul_vec(&x, &mut b);
        let lu = BandedLu::factor(&a, 0.0).unwrap();
        lu.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12, "{u} vs {v}");
        }
    }

    #[test]
    fn shift_is_applied() {
        let a = tridiag(5, 1.0, -2.0, 1.0);
        let lu = BandedLu::factor(&a, 2.5).unwrap();
        let x = [1.0, -1.0, 2.0, 0.5, 0.0];
        let mut b = [0.0; 5];
        a.mul_vec(&x, &mut b);
        for (bi, xi) in b.iter_mut().zip(&x) {
            *bi += 2.5 * xi;
        }
        lu.solve_in_place(&mut b);
        for (u, v) in b.iter().zip(&x) {
            assert!((u - v).abs() < 1e-12);
        }
    }

    #[test]
    fn detects_singular() {
        // Row sums zero: the all-ones vector is in the kernel.
        let a = CsrMatrix::from_rows(vec![vec![(0, 1.0), (1, -1.0)], vec![(0, -1.0), (1, 1.0)]]);
        assert!(matches!(BandedLu::factor(&a, 0.0), Err(Error::Singular { .. })));
    }
}
