//! Compressed sparse row matrices and banded LU factorisation.

use std::io::Write;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Square sparse matrix in CSR form.
#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl OperatorMatrix {
    /// Build from `(row, col, value)` triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.sort_by_key(|a| (a.0, a.1));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows_of = Vec::with_capacity(trip.len());
        for (r, c, v) in trip {
            assert!(
                r < n && c < n,
                "triplet ({r}, {c}) out of range for n = {n}"
            );
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                rows_of.push(r);
                last = Some((r, c));
            }
        }
        let mut keep_cols = Vec::with_capacity(cols.len());
        let mut keep_vals = Vec::with_capacity(vals.len());
        for ((r, c), v) in rows_of.into_iter().zip(cols).zip(vals) {
            if v != 0.0 {
                row_ptr[r + 1] += 1;
                keep_cols.push(c);
                keep_vals.push(v);
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        OperatorMatrix {
            n,
            row_ptr,
            cols: keep_cols,
            vals: keep_vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        OperatorMatrix::from_triplets(n, (0..n).map(|i| (i, i, 1.0)).collect())
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        let mut out = Vec::with_capacity(self.nnz());
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                out.push((r, self.cols[k], self.vals[k]));
            }
        }
        out
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let row = &self.cols[self.row_ptr[r]..self.row_ptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.vals[self.row_ptr[r] + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        assert_eq!(y.len(), self.n);
        for r in 0..self.n {
            let mut s = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            y[r] = s;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec(x, &mut y);
        y
    }

    /// `x^T A`
    pub fn vecmat(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                y[self.cols[k]] += x[r] * self.vals[k];
            }
        }
        y
    }

    pub fn scale(&self, s: f64) -> OperatorMatrix {
        let mut out = self.clone();
        for v in &mut out.vals {
            *v *= s;
        }
        out
    }

    /// `a * self + b * other`
    pub fn axpby(&self, a: f64, other: &OperatorMatrix, b: f64) -> OperatorMatrix {
        assert_eq!(self.n, other.n);
        let mut trip: Vec<(usize, usize, f64)> = self
            .triplets()
            .into_iter()
            .map(|(r, c, v)| (r, c, a * v))
            .collect();
        trip.extend(other.triplets().into_iter().map(|(r, c, v)| (r, c, b * v)));
        OperatorMatrix::from_triplets(self.n, trip)
    }

    pub fn add_diagonal(&self, s: f64) -> OperatorMatrix {
        self.axpby(1.0, &OperatorMatrix::identity(self.n), s)
    }

    pub fn transpose(&self) -> OperatorMatrix {
        OperatorMatrix::from_triplets(
            self.n,
            self.triplets()
                .into_iter()
                .map(|(r, c, v)| (c, r, v))
                .collect(),
        )
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.triplets() {
            m[(r, c)] = v;
        }
        m
    }

    /// Symmetric permutation `P A P^T` where `perm[new] = old`.
    pub fn permute(&self, perm: &[usize]) -> OperatorMatrix {
        let mut inv = vec![0; self.n];
        for (new, &old) in perm.iter().enumerate() {
            inv[old] = new;
        }
        OperatorMatrix::from_triplets(
            self.n,
            self.triplets()
                .into_iter()
                .map(|(r, c, v)| (inv[r], inv[c], v))
                .collect(),
        )
    }

    /// Lower and upper bandwidth.
    pub fn bandwidth(&self) -> (usize, usize) {
        let mut kl = 0;
        let mut ku = 0;
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let c = self.cols[k];
                if c < r {
                    kl = kl.max(r - c);
                } else {
                    ku = ku.max(c - r);
                }
            }
        }
        (kl, ku)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.vals.iter().all(|v| v.is_finite())
    }

    /// Write `row col value` lines.
    pub fn write_triplets(&self, w: &mut dyn Write) -> std::io::Result<()> {
        for (r, c, v) in self.triplets() {
            writeln!(w, "{r} {c} {v:.17e}")?;
        }
        Ok(())
    }
}

/// LU factorisation with partial pivoting of a banded matrix, after an
/// optional symmetric reordering.
#[derive(Clone, Debug)]
pub struct BandedLu {
    n: usize,
    kl: usize,
    ku: usize,
    width: usize,
    band: Vec<f64>,
    piv: Vec<usize>,
    perm: Option<Vec<usize>>,
}

impl BandedLu {
    /// Factor `a` as given.
    pub fn new(a: &OperatorMatrix) -> Result<Self> {
        Self::factor(a, None)
    }

    /// Factor using whichever of the candidate orderings gives the smallest
    /// band (`perm[new] = old`).
    pub fn with_orderings(a: &OperatorMatrix, candidates: &[Vec<usize>]) -> Result<Self> {
        let mut best: Option<(usize, Option<&Vec<usize>>)> = None;
        let (kl, ku) = a.bandwidth();
        best = best.or(Some((2 * kl + ku, None)));
        for p in candidates {
            let (kl, ku) = a.permute(p).bandwidth();
            let cost = 2 * kl + ku;
            if cost < best.unwrap().0 {
                best = Some((cost, Some(p)));
            }
        }
        match best.unwrap().1 {
            Some(p) => Self::factor(&a.permute(p), Some(p.clone())),
            None => Self::factor(a, None),
        }
    }

    fn factor(a: &OperatorMatrix, perm: Option<Vec<usize>>) -> Result<Self> {
        let n = a.size();
        let (kl, ku) = a.bandwidth();
        let width = 2 * kl + ku + 1;
        let mut lu = BandedLu {
            n,
            kl,
            ku,
            width,
            band: vec![0.0; n * width],
            piv: vec![0; n],
            perm,
        };
        for (r, c, v) in a.triplets() {
            *lu.at(r, c) = v;
        }
        let scale = a.max_abs();
        let tiny = f64::EPSILON * scale * 1e-6;
        for k in 0..n {
            let last = (k + kl).min(n - 1);
            let mut p = k;
            let mut best = lu.val(k, k).abs();
            for r in k + 1..=last {
                let v = lu.val(r, k).abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            if !(best > tiny) {
                return Err(Error::Singular { row: k });
            }
            lu.piv[k] = p;
            let cend = (k + kl + ku).min(n - 1);
            if p != k {
                for c in k..=cend {
                    let a = lu.val(k, c);
                    let b = lu.val(p, c);
                    *lu.at(k, c) = b;
                    *lu.at(p, c) = a;
                }
            }
            let pivot = lu.val(k, k);
            for r in k + 1..=last {
                let l = lu.val(r, k) / pivot;
                if l == 0.0 {
                    continue;
                }
                *lu.at(r, k) = l;
                for c in k + 1..=cend {
                    let u = lu.val(k, c);
                    if u != 0.0 {
                        *lu.at(r, c) -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    #[inline]
    fn idx(&self, r: usize, c: usize) -> usize {
        debug_assert!(c + self.kl >= r && c <= r + self.kl + self.ku);
        r * self.width + (c + self.kl - r)
    }

    #[inline]
    fn at(&mut self, r: usize, c: usize) -> &mut f64 {
        let i = self.idx(r, c);
        &mut self.band[i]
    }

    #[inline]
    fn val(&self, r: usize, c: usize) -> f64 {
        self.band[self.idx(r, c)]
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn bandwidth(&self) -> (usize, usize) {
        (self.kl, self.ku)
    }

    /// Solve `A x = b` in place.
    pub fn solve_in_place(&self, b: &mut [f64]) {
        assert_eq!(b.len(), self.n);
        let mut work: Vec<f64> = match &self.perm {
            Some(p) => p.iter().map(|&old| b[old]).collect(),
            None => b.to_vec(),
        };
        let n = self.n;
        for k in 0..n {
            let p = self.piv[k];
            if p != k {
                work.swap(k, p);
            }
            let bk = work[k];
            if bk != 0.0 {
                for r in k + 1..=(k + self.kl).min(n - 1) {
                    work[r] -= self.val(r, k) * bk;
                }
            }
        }
        for k in (0..n).rev() {
            let mut s = work[k];
            for c in k + 1..=(k + self.kl + self.ku).min(n - 1) {
                s -= self.val(k, c) * work[c];
            }
            work[k] = s / self.val(k, k);
        }
        match &self.perm {
            Some(p) => {
                for (new, &old) in p.iter().enumerate() {
                    b[old] = work[new];
                }
            }
            None => b.copy_from_slice(&work),
        }
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }
}
