//! Compressed sparse row matrices.

use std::io::{self, Write};

use rayon::prelude::*;

use super::dense::Dense;
use crate::scalar::Real;

const PAR_NNZ: usize = 1 << 15;

#[derive(Clone, Debug, PartialEq)]
pub struct Csr<T> {
    nrows: usize,
    ncols: usize,
    indptr: Vec<usize>,
    indices: Vec<u32>,
    data: Vec<T>,
}

/// Sort a row by column and merge duplicates in their original order.
fn compress_row<T: Real>(row: &mut Vec<(u32, T)>) {
    row.sort_by_key(|e| e.0);
    let mut w = 0usize;
    for r in 0..row.len() {
        if w > 0 && row[w - 1].0 == row[r].0 {
            let v = row[r].1;
            row[w - 1].1 += v;
        } else {
            row[w] = row[r];
            w += 1;
        }
    }
    row.truncate(w);
    row.retain(|e| e.1 != T::zero());
}

impl<T: Real> Csr<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            indptr: vec![0; nrows + 1],
            indices: Vec::new(),
            data: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![T::one(); n])
    }

    pub fn diagonal(d: &[T]) -> Self {
        let mut rows: Vec<Vec<(u32, T)>> = Vec::with_capacity(d.len());
        for (i, &v) in d.iter().enumerate() {
            rows.push(vec![(i as u32, v)]);
        }
        Self::from_rows(d.len(), rows)
    }

    /// Build from per-row entry lists; duplicates are summed and exact zeros dropped.
    pub fn from_rows(ncols: usize, mut rows: Vec<Vec<(u32, T)>>) -> Self {
        rows.par_iter_mut().for_each(|r| compress_row(r));
        let nrows = rows.len();
        let mut indptr = Vec::with_capacity(nrows + 1);
        indptr.push(0);
        let nnz: usize = rows.iter().map(Vec::len).sum();
        let mut indices = Vec::with_capacity(nnz);
        let mut data = Vec::with_capacity(nnz);
        for r in rows {
            for (c, v) in r {
                indices.push(c);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        Self {
            nrows,
            ncols,
            indptr,
            indices,
            data,
        }
    }

    pub fn from_triplets(nrows: usize, ncols: usize, trips: &[(u32, u32, T)]) -> Self {
        let mut rows = vec![Vec::new(); nrows];
        for &(r, c, v) in trips {
            rows[r as usize].push((c, v));
        }
        Self::from_rows(ncols, rows)
    }

    pub fn from_dense(d: &Dense<T>) -> Self {
        let rows = (0..d.nrows())
            .map(|i| {
                (0..d.ncols())
                    .filter(|&j| d[(i, j)] != T::zero())
                    .map(|j| (j as u32, d[(i, j)]))
                    .collect()
            })
            .collect();
        Self::from_rows(d.ncols(), rows)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.data.len()
    }

    pub fn row(&self, i: usize) -> (&[u32], &[T]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.data[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        let (cols, vals) = self.row(i);
        match cols.binary_search(&(j as u32)) {
            Ok(k) => vals[k],
            Err(_) => T::zero(),
        }
    }

    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).map(move |(&j, &x)| (i, j as usize, x))
        })
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        let row = |i: usize| {
            let (c, v) = self.row(i);
            let mut s = T::zero();
            for (&j, &a) in c.iter().zip(v) {
                s += a * x[j as usize];
            }
            s
        };
        if self.nnz() >= PAR_NNZ {
            y.par_iter_mut().enumerate().for_each(|(i, yi)| *yi = row(i));
        } else {
            for (i, yi) in y.iter_mut().enumerate() {
                *yi = row(i);
            }
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.indices {
            counts[j as usize + 1] += 1;
        }
        for k in 0..self.ncols {
            counts[k + 1] += counts[k];
        }
        let indptr = counts.clone();
        let mut next = counts;
        let mut indices = vec![0u32; self.nnz()];
        let mut data = vec![T::zero(); self.nnz()];
        for i in 0..self.nrows {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                let slot = next[j as usize];
                indices[slot] = i as u32;
                data[slot] = a;
                next[j as usize] += 1;
            }
        }
        Self {
            nrows: self.ncols,
            ncols: self.nrows,
            indptr,
            indices,
            data,
        }
    }

    pub fn scaled(&self, alpha: T) -> Self {
        if alpha == T::zero() {
            return Self::zeros(self.nrows, self.ncols);
        }
        let mut out = self.clone();
        for v in &mut out.data {
            *v *= alpha;
        }
        out
    }

    /// `alpha * self + beta * other`.
    pub fn lin_comb(&self, alpha: T, other: &Self, beta: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let rows = (0..self.nrows)
            .into_par_iter()
            .map(|i| {
                let (ca, va) = self.row(i);
                let (cb, vb) = other.row(i);
                let mut r = Vec::with_capacity(ca.len() + cb.len());
                r.extend(ca.iter().zip(va).map(|(&j, &v)| (j, alpha * v)));
                r.extend(cb.iter().zip(vb).map(|(&j, &v)| (j, beta * v)));
                r
            })
            .collect();
        Self::from_rows(self.ncols, rows)
    }

    pub fn add(&self, other: &Self) -> Self {
        self.lin_comb(T::one(), other, T::one())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.lin_comb(T::one(), other, -T::one())
    }

    /// Sparse product with a dense accumulator per row (Gustavson).
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let n = other.ncols;
        let rows = (0..self.nrows)
            .into_par_iter()
            .map_init(
                || (vec![T::zero(); n], vec![false; n]),
                |(acc, seen), i| {
                    let mut pattern: Vec<u32> = Vec::new();
                    let (ca, va) = self.row(i);
                    for (&k, &a) in ca.iter().zip(va) {
                        let (cb, vb) = other.row(k as usize);
                        for (&j, &b) in cb.iter().zip(vb) {
                            let ju = j as usize;
                            if !seen[ju] {
                                seen[ju] = true;
                                pattern.push(j);
                            }
                            acc[ju] += a * b;
                        }
                    }
                    let mut r = Vec::with_capacity(pattern.len());
                    for j in pattern {
                        let ju = j as usize;
                        r.push((j, acc[ju]));
                        acc[ju] = T::zero();
                        seen[ju] = false;
                    }
                    r
                },
            )
            .collect();
        Self::from_rows(n, rows)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.sub(other).max_abs()
    }

    pub fn frobenius(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn norm_inf(&self) -> T {
        (0..self.nrows).fold(T::zero(), |m, i| {
            m.max(self.row(i).1.iter().map(|v| v.abs()).sum())
        })
    }

    pub fn norm_one(&self) -> T {
        self.transpose().norm_inf()
    }

    /// Max-entry residual of `self - self^T`.
    pub fn symmetry_residual(&self) -> T {
        self.max_abs_diff(&self.transpose())
    }

    /// Max-entry residual of `self + self^T`.
    pub fn antisymmetry_residual(&self) -> T {
        self.add(&self.transpose()).max_abs()
    }

    pub fn diag(&self) -> Vec<T> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    pub fn to_dense(&self) -> Dense<T> {
        let mut d = Dense::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            d[(i, j)] += v;
        }
        d
    }

    pub fn map_values(&self, f: impl Fn(T) -> T) -> Self {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = f(*v);
        }
        out
    }

    /// Little-endian triplet dump: u64 dim, u64 nnz, then (u32 row, u32 col, f64 re, f64 im).
    pub fn write_triplets<W: Write>(&self, mut w: W) -> io::Result<()> {
        w.write_all(&(self.nrows as u64).to_le_bytes())?;
        w.write_all(&(self.nnz() as u64).to_le_bytes())?;
        for (i, j, v) in self.triplets() {
            w.write_all(&(i as u32).to_le_bytes())?;
            w.write_all(&(j as u32).to_le_bytes())?;
            w.write_all(&v.to64().to_le_bytes())?;
            w.write_all(&0f64.to_le_bytes())?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Csr<f64> {
        Csr::from_triplets(
            3,
            3,
            &[(0, 0, 1.0), (0, 2, 2.0), (1, 1, 3.0), (2, 0, 4.0), (2, 0, 1.0)],
        )
    }

    #[test]
    fn duplicates_are_summed() {
        let a = sample();
        assert_eq!(a.get(2, 0), 5.0);
        assert_eq!(a.nnz(), 4);
    }

    #[test]
    fn transpose_roundtrip() {
        let a = sample();
        assert_eq!(a.transpose().transpose(), a);
        assert_eq!(a.transpose().get(0, 2), 5.0);
    }

    #[test]
    fn matmul_matches_dense() {
        let a = sample();
        let p = a.matmul(&a.transpose()).to_dense();
        let d = a.to_dense();
        let q = d.matmul(&d.transpose());
        assert!(p.max_abs_diff(&q) < 1e-14);
    }

    #[test]
    fn cancellation_drops_entries() {
        let a = sample();
        assert_eq!(a.sub(&a).nnz(), 0);
    }

    #[test]
    fn triplet_dump_layout() {
        let a = sample();
        let mut buf = Vec::new();
        a.write_triplets(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 4 * 24);
        assert_eq!(u64::from_le_bytes(buf[8..16].try_into().unwrap()), 4);
    }
}
