//! Row-major dense matrices, symmetric eigensolver and matrix exponential.

use std::ops::{Index, IndexMut};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    nrows: usize,
    ncols: usize,
    data: Vec<T>,
}

impl<T> Index<(usize, usize)> for Dense<T> {
    type Output = T;
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.ncols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Dense<T> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.ncols + j]
    }
}

impl<T: Real> Dense<T> {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![T::zero(); nrows * ncols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(d: &[T]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(nrows: usize, ncols: usize, f: impl Fn(usize, usize) -> T) -> Self {
        let mut m = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<T>]) -> Self {
        let nrows = cols.first().map_or(0, Vec::len);
        Self::from_fn(nrows, cols.len(), |i, j| cols[j][i])
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.ncols..(i + 1) * self.ncols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.nrows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.ncols, self.nrows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.ncols, other.nrows);
        let n = other.ncols;
        let mut out = Self::zeros(self.nrows, n);
        out.data
            .par_chunks_mut(n.max(1))
            .enumerate()
            .for_each(|(i, orow)| {
                for k in 0..self.ncols {
                    let a = self[(i, k)];
                    if a == T::zero() {
                        continue;
                    }
                    for (o, &b) in orow.iter_mut().zip(other.row(k)) {
                        *o += a * b;
                    }
                }
            });
        out
    }

    pub fn matvec_into(&self, x: &[T], y: &mut [T]) {
        for (i, yi) in y.iter_mut().enumerate() {
            *yi = self.row(i).iter().zip(x).map(|(&a, &b)| a * b).sum();
        }
    }

    pub fn matvec(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn lin_comb(&self, alpha: T, other: &Self, beta: T) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| alpha * a + beta * b)
            .collect();
        Self {
            nrows: self.nrows,
            ncols: self.ncols,
            data,
        }
    }

    pub fn add(&self, other: &Self) -> Self {
        self.lin_comb(T::one(), other, T::one())
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.lin_comb(T::one(), other, -T::one())
    }

    pub fn scaled(&self, alpha: T) -> Self {
        self.lin_comb(alpha, self, T::zero())
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

    pub fn norm_one(&self) -> T {
        (0..self.ncols).fold(T::zero(), |m, j| {
            m.max((0..self.nrows).map(|i| self[(i, j)].abs()).sum())
        })
    }

    pub fn norm_inf(&self) -> T {
        (0..self.nrows).fold(T::zero(), |m, i| {
            m.max(self.row(i).iter().map(|v| v.abs()).sum())
        })
    }

    /// `(A + A^T) / 2`.
    pub fn symmetrized(&self) -> Self {
        let half = T::c(0.5);
        Self::from_fn(self.nrows, self.ncols, |i, j| {
            half * (self[(i, j)] + self[(j, i)])
        })
    }

    /// `CᵀAC`.
    pub fn congruence(&self, c: &Self) -> Self {
        c.transpose().matmul(&self.matmul(c))
    }
}

/// Eigen-decomposition of a real symmetric matrix; values ascending, vectors as columns.
#[derive(Clone, Debug)]
pub struct SymEigen<T> {
    pub values: Vec<T>,
    pub vectors: Dense<T>,
}

/// Symmetric eigensolver: Householder tridiagonalization followed by implicit QL.
pub fn eigh<T: Real>(a: &Dense<T>) -> Result<SymEigen<T>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    if n == 0 {
        return Ok(SymEigen {
            values: vec![],
            vectors: Dense::zeros(0, 0),
        });
    }
    let mut v = a.symmetrized();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tred2(&mut v, &mut d, &mut e);
    // Rows of w are eigenvector candidates; keeps rotations contiguous.
    let mut w = v.transpose();
    tql2(Some(&mut w), &mut d, &mut e)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| d[i].partial_cmp(&d[j]).expect("finite eigenvalues"));
    let values = order.iter().map(|&i| d[i]).collect();
    let vectors = Dense::from_fn(n, n, |r, c| w[(order[c], r)]);
    Ok(SymEigen { values, vectors })
}

/// Eigenvalues only, ascending. Skips the accumulation of transformations.
pub fn eigvalsh<T: Real>(a: &Dense<T>) -> Result<Vec<T>> {
    let n = a.nrows();
    assert_eq!(n, a.ncols());
    if n == 0 {
        return Ok(vec![]);
    }
    let mut v = a.symmetrized();
    let mut d = vec![T::zero(); n];
    let mut e = vec![T::zero(); n];
    tridiagonalize(&mut v, &mut d, &mut e);
    for (i, di) in d.iter_mut().enumerate() {
        *di = v[(i, i)];
    }
    e[0] = T::zero();
    tql2(None, &mut d, &mut e)?;
    d.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    Ok(d)
}

fn tred2<T: Real>(v: &mut Dense<T>, d: &mut [T], e: &mut [T]) {
    tridiagonalize(v, d, e);
    accumulate(v, d, e);
}

/// Householder reduction; leaves the diagonal in `v` and the off-diagonal in `e`.
fn tridiagonalize<T: Real>(v: &mut Dense<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for j in 0..n {
        d[j] = v[(n - 1, j)];
    }
    for i in (1..n).rev() {
        let mut scale = T::zero();
        let mut h = T::zero();
        for k in 0..i {
            scale += d[k].abs();
        }
        if scale == T::zero() {
            e[i] = d[i - 1];
            for j in 0..i {
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
                v[(j, i)] = T::zero();
            }
        } else {
            for k in 0..i {
                d[k] /= scale;
                h += d[k] * d[k];
            }
            let mut f = d[i - 1];
            let mut g = h.sqrt();
            if f > T::zero() {
                g = -g;
            }
            e[i] = scale * g;
            h -= f * g;
            d[i - 1] = f - g;
            for ej in e.iter_mut().take(i) {
                *ej = T::zero();
            }
            for j in 0..i {
                f = d[j];
                v[(j, i)] = f;
                g = e[j] + v[(j, j)] * f;
                for k in j + 1..i {
                    g += v[(k, j)] * d[k];
                    e[k] += v[(k, j)] * f;
                }
                e[j] = g;
            }
            f = T::zero();
            for j in 0..i {
                e[j] /= h;
                f += e[j] * d[j];
            }
            let hh = f / (h + h);
            for j in 0..i {
                e[j] -= hh * d[j];
            }
            for j in 0..i {
                f = d[j];
                g = e[j];
                for k in j..i {
                    let upd = f * e[k] + g * d[k];
                    v[(k, j)] -= upd;
                }
                d[j] = v[(i - 1, j)];
                v[(i, j)] = T::zero();
            }
        }
        d[i] = h;
    }
}

fn accumulate<T: Real>(v: &mut Dense<T>, d: &mut [T], e: &mut [T]) {
    let n = d.len();
    for i in 0..n - 1 {
        v[(n - 1, i)] = v[(i, i)];
        v[(i, i)] = T::one();
        let h = d[i + 1];
        if h != T::zero() {
            for k in 0..=i {
                d[k] = v[(k, i + 1)] / h;
            }
            for j in 0..=i {
                let mut g = T::zero();
                for k in 0..=i {
                    g += v[(k, i + 1)] * v[(k, j)];
                }
                for k in 0..=i {
                    let upd = g * d[k];
                    v[(k, j)] -= upd;
                }
            }
        }
        for k in 0..=i {
            v[(k, i + 1)] = T::zero();
        }
    }
    for j in 0..n {
        d[j] = v[(n - 1, j)];
        v[(n - 1, j)] = T::zero();
    }
    v[(n - 1, n - 1)] = T::one();
    e[0] = T::zero();
}

/// Implicit QL on the tridiagonal (d, e); `w`, when given, holds eigenvectors as rows.
fn tql2<T: Real>(mut w: Option<&mut Dense<T>>, d: &mut [T], e: &mut [T]) -> Result<()> {
    let n = d.len();
    for i in 1..n {
        e[i - 1] = e[i];
    }
    e[n - 1] = T::zero();
    let mut f = T::zero();
    let mut tst1 = T::zero();
    let eps = T::epsilon();
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n {
            if e[m].abs() <= eps * tst1 {
                break;
            }
            m += 1;
        }
        if m == n {
            m = n - 1;
        }
        if m > l {
            let mut iter = 0;
            loop {
                iter += 1;
                if iter > 100 {
                    return Err(Error::NonConvergence("symmetric QL iteration".into()));
                }
                let mut g = d[l];
                let mut p = (d[l + 1] - g) / (T::c(2.0) * e[l]);
                let mut r = p.hypot(T::one());
                if p < T::zero() {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let mut h = g - d[l];
                for di in d.iter_mut().take(n).skip(l + 2) {
                    *di -= h;
                }
                f += h;
                p = d[m];
                let mut c = T::one();
                let mut c2 = c;
                let mut c3 = c;
                let el1 = e[l + 1];
                let mut s = T::zero();
                let mut s2 = T::zero();
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    g = c * e[i];
                    h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    let Some(w) = w.as_deref_mut() else { continue };
                    let (lo, hi) = w.data.split_at_mut((i + 1) * n);
                    let wi = &mut lo[i * n..];
                    let wi1 = &mut hi[..n];
                    for (a, b) in wi.iter_mut().zip(wi1.iter_mut()) {
                        let t = *b;
                        *b = s * *a + c * t;
                        *a = c * *a - s * t;
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = T::zero();
    }
    Ok(())
}

/// Dense matrix exponential by scaling and squaring of a Taylor series.
pub fn expm<T: Real>(a: &Dense<T>) -> Dense<T> {
    let n = a.nrows();
    let norm = a.norm_one();
    let mut s = 0i32;
    if norm > T::c(0.5) {
        s = (norm / T::c(0.5)).log2().ceil().to_i32().unwrap_or(0).max(0);
    }
    let scaled = a.scaled(T::c(0.5).powi(s));
    let mut result = Dense::identity(n);
    let mut term = Dense::identity(n);
    for k in 1..40 {
        term = term.matmul(&scaled).scaled(T::one() / T::n(k));
        result = result.add(&term);
        if term.max_abs() <= T::epsilon() * T::c(0.01) * result.max_abs() {
            break;
        }
    }
    for _ in 0..s {
        result = result.matmul(&result);
    }
    result
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eigh_recovers_known_spectrum() {
        let a = Dense::from_fn(3, 3, |i, j| match (i as i32 - j as i32).abs() {
            0 => 2.0,
            1 => -1.0,
            _ => 0.0,
        });
        let ev = eigh(&a).unwrap();
        let s2 = 2f64.sqrt();
        let expect = [2.0 - s2, 2.0, 2.0 + s2];
        for (x, y) in ev.values.iter().zip(expect) {
            assert!((x - y).abs() < 1e-13);
        }
        let back = ev
            .vectors
            .matmul(&Dense::from_diag(&ev.values))
            .matmul(&ev.vectors.transpose());
        assert!(back.max_abs_diff(&a) < 1e-13);
    }

    #[test]
    fn values_only_path_agrees_with_full_decomposition() {
        let a = Dense::from_fn(40, 40, |i, j| (((i * 31 + j * 17) ^ (i + j)) % 11) as f64 - 5.0).symmetrized();
        let full = eigh(&a).unwrap().values;
        let vals = eigvalsh(&a).unwrap();
        for (x, y) in full.iter().zip(&vals) {
            assert!((x - y).abs() < 1e-11, "{x} vs {y}");
        }
    }

    #[test]
    fn eigh_handles_diagonal_and_f32() {
        let a = Dense::<f32>::from_diag(&[3.0, -1.0, 2.0]);
        let ev = eigh(&a).unwrap();
        assert_eq!(ev.values, vec![-1.0, 2.0, 3.0]);
        assert!((ev.vectors[(1, 0)].abs() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn expm_of_rotation_generator() {
        let t = 2.5f64;
        let a = Dense::from_fn(2, 2, |i, j| match (i, j) {
            (0, 1) => t,
            (1, 0) => -t,
            _ => 0.0,
        });
        let e = expm(&a);
        assert!((e[(0, 0)] - t.cos()).abs() < 1e-14);
        assert!((e[(0, 1)] - t.sin()).abs() < 1e-14);
    }

    #[test]
    fn expm_of_diagonal() {
        let a = Dense::from_diag(&[1.0f64, -3.0, 7.0]);
        let e = expm(&a);
        for (k, x) in [1.0f64, -3.0, 7.0].iter().enumerate() {
            assert!((e[(k, k)] / x.exp() - 1.0).abs() < 1e-13);
        }
    }
}
