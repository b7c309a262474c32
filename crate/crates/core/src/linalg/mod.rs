//! Sparse and dense kernels used by the operator and solver layers.

pub mod dense;
pub mod sparse;

pub mod krylov;

pub use dense::{eigh, eigvalsh, expm, Dense, SymEigen};
pub use krylov::{expmv, ExpmvOptions, ExpmvReport};
pub use sparse::Csr;

use crate::scalar::Real;

/// Anything that can act linearly on a coefficient vector.
pub trait LinearOperator<T: Real>: Sync {
    fn dim(&self) -> usize;
    fn apply_into(&self, x: &[T], y: &mut [T]);

    fn apply(&self, x: &[T]) -> Vec<T> {
        let mut y = vec![T::zero(); self.dim()];
        self.apply_into(x, &mut y);
        y
    }

    /// Upper bound on the induced 2-norm.
    fn norm_bound(&self) -> T;
}

impl<T: Real> LinearOperator<T> for Csr<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply_into(&self, x: &[T], y: &mut [T]) {
        self.matvec_into(x, y);
    }
    fn norm_bound(&self) -> T {
        // sqrt(|A|_1 |A|_inf)
        (self.norm_one() * self.norm_inf()).sqrt()
    }
}

impl<T: Real> LinearOperator<T> for Dense<T> {
    fn dim(&self) -> usize {
        self.nrows()
    }
    fn apply_into(&self, x: &[T], y: &mut [T]) {
        self.matvec_into(x, y);
    }
    fn norm_bound(&self) -> T {
        (self.norm_one() * self.norm_inf()).sqrt()
    }
}

pub fn dot<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter().zip(y).map(|(&a, &b)| a * b).sum()
}

pub fn norm2<T: Real>(x: &[T]) -> T {
    dot(x, x).sqrt()
}

pub fn axpy<T: Real>(alpha: T, x: &[T], y: &mut [T]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scale<T: Real>(alpha: T, x: &mut [T]) {
    for xi in x.iter_mut() {
        *xi *= alpha;
    }
}

pub fn max_abs_diff<T: Real>(x: &[T], y: &[T]) -> T {
    x.iter()
        .zip(y)
        .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
}
