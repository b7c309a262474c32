//! Second-quantized operators on truncated Fock spaces.

mod build;
mod terms;

use std::sync::Arc;

pub use build::*;
pub use terms::{BoundTerms, Family, NumberWeight, TermOperator, Word};

use crate::error::{Error, Result};
use crate::hilbert::OccupationBasis;
use crate::linalg::Csr;
use crate::scalar::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Symmetry {
    Hermitian,
    AntiHermitian,
    General,
}

/// Assembled operator together with the basis it acts on.
#[derive(Clone, Debug)]
pub struct SecondQuantizedOperator<T> {
    basis: Arc<OccupationBasis>,
    matrix: Csr<T>,
    symmetry: Symmetry,
    number_conserving: bool,
}

/// Tolerance for (anti)hermiticity, relative to the largest entry once that exceeds one.
pub fn symmetry_tolerance<T: Real>(m: &Csr<T>) -> T {
    let eps = if std::mem::size_of::<T>() == 4 { 1e-5 } else { 1e-12 };
    T::c(eps) * T::one().max(m.max_abs())
}

impl<T: Real> SecondQuantizedOperator<T> {
    pub fn assemble(terms: &TermOperator<T>, basis: Arc<OccupationBasis>, symmetry: Symmetry) -> Result<Self> {
        let matrix = terms.assemble(&basis);
        Self::from_matrix(basis, matrix, symmetry)
    }

    pub fn from_matrix(basis: Arc<OccupationBasis>, matrix: Csr<T>, symmetry: Symmetry) -> Result<Self> {
        if matrix.nrows() != basis.dim() || matrix.ncols() != basis.dim() {
            return Err(Error::BasisMismatch(format!(
                "matrix is {}x{}, basis has dimension {}",
                matrix.nrows(),
                matrix.ncols(),
                basis.dim()
            )));
        }
        let tol = symmetry_tolerance(&matrix);
        match symmetry {
            Symmetry::Hermitian => {
                let r = matrix.symmetry_residual();
                if r > tol {
                    return Err(Error::NotHermitian(r.to64()));
                }
            }
            Symmetry::AntiHermitian => {
                let r = matrix.antisymmetry_residual();
                if r > tol {
                    return Err(Error::NotAntiHermitian(r.to64()));
                }
            }
            Symmetry::General => {}
        }
        let number_conserving = matrix
            .triplets()
            .all(|(i, j, _)| basis.total(i) == basis.total(j));
        Ok(Self {
            basis,
            matrix,
            symmetry,
            number_conserving,
        })
    }

    pub fn basis(&self) -> &Arc<OccupationBasis> {
        &self.basis
    }
    pub fn matrix(&self) -> &Csr<T> {
        &self.matrix
    }
    pub fn into_matrix(self) -> Csr<T> {
        self.matrix
    }
    pub fn symmetry(&self) -> Symmetry {
        self.symmetry
    }
    pub fn is_hermitian(&self) -> bool {
        self.symmetry == Symmetry::Hermitian
    }
    /// Real storage, so hermitian and real symmetric coincide.
    pub fn is_real_symmetric(&self) -> bool {
        self.is_hermitian()
    }
    pub fn is_number_conserving(&self) -> bool {
        self.number_conserving
    }
    pub fn dim(&self) -> usize {
        self.basis.dim()
    }

    /// `⟨x, A y⟩`.
    pub fn expectation(&self, x: &[T], y: &[T]) -> T {
        crate::linalg::dot(x, &self.matrix.matvec(y))
    }
}
