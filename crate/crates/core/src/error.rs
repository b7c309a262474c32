use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("basis dimension {dim} exceeds budget {budget}")]
    DimensionBudget { dim: u128, budget: usize },
    #[error("momentum {0:?} is not in the lattice")]
    MomentumNotInLattice([i32; 3]),
    #[error("zero momentum is not allowed here")]
    ZeroMomentum,
    #[error("basis mismatch: {0}")]
    BasisMismatch(String),
    #[error("operator is not hermitian (residual {0:e})")]
    NotHermitian(f64),
    #[error("operator is not anti-hermitian (residual {0:e})")]
    NotAntiHermitian(f64),
    #[error("solver did not converge: {0}")]
    NonConvergence(String),
    #[error("scattering length is negative ({0:e}); potential admits a bound state")]
    NegativeScatteringLength(f64),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("tolerance not met: {0}")]
    Tolerance(String),
}

pub type Result<T> = std::result::Result<T, Error>;
