//! Exact-diagonalization laboratory for the renormalized dilute Bose gas on the
//! unit torus: truncated Fock spaces, second-quantized operators, zero-energy
//! scattering data, Bogoliubov-type conjugations and their diagnostics.
//!
//! All numerical code is generic over [`Real`] (`f32`/`f64`); the aliases below
//! fix the double-precision instantiation used by the command-line driver.

pub mod diagnostics;
pub mod error;
pub mod hilbert;
pub mod instance;
pub mod linalg;
pub mod operators;
pub mod pipeline;
pub mod renorm;
pub mod scalar;
pub mod scattering;
pub mod spectral;

pub use error::{Error, Result};
pub use scalar::Real;

pub type Csr64 = linalg::Csr<f64>;
pub type Dense64 = linalg::Dense<f64>;
pub type State64 = hilbert::StateVector<f64>;
