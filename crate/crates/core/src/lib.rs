//! Coherent-tail-state truncation of the bosonic occupation-number basis,
//! and the Bose-Hubbard solvers built on it.

pub mod basis;
pub mod bdmft;
pub mod error;
pub mod gutzwiller;
pub mod impurity;
pub mod numerics;
pub mod selftest;
pub mod sweep;
mod scalar;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision scalar, the default for all solvers.
pub type F64 = f64;
/// Single-precision scalar; configs need looser tolerances than the defaults.
pub type F32 = f32;
