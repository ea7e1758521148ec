//! Dense numerical kernels used by the solvers: symmetric eigendecomposition,
//! derivative-free minimization and damped fixed-point iteration.

mod eigen;
mod fixed_point;
mod matrix;
mod minimize;

pub use eigen::{eigh, eigvalsh, lowest_eigenvalue, EigenDecomposition};
pub use fixed_point::{fixed_point, FixedPointResult};
pub use matrix::{Matrix, SymmetricMatrix, MAX_DIM};
pub use minimize::{
    minimize_multi, minimize_scalar, MultiMinimum, NelderMeadOptions, ScalarMinimum,
};
