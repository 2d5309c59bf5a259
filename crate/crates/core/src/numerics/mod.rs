//! Quadrature grids and dense Hermitian linear algebra.

mod grid;
mod linalg;

pub use grid::{gauss_legendre, make_log_grid, Grid};
pub use linalg::{
    eig_hermitian, is_psd, min_eigenvalue, solve_lyapunov, solve_lyapunov_with, trace_product,
    CMatrix, EigenSystem, HermitianOperator,
};
