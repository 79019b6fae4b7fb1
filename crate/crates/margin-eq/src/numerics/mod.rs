//! Shared numerical kernels: direct band solvers, a small dense root finder,
//! simplex interpolation, and least squares.

pub mod interp;
pub mod ols;
pub mod root;
pub mod sparse;
pub mod tridiag;

pub use interp::{interp_simplex, locate};
pub use ols::{ols, OlsFit};
pub use root::{find_root, RootOptions, RootProblem};
pub use sparse::{solve_sparse, SparseSystem};
pub use tridiag::{solve_tridiagonal, TriDiagonalSystem};
