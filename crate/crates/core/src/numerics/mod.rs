//! Dense real linear algebra.

mod eig;
mod matrix;
mod table;

pub use eig::{
    condition_number, eigenvalues, ensure_positive_definite, max_real_part, psd_project, spectral_norm,
    sym_eig, sym_max_eig, SymEig,
};
pub use matrix::{axpy, dot, ensure_finite_vec, norm, sub_vec, DenseMatrix, DenseVector};
pub use table::{locate, MatrixTable};
