//! Finite-dimensional matrix layer: Hermitian eigendecomposition, functional
//! calculus, spectral projections, norms, compressions and band inertia.

mod banded;
mod dense;

pub use banded::{BandedSymmetric, Inertia, PIVOT_TOL};
pub use dense::{
    apply_function, compress, compress_hermitian, eig, matmul, operator_norm, spectral_projection,
    CMatrix, EigenSystem, GeneralMatrix, HermitianMatrix, Layout, C64, DENSE_LIMIT, GAP_TOL,
};
pub(crate) use dense::{ensure_dense, operator_norm_raw};
