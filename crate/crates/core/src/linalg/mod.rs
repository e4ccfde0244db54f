//! Numerical kernels: dense symmetric eigendecomposition with cone
//! projections, and a cached sparse Cholesky solver.

mod dense;
mod sparse;

pub(crate) use dense::split_from;
pub use dense::{eig_sym, psd_split, spectral_zero_tol, SpectralDecomp, SymMatrix};
pub use sparse::{factorize_spd, solve, SparseFactorization, SparseSym};
