//! Small dense linear algebra, seeded Gaussian sampling and a Jacobi SVD.

mod matrix;
pub mod rng;
pub mod svd;

pub use matrix::{dot, frobenius_norm, norm2, trace, Matrix};
pub use rng::{gaussian_matrix, streams, Rng};
pub use svd::{svd, svd_default, SvdError, SvdResult};
